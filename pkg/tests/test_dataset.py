import json
import math

import numpy as np
import pytest

from densekit.dataset import (
    AnnotationError,
    Dataset,
    ImageRecord,
    count_stats,
    load_annotations,
    regular_histogram,
    scale_histogram,
    small_object_fraction,
)
from densekit.geometry import Box, ImageDims


def coco_doc(images, annotations):
    return {"images": images, "annotations": annotations}


def image_entry(image_id, w=1000, h=800):
    return {"id": image_id, "width": w, "height": h,
            "file_name": f"img_{image_id}.jpg"}


def ann(image_id, x, y, w, h):
    return {"image_id": image_id, "bbox": [x, y, w, h]}


def write_doc(tmp_path, doc, name="anno.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


def make_dataset(counts, dims=(1000, 800), box=(10, 10, 50, 50)):
    """In-memory dataset with the given per-image box counts."""
    records = []
    for i, n in enumerate(counts):
        boxes = tuple(Box(*box) for _ in range(n))
        records.append(ImageRecord(i + 1, ImageDims(*dims), boxes))
    return Dataset("synthetic", tuple(records))


class TestLoadAnnotations:
    def test_basic_load(self, tmp_path):
        doc = coco_doc(
            [image_entry(1), image_entry(2)],
            [ann(1, 0, 0, 10, 10), ann(1, 5, 5, 10, 10), ann(1, 50, 50, 5, 5),
             ann(2, 0, 0, 20, 20), ann(2, 1, 1, 2, 2), ann(2, 3, 3, 4, 4)],
        )
        dataset, report = load_annotations(write_doc(tmp_path, doc))
        assert len(dataset) == 2
        assert dataset.total_annotations == 6
        assert report.kept == 6 and report.dropped == 0
        assert dataset.records[0].boxes[0] == Box(0, 0, 10, 10)

    def test_empty_document(self, tmp_path):
        dataset, report = load_annotations(write_doc(tmp_path, coco_doc([], [])))
        assert len(dataset) == 0
        assert dataset.total_annotations == 0

    def test_invalid_annotations_dropped_and_counted(self, tmp_path):
        doc = coco_doc(
            [image_entry(1, 100, 100)],
            [ann(1, 0, 0, 10, 10),       # valid
             ann(1, 0, 0, -5, 10),       # non-positive width
             ann(1, 0, 0, 10, 0),        # zero height
             ann(99, 0, 0, 10, 10),      # missing image
             ann(1, 200, 200, 10, 10)],  # fully outside, zero area after clamp
        )
        dataset, report = load_annotations(write_doc(tmp_path, doc))
        assert dataset.total_annotations == 1
        assert report.kept == 1
        assert report.dropped_nonpositive == 2
        assert report.dropped_missing_image == 1
        assert report.dropped_after_clamp == 1
        assert report.dropped == 4

    def test_boxes_clamped_to_bounds(self, tmp_path):
        doc = coco_doc([image_entry(1, 100, 100)], [ann(1, -10, 90, 30, 30)])
        dataset, _ = load_annotations(write_doc(tmp_path, doc))
        assert dataset.records[0].boxes[0] == Box(0, 90, 20, 100)

    def test_duplicate_image_id_is_hard_error(self, tmp_path):
        doc = coco_doc([image_entry(7), image_entry(7)], [])
        with pytest.raises(AnnotationError, match="7"):
            load_annotations(write_doc(tmp_path, doc))

    def test_malformed_document(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(AnnotationError):
            load_annotations(path)
        with pytest.raises(AnnotationError):
            load_annotations(write_doc(tmp_path, {"images": []}))

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            load_annotations(tmp_path / "nope.json")

    def test_deterministic(self, tmp_path):
        doc = coco_doc([image_entry(1)], [ann(1, 1, 2, 3, 4)])
        path = write_doc(tmp_path, doc)
        assert load_annotations(path) == load_annotations(path)


class TestCountStats:
    def test_constant_counts(self):
        stats = count_stats(make_dataset([2, 2, 2]))
        assert (stats.mean, stats.max, stats.min) == (2.0, 2, 2)
        assert stats.p995 == 2 and stats.p005 == 2

    def test_empty_dataset_errors(self):
        with pytest.raises(ValueError):
            count_stats(Dataset("empty", ()))

    def test_nearest_rank_on_1_to_100(self):
        stats = count_stats(make_dataset(list(range(1, 101))))
        # ceil(0.995 * 100) = 100th order statistic; ceil(0.005 * 100) = 1st
        assert stats.p995 == 100
        assert stats.p005 == 1
        assert stats.mean == pytest.approx(50.5)
        assert stats.mean_rounded == 50  # bankers' rounding on .5

    def test_nearest_rank_matches_brute_force(self):
        rng = np.random.default_rng(21)
        for _ in range(50):
            counts = rng.integers(1, 600, size=int(rng.integers(3, 400))).tolist()
            stats = count_stats(make_dataset(counts))
            ordered = sorted(counts)
            n = len(ordered)
            assert stats.p995 == ordered[max(1, math.ceil(0.995 * n)) - 1]
            assert stats.p005 == ordered[max(1, math.ceil(0.005 * n)) - 1]
            assert stats.min == ordered[0] and stats.max == ordered[-1]
            assert stats.min <= stats.p005 <= stats.p995 <= stats.max

    def test_invariant_order(self):
        stats = count_stats(make_dataset([5, 50, 500, 40, 60, 70]))
        assert stats.min <= stats.p005 <= stats.mean <= stats.p995 <= stats.max


class TestScaleHistogram:
    def test_rescaled_scale_value(self):
        # factor min(800/1600, 1333/2666) = 0.5, scale 80 * 0.5 = 40
        d = Dataset("s", (ImageRecord(1, ImageDims(2666, 1600),
                                      (Box(0, 0, 80, 80),)),))
        hist = scale_histogram(d, 1333, 800, bin_width=8)
        assert hist.total == 1
        # scale 40 falls in bin [40, 48)
        idx = hist.counts.index(1)
        assert hist.bin_edges[idx] == 40.0

    def test_zero_area_box_in_first_bin(self):
        d = Dataset("s", (ImageRecord(1, ImageDims(100, 100),
                                      (Box(5, 5, 5, 5),)),))
        hist = scale_histogram(d, 1333, 800, bin_width=8)
        assert hist.counts[0] == 1

    def test_counts_sum_and_cumulative(self):
        rng = np.random.default_rng(22)
        records = []
        for i in range(20):
            boxes = tuple(
                Box(0, 0, float(rng.uniform(1, 900)), float(rng.uniform(1, 700)))
                for _ in range(int(rng.integers(1, 40))))
            records.append(ImageRecord(i, ImageDims(1000, 800), boxes))
        d = Dataset("s", tuple(records))
        hist = scale_histogram(d, 1333, 800)
        assert hist.total == d.total_annotations
        cum = hist.cumulative_ratio
        assert all(b >= a for a, b in zip(cum, cum[1:]))
        assert cum[-1] == pytest.approx(1.0)

    def test_empty_dataset_errors(self):
        with pytest.raises(ValueError):
            scale_histogram(Dataset("empty", ()), 1333, 800)

    def test_bad_bin_width(self):
        with pytest.raises(ValueError):
            regular_histogram([1.0], 0)


class TestSmallObjectFraction:
    def test_partial(self):
        # at 1000x800 the rescale factor to (1333, 800) is 1.0
        boxes = tuple(Box(0, 0, 10, 10) for _ in range(4)) + \
                tuple(Box(0, 0, 100, 100) for _ in range(6))
        d = Dataset("s", (ImageRecord(1, ImageDims(1000, 800), boxes),))
        assert small_object_fraction(d, 1333, 800, 32) == pytest.approx(0.4)

    def test_none_small(self):
        d = make_dataset([5], box=(0, 0, 200, 200))
        assert small_object_fraction(d, 1333, 800, 32) == 0.0

    def test_all_small_degenerate(self):
        d = make_dataset([3], box=(0, 0, 4, 4))
        assert small_object_fraction(d, 1333, 800, 32) == 1.0

    def test_bad_threshold(self):
        with pytest.raises(ValueError):
            small_object_fraction(make_dataset([1]), 1333, 800, 0)
