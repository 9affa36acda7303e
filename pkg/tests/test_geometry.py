import math

import numpy as np
import pytest

from densekit.geometry import (
    Box,
    ImageDims,
    box_scale,
    boxes_to_array,
    intersect,
    iou,
    pairwise_iou,
    rescale_factor,
)


def random_box(rng, span=100.0):
    x1, x2 = sorted(rng.uniform(0, span, 2))
    y1, y2 = sorted(rng.uniform(0, span, 2))
    return Box(x1, y1, x2, y2)


class TestBox:
    def test_rejects_swapped_corners(self):
        with pytest.raises(ValueError):
            Box(5, 0, 1, 10)
        with pytest.raises(ValueError):
            Box(0, 5, 10, 1)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            Box(0, 0, math.inf, 1)
        with pytest.raises(ValueError):
            Box(math.nan, 0, 1, 1)

    def test_zero_area_allowed(self):
        b = Box(3, 3, 3, 3)
        assert b.area == 0

    def test_xywh_round_trip(self):
        b = Box.from_xywh(2, 3, 10, 20)
        assert b == Box(2, 3, 12, 23)
        assert b.to_xywh() == (2, 3, 10, 20)


class TestImageDims:
    def test_rejects_non_positive(self):
        with pytest.raises(ValueError):
            ImageDims(0, 10)
        with pytest.raises(ValueError):
            ImageDims(10, -1)


class TestIou:
    def test_identity(self):
        assert iou(Box(0, 0, 10, 10), Box(0, 0, 10, 10)) == 1.0

    def test_disjoint(self):
        assert iou(Box(0, 0, 1, 1), Box(5, 5, 6, 6)) == 0.0

    def test_partial_overlap(self):
        # intersection 1, union 4 + 4 - 1 = 7
        assert iou(Box(0, 0, 2, 2), Box(1, 1, 3, 3)) == pytest.approx(1 / 7, abs=1e-12)

    def test_two_zero_area_boxes(self):
        assert iou(Box(1, 1, 1, 1), Box(1, 1, 1, 1)) == 0.0

    def test_symmetry_and_bounds(self):
        rng = np.random.default_rng(11)
        for _ in range(300):
            a, b = random_box(rng), random_box(rng)
            v = iou(a, b)
            assert v == iou(b, a)
            assert 0.0 <= v <= 1.0

    def test_self_iou_is_one_for_positive_area(self):
        rng = np.random.default_rng(12)
        for _ in range(100):
            a = random_box(rng)
            if a.area > 0:
                assert iou(a, a) == 1.0


class TestIntersect:
    def test_containment(self):
        assert intersect(Box(0, 0, 10, 10), Box(2, 2, 5, 5)) == Box(2, 2, 5, 5)

    def test_disjoint_is_none(self):
        assert intersect(Box(0, 0, 1, 1), Box(2, 2, 3, 3)) is None

    def test_partial(self):
        assert intersect(Box(0, 0, 2, 2), Box(1, 1, 3, 3)) == Box(1, 1, 2, 2)

    def test_touching_edge_is_zero_area(self):
        r = intersect(Box(0, 0, 1, 1), Box(1, 0, 2, 1))
        assert r is not None and r.area == 0

    def test_result_contained_in_both(self):
        rng = np.random.default_rng(13)
        for _ in range(300):
            a, b = random_box(rng), random_box(rng)
            r = intersect(a, b)
            if r is None:
                continue
            for other in (a, b):
                assert r.x1 >= other.x1 and r.y1 >= other.y1
                assert r.x2 <= other.x2 and r.y2 <= other.y2


class TestBoxScale:
    def test_examples(self):
        assert box_scale(Box(0, 0, 4, 9)) == 6.0
        assert box_scale(Box(0, 0, 32, 32)) == 32.0
        assert box_scale(Box(0, 0, 10, 20)) == pytest.approx(math.sqrt(200), rel=1e-12)

    def test_zero_area(self):
        assert box_scale(Box(5, 5, 5, 5)) == 0.0

    def test_square_matches_area(self):
        rng = np.random.default_rng(14)
        for _ in range(200):
            b = random_box(rng)
            assert box_scale(b) ** 2 == pytest.approx(b.area, rel=1e-9, abs=1e-12)


class TestRescaleFactor:
    def test_downscale(self):
        assert rescale_factor(ImageDims(3000, 2000), 1333, 800) == pytest.approx(0.4)

    def test_already_at_target(self):
        assert rescale_factor(ImageDims(1333, 800), 1333, 800) == 1.0

    def test_portrait_symmetric(self):
        assert rescale_factor(ImageDims(800, 1333), 1333, 800) == 1.0

    def test_swap_invariance(self):
        rng = np.random.default_rng(15)
        for _ in range(200):
            w, h = rng.uniform(100, 5000, 2)
            a = rescale_factor(ImageDims(w, h), 1333, 800)
            b = rescale_factor(ImageDims(h, w), 1333, 800)
            assert a == b

    def test_rejects_bad_target(self):
        with pytest.raises(ValueError):
            rescale_factor(ImageDims(10, 10), 0, 800)


class TestArrays:
    def test_boxes_to_array_empty(self):
        assert boxes_to_array([]).shape == (0, 4)

    def test_pairwise_matches_scalar(self):
        rng = np.random.default_rng(16)
        boxes_a = [random_box(rng) for _ in range(12)]
        boxes_b = [random_box(rng) for _ in range(9)]
        mat = pairwise_iou(boxes_to_array(boxes_a), boxes_to_array(boxes_b))
        for i, a in enumerate(boxes_a):
            for j, b in enumerate(boxes_b):
                assert mat[i, j] == pytest.approx(iou(a, b), abs=1e-12)
