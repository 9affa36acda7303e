"""Readers and writers for the tool's file formats.

Detections travel as COCO-style result lists (image_id, bbox as
[x, y, w, h], score); histograms as CSV of (bin_edge, count,
cumulative_ratio). Every writer's output is parseable by the matching
reader here.
"""

from __future__ import annotations

import csv
import json
import os
from typing import Mapping, Sequence

from .dataset import AnnotationError, Dataset, Histogram
from .geometry import Box
from .nms import Detection

__all__ = [
    "load_detections",
    "write_detections",
    "write_histogram_csv",
    "read_histogram_csv",
    "dataset_to_coco",
    "write_json",
]


def load_detections(path: str | os.PathLike) -> dict[int, list[Detection]]:
    """Read a COCO-style results list, grouped by image id.

    Groups keep the order of first appearance; detections keep file order
    within each image.
    """
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise AnnotationError(f"{path}: not valid JSON: {e}") from e
    if not isinstance(doc, list):
        raise AnnotationError(f"{path}: expected a JSON array of results")
    out: dict[int, list[Detection]] = {}
    for entry in doc:
        try:
            image_id = entry["image_id"]
            x, y, w, h = (float(v) for v in entry["bbox"])
            score = float(entry["score"])
        except (KeyError, TypeError, ValueError) as e:
            raise AnnotationError(f"{path}: bad result entry {entry!r}: {e}") from e
        out.setdefault(image_id, []).append(
            Detection(Box.from_xywh(x, y, w, h), score))
    return out


def write_detections(path: str | os.PathLike,
                     dets_by_image: Mapping[int, Sequence[Detection]],
                     category_id: int = 1) -> None:
    rows = []
    for image_id, dets in dets_by_image.items():
        for d in dets:
            rows.append({
                "image_id": image_id,
                "category_id": category_id,
                "bbox": [round(v, 6) for v in d.box.to_xywh()],
                "score": round(d.score, 6),
            })
    write_json(path, rows)


def write_histogram_csv(path: str | os.PathLike, hist: Histogram) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_edge", "count", "cumulative_ratio"])
        for edge, count, cum in hist.csv_rows():
            writer.writerow([repr(edge), count, repr(cum)])
        # closing edge row so the full bin layout round-trips
        writer.writerow([repr(hist.bin_edges[-1]), "", ""])


def read_histogram_csv(path: str | os.PathLike) -> Histogram:
    edges: list[float] = []
    counts: list[int] = []
    cums: list[float] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["bin_edge", "count", "cumulative_ratio"]:
            raise ValueError(f"{path}: not a histogram CSV")
        for row in reader:
            edges.append(float(row[0]))
            if row[1] != "":
                counts.append(int(row[1]))
                cums.append(float(row[2]))
    return Histogram(tuple(edges), tuple(counts), tuple(cums))


def dataset_to_coco(d: Dataset, category_id: int = 1) -> dict:
    """Render a dataset back into a COCO-style annotation document."""
    images = [
        {"id": r.image_id, "width": r.dims.width, "height": r.dims.height,
         "file_name": r.file_name}
        for r in d.records
    ]
    annotations = []
    ann_id = 1
    for r in d.records:
        for b in r.boxes:
            annotations.append({
                "id": ann_id,
                "image_id": r.image_id,
                "category_id": category_id,
                "bbox": list(b.to_xywh()),
                "area": b.area,
                "iscrowd": 0,
            })
            ann_id += 1
    return {
        "images": images,
        "annotations": annotations,
        "categories": [{"id": category_id, "name": "object"}],
    }


def write_json(path: str | os.PathLike, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
