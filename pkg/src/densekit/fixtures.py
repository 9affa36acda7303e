"""Deterministic synthetic annotation documents for tests and demos.

The generator stands in for the real retail-shelf dataset when its
annotation files are not on disk: many boxes per image, high-resolution
images, a heavy small-object tail after rescaling.
"""

from __future__ import annotations

import os

import numpy as np

from .io import write_json

__all__ = ["synthetic_coco", "write_synthetic_coco"]


def synthetic_coco(n_images: int = 200, seed: int = 7,
                   min_count: int = 20, max_count: int = 320) -> dict:
    """Build a COCO-style document with dense, fully valid annotations.

    Deterministic for a given (n_images, seed, min_count, max_count).
    Every box lies inside its image and has positive area, so ingestion
    keeps all of them and per-image counts are exactly as generated.
    """
    rng = np.random.default_rng(seed)
    images = []
    annotations = []
    ann_id = 1
    for i in range(n_images):
        width = int(rng.integers(1200, 4200))
        height = int(rng.integers(900, 3400))
        image_id = i + 1
        images.append({
            "id": image_id,
            "width": width,
            "height": height,
            "file_name": f"synthetic_{image_id:05d}.jpg",
        })
        count = int(rng.integers(min_count, max_count + 1))
        for _ in range(count):
            # lognormal side lengths give a long small-object tail
            w = float(np.clip(rng.lognormal(np.log(90.0), 0.6), 4.0, width))
            h = float(np.clip(rng.lognormal(np.log(110.0), 0.6), 4.0, height))
            x = float(rng.uniform(0.0, width - w))
            y = float(rng.uniform(0.0, height - h))
            annotations.append({
                "id": ann_id,
                "image_id": image_id,
                "category_id": 1,
                "bbox": [round(x, 2), round(y, 2), round(w, 2), round(h, 2)],
                "area": round(w * h, 4),
                "iscrowd": 0,
            })
            ann_id += 1
    return {
        "images": images,
        "annotations": annotations,
        "categories": [{"id": 1, "name": "object"}],
    }


def write_synthetic_coco(path: str | os.PathLike, **kwargs) -> dict:
    doc = synthetic_coco(**kwargs)
    write_json(path, doc)
    return doc
