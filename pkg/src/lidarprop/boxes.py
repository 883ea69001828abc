"""Axis-aligned image rectangles.

Boxes use the inclusive-exclusive convention: ``area = (right - left) *
(bottom - top)``.  Vectorized helpers take ``(N, 4)`` arrays laid out as
``left, top, right, bottom``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class BBox2D:
    left: float
    top: float
    right: float
    bottom: float

    @property
    def width(self) -> float:
        return self.right - self.left

    @property
    def height(self) -> float:
        return self.bottom - self.top

    @property
    def area(self) -> float:
        return max(self.width, 0.0) * max(self.height, 0.0)

    @property
    def is_valid(self) -> bool:
        return self.left < self.right and self.top < self.bottom

    def as_tuple(self):
        return (self.left, self.top, self.right, self.bottom)

    def intersects_image(self, image_size) -> bool:
        w, h = image_size
        return self.left < w and self.right > 0 and self.top < h and self.bottom > 0

    def clip(self, image_size) -> "BBox2D":
        w, h = image_size
        return BBox2D(
            min(max(self.left, 0.0), w),
            min(max(self.top, 0.0), h),
            min(max(self.right, 0.0), w),
            min(max(self.bottom, 0.0), h),
        )


def boxes_to_array(boxes) -> np.ndarray:
    arr = np.array([b.as_tuple() for b in boxes], dtype=np.float64)
    return arr.reshape(-1, 4)


def iou_matrix(a, b) -> np.ndarray:
    """Pairwise IoU between the rows of ``a`` (N, 4) and ``b`` (M, 4)."""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 4)
    iw = np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0])
    ih = np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
    inter = np.clip(iw, 0, None) * np.clip(ih, 0, None)
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    union = area_a[:, None] + area_b[None, :] - inter
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(union > 0, inter / union, 0.0)
    return out
