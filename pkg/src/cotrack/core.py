"""Geometry, regression labels and windowing shared by the other modules.

Coordinates are continuous pixels with (0, 0) at the top-left corner of the
frame. Cell grids are indexed ``[row, col]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box ``(x, y, w, h)`` with ``(x, y)`` the top-left corner."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        for name in ("x", "y", "w", "h"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidArgument(f"BBox.{name} must be finite")
        if self.w <= 0 or self.h <= 0:
            raise InvalidArgument(f"BBox needs positive size, got {self.w}x{self.h}")

    @classmethod
    def from_center(cls, cx, cy, w, h) -> BBox:
        return cls(cx - w / 2.0, cy - h / 2.0, w, h)

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    @property
    def area(self) -> float:
        return self.w * self.h

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x, self.y, self.w, self.h)


@dataclass(frozen=True)
class LabelMap:
    values: np.ndarray
    peak_row: int
    peak_col: int
    sigma: float

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True)
class WindowWeights:
    values: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def _wrap_distance(n: int, center: int) -> np.ndarray:
    idx = np.arange(n)
    d = np.abs(idx - center)
    return np.minimum(d, n - d)


def gaussian_label(rows: int, cols: int, sigma: float) -> LabelMap:
    """Gaussian regression target peaked at the grid center cell.

    Distances to the peak are measured with wrap-around, so the map is the
    periodic label a circulant model expects.
    """
    if rows < 1 or cols < 1:
        raise InvalidArgument(f"label grid must be at least 1x1, got {rows}x{cols}")
    if not sigma > 0:
        raise InvalidArgument(f"sigma must be positive, got {sigma}")
    pr, pc = rows // 2, cols // 2
    dr = _wrap_distance(rows, pr).astype(float)
    dc = _wrap_distance(cols, pc).astype(float)
    d2 = dr[:, None] ** 2 + dc[None, :] ** 2
    values = np.exp(-d2 / (2.0 * sigma * sigma))
    return LabelMap(values=values, peak_row=pr, peak_col=pc, sigma=float(sigma))


def hann_window(rows: int, cols: int) -> WindowWeights:
    if rows < 1 or cols < 1:
        raise InvalidArgument(f"window must be at least 1x1, got {rows}x{cols}")
    return WindowWeights(np.outer(np.hanning(rows), np.hanning(cols)))


def scale_bbox_about_center(b: BBox, s: float) -> BBox:
    if not s > 0:
        raise InvalidArgument(f"scale must be positive, got {s}")
    cx, cy = b.center
    return BBox.from_center(cx, cy, b.w * s, b.h * s)


def _clip_axis(lo: float, length: float, limit: float) -> tuple[float, float]:
    a = max(lo, 0.0)
    b = min(lo + length, limit)
    if b > a:
        return a, b - a
    # empty after clipping: pin a 1-pixel extent to the nearest border
    return max(0.0, min(max(lo, 0.0), limit - 1.0)), 1.0


def clip_bbox(b: BBox, frame_w: float, frame_h: float) -> BBox:
    """Intersect ``b`` with the frame ``[0, frame_w] x [0, frame_h]``.

    Boxes that lose all area are pinned as a 1x1 box against the closest
    border so downstream code always receives a valid box.
    """
    if b.x >= 0 and b.y >= 0 and b.x + b.w <= frame_w and b.y + b.h <= frame_h:
        return b
    x, w = _clip_axis(b.x, b.w, frame_w)
    y, h = _clip_axis(b.y, b.h, frame_h)
    return BBox(x, y, w, h)
