from __future__ import annotations

import numpy as np
from scipy import ndimage

from ..core import BBox
from ..errors import InvalidArgument, TrackingLost


def to_gray(patch: np.ndarray) -> np.ndarray:
    p = np.asarray(patch, dtype=float)
    if p.ndim == 3:
        if p.shape[2] == 1:
            return p[:, :, 0]
        return p[:, :, :3] @ np.array([0.299, 0.587, 0.114])
    return p


def extract_patch(frame: np.ndarray, b: BBox, padding: float, out_rows: int, out_cols: int) -> np.ndarray:
    """Crop the padded search window around ``b`` and resample it.

    The window keeps the center of ``b`` and scales both sides by
    ``padding``. Pixels outside the frame replicate the nearest border pixel.
    Returns a ``uint8`` array of ``out_rows x out_cols`` (x 3 for color).
    """
    if not padding >= 1:
        raise InvalidArgument(f"padding must be >= 1, got {padding}")
    if out_rows < 1 or out_cols < 1:
        raise InvalidArgument("output size must be positive")
    frame = np.asarray(frame)
    fh, fw = frame.shape[:2]
    cx, cy = b.center
    pw, ph = b.w * padding, b.h * padding
    x0, y0 = cx - pw / 2.0, cy - ph / 2.0
    if x0 + pw <= 0 or y0 + ph <= 0 or x0 >= fw or y0 >= fh:
        raise TrackingLost(f"search window {x0:.1f},{y0:.1f},{pw:.1f},{ph:.1f} lies outside the {fw}x{fh} frame")
    ys = y0 + (np.arange(out_rows) + 0.5) * (ph / out_rows) - 0.5
    xs = x0 + (np.arange(out_cols) + 0.5) * (pw / out_cols) - 0.5
    yy, xx = np.meshgrid(ys, xs, indexing="ij")
    coords = [yy, xx]
    if frame.ndim == 2:
        out = ndimage.map_coordinates(frame.astype(float), coords, order=1, mode="nearest")
    else:
        out = np.stack(
            [ndimage.map_coordinates(frame[:, :, c].astype(float), coords, order=1, mode="nearest")
             for c in range(frame.shape[2])],
            axis=2,
        )
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)
