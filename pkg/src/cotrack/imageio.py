"""Frame loading and annotated-frame export (8-bit PNG/JPEG only)."""
from __future__ import annotations

import os

import numpy as np
from PIL import Image, ImageDraw

from .core import BBox


def load_frame(path) -> np.ndarray:
    """Read an image as ``uint8``: ``H x W`` for grayscale, ``H x W x 3`` otherwise."""
    with Image.open(path) as im:
        if im.mode in ("L", "I;16", "I", "1"):
            return np.asarray(im.convert("L"))
        return np.asarray(im.convert("RGB"))


def save_frame(frame: np.ndarray, path) -> None:
    Image.fromarray(np.asarray(frame, dtype=np.uint8)).save(path, format="PNG")


def draw_box(frame: np.ndarray, box: BBox, color=(255, 0, 0), width: int = 2) -> np.ndarray:
    im = Image.fromarray(np.asarray(frame, dtype=np.uint8)).convert("RGB")
    draw = ImageDraw.Draw(im)
    x0, y0 = box.x, box.y
    draw.rectangle([x0, y0, x0 + box.w - 1, y0 + box.h - 1], outline=color, width=width)
    return np.asarray(im)


def export_annotated(frame: np.ndarray, box: BBox, out_dir, index: int) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"{index + 1:04d}.png")
    save_frame(draw_box(frame, box), path)
    return path
