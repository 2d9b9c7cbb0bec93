"""Color Names: 11 color-name probabilities per pixel, pooled per cell.

The lookup table is indexed by 5-bit quantized RGB,
``index = (R >> 3) + 32 * (G >> 3) + 1024 * (B >> 3)``. A table file is a raw
little-endian float32 array of 32768 x 11 values in row-major order. When no
file is configured (``COTRACK_CN_TABLE`` unset) a built-in table derived from
prototype colors is used.
"""
from __future__ import annotations

import functools
import os
from dataclasses import dataclass

import numpy as np

from ..errors import DataError, InvalidArgument
from .grid import FeatureGrid

N_ENTRIES = 32768
N_NAMES = 11
NAMES = ("black", "blue", "brown", "grey", "green", "orange", "pink", "purple", "red", "white", "yellow")
PROTOTYPES = np.array(
    [
        (0, 0, 0),
        (0, 0, 255),
        (136, 84, 36),
        (128, 128, 128),
        (0, 160, 0),
        (255, 150, 0),
        (255, 170, 200),
        (128, 0, 160),
        (220, 0, 0),
        (255, 255, 255),
        (255, 240, 0),
    ],
    dtype=float,
)
ENV_VAR = "COTRACK_CN_TABLE"


@dataclass(frozen=True)
class CNLookupTable:
    table: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.table, dtype=float)
        if t.shape != (N_ENTRIES, N_NAMES):
            raise DataError(f"color-name table must be {N_ENTRIES}x{N_NAMES}, got {t.shape}")
        if not np.all(np.isfinite(t)) or np.any(t < 0):
            raise DataError("color-name table has negative or non-finite entries")
        if np.max(np.abs(t.sum(axis=1) - 1.0)) > 1e-3:
            raise DataError("color-name table rows must sum to 1")
        object.__setattr__(self, "table", t)

    def lookup(self, rgb: np.ndarray) -> np.ndarray:
        rgb = np.asarray(rgb).astype(np.int64) >> 3
        idx = rgb[..., 0] + 32 * rgb[..., 1] + 1024 * rgb[..., 2]
        return self.table[idx]


def quantized_rgb() -> np.ndarray:
    """Center of every 5-bit RGB bin, in table order."""
    i = np.arange(N_ENTRIES)
    return np.stack([i % 32, (i // 32) % 32, i // 1024], axis=1) * 8.0 + 4.0


def prototype_table(temperature: float = 30.0) -> np.ndarray:
    """Soft nearest-prototype assignment; the argmax of each row is the nearest prototype."""
    rgb = quantized_rgb()
    d2 = ((rgb[:, None, :] - PROTOTYPES[None, :, :]) ** 2).sum(axis=2)
    logits = -(d2 - d2.min(axis=1, keepdims=True)) / (2.0 * temperature**2)
    p = np.exp(logits)
    return p / p.sum(axis=1, keepdims=True)


@functools.lru_cache(maxsize=1)
def builtin_table() -> CNLookupTable:
    return CNLookupTable(prototype_table())


def load_cn_table(path) -> CNLookupTable:
    raw = np.fromfile(path, dtype="<f4")
    if raw.size != N_ENTRIES * N_NAMES:
        raise DataError(f"{path}: expected {N_ENTRIES * N_NAMES} float32 values, found {raw.size}")
    return CNLookupTable(raw.reshape(N_ENTRIES, N_NAMES).astype(float))


def save_cn_table(table: CNLookupTable, path) -> None:
    np.asarray(table.table, dtype="<f4").tofile(path)


def default_table() -> CNLookupTable:
    path = os.environ.get(ENV_VAR)
    if path:
        return load_cn_table(path)
    return builtin_table()


def _cell_mean(values: np.ndarray, cell: int) -> np.ndarray:
    nr, nc = values.shape[0] // cell, values.shape[1] // cell
    v = values[: nr * cell, : nc * cell]
    return v.reshape(nr, cell, nc, cell, -1).mean(axis=(1, 3))


def is_color(patch: np.ndarray) -> bool:
    return patch.ndim == 3 and patch.shape[2] == 3


def extract_cn(patch: np.ndarray, cell_size: int, table: CNLookupTable | None = None) -> FeatureGrid:
    """Cell-averaged color-name probabilities.

    A grayscale patch yields a one-channel grid of mean intensity (scaled to
    [0, 1]) with ``fallback=True``.
    """
    patch = np.asarray(patch)
    if cell_size < 1 or patch.shape[0] < cell_size or patch.shape[1] < cell_size:
        raise InvalidArgument(f"patch {patch.shape[:2]} is smaller than one {cell_size}px cell")
    if not is_color(patch):
        gray = patch.reshape(patch.shape[0], patch.shape[1], -1)[:, :, :1].astype(float) / 255.0
        return FeatureGrid(_cell_mean(gray, cell_size), "gray", cell_size, fallback=True)
    table = table or default_table()
    return FeatureGrid(_cell_mean(table.lookup(patch), cell_size), "cn", cell_size)
