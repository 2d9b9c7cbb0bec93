"""Uniform local binary patterns (8 neighbors, radius 1), 10 bins per cell.

Bins 0..8 hold uniform codes by their number of set bits; bin 9 collects all
non-uniform codes. A neighbor sets its bit when it is strictly brighter than
the center, so flat regions produce code 0.
"""
from __future__ import annotations

import numpy as np

from ..errors import InvalidArgument
from .grid import FeatureGrid
from .patch import to_gray

N_BINS = 10
# circular neighbor order starting top-left, clockwise
OFFSETS = ((-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1))


def _uniform_mapping() -> np.ndarray:
    table = np.empty(256, dtype=np.int64)
    for code in range(256):
        bits = [(code >> i) & 1 for i in range(8)]
        transitions = sum(bits[i] != bits[(i + 1) % 8] for i in range(8))
        table[code] = sum(bits) if transitions <= 2 else N_BINS - 1
    return table


UNIFORM_BIN = _uniform_mapping()


def lbp_codes(gray: np.ndarray) -> np.ndarray:
    """Raw 8-bit codes per pixel, with replicated borders."""
    g = np.asarray(gray, dtype=float)
    p = np.pad(g, 1, mode="edge")
    rows, cols = g.shape
    codes = np.zeros((rows, cols), dtype=np.int64)
    for bit, (dr, dc) in enumerate(OFFSETS):
        nb = p[1 + dr : 1 + dr + rows, 1 + dc : 1 + dc + cols]
        codes |= (nb > g).astype(np.int64) << bit
    return codes


def extract_lbp(patch: np.ndarray, cell_size: int) -> FeatureGrid:
    patch = np.asarray(patch)
    if patch.shape[0] < 3 or patch.shape[1] < 3:
        raise InvalidArgument(f"LBP needs at least a 3x3 patch, got {patch.shape[:2]}")
    if cell_size < 1 or patch.shape[0] < cell_size or patch.shape[1] < cell_size:
        raise InvalidArgument(f"patch {patch.shape[:2]} is smaller than one {cell_size}px cell")
    bins = UNIFORM_BIN[lbp_codes(to_gray(patch))]
    nr, nc = patch.shape[0] // cell_size, patch.shape[1] // cell_size
    bins = bins[: nr * cell_size, : nc * cell_size]
    onehot = np.eye(N_BINS)[bins]
    hist = onehot.reshape(nr, cell_size, nc, cell_size, N_BINS).sum(axis=(1, 3))
    return FeatureGrid(hist / (cell_size * cell_size), "lbp", cell_size)
