"""Felzenszwalb-style HOG with 31 channels per cell.

Channel layout: 18 contrast-sensitive orientations, 9 contrast-insensitive
orientations, 4 gradient-energy (texture) channels, one per normalizing block.
"""
from __future__ import annotations

import numpy as np

from ..errors import InvalidArgument
from .grid import FeatureGrid

N_ORIENT = 9
TRUNC = 0.2
EPS = 1e-4

_UU = np.cos(np.arange(N_ORIENT) * np.pi / N_ORIENT)
_VV = np.sin(np.arange(N_ORIENT) * np.pi / N_ORIENT)


def pixel_gradients(img: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Central-difference gradients; for color input the channel with the
    strongest gradient wins at each pixel."""
    if img.ndim == 2:
        img = img[:, :, None]
    p = np.pad(img.astype(float), ((1, 1), (1, 1), (0, 0)), mode="edge")
    dx = p[1:-1, 2:] - p[1:-1, :-2]
    dy = p[2:, 1:-1] - p[:-2, 1:-1]
    if dx.shape[2] == 1:
        return dx[:, :, 0], dy[:, :, 0]
    best = np.argmax(dx * dx + dy * dy, axis=2)[:, :, None]
    return np.take_along_axis(dx, best, 2)[:, :, 0], np.take_along_axis(dy, best, 2)[:, :, 0]


def orientation_bins(dx: np.ndarray, dy: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Snap each gradient to one of 18 signed directions; returns (bin, magnitude)."""
    dots = dx[..., None] * _UU + dy[..., None] * _VV
    k = np.argmax(np.abs(dots), axis=-1)
    signed = np.take_along_axis(dots, k[..., None], -1)[..., 0]
    bins = np.where(signed >= 0, k, k + N_ORIENT)
    return bins, np.hypot(dx, dy)


def _interp_matrix(n_pixels: int, n_cells: int, cell: int) -> np.ndarray:
    # weight of pixel p in cell i: bilinear in the distance to the cell center
    pos = (np.arange(n_pixels) + 0.5) / cell - 0.5
    lo = np.floor(pos).astype(int)
    frac = pos - lo
    m = np.zeros((n_cells, n_pixels))
    cols = np.arange(n_pixels)
    ok = (lo >= 0) & (lo < n_cells)
    m[lo[ok], cols[ok]] += 1.0 - frac[ok]
    ok = (lo + 1 >= 0) & (lo + 1 < n_cells)
    m[lo[ok] + 1, cols[ok]] += frac[ok]
    return m


def cell_histograms(patch: np.ndarray, cell_size: int) -> np.ndarray:
    """Magnitude-weighted 18-bin orientation histograms, bilinearly pooled into cells."""
    rows, cols = patch.shape[:2]
    nr, nc = rows // cell_size, cols // cell_size
    dx, dy = pixel_gradients(np.asarray(patch))
    bins, mag = orientation_bins(dx, dy)
    votes = np.zeros((rows, cols, 2 * N_ORIENT))
    np.put_along_axis(votes, bins[..., None], mag[..., None], axis=2)
    ay = _interp_matrix(rows, nr, cell_size)
    ax = _interp_matrix(cols, nc, cell_size)
    hist = np.tensordot(ay, votes, axes=(1, 0))  # nr x cols x 18
    return np.tensordot(hist, ax, axes=(1, 1)).transpose(0, 2, 1)


def extract_hog(patch: np.ndarray, cell_size: int) -> FeatureGrid:
    patch = np.asarray(patch)
    if cell_size < 1 or patch.shape[0] < cell_size or patch.shape[1] < cell_size:
        raise InvalidArgument(f"patch {patch.shape[:2]} is smaller than one {cell_size}px cell")
    hist = cell_histograms(patch, cell_size)
    nr, nc = hist.shape[:2]

    unsigned = hist[:, :, :N_ORIENT] + hist[:, :, N_ORIENT:]
    energy = np.pad(np.sum(unsigned**2, axis=2), 1, mode="edge")
    block = energy[:-1, :-1] + energy[1:, :-1] + energy[:-1, 1:] + energy[1:, 1:]
    # the four 2x2 blocks containing each cell
    norms = np.stack(
        [block[1:, 1:], block[:-1, 1:], block[1:, :-1], block[:-1, :-1]], axis=2
    )[:nr, :nc]
    inv = 1.0 / np.sqrt(norms + EPS)  # nr x nc x 4

    sens = np.minimum(hist[:, :, :, None] * inv[:, :, None, :], TRUNC)  # nr x nc x 18 x 4
    insens = np.minimum(unsigned[:, :, :, None] * inv[:, :, None, :], TRUNC)
    out = np.empty((nr, nc, 31))
    out[:, :, :18] = 0.5 * sens.sum(axis=3)
    out[:, :, 18:27] = 0.5 * insens.sum(axis=3)
    out[:, :, 27:] = 0.2357 * sens.sum(axis=2)
    return FeatureGrid(out, "hog", cell_size)
