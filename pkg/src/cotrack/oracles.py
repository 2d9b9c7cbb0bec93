"""Brute-force references used to verify the spectral code paths.

Nothing here is on the tracking hot path; everything materializes explicit
matrices or loops over shifts, so keep inputs small.
"""
from __future__ import annotations

import numpy as np


def _as3d(a):
    a = np.asarray(a, dtype=float)
    return a[:, :, None] if a.ndim == 2 else a


def circulant_matrix(template) -> np.ndarray:
    """Row ``d`` (row-major shift index) is the template cyclically shifted by ``d``.

    Columns follow the row-major flattening of a ``rows x cols x C`` filter,
    so ``circulant_matrix(x) @ w.ravel()`` is the response at every shift.
    """
    x = _as3d(template)
    rows, cols = x.shape[:2]
    out = np.empty((rows * cols, x.size))
    for dr in range(rows):
        for dc in range(cols):
            out[dr * cols + dc] = np.roll(x, (dr, dc), axis=(0, 1)).ravel()
    return out


def brute_force_correlation(template, filt) -> np.ndarray:
    x, w = _as3d(template), _as3d(filt)
    rows, cols = x.shape[:2]
    out = np.empty((rows, cols))
    for dr in range(rows):
        for dc in range(cols):
            out[dr, dc] = np.sum(np.roll(x, (dr, dc), axis=(0, 1)) * w)
    return out


def finite_difference_gradient(f, x: np.ndarray, h: float = 1e-4) -> np.ndarray:
    """Central differences of a scalar function over every coordinate of ``x``."""
    x = np.asarray(x, dtype=float)
    g = np.empty(x.size)
    flat = x.ravel().copy()
    for k in range(flat.size):
        orig = flat[k]
        flat[k] = orig + h
        fp = f(flat.reshape(x.shape))
        flat[k] = orig - h
        fm = f(flat.reshape(x.shape))
        flat[k] = orig
        g[k] = (fp - fm) / (2 * h)
    return g.reshape(x.shape)


def dense_block_objective(i, w_i, phis, psis, y, blocks, Y_blocks, stacked_blocks, mu, ridge_lambda, pair):
    """Augmented-Lagrangian terms that depend on block ``i``, from explicit matrices.

    ``f(w_i) = |Phi_i w_i - y|^2 + ridge |w_i|^2 + sum_j pair[i, j] |Psi_i w_i - Psi_j w_j|^2
    - <Y_i, w_i> + mu/2 |w_i - w^(i)|^2``
    """
    v = np.ravel(w_i)
    r = phis[i] @ v - np.ravel(y)
    val = r @ r + ridge_lambda * (v @ v)
    for j in range(len(phis)):
        if j != i and pair[i, j] != 0:
            d = psis[i] @ v - psis[j] @ np.ravel(blocks[j])
            val += pair[i, j] * (d @ d)
    val -= np.ravel(Y_blocks[i]) @ v
    c = v - np.ravel(stacked_blocks[i])
    return val + 0.5 * mu * (c @ c)
