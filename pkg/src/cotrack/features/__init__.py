"""Per-cell image features (HOG, Color Names, LBP) on a shared grid."""
from __future__ import annotations

import numpy as np

from ..core import WindowWeights
from .cn import CNLookupTable, default_table, extract_cn, load_cn_table, save_cn_table
from .grid import CHANNELS, FeatureGrid, FeatureStack, align_stack, resample_bilinear
from .hog import extract_hog
from .lbp import extract_lbp
from .patch import extract_patch, to_gray

__all__ = [
    "CHANNELS",
    "CNLookupTable",
    "FeatureGrid",
    "FeatureStack",
    "align_stack",
    "default_table",
    "extract_cn",
    "extract_features",
    "extract_hog",
    "extract_lbp",
    "extract_patch",
    "load_cn_table",
    "resample_bilinear",
    "save_cn_table",
    "to_gray",
]


def extract_features(
    patch: np.ndarray,
    kinds,
    cell_size: int,
    window: WindowWeights,
    table: CNLookupTable | None = None,
) -> FeatureStack:
    """Compute the requested features on one patch and align them under ``window``."""
    grids = []
    for kind in kinds:
        if kind == "hog":
            grids.append(extract_hog(patch, cell_size))
        elif kind == "cn":
            grids.append(extract_cn(patch, cell_size, table))
        elif kind == "lbp":
            grids.append(extract_lbp(patch, cell_size))
        else:
            raise ValueError(f"unknown feature kind {kind!r}")
    rows, cols = window.shape
    return align_stack(grids, rows, cols, window)
