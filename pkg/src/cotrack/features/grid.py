"""Feature containers and the alignment of several feature grids onto one grid."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from ..core import WindowWeights
from ..errors import InvalidArgument

CHANNELS = {"hog": 31, "cn": 11, "lbp": 10, "gray": 1}


@dataclass(frozen=True)
class FeatureGrid:
    """A ``rows_c x cols_c x channels`` cell grid of one feature kind.

    ``kind="gray"`` is the single-channel stand-in used when Color Names
    cannot be computed; ``kind="raw"`` accepts any channel count (used for
    synthetic solver instances).
    """

    values: np.ndarray
    kind: str
    cell_size: int = 1
    fallback: bool = False

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 2:
            v = v[:, :, None]
        if v.ndim != 3:
            raise InvalidArgument(f"feature grid must be 3-D, got shape {v.shape}")
        expected = CHANNELS.get(self.kind)
        if expected is None and self.kind != "raw":
            raise InvalidArgument(f"unknown feature kind {self.kind!r}")
        if expected is not None and v.shape[2] != expected:
            raise InvalidArgument(f"{self.kind} grid needs {expected} channels, got {v.shape[2]}")
        if not np.all(np.isfinite(v)):
            raise InvalidArgument(f"{self.kind} grid contains non-finite values")
        object.__setattr__(self, "values", v)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape[:2]

    @property
    def channels(self) -> int:
        return self.values.shape[2]


@dataclass(frozen=True)
class FeatureStack:
    grids: tuple
    windowed: bool = False
    diagnostics: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        grids = tuple(self.grids)
        if not grids:
            raise InvalidArgument("a feature stack needs at least one grid")
        shapes = {g.shape for g in grids}
        if len(shapes) != 1:
            raise InvalidArgument(f"grids disagree on spatial size: {sorted(shapes)}")
        object.__setattr__(self, "grids", grids)

    @property
    def shape(self) -> tuple[int, int]:
        return self.grids[0].shape

    @property
    def kinds(self) -> tuple[str, ...]:
        return tuple(g.kind for g in self.grids)

    def __len__(self):
        return len(self.grids)

    def arrays(self) -> list[np.ndarray]:
        return [g.values for g in self.grids]

    def blend(self, other: FeatureStack, rate: float) -> FeatureStack:
        """Per-channel linear interpolation ``(1 - rate) * self + rate * other``."""
        if self.kinds != other.kinds or self.shape != other.shape:
            raise InvalidArgument("cannot blend stacks of different layout")
        if rate == 0:
            return self
        if rate == 1:
            return other
        grids = tuple(
            FeatureGrid((1 - rate) * a.values + rate * b.values, a.kind, a.cell_size, a.fallback)
            for a, b in zip(self.grids, other.grids)
        )
        return FeatureStack(grids, self.windowed and other.windowed, self.diagnostics | other.diagnostics)

    @classmethod
    def from_arrays(cls, arrays, windowed=True) -> FeatureStack:
        return cls(tuple(FeatureGrid(a, "raw") for a in arrays), windowed=windowed)


def resample_bilinear(values: np.ndarray, out_rows: int, out_cols: int) -> np.ndarray:
    """Bilinear resize of a ``rows x cols x C`` array with pixel-center alignment."""
    rows, cols = values.shape[:2]
    if (rows, cols) == (out_rows, out_cols):
        return values.copy()
    ys = (np.arange(out_rows) + 0.5) * (rows / out_rows) - 0.5
    xs = (np.arange(out_cols) + 0.5) * (cols / out_cols) - 0.5
    yy, xx = np.meshgrid(ys, xs, indexing="ij")
    out = np.empty((out_rows, out_cols, values.shape[2]))
    for c in range(values.shape[2]):
        out[:, :, c] = ndimage.map_coordinates(values[:, :, c], [yy, xx], order=1, mode="nearest")
    return out


def align_stack(grids, target_rows: int, target_cols: int, window: WindowWeights) -> FeatureStack:
    """Bring every grid to ``target_rows x target_cols`` and apply the window."""
    grids = list(grids)
    if not grids:
        raise InvalidArgument("align_stack needs at least one grid")
    if target_rows < 1 or target_cols < 1:
        raise InvalidArgument("target dimensions must be positive")
    if window.shape != (target_rows, target_cols):
        raise InvalidArgument(f"window is {window.shape}, expected {(target_rows, target_cols)}")
    w = window.values[:, :, None]
    out = []
    diagnostics = set()
    for g in grids:
        v = resample_bilinear(g.values, target_rows, target_cols)
        out.append(FeatureGrid(v * w, g.kind, g.cell_size, g.fallback))
        if g.fallback:
            diagnostics.add("cn_fallback")
    return FeatureStack(tuple(out), windowed=True, diagnostics=frozenset(diagnostics))
