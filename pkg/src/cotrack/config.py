"""Tracker and solver configuration, plus the flat ``key = value`` file format.

File format::

    # comments start with '#'
    cell_size = 4
    scale_factors = [0.98, 1.0, 1.02]
    features = [hog, lbp]

Unknown keys are rejected so typos do not silently fall back to defaults.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, fields, replace
from typing import Sequence

import numpy as np

from .errors import ConfigError

FEATURE_KINDS = ("hog", "cn", "lbp")
PROX_MODES = ("block_shrinkage", "elementwise_soft_threshold")
SWEEP_MODES = ("gauss_seidel", "jacobi")
SOLVE_MODES = ("woodbury", "dense")


def _default_scales():
    return tuple(1.02**n for n in range(-3, 4))


@dataclass(frozen=True)
class SolverConfig:
    """Hyperparameters of the joint filter learner.

    ``lambda_pair`` is either one non-negative number applied to every
    feature pair, or a full symmetric matrix with zero diagonal.
    ``epsilon=None`` resolves to ``tol * sqrt(variable count)`` at solve time.
    """

    lambda0: float = 0.01
    lambda_pair: float | tuple = 0.1
    ridge_lambda: float = 1e-4
    mu0: float = 0.1
    rho: float = 1.5
    mu_max: float = 1e4
    epsilon: float | None = None
    tol: float = 1e-4
    max_iter: int = 100
    warm_max_iter: int = 10
    prox_mode: str = "block_shrinkage"
    sweep_mode: str = "gauss_seidel"
    solve_mode: str = "woodbury"

    def __post_init__(self):
        for key in ("lambda0", "ridge_lambda", "tol"):
            v = getattr(self, key)
            if not (math.isfinite(v) and v >= 0):
                raise ConfigError(key, f"must be a finite number >= 0, got {v}")
        if not self.tol > 0:
            raise ConfigError("tol", "must be > 0")
        if not (math.isfinite(self.mu0) and self.mu0 > 0):
            raise ConfigError("mu0", f"must be > 0, got {self.mu0}")
        if not self.rho >= 1:
            raise ConfigError("rho", f"must be >= 1, got {self.rho}")
        if not math.isfinite(self.mu_max):
            raise ConfigError("mu_max", "must be finite so the penalty schedule levels off")
        if not self.mu_max >= self.mu0:
            raise ConfigError("mu_max", f"must be >= mu0 ({self.mu0}), got {self.mu_max}")
        if self.epsilon is not None and not self.epsilon > 0:
            raise ConfigError("epsilon", f"must be > 0, got {self.epsilon}")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ConfigError("max_iter", f"must be a positive integer, got {self.max_iter}")
        if int(self.warm_max_iter) != self.warm_max_iter or self.warm_max_iter < 1:
            raise ConfigError("warm_max_iter", f"must be a positive integer, got {self.warm_max_iter}")
        if self.prox_mode not in PROX_MODES:
            raise ConfigError("prox_mode", f"must be one of {PROX_MODES}")
        if self.sweep_mode not in SWEEP_MODES:
            raise ConfigError("sweep_mode", f"must be one of {SWEEP_MODES}")
        if self.solve_mode not in SOLVE_MODES:
            raise ConfigError("solve_mode", f"must be one of {SOLVE_MODES}")
        lp = self.lambda_pair
        if np.ndim(lp) == 0:
            if not (math.isfinite(lp) and lp >= 0):
                raise ConfigError("lambda_pair", f"must be >= 0, got {lp}")
        else:
            m = np.asarray(lp, dtype=float)
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise ConfigError("lambda_pair", "must be a scalar or a square matrix")
            if np.any(m < 0) or not np.all(np.isfinite(m)):
                raise ConfigError("lambda_pair", "entries must be finite and >= 0")
            if np.any(np.diag(m) != 0):
                raise ConfigError("lambda_pair", "diagonal must be zero")
            if np.max(np.abs(m - m.T)) > 1e-12:
                raise ConfigError("lambda_pair", "matrix must be symmetric")
            object.__setattr__(self, "lambda_pair", tuple(map(tuple, m.tolist())))

    def pair_matrix(self, n: int) -> np.ndarray:
        if np.ndim(self.lambda_pair) == 0:
            m = np.full((n, n), float(self.lambda_pair))
            np.fill_diagonal(m, 0.0)
            return m
        m = np.asarray(self.lambda_pair, dtype=float)
        if m.shape != (n, n):
            raise ConfigError("lambda_pair", f"matrix is {m.shape[0]}x{m.shape[1]} but {n} features are enabled")
        return m

    def resolve_epsilon(self, n_vars: int) -> float:
        if self.epsilon is not None:
            return float(self.epsilon)
        return self.tol * math.sqrt(n_vars)


@dataclass(frozen=True)
class TrackerConfig:
    cell_size: int = 4
    padding: float = 2.5
    label_sigma_factor: float = 0.1
    learning_rate: float = 0.015
    scale_factors: tuple = field(default_factory=_default_scales)
    scale_prior_sigma: float = 1.0
    features_enabled: tuple = FEATURE_KINDS
    solver: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        if int(self.cell_size) != self.cell_size or self.cell_size < 1:
            raise ConfigError("cell_size", f"must be a positive integer, got {self.cell_size}")
        if not self.padding >= 1:
            raise ConfigError("padding", f"must be >= 1, got {self.padding}")
        if not self.label_sigma_factor > 0:
            raise ConfigError("label_sigma_factor", "must be > 0")
        if not 0 <= self.learning_rate <= 1:
            raise ConfigError("learning_rate", f"must lie in [0, 1], got {self.learning_rate}")
        scales = tuple(float(s) for s in self.scale_factors)
        if not scales or any(s <= 0 for s in scales):
            raise ConfigError("scale_factors", "must be a non-empty list of positive ratios")
        if 1.0 not in scales:
            raise ConfigError("scale_factors", "must contain 1.0")
        if list(scales) != sorted(scales) or len(set(scales)) != len(scales):
            raise ConfigError("scale_factors", "must be strictly ascending")
        object.__setattr__(self, "scale_factors", scales)
        if not self.scale_prior_sigma > 0:
            raise ConfigError("scale_prior_sigma", "must be > 0")
        feats = tuple(self.features_enabled)
        if not feats:
            raise ConfigError("features", "at least one feature must be enabled")
        bad = [f for f in feats if f not in FEATURE_KINDS]
        if bad or len(set(feats)) != len(feats):
            raise ConfigError("features", f"must be distinct values from {FEATURE_KINDS}, got {list(feats)}")
        object.__setattr__(self, "features_enabled", feats)


# key -> (owner, attribute, parser)
def _as_float(v):
    return float(v)


def _as_int(v):
    f = float(v)
    if f != int(f):
        raise ValueError(f"{v!r} is not an integer")
    return int(f)


def _as_floats(v):
    if isinstance(v, str):
        v = [v]
    return tuple(float(x) for x in v)


def _as_names(v):
    if isinstance(v, str):
        v = [v]
    return tuple(x.strip().lower() for x in v if x.strip())


def _as_str(v):
    if not isinstance(v, str):
        raise ValueError("expected a single value")
    return v.strip()


def _as_pair(v):
    if isinstance(v, str):
        return float(v)
    upper = [float(x) for x in v]
    # upper-triangle listing (1,2), (1,3), ..., (2,3), ...
    n = int(round((1 + math.sqrt(1 + 8 * len(upper))) / 2))
    if n * (n - 1) // 2 != len(upper):
        raise ValueError("list length must be N*(N-1)/2 for some N")
    m = np.zeros((n, n))
    m[np.triu_indices(n, 1)] = upper
    return m + m.T


def _as_optional_float(v):
    if isinstance(v, str) and v.strip().lower() in ("", "auto", "none"):
        return None
    return float(v)


_TRACKER_KEYS = {
    "cell_size": ("cell_size", _as_int),
    "padding": ("padding", _as_float),
    "label_sigma_factor": ("label_sigma_factor", _as_float),
    "learning_rate": ("learning_rate", _as_float),
    "scale_factors": ("scale_factors", _as_floats),
    "scale_prior_sigma": ("scale_prior_sigma", _as_float),
    "features": ("features_enabled", _as_names),
    "features_enabled": ("features_enabled", _as_names),
}

_SOLVER_KEYS = {
    "lambda0": ("lambda0", _as_float),
    "lambda_pair": ("lambda_pair", _as_pair),
    "ridge_lambda": ("ridge_lambda", _as_float),
    "mu0": ("mu0", _as_float),
    "rho": ("rho", _as_float),
    "mu_max": ("mu_max", _as_float),
    "epsilon": ("epsilon", _as_optional_float),
    "tol": ("tol", _as_float),
    "max_iter": ("max_iter", _as_int),
    "warm_max_iter": ("warm_max_iter", _as_int),
    "prox_mode": ("prox_mode", _as_str),
    "sweep_mode": ("sweep_mode", _as_str),
    "solve_mode": ("solve_mode", _as_str),
}


def parse_kv_text(text: str, source: str = "<string>") -> dict:
    """Parse ``key = value`` lines; bracketed values become lists of strings."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'key = value' in {source}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}", f"missing key in {source}")
        if value.startswith("["):
            if not value.endswith("]"):
                raise ConfigError(key, "unterminated list")
            inner = value[1:-1].strip()
            out[key] = [item.strip() for item in inner.split(",")] if inner else []
        else:
            out[key] = value
    return out


def config_from_mapping(values: dict, base: TrackerConfig | None = None) -> TrackerConfig:
    base = base or TrackerConfig()
    tracker_kw, solver_kw = {}, {}
    for key, raw in values.items():
        k = key.strip().lower().removeprefix("solver.")
        if k in _TRACKER_KEYS:
            attr, parse = _TRACKER_KEYS[k]
            dest = tracker_kw
        elif k in _SOLVER_KEYS:
            attr, parse = _SOLVER_KEYS[k]
            dest = solver_kw
        else:
            raise ConfigError(key, "unknown configuration key")
        try:
            dest[attr] = parse(raw) if isinstance(raw, (str, list)) else raw
        except (TypeError, ValueError) as exc:
            raise ConfigError(key, f"cannot parse {raw!r}: {exc}") from None
    solver = replace(base.solver, **solver_kw)
    return replace(base, solver=solver, **tracker_kw)


def load_config(path: str | os.PathLike) -> TrackerConfig:
    """Read a config file; missing keys keep their defaults.

    Raises ``OSError`` when the file cannot be read and :class:`ConfigError`
    naming the offending key when validation fails.
    """
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return config_from_mapping(parse_kv_text(text, str(path)))


def config_to_text(cfg: TrackerConfig) -> str:
    lines = []
    for f in fields(cfg):
        if f.name == "solver":
            continue
        v = getattr(cfg, f.name)
        key = "features" if f.name == "features_enabled" else f.name
        lines.append(f"{key} = {_fmt(v)}")
    for f in fields(cfg.solver):
        v = getattr(cfg.solver, f.name)
        if f.name == "lambda_pair" and np.ndim(v) == 2:
            m = np.asarray(v)
            v = list(m[np.triu_indices(m.shape[0], 1)])
        lines.append(f"{f.name} = {_fmt(v)}")
    return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    if v is None:
        return "auto"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def with_features(cfg: TrackerConfig, features: Sequence[str]) -> TrackerConfig:
    return replace(cfg, features_enabled=tuple(features))
