"""Joint multi-feature correlation-filter learning by multi-block ADMM.

Objective over per-feature filters ``w_i`` and the stacked filter ``w``::

    sum_i |Phi_i w_i - y|^2 + ridge * sum_i |w_i|^2 + lambda0 * R(w)
        + sum_{i<j} lambda_ij |Psi_i w_i - Psi_j w_j|^2
    subject to  w = [w_1; ...; w_N]

``Phi_i`` are the cyclic shifts of the labeled template of feature ``i``,
``Psi_i`` those of the unlabeled sample, and ``R`` is the Euclidean norm
(``block_shrinkage``) or the L1 norm (``elementwise_soft_threshold``).

With the augmented Lagrangian ``... + <Y, w - concat(w_i)> + mu/2 |w - concat(w_i)|^2``
one iteration is: exact minimization over each ``w_i`` (a per-frequency
rank-2 system), a proximal step for ``w`` centered at ``concat(w_i) - Y/mu``,
the ascent ``Y += mu (w - concat(w_i))`` and ``mu = min(rho * mu, mu_max)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, TextIO

import numpy as np

from .circulant import forward_spectrum, inverse_spectrum, per_frequency_solve
from .config import SolverConfig
from .core import LabelMap
from .errors import InvalidArgument, NumericalError, SingularError
from .features.grid import FeatureGrid, FeatureStack
from .oracles import circulant_matrix

DENSE_VAR_LIMIT = 512
TRACE_COLUMNS = ("iteration", "mu", "primal_residual", "dual_residual", "objective")


@dataclass(frozen=True)
class ProblemInstance:
    labeled: FeatureStack
    unlabeled: FeatureStack
    label: LabelMap

    def __post_init__(self):
        if len(self.labeled) != len(self.unlabeled):
            raise InvalidArgument("labeled and unlabeled stacks hold different feature counts")
        if self.labeled.shape != self.label.shape or self.unlabeled.shape != self.label.shape:
            raise InvalidArgument(
                f"grid sizes differ: labeled {self.labeled.shape}, "
                f"unlabeled {self.unlabeled.shape}, label {self.label.shape}"
            )
        for a, b in zip(self.labeled.grids, self.unlabeled.grids):
            if a.channels != b.channels:
                raise InvalidArgument("labeled and unlabeled grids differ in channel count")

    @property
    def n_features(self) -> int:
        return len(self.labeled)

    @property
    def block_shapes(self) -> list[tuple[int, int, int]]:
        return [g.values.shape for g in self.labeled.grids]

    @property
    def n_vars(self) -> int:
        return sum(int(np.prod(s)) for s in self.block_shapes)

    @classmethod
    def from_arrays(cls, labeled, unlabeled=None, label=None, sigma=1.0) -> ProblemInstance:
        """Build an instance from raw ``rows x cols x C`` arrays (``unlabeled`` defaults to ``labeled``)."""
        lab = FeatureStack.from_arrays(labeled)
        unl = FeatureStack.from_arrays(unlabeled if unlabeled is not None else labeled)
        if label is None:
            from .core import gaussian_label

            label = gaussian_label(*lab.shape, sigma)
        elif not isinstance(label, LabelMap):
            v = np.asarray(label, dtype=float)
            r, c = np.unravel_index(np.argmax(v), v.shape)
            label = LabelMap(v, int(r), int(c), float(sigma))
        return cls(lab, unl, label)


@dataclass
class FilterBank:
    per_feature: list
    stacked: np.ndarray

    def __post_init__(self):
        total = sum(b.size for b in self.per_feature)
        if self.stacked.size != total:
            raise InvalidArgument(f"stacked filter has {self.stacked.size} entries, blocks hold {total}")

    @classmethod
    def from_blocks(cls, blocks, stacked=None) -> FilterBank:
        blocks = [np.array(b, dtype=float) for b in blocks]
        if stacked is None:
            stacked = concat_blocks(blocks)
        return cls(blocks, np.array(stacked, dtype=float))

    def concat(self) -> np.ndarray:
        return concat_blocks(self.per_feature)

    def stacked_blocks(self) -> list[np.ndarray]:
        return split_blocks(self.stacked, [b.shape for b in self.per_feature])

    def copy(self) -> FilterBank:
        return FilterBank([b.copy() for b in self.per_feature], self.stacked.copy())


@dataclass
class ADMMState:
    Y: np.ndarray
    mu: float
    k: int = 0
    primal_residual: float = math.inf
    dual_residual: float = math.inf
    epsilon: float = 0.0
    converged: bool = False
    aggregates: list = field(default_factory=list)
    mu_history: list = field(default_factory=list)
    primal_history: list = field(default_factory=list)


def concat_blocks(blocks) -> np.ndarray:
    return np.concatenate([np.ravel(b) for b in blocks]) if blocks else np.zeros(0)


def split_blocks(flat: np.ndarray, shapes) -> list[np.ndarray]:
    out, start = [], 0
    for s in shapes:
        n = int(np.prod(s))
        out.append(flat[start : start + n].reshape(s))
        start += n
    return out


@dataclass(frozen=True)
class _Spectra:
    a: list  # labeled template spectra, rows x cols x C_i
    b: list  # unlabeled template spectra
    y: np.ndarray  # label spectrum, rows x cols
    pair: np.ndarray
    shapes: list

    @classmethod
    def build(cls, p: ProblemInstance, cfg: SolverConfig) -> _Spectra:
        return cls(
            a=[forward_spectrum(g.values).coefficients for g in p.labeled.grids],
            b=[forward_spectrum(g.values).coefficients for g in p.unlabeled.grids],
            y=np.fft.fft2(p.label.values),
            pair=cfg.pair_matrix(p.n_features),
            shapes=p.block_shapes,
        )


def prox_consensus(V: np.ndarray, lambda0: float, mu: float, mode: str = "block_shrinkage") -> np.ndarray:
    """Minimizer of ``lambda0 * R(w) + mu/2 |w - V|^2``.

    ``block_shrinkage`` scales the whole vector toward zero by
    ``1 - lambda0 / (mu |V|_2)`` and returns zero once ``|V|_2 <= lambda0/mu``;
    ``elementwise_soft_threshold`` shrinks each coordinate by ``lambda0/mu``.
    """
    if not mu > 0:
        raise InvalidArgument(f"mu must be positive, got {mu}")
    V = np.asarray(V, dtype=float)
    if mode not in ("block_shrinkage", "elementwise_soft_threshold"):
        raise InvalidArgument(f"unknown prox mode {mode!r}")
    if lambda0 == 0:
        return V.copy()
    t = lambda0 / mu
    if mode == "block_shrinkage":
        nrm = float(np.linalg.norm(V))
        if nrm > t:
            return (1.0 - t / nrm) * V
        return np.zeros_like(V)
    if mode == "elementwise_soft_threshold":
        return np.sign(V) * np.maximum(np.abs(V) - t, 0.0)
    raise InvalidArgument(f"unknown prox mode {mode!r}")


def penalty(w: np.ndarray, mode: str) -> float:
    if mode == "block_shrinkage":
        return float(np.linalg.norm(w))
    return float(np.sum(np.abs(w)))


def closed_form_ridge(x, y, ridge_lambda: float) -> np.ndarray:
    """Filter minimizing ``|Phi w - y|^2 + ridge_lambda |w|^2`` for one template.

    Per frequency the Gram matrix is ``a a^H`` (``a`` = template spectrum over
    channels), so the solution is ``a * y_hat / (|a|^2 + lambda)``. At
    ``lambda = 0`` this is the minimum-norm interpolant, which needs every
    ``|a|^2`` to be non-zero.
    """
    xv = x.values if isinstance(x, FeatureGrid) else np.asarray(x, dtype=float)
    if xv.ndim == 2:
        xv = xv[:, :, None]
    yv = y.values if isinstance(y, LabelMap) else np.asarray(y, dtype=float)
    if xv.shape[:2] != yv.shape:
        raise InvalidArgument(f"template {xv.shape[:2]} and label {yv.shape} differ")
    if ridge_lambda < 0:
        raise InvalidArgument("ridge_lambda must be >= 0")
    a = np.fft.fft2(xv, axes=(0, 1))
    aa = np.sum(np.abs(a) ** 2, axis=2)
    if ridge_lambda == 0 and np.min(aa) <= 1e-14 * max(np.max(aa), 1e-300):
        raise SingularError("template spectrum has a zero coefficient and ridge_lambda is 0")
    w_hat = a * (np.fft.fft2(yv) / (aa + ridge_lambda))[:, :, None]
    return inverse_spectrum(w_hat)


def _block_spectra(bank_blocks):
    return [np.fft.fft2(b, axes=(0, 1)) for b in bank_blocks]


def consensus_term(i: int, bank: FilterBank, st: ADMMState) -> np.ndarray:
    """``Y_i + mu * w^(i)``: what the multiplier and penalty contribute to block ``i``."""
    shapes = [b.shape for b in bank.per_feature]
    Yb = split_blocks(st.Y, shapes)[i]
    wb = split_blocks(bank.stacked, shapes)[i]
    return Yb + st.mu * wb


def subproblem_update(
    i: int,
    p: ProblemInstance,
    bank: FilterBank,
    st: ADMMState,
    cfg: SolverConfig,
    spectra: _Spectra | None = None,
    block_hats: list | None = None,
) -> np.ndarray:
    """Exact minimizer over ``w_i`` of the augmented Lagrangian, others fixed.

    Setting the block gradient to zero gives, per frequency,
    ``(2 a a^H + 2 s b b^H + (mu + 2 ridge) I) w = 2 a y + 2 sum_j l_ij b (b_j^H w_j) + Y_i + mu w^(i)``
    with ``s = sum_j l_ij``.
    """
    if not 0 <= i < p.n_features:
        raise InvalidArgument(f"feature index {i} out of range")
    sp = spectra or _Spectra.build(p, cfg)
    hats = block_hats if block_hats is not None else _block_spectra(bank.per_feature)
    a, b = sp.a[i], sp.b[i]
    rhs = 2.0 * a * sp.y[:, :, None]
    agree = np.zeros(sp.y.shape, dtype=complex)
    for j in range(p.n_features):
        lij = sp.pair[i, j]
        if j != i and lij != 0:
            agree += lij * np.sum(np.conj(sp.b[j]) * hats[j], axis=2)
    rhs = rhs + 2.0 * b * agree[:, :, None]
    rhs = rhs + np.fft.fft2(consensus_term(i, bank, st), axes=(0, 1))
    beta = 2.0 * float(sum(sp.pair[i, j] for j in range(p.n_features) if j != i))
    w_hat = per_frequency_solve(
        a, b, 2.0, beta, st.mu + 2.0 * cfg.ridge_lambda, rhs, dense=cfg.solve_mode == "dense"
    )
    return inverse_spectrum(w_hat)


def dual_update(st: ADMMState, bank: FilterBank, cfg: SolverConfig) -> ADMMState:
    r = bank.stacked - bank.concat()
    primal = float(np.linalg.norm(r))
    return replace(
        st,
        Y=st.Y + st.mu * r,
        mu=min(cfg.rho * st.mu, cfg.mu_max),
        k=st.k + 1,
        primal_residual=primal,
        mu_history=st.mu_history + [st.mu],
        primal_history=st.primal_history + [primal],
    )


def mu_schedule(cfg: SolverConfig, n: int) -> list[float]:
    """The first ``n`` penalty values: geometric growth by ``rho``, capped at ``mu_max``."""
    out, mu = [], cfg.mu0
    for _ in range(n):
        out.append(mu)
        mu = min(cfg.rho * mu, cfg.mu_max)
    return out


def objective(p: ProblemInstance, bank: FilterBank, cfg: SolverConfig, spectra: _Spectra | None = None):
    """Total objective and the per-feature data terms ``|Phi_i w_i - y|^2``."""
    sp = spectra or _Spectra.build(p, cfg)
    n = sp.y.size
    hats = _block_spectra(bank.per_feature)
    fits, total = [], 0.0
    for i, h in enumerate(hats):
        r = np.sum(np.conj(sp.a[i]) * h, axis=2) - sp.y
        fits.append(float(np.sum(np.abs(r) ** 2)) / n)
        total += fits[-1] + cfg.ridge_lambda * float(np.sum(bank.per_feature[i] ** 2))
    psi_w = [np.sum(np.conj(sp.b[i]) * h, axis=2) for i, h in enumerate(hats)]
    for i in range(len(hats)):
        for j in range(i + 1, len(hats)):
            if sp.pair[i, j]:
                total += sp.pair[i, j] * float(np.sum(np.abs(psi_w[i] - psi_w[j]) ** 2)) / n
    total += cfg.lambda0 * penalty(bank.stacked, cfg.prox_mode)
    return total, fits


def disagreement(p: ProblemInstance, bank: FilterBank, i: int = 0, j: int = 1) -> float:
    """``|Psi_i w_i - Psi_j w_j|_2`` over all cyclic shifts of the unlabeled samples."""
    ri = np.sum(np.conj(np.fft.fft2(p.unlabeled.grids[i].values, axes=(0, 1)))
                * np.fft.fft2(bank.per_feature[i], axes=(0, 1)), axis=2)
    rj = np.sum(np.conj(np.fft.fft2(p.unlabeled.grids[j].values, axes=(0, 1)))
                * np.fft.fft2(bank.per_feature[j], axes=(0, 1)), axis=2)
    return float(np.sqrt(np.sum(np.abs(ri - rj) ** 2) / ri.size))


def ridge_start(p: ProblemInstance, cfg: SolverConfig) -> FilterBank:
    """Each block initialized at its own single-feature ridge filter."""
    blocks = []
    for g in p.labeled.grids:
        try:
            blocks.append(closed_form_ridge(g, p.label, cfg.ridge_lambda))
        except SingularError:
            blocks.append(np.zeros(g.values.shape))
    return FilterBank.from_blocks(blocks)


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NumericalError("non-finite value in ADMM iterate")


def _emit_trace(trace, st, p, bank, cfg, sp):
    total, fits = objective(p, bank, cfg, sp)
    cells = [st.k, st.mu_history[-1], st.primal_residual, st.dual_residual, total, *fits]
    trace.write(",".join(f"{c:.10g}" if isinstance(c, float) else str(c) for c in cells) + "\n")


def trace_header(n_features: int) -> str:
    return ",".join(TRACE_COLUMNS + tuple(f"fit_{i + 1}" for i in range(n_features)))


def solve_joint_filters(
    p: ProblemInstance,
    cfg: SolverConfig,
    warm_start: FilterBank | None = None,
    *,
    max_iter: int | None = None,
    trace: TextIO | None = None,
    callback: Callable | None = None,
) -> tuple[FilterBank, ADMMState]:
    """Run ADMM until both residuals drop to epsilon or the iteration cap.

    Stops when the primal residual ``|w - concat(w_i)|`` and the dual residual
    ``mu |w_new - w_old|`` are both at most ``epsilon``. Without a warm start
    the blocks start at their single-feature ridge filters; ``Y`` always
    starts at zero and ``mu`` at ``mu0``. ``state.converged`` is False when
    the cap was hit first.

    ``callback(i, reference_bank, new_block, state)`` runs after every block
    update; ``reference_bank`` holds the other blocks that update used.
    ``trace`` receives one CSV row per iteration with the columns of
    :func:`trace_header` (no header line is written).
    """
    sp = _Spectra.build(p, cfg)
    shapes = sp.shapes
    if warm_start is not None:
        if [b.shape for b in warm_start.per_feature] != shapes:
            raise InvalidArgument("warm start does not match the problem layout")
        bank = warm_start.copy()
        limit = cfg.warm_max_iter if max_iter is None else max_iter
    else:
        bank = ridge_start(p, cfg)
        limit = cfg.max_iter if max_iter is None else max_iter
    n_vars = p.n_vars
    st = ADMMState(Y=np.zeros(n_vars), mu=cfg.mu0, epsilon=cfg.resolve_epsilon(n_vars))

    for _ in range(limit):
        st.aggregates = [consensus_term(i, bank, st) for i in range(p.n_features)]
        hats = _block_spectra(bank.per_feature)
        reference = bank.copy() if cfg.sweep_mode == "jacobi" else bank
        for i in range(p.n_features):
            new_block = subproblem_update(i, p, reference, st, cfg, sp, hats)
            if callback is not None:
                callback(i, reference, new_block, st)
            bank.per_feature[i] = new_block
            if cfg.sweep_mode == "gauss_seidel":
                hats[i] = np.fft.fft2(new_block, axes=(0, 1))
        previous = bank.stacked
        bank.stacked = prox_consensus(bank.concat() - st.Y / st.mu, cfg.lambda0, st.mu, cfg.prox_mode)
        dual = st.mu * float(np.linalg.norm(bank.stacked - previous))
        st = dual_update(st, bank, cfg)
        st.dual_residual = dual
        _check_finite(bank.stacked, st.Y, *bank.per_feature)
        if trace is not None:
            _emit_trace(trace, st, p, bank, cfg, sp)
        if st.primal_residual <= st.epsilon and st.dual_residual <= st.epsilon:
            st.converged = True
            break
    return bank, st


def dense_reference_solve(
    p: ProblemInstance,
    cfg: SolverConfig,
    warm_start: FilterBank | None = None,
    *,
    max_iter: int | None = None,
) -> tuple[FilterBank, ADMMState]:
    """Same iteration as :func:`solve_joint_filters` with explicit circulant matrices.

    Only for verification: the total variable count must not exceed 512.
    """
    n_vars = p.n_vars
    if n_vars > DENSE_VAR_LIMIT:
        raise InvalidArgument(f"dense reference limited to {DENSE_VAR_LIMIT} variables, instance has {n_vars}")
    N = p.n_features
    shapes = p.block_shapes
    pair = cfg.pair_matrix(N)
    y = p.label.values.ravel()
    phis = [circulant_matrix(g.values) for g in p.labeled.grids]
    psis = [circulant_matrix(g.values) for g in p.unlabeled.grids]

    if warm_start is not None:
        blocks = [b.ravel().copy() for b in warm_start.per_feature]
        w = warm_start.stacked.copy()
        limit = cfg.warm_max_iter if max_iter is None else max_iter
    else:
        blocks = []
        for phi in phis:
            gram = phi.T @ phi
            if cfg.ridge_lambda > 0:
                blocks.append(np.linalg.solve(gram + cfg.ridge_lambda * np.eye(len(gram)), phi.T @ y))
            else:
                blocks.append(np.linalg.lstsq(phi, y, rcond=None)[0])
        w = np.concatenate(blocks)
        limit = cfg.max_iter if max_iter is None else max_iter

    offsets = np.cumsum([0] + [int(np.prod(s)) for s in shapes])
    st = ADMMState(Y=np.zeros(n_vars), mu=cfg.mu0, epsilon=cfg.resolve_epsilon(n_vars))
    for _ in range(limit):
        reference = [b.copy() for b in blocks]
        for i in range(N):
            others = blocks if cfg.sweep_mode == "gauss_seidel" else reference
            n_i = phis[i].shape[1]
            s = sum(pair[i, j] for j in range(N) if j != i)
            m = 2 * phis[i].T @ phis[i] + 2 * s * psis[i].T @ psis[i]
            m += (st.mu + 2 * cfg.ridge_lambda) * np.eye(n_i)
            rhs = 2 * phis[i].T @ y + st.Y[offsets[i] : offsets[i + 1]] + st.mu * w[offsets[i] : offsets[i + 1]]
            for j in range(N):
                if j != i and pair[i, j]:
                    rhs += 2 * pair[i, j] * psis[i].T @ (psis[j] @ others[j])
            blocks[i] = np.linalg.solve(m, rhs)
        concat = np.concatenate(blocks)
        w_new = prox_consensus(concat - st.Y / st.mu, cfg.lambda0, st.mu, cfg.prox_mode)
        dual = st.mu * float(np.linalg.norm(w_new - w))
        w = w_new
        bank = FilterBank([b.reshape(s) for b, s in zip(blocks, shapes)], w)
        st = dual_update(st, bank, cfg)
        st.dual_residual = dual
        if st.primal_residual <= st.epsilon and st.dual_residual <= st.epsilon:
            st.converged = True
            break
    return FilterBank([b.reshape(s).copy() for b, s in zip(blocks, shapes)], w.copy()), st
