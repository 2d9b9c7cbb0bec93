"""Built-in oracle suite behind ``cotrack selfcheck``.

Every check returns ``(passed, detail)``. Solver entry points are looked up
on the module at call time so a test can patch them and watch checks fail.
"""
from __future__ import annotations

import time
from dataclasses import replace
from typing import Callable

import numpy as np

from . import circulant, oracles
from . import solver as S
from .config import SolverConfig
from .core import BBox
from .evalbench import overlap_ratio


def random_instance(rng, rows, cols, channels, n_features=1, sigma=1.0, distinct_unlabeled=True):
    lab = [rng.standard_normal((rows, cols, c)) for c in _per_feature(channels, n_features)]
    unl = [rng.standard_normal(a.shape) for a in lab] if distinct_unlabeled else None
    return S.ProblemInstance.from_arrays(lab, unl, sigma=sigma)


def _per_feature(channels, n):
    return list(channels) if isinstance(channels, (list, tuple)) else [channels] * n


def rel_err(a, b) -> float:
    a, b = np.asarray(a), np.asarray(b)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


def check_prox_block():
    out = S.prox_consensus(np.array([3.0, 4.0]), 1.0, 1.0, "block_shrinkage")
    zero = S.prox_consensus(np.array([0.3, 0.4]), 1.0, 2.0, "block_shrinkage")
    err = max(np.max(np.abs(out - [2.4, 3.2])), np.max(np.abs(zero)))
    return err <= 1e-12, f"max error {err:.2e}"


def check_prox_soft():
    out = S.prox_consensus(np.array([3.0, -0.5, -2.0, 1.0]), 2.0, 2.0, "elementwise_soft_threshold")
    err = float(np.max(np.abs(out - [2.0, 0.0, -1.0, 0.0])))
    return err <= 1e-12, f"max error {err:.2e}"


def check_ridge_degeneracy(n_instances=4, seed=1):
    rng = np.random.default_rng(seed)
    cfg = SolverConfig(lambda0=0.0, lambda_pair=0.0, ridge_lambda=1e-2)
    worst = 0.0
    for k in range(n_instances):
        p = random_instance(rng, 8, 8, 1 + k % 2)
        bank, _ = S.solve_joint_filters(p, cfg)
        worst = max(worst, rel_err(bank.per_feature[0], S.closed_form_ridge(p.labeled.grids[0], p.label, cfg.ridge_lambda)))
    return worst <= 1e-6, f"worst relative error {worst:.2e}"


def check_dense_vs_spectral(n_instances=3, seed=2):
    rng = np.random.default_rng(seed)
    cfg = SolverConfig(ridge_lambda=0.1, max_iter=30)
    worst = 0.0
    for _ in range(n_instances):
        p = random_instance(rng, 4, 4, 1, n_features=2)
        fast, _ = S.solve_joint_filters(p, cfg)
        slow, _ = S.dense_reference_solve(p, cfg)
        worst = max(worst, rel_err(fast.concat(), slow.concat()), rel_err(fast.stacked, slow.stacked))
    return worst <= 1e-6, f"worst relative error {worst:.2e}"


def block_kkt_residuals(p: S.ProblemInstance, cfg: SolverConfig, max_iter: int = 5) -> list[float]:
    """Relative finite-difference gradient of each block objective at every update."""
    phis = [oracles.circulant_matrix(g.values) for g in p.labeled.grids]
    psis = [oracles.circulant_matrix(g.values) for g in p.unlabeled.grids]
    pair = cfg.pair_matrix(p.n_features)
    shapes = p.block_shapes
    out = []

    def cb(i, ref, new_block, st):
        Yb = S.split_blocks(st.Y, shapes)
        stacked = ref.stacked_blocks()
        blocks = [b.copy() for b in ref.per_feature]

        def f(w):
            return oracles.dense_block_objective(
                i, w, phis, psis, p.label.values, blocks, Yb, stacked, st.mu, cfg.ridge_lambda, pair
            )

        g = oracles.finite_difference_gradient(f, new_block)
        scale = np.linalg.norm(oracles.finite_difference_gradient(f, np.zeros_like(new_block)))
        out.append(float(np.linalg.norm(g) / max(scale, 1e-300)))

    S.solve_joint_filters(p, cfg, max_iter=max_iter, callback=cb)
    return out


def check_block_kkt(seed=3):
    rng = np.random.default_rng(seed)
    p = random_instance(rng, 4, 4, 2, n_features=2)
    res = block_kkt_residuals(p, SolverConfig(lambda_pair=0.5, ridge_lambda=0.05), max_iter=3)
    worst = max(res)
    return worst <= 1e-5, f"worst relative gradient {worst:.2e} over {len(res)} updates"


def check_correlation(seed=4):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for rows, cols, c in ((5, 7, 1), (16, 16, 3)):
        x, w = rng.standard_normal((rows, cols, c)), rng.standard_normal((rows, cols, c))
        got = circulant.correlation_response(circulant.forward_spectrum(x), circulant.forward_spectrum(w)).values
        worst = max(worst, float(np.max(np.abs(got - oracles.brute_force_correlation(x, w)))))
    return worst <= 1e-6, f"max deviation {worst:.2e}"


def check_overlap():
    v = overlap_ratio(BBox(0, 0, 2, 2), BBox(1, 1, 2, 2))
    return abs(v - 1.0 / 7.0) <= 1e-12, f"overlap {v!r}"


def sweep_timing(rows=32, cols=32, channels=31, repeats=5, seed=5):
    """Best-of-``repeats`` time of one full subproblem sweep, Woodbury vs dense.

    Spectra are precomputed exactly as inside the solver loop, so the timing
    isolates the per-frequency linear solves plus their shared transforms.
    Returns ``(fast_seconds, dense_seconds, relative_difference)``.
    """
    rng = np.random.default_rng(seed)
    p = random_instance(rng, rows, cols, channels, n_features=2, sigma=2.0)
    cfg = SolverConfig()
    sp = S._Spectra.build(p, cfg)
    bank = S.ridge_start(p, cfg)
    st = S.ADMMState(Y=rng.standard_normal(p.n_vars), mu=1.0)
    hats = [np.fft.fft2(b, axes=(0, 1)) for b in bank.per_feature]

    def sweep(c):
        return [S.subproblem_update(i, p, bank, st, c, sp, hats) for i in range(p.n_features)]

    results, times = {}, {}
    for mode in ("woodbury", "dense"):
        c = replace(cfg, solve_mode=mode)
        best = np.inf
        for _ in range(repeats):
            t0 = time.perf_counter()
            results[mode] = sweep(c)
            best = min(best, time.perf_counter() - t0)
        times[mode] = best
    diff = max(rel_err(a, b) for a, b in zip(results["woodbury"], results["dense"]))
    return times["woodbury"], times["dense"], diff


def check_performance():
    fast, dense, diff = sweep_timing()
    ratio = dense / fast
    return ratio >= 5.0 and diff <= 1e-8, f"speedup {ratio:.1f}x, relative difference {diff:.1e}"


CHECKS: list[tuple[str, Callable]] = [
    ("prox block shrinkage", check_prox_block),
    ("prox soft threshold", check_prox_soft),
    ("ridge degeneracy", check_ridge_degeneracy),
    ("dense vs spectral solve", check_dense_vs_spectral),
    ("blockwise gradient (finite differences)", check_block_kkt),
    ("spectral correlation", check_correlation),
    ("overlap fixture", check_overlap),
    ("per-frequency solve speedup", check_performance),
]


def run_selfcheck(emit=print) -> bool:
    ok = True
    for name, fn in CHECKS:
        try:
            passed, detail = fn()
        except Exception as exc:  # a crash is a failed check, not a crashed suite
            passed, detail = False, f"{type(exc).__name__}: {exc}"
        ok &= bool(passed)
        emit(f"{'PASS' if passed else 'FAIL'} {name}: {detail}")
    return ok
