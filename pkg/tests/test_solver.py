import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cotrack import solver as S
from cotrack.config import SolverConfig
from cotrack.core import gaussian_label
from cotrack.errors import InvalidArgument, NumericalError, SingularError
from cotrack.oracles import circulant_matrix
from cotrack.selfcheck import block_kkt_residuals

from conftest import exact_optimum, random_problem

# constant penalty and a tight tolerance: ADMM reaches the exact optimum
MODES = ("block_shrinkage", "elementwise_soft_threshold")
EXACT = dict(mu0=1.0, rho=1.0, mu_max=1.0, epsilon=1e-10, max_iter=3000)


def rel(a, b):
    return np.linalg.norm(np.ravel(a) - np.ravel(b)) / np.linalg.norm(np.ravel(b))


class TestProx:
    def test_block_example(self):
        np.testing.assert_allclose(S.prox_consensus(np.array([3.0, 4.0]), 1.0, 1.0), [2.4, 3.2], atol=1e-12)

    def test_block_zero(self):
        assert np.all(S.prox_consensus(np.array([0.6, 0.8]), 2.0, 2.0) == 0)
        assert np.all(S.prox_consensus(np.array([0.3, 0.4]), 1.0, 1.0) == 0)

    def test_elementwise_example(self):
        out = S.prox_consensus(np.array([3.0, 4.0]), 1.0, 1.0, "elementwise_soft_threshold")
        np.testing.assert_allclose(out, [2.0, 3.0], atol=1e-12)

    @given(st.lists(st.floats(-100, 100), min_size=1, max_size=20), st.sampled_from(MODES))
    def test_zero_lambda_is_identity(self, v, mode):
        v = np.array(v)
        np.testing.assert_array_equal(S.prox_consensus(v, 0.0, 3.0, mode), v)

    @settings(max_examples=50)
    @given(
        st.lists(st.floats(-5, 5), min_size=1, max_size=6),
        st.floats(0, 3),
        st.floats(0.1, 5),
        st.sampled_from(MODES),
        st.integers(0, 2**32 - 1),
    )
    def test_is_minimizer(self, v, lam, mu, mode, seed):
        v = np.array(v)
        f = lambda w: lam * S.penalty(w, mode) + 0.5 * mu * np.sum((w - v) ** 2)
        w = S.prox_consensus(v, lam, mu, mode)
        g = np.random.default_rng(seed)
        for _ in range(20):
            assert f(w) <= f(w + 0.1 * g.standard_normal(v.shape)) + 1e-12

    def test_invalid(self):
        with pytest.raises(InvalidArgument):
            S.prox_consensus(np.ones(2), 1.0, 0.0)
        with pytest.raises(InvalidArgument):
            S.prox_consensus(np.ones(2), 1.0, 1.0, "nope")


class TestRidge:
    def test_impulse_template(self, rng):
        x = np.zeros((5, 5))
        x[0, 0] = 1
        y = gaussian_label(5, 5, 1.0)
        np.testing.assert_allclose(S.closed_form_ridge(x, y, 0.5)[:, :, 0], y.values / 1.5, atol=1e-12)

    def test_interpolates_at_zero_lambda(self, rng):
        from cotrack.circulant import correlation_response, forward_spectrum

        x = rng.standard_normal((6, 6, 2))
        y = gaussian_label(6, 6, 1.0)
        w = S.closed_form_ridge(x, y, 0.0)
        r = correlation_response(forward_spectrum(x), forward_spectrum(w)).values
        np.testing.assert_allclose(r, y.values, atol=1e-6)

    def test_shrinks_with_lambda(self, rng):
        x = rng.standard_normal((6, 6, 1))
        y = gaussian_label(6, 6, 1.0)
        norms = [np.linalg.norm(S.closed_form_ridge(x, y, lam)) for lam in (1, 10, 100)]
        assert norms[0] > norms[1] > norms[2]

    def test_matches_dense_ridge(self, rng):
        x = rng.standard_normal((4, 4, 2))
        y = gaussian_label(4, 4, 1.0)
        phi = circulant_matrix(x)
        ref = np.linalg.solve(phi.T @ phi + 0.3 * np.eye(32), phi.T @ y.values.ravel())
        np.testing.assert_allclose(S.closed_form_ridge(x, y, 0.3).ravel(), ref, atol=1e-10)

    def test_singular(self):
        x = np.ones((4, 4))  # spectrum is zero away from DC
        with pytest.raises(SingularError):
            S.closed_form_ridge(x, gaussian_label(4, 4, 1.0), 0.0)


def make_state(p, rng, mu):
    return S.ADMMState(Y=rng.standard_normal(p.n_vars), mu=mu)


class TestSubproblem:
    def test_penalty_dominated(self, rng):
        p = random_problem(rng, 6, 6, 2)
        bank = S.FilterBank.from_blocks([rng.standard_normal(s) for s in p.block_shapes], rng.standard_normal(p.n_vars))
        st_ = S.ADMMState(Y=np.zeros(p.n_vars), mu=1e12)
        w = S.subproblem_update(0, p, bank, st_, SolverConfig())
        np.testing.assert_allclose(w, bank.stacked_blocks()[0], atol=1e-4)

    def test_vanishing_penalty_is_ridge(self, rng):
        p = random_problem(rng, 6, 6, 2)
        cfg = SolverConfig(lambda0=0.0, lambda_pair=0.0, ridge_lambda=0.01)
        bank = S.FilterBank.from_blocks([rng.standard_normal(s) for s in p.block_shapes])
        ridge = S.closed_form_ridge(p.labeled.grids[1], p.label, 0.01)
        errs = []
        for mu in (1e-2, 1e-4, 1e-6, 1e-8):
            st_ = S.ADMMState(Y=np.zeros(p.n_vars), mu=mu)
            errs.append(rel(S.subproblem_update(1, p, bank, st_, cfg), ridge))
        assert all(b < a for a, b in zip(errs, errs[1:]))
        assert errs[-1] < 1e-5

    @pytest.mark.parametrize("sweep", ["gauss_seidel", "jacobi"])
    @pytest.mark.parametrize("shape", [(4, 4, 1), (8, 8, 2)])
    def test_block_gradient_vanishes(self, rng, sweep, shape):
        p = random_problem(rng, shape[0], shape[1], shape[2])
        cfg = SolverConfig(lambda_pair=0.7, ridge_lambda=0.05, sweep_mode=sweep)
        res = block_kkt_residuals(p, cfg, max_iter=3)
        assert len(res) == 6 and max(res) <= 1e-5

    def test_dense_flag_agrees(self, rng):
        p = random_problem(rng, 6, 6, 3)
        bank = S.ridge_start(p, SolverConfig())
        st_ = make_state(p, rng, 0.7)
        a = S.subproblem_update(0, p, bank, st_, SolverConfig())
        b = S.subproblem_update(0, p, bank, st_, SolverConfig(solve_mode="dense"))
        np.testing.assert_allclose(a, b, atol=1e-10)

    def test_bad_index(self, rng):
        p = random_problem(rng, 4, 4, 1)
        with pytest.raises(InvalidArgument):
            S.subproblem_update(2, p, S.ridge_start(p, SolverConfig()), make_state(p, rng, 1.0), SolverConfig())


class TestDualAndSchedule:
    def test_zero_residual_keeps_y(self, rng):
        bank = S.FilterBank.from_blocks([rng.standard_normal((3, 3, 1))])
        Y = rng.standard_normal(9)
        out = S.dual_update(S.ADMMState(Y=Y.copy(), mu=2.0), bank, SolverConfig())
        np.testing.assert_array_equal(out.Y, Y)
        assert out.k == 1 and out.primal_residual == 0 and out.mu == 3.0

    def test_capped_schedule(self):
        cfg = SolverConfig(rho=2.0, mu0=1.0, mu_max=4.0)
        assert S.mu_schedule(cfg, 6) == [1, 2, 4, 4, 4, 4]

    def test_update_direction(self, rng):
        bank = S.FilterBank.from_blocks([np.zeros((2, 2, 1))], np.ones(4))
        out = S.dual_update(S.ADMMState(Y=np.zeros(4), mu=0.5), bank, SolverConfig())
        np.testing.assert_allclose(out.Y, 0.5)
        assert out.primal_residual == pytest.approx(2.0)


class TestSolve:
    def test_ridge_degeneracy(self, rng):
        p = random_problem(rng, 8, 8, 2, n_features=1)
        cfg = SolverConfig(lambda0=0.0, lambda_pair=0.0)
        bank, st_ = S.solve_joint_filters(p, cfg)
        assert rel(bank.per_feature[0], S.closed_form_ridge(p.labeled.grids[0], p.label, cfg.ridge_lambda)) < 1e-6
        assert st_.converged

    @pytest.mark.parametrize("kw", [{"sweep_mode": "jacobi"}, EXACT])
    def test_identical_features_symmetric(self, rng, kw):
        x = rng.standard_normal((6, 6, 2))
        p = S.ProblemInstance.from_arrays([x, x, x])
        bank, _ = S.solve_joint_filters(p, SolverConfig(lambda_pair=0.5, **kw))
        for w in bank.per_feature[1:]:
            np.testing.assert_allclose(w, bank.per_feature[0], atol=1e-8)

    @pytest.mark.parametrize("kw", [{}, {"lambda_pair": 5.0}, {"lambda0": 1.0}, {"sweep_mode": "jacobi"}])
    def test_reaches_exact_optimum(self, rng, kw):
        p = random_problem(rng, 4, 4, 1)
        cfg = SolverConfig(**{**EXACT, **kw})
        bank, st_ = S.solve_joint_filters(p, cfg)
        assert st_.converged
        assert rel(bank.stacked, exact_optimum(p, cfg)) < 1e-6

    def test_default_schedule_near_optimum(self, rng):
        p = random_problem(rng, 6, 6, 1)
        cfg = SolverConfig()
        bank, st_ = S.solve_joint_filters(p, cfg)
        assert st_.converged and st_.primal_residual <= st_.epsilon
        assert rel(bank.stacked, exact_optimum(p, cfg)) < 1e-2

    @pytest.mark.parametrize("channels", [1, 2])
    def test_primal_criterion_reached(self, rng, channels):
        for _ in range(5):
            p = random_problem(rng, 6, 6, channels)
            bank, st_ = S.solve_joint_filters(p, SolverConfig())
            assert min(st_.primal_history) <= st_.epsilon
            if st_.converged:
                assert np.linalg.norm(bank.stacked - bank.concat()) <= st_.epsilon

    def test_converged_run_is_feasible(self, rng):
        for _ in range(5):
            p = random_problem(rng, 6, 6, 1)
            bank, st_ = S.solve_joint_filters(p, SolverConfig(**{**EXACT, "epsilon": 1e-8}))
            assert st_.converged
            assert np.linalg.norm(bank.stacked - bank.concat()) <= st_.epsilon

    def test_primal_residual_settles(self, rng):
        for _ in range(5):
            p = random_problem(rng, 6, 6, 1)
            _, st_ = S.solve_joint_filters(p, SolverConfig(**EXACT))
            tail = st_.primal_history[-10:]
            assert all(b <= a + 1e-9 for a, b in zip(tail, tail[1:]))

    def test_warm_start_same_fixed_point(self, rng):
        p = random_problem(rng, 6, 6, 1)
        cfg = SolverConfig(**EXACT)
        cold, _ = S.solve_joint_filters(p, cfg)
        perturbed = S.FilterBank.from_blocks([b + 0.1 * rng.standard_normal(b.shape) for b in cold.per_feature])
        warm, st_ = S.solve_joint_filters(p, cfg, warm_start=perturbed, max_iter=3000)
        assert st_.converged
        assert rel(warm.stacked, cold.stacked) <= 1e-5

    def test_warm_start_layout_checked(self, rng):
        p = random_problem(rng, 4, 4, 1)
        with pytest.raises(InvalidArgument):
            S.solve_joint_filters(p, SolverConfig(), warm_start=S.FilterBank.from_blocks([np.zeros((4, 4, 2))] * 2))

    def test_nan_is_numerical_error(self, rng, monkeypatch):
        p = random_problem(rng, 4, 4, 1)
        monkeypatch.setattr(S, "per_frequency_solve", lambda a, *args, **kw: np.full(a.shape, np.nan, complex))
        with pytest.raises(NumericalError):
            S.solve_joint_filters(p, SolverConfig())

    def test_zero_lambda0_does_not_stop_early(self, rng):
        # the prox is the identity, so the primal residual is zero from the start
        p = random_problem(rng, 4, 4, 1)
        cfg = SolverConfig(**{**EXACT, "lambda0": 0.0})
        bank, st_ = S.solve_joint_filters(p, cfg)
        assert st_.k > 1 and st_.primal_history[0] == 0
        assert rel(bank.stacked, exact_optimum(p, cfg)) < 1e-6

    def test_non_convergence_is_tagged(self, rng):
        p = random_problem(rng, 6, 6, 2)
        _, st_ = S.solve_joint_filters(p, SolverConfig(epsilon=1e-14, max_iter=2))
        assert not st_.converged and st_.k == 2

    def test_mu_non_decreasing_and_capped(self, rng):
        p = random_problem(rng, 6, 6, 1)
        cfg = SolverConfig(mu0=0.1, rho=2.0, mu_max=1.0, epsilon=1e-12, max_iter=30)
        _, st_ = S.solve_joint_filters(p, cfg)
        h = st_.mu_history
        assert all(b >= a for a, b in zip(h, h[1:])) and max(h) <= cfg.mu_max

    def test_agreement_ladder(self, rng):
        p = random_problem(rng, 6, 6, 1)
        d = []
        for lam in (0.0, 0.1, 1.0, 10.0):
            bank, _ = S.solve_joint_filters(p, SolverConfig(**{**EXACT, "lambda_pair": lam}))
            d.append(S.disagreement(p, bank))
        assert all(b < a for a, b in zip(d, d[1:]))

    def test_sparsity_ladder(self, rng):
        p = random_problem(rng, 6, 6, 2)
        zeros = []
        for lam in (0.0, 0.01, 0.1, 1.0):
            cfg = SolverConfig(**{**EXACT, "lambda0": lam, "prox_mode": "elementwise_soft_threshold"})
            bank, _ = S.solve_joint_filters(p, cfg)
            zeros.append(int(np.sum(bank.stacked == 0)))
        assert all(b >= a for a, b in zip(zeros, zeros[1:]))
        assert zeros[-1] > 0

    def test_trace_rows(self, rng):
        p = random_problem(rng, 4, 4, 1)
        buf = io.StringIO()
        _, st_ = S.solve_joint_filters(p, SolverConfig(), trace=buf)
        rows = buf.getvalue().splitlines()
        assert len(rows) == st_.k
        assert all(len(r.split(",")) == len(S.trace_header(2).split(",")) for r in rows)
        assert S.trace_header(2).startswith("iteration,mu,primal_residual")


class TestDenseReference:
    def test_agrees_with_spectral(self, rng):
        p = random_problem(rng, 4, 4, 1)
        cfg = SolverConfig(ridge_lambda=0.1)
        a, _ = S.solve_joint_filters(p, cfg)
        b, _ = S.dense_reference_solve(p, cfg)
        assert rel(a.stacked, b.stacked) < 1e-6 and rel(a.concat(), b.concat()) < 1e-6

    def test_ridge_oracle(self, rng):
        p = random_problem(rng, 4, 4, 2, n_features=1)
        cfg = SolverConfig(lambda0=0.0, lambda_pair=0.0, ridge_lambda=0.05)
        b, _ = S.dense_reference_solve(p, cfg)
        assert rel(b.per_feature[0], S.closed_form_ridge(p.labeled.grids[0], p.label, 0.05)) < 1e-6

    def test_size_guard(self, rng):
        p = random_problem(rng, 32, 32, 31, n_features=1)
        with pytest.raises(InvalidArgument):
            S.dense_reference_solve(p, SolverConfig())
