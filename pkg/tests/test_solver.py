import json

import numpy as np
import pytest

from tssqp import (
    NoiseModel,
    SolverConfig,
    init_state,
    load_problem,
    run,
    run_ablation,
    solve_step,
    step,
)
from tssqp.solver import BUDGET_EXHAUSTED, CONVERGED, FAILED


def _config(**kwargs) -> SolverConfig:
    base = dict(strategy="linesearch", noise=NoiseModel(0.0, seed=0))
    base.update(kwargs)
    return SolverConfig(**base)


def _write_problem(tmp_path, name="toy", **overrides):
    spec = {
        "name": name, "n": 2, "m": 1, "kind": "quadratic_linear",
        "Q": [[1.0, 0.0], [0.0, 1.0]], "g0": [0.0, 0.0],
        "A": [[1.0, 1.0]], "b": [1.0],
    }
    spec.update(overrides)
    path = tmp_path / f"{name}.json"
    path.write_text(json.dumps(spec))
    return str(path)


class TestStep:
    @pytest.mark.parametrize("strategy", ["fixed", "adaptive", "linesearch"])
    def test_kkt_point_is_a_fixed_point(self, strategy):
        pb = load_problem("qp2")
        config = _config(strategy=strategy)
        state = init_state(pb, config, x0=np.array([1.0, 0.0]))
        state, rec = step(state, pb, config)
        np.testing.assert_allclose(state.x, [1.0, 0.0], atol=1e-12)
        assert rec.stat_inf == pytest.approx(0.0, abs=1e-12)
        assert rec.c_inf == 0.0
        np.testing.assert_allclose(rec.d, 0.0, atol=1e-12)

    def test_qp2_restoration_step(self):
        # fixed strategy, theta = 0: alpha = nu = 1, step lands on the constraint
        pb = load_problem("qp2")
        config = _config(strategy="fixed", nu=1.0, theta=0.0, eta=0.1)
        state = init_state(pb, config, x0=np.zeros(2))
        state, rec = step(state, pb, config)
        np.testing.assert_allclose(rec.v, [1.0, 0.0], atol=1e-12)
        np.testing.assert_allclose(rec.u, [0.0, 0.0], atol=1e-12)
        np.testing.assert_allclose(state.x, [1.0, 0.0], atol=1e-12)

    def test_sphere3_linesearch_certifies_or_safeguards(self):
        pb = load_problem("sphere3")
        config = _config()
        state = init_state(pb, config)
        x0 = state.x.copy()
        state, rec = step(state, pb, config)
        c0 = np.abs(pb.eval_fn(x0)[2]).sum()
        c1 = np.abs(pb.eval_fn(x0 + rec.alpha * rec.d)[2]).sum()
        assert rec.hit_safeguard or c1 <= (1.0 - config.xi * rec.alpha) * c0

    def test_alpha_always_in_range(self):
        pb = load_problem("sphere3")
        for strategy in ("fixed", "adaptive", "linesearch", "ablation"):
            for rule in ("lower", "upper"):
                if strategy in ("linesearch", "ablation") and rule == "upper":
                    continue
                config = _config(strategy=strategy, alpha_rule=rule, max_iters=50,
                                 noise=NoiseModel(1e-3, seed=1))
                trace = run(pb, config, seed=4)
                for rec in trace.records:
                    assert rec.alpha_lo <= rec.alpha <= rec.alpha_hi


class TestRun:
    def test_qp2_linesearch_defaults_converges_fast(self):
        trace = run(load_problem("qp2"), _config(), seed=0)
        assert trace.status == CONVERGED
        assert trace.iterations <= 10
        # hand-checked two-step trace: ||c_0||_1 = 1 so the search starts at
        # nu/sqrt(q0^2 + 1) + theta*beta = 1.1 and accepts; the next start is
        # nu/sqrt(1 + 0.1) + 0.1 and accepts again
        r0, r1 = trace.records[0], trace.records[1]
        assert r0.alpha == pytest.approx(1.1, abs=1e-12)
        np.testing.assert_allclose(r1.x, [1.1, 0.0], atol=1e-12)
        assert r1.alpha == pytest.approx(1.0 / np.sqrt(1.1) + 0.1, abs=1e-12)
        assert r1.c_l1 == pytest.approx(0.1, abs=1e-12)

    def test_qplin5_fixed_converges(self):
        # nu chosen under the admissible-stepsize bound evaluated for this
        # instance (sigma = 1/2, tau = 1/4, L = lambda_max(Q), linear c so the
        # Jacobian Lipschitz constant is 0, kappa_v = 1/sigma_min(A));
        # eta sized so the tangential rate is useful within the budget
        from tssqp import nu_upper_bound
        from tssqp.problems import _QPLIN5_A, _QPLIN5_Q

        lip_grad = float(np.linalg.eigvalsh(_QPLIN5_Q).max())
        kappa_v = 1.0 / np.linalg.svd(_QPLIN5_A, compute_uv=False).min()
        nu = 0.1
        assert nu <= nu_upper_bound(0.5, kappa_v, 0.25, lip_grad, 0.0)
        config = _config(strategy="fixed", nu=nu, eta=10.0, max_iters=1000,
                         alpha_rule="lower")
        trace = run(load_problem("qplin5"), config, seed=0)
        assert trace.status == CONVERGED

    def test_zero_budget(self):
        trace = run(load_problem("qp2"), _config(max_iters=0), seed=0)
        assert trace.status == BUDGET_EXHAUSTED
        assert trace.records == [] and trace.iterations == 0
        # reported measures come from the start point
        assert trace.feas_error == pytest.approx(1.0)

    def test_trace_determinism(self):
        pb = load_problem("sphere3")
        config = _config(noise=NoiseModel(1e-1, seed=5), max_iters=60)
        t1 = run(pb, config, seed=9)
        t2 = run(pb, config, seed=9)
        assert t1.status == t2.status and t1.iterations == t2.iterations
        for r1, r2 in zip(t1.records, t2.records):
            np.testing.assert_array_equal(r1.x, r2.x)
            np.testing.assert_array_equal(r1.d, r2.d)
            assert r1.alpha == r2.alpha

    def test_feasible_start_stays_feasible_on_linear_constraint(self):
        pb = load_problem("qp2")
        config = _config(strategy="fixed", nu=0.5, eta=1.0, max_iters=100,
                         noise=NoiseModel(1e-2, seed=3))
        trace = run(pb, config, seed=1, x0=np.array([1.0, 0.7]))
        assert trace.records, "run should take steps (stationarity not yet met)"
        for rec in trace.records:
            assert rec.c_inf <= 1e-8
            assert rec.v_norm <= 1e-8

    def test_noise_free_tangential_matches_true_step(self):
        pb = load_problem("sphere3")
        trace = run(pb, _config(max_iters=40), seed=0)
        H = trace.h_matrix
        for rec in trace.records:
            _, grad, c, jac = pb.eval_fn(rec.x)
            _, u_true, _, _, _ = solve_step(H, jac, grad, c)
            assert np.abs(rec.u - u_true).max() <= 1e-8

    def test_decomposition_invariants_along_run(self):
        pb = load_problem("quadsphere4")
        trace = run(pb, _config(noise=NoiseModel(1e-3, seed=2), max_iters=80), seed=3)
        for rec in trace.records:
            _, _, c, jac = pb.eval_fn(rec.x)
            assert np.abs(jac @ rec.u).max() <= 1e-8 * max(1.0, np.abs(rec.u).max())
            assert np.abs(jac @ rec.v + c).max() <= 1e-8 * max(1.0, np.abs(c).max())
            assert abs(rec.u @ rec.v) <= 1e-8 * rec.u_norm * rec.v_norm

    def test_failed_run_keeps_records(self, tmp_path):
        path = _write_problem(tmp_path, name="singular", m=2,
                              A=[[1.0, 1.0], [2.0, 2.0]], b=[1.0, 2.0])
        pb = load_problem(path)
        trace = run(pb, _config(), seed=0)
        assert trace.status == FAILED
        assert trace.fail_reason == "rank_deficient_jacobian"
        assert trace.records == []

    def test_stat_every_sparser(self):
        pb = load_problem("sphere3")
        config = _config(stat_every=10, max_iters=300)
        trace = run(pb, config, seed=0)
        assert trace.status == CONVERGED
        skipped = [r for r in trace.records if np.isnan(r.stat_inf)]
        assert skipped, "some records should skip the stationarity measure"

    def test_adaptive_strategy_converges_deterministically(self):
        pb = load_problem("sphere3")
        config = _config(strategy="adaptive", alpha_rule="upper", max_iters=1000,
                         eta=1.0, nu=1.0)
        trace = run(pb, config, seed=0)
        assert trace.status == CONVERGED
        lows = [r.alpha_lo for r in trace.records]
        assert all(b <= a + 1e-15 for a, b in zip(lows, lows[1:]))
        betas = [r.beta for r in trace.records]
        assert all(b <= a + 1e-15 for a, b in zip(betas, betas[1:]))


class TestAblation:
    def test_deterministic_qp2_converges(self):
        trace = run_ablation(load_problem("qp2"), _config(), seed=0)
        assert trace.status == CONVERGED
        x_star, _ = load_problem("qp2").known_kkt
        np.testing.assert_allclose(trace.x_final, x_star, atol=1e-4)

    def test_tiny_beta_displacement_bound(self):
        pb = load_problem("sphere3")
        config = _config(strategy="ablation", eta=1e-6, max_iters=1)
        state = init_state(pb, config)
        x0 = state.x.copy()
        _, grad, c, jac = pb.eval_fn(x0)
        ksol, _, _, _, _ = solve_step(np.eye(3), jac, grad, c)
        trace = run(pb, config, seed=0)
        moved = np.linalg.norm(trace.x_final - x0)
        assert moved <= 1e-5 * np.linalg.norm(ksol.p) * trace.records[0].alpha_hi

    def test_sphere3_noisy_medians_favor_two_stepsizes(self):
        pb = load_problem("sphere3")
        ls_cfg = _config(noise=NoiseModel(1e-1, seed=11))
        ab_cfg = _config(strategy="ablation", noise=NoiseModel(1e-1, seed=11))
        ls = [run(pb, ls_cfg, seed=s).feas_error for s in range(10)]
        ab = [run_ablation(pb, ab_cfg, seed=s).feas_error for s in range(10)]
        assert np.median(ab) >= np.median(ls)


class TestConfigValidation:
    @pytest.mark.parametrize("kwargs", [
        dict(strategy="sgd"),
        dict(max_iters=-1),
        dict(feas_tol=0.0),
        dict(eta=0.0),
        dict(xi=2.0),
        dict(strategy="adaptive", alpha_rule="backtrack"),
        dict(h_policy="bfgs"),
        dict(stat_every=0),
    ])
    def test_invalid(self, kwargs):
        from tssqp import ConfigError

        with pytest.raises(ConfigError):
            _config(**kwargs).validate()
