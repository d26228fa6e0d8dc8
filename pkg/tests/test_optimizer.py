import numpy as np
import pytest

from risfp import ops
from risfp.channel import SystemConfig, draw_channels
from risfp.optimizer import (
    ConvergenceTrace,
    initial_state,
    run_algorithm1,
    run_algorithm2,
)


def make_instance(seed, m=4, n=16, k=3, **kw):
    cfg = SystemConfig(num_bs_antennas=m, num_ris_elements=n, num_users=k, rng_seed=seed, **kw)
    return cfg, draw_channels(cfg).stacked_cascaded()


class TestInit:
    def test_matched_filter_feasible(self):
        cfg, H = make_instance(0)
        phi0, W0 = initial_state(H, cfg)
        np.testing.assert_allclose(np.abs(phi0), 1.0, atol=1e-12)
        assert float(np.sum(np.abs(W0) ** 2)) == pytest.approx(cfg.transmit_power, rel=1e-9)

    def test_random_init_needs_rng(self):
        cfg, H = make_instance(0)
        with pytest.raises(ValueError):
            initial_state(H, cfg, kind="random")
        phi0, W0 = initial_state(H, cfg, kind="random", rng=np.random.default_rng(0))
        np.testing.assert_allclose(np.abs(phi0), 1.0, atol=1e-12)

    def test_infeasible_explicit_init_rejected(self):
        cfg, H = make_instance(0)
        phi0, W0 = initial_state(H, cfg)
        with pytest.raises(ValueError, match="unit-modulus"):
            run_algorithm1(H, cfg, init=(phi0 * 1.5, W0))
        with pytest.raises(ValueError, match="power"):
            run_algorithm1(H, cfg, init=(phi0, W0 * 3.0))


class TestAlgorithm1:
    def test_single_antenna_single_user(self):
        # closed-form optimum: full-power matched filter, rate log(1 + P |h|^2 / sigma^2)
        cfg, H = make_instance(5, m=1, n=1, k=1)
        state, trace = run_algorithm1(H, cfg)
        assert len(trace) <= 3
        h = ops.effective_channels(H, state.phi)
        expected = np.log1p(
            cfg.transmit_power * np.linalg.norm(h) ** 2 / cfg.noise_power
        )
        assert trace.objective_f1[-1] == pytest.approx(float(expected), rel=1e-9)
        assert float(np.sum(np.abs(state.W) ** 2)) == pytest.approx(
            cfg.transmit_power, rel=1e-6
        )

    def test_monotone_f1a_and_constraints(self):
        for seed in range(10):
            cfg, H = make_instance(seed)
            state, trace = run_algorithm1(H, cfg, tol=1e-6, max_iters=60)
            trace.validate(step_tol=1e-9)
            state.validate(cfg.transmit_power)

    def test_f1a_upper_bounds(self):
        # f1a <= f1 <= sum log(1 + gamma_max) at each iterate's channels
        cfg, H = make_instance(3)
        state, trace = run_algorithm1(H, cfg, tol=1e-6, max_iters=60)
        assert np.all(trace.objective_f1a <= trace.objective_f1 + 1e-9)
        h = ops.effective_channels(H, state.phi)
        cap = float(
            np.log1p(
                np.linalg.norm(h, axis=1) ** 2 * cfg.transmit_power / cfg.noise_power
            ).sum()
        )
        assert trace.objective_f1a[-1] <= cap + 1e-9

    def test_alpha_fixpoint_at_convergence(self):
        cfg, H = make_instance(7)
        state, trace = run_algorithm1(H, cfg, tol=1e-10, max_iters=500)
        h = ops.effective_channels(H, state.phi)
        gamma = ops.sinr_per_user(state.W, h, cfg.noise_power)
        rel = np.abs(gamma - state.alpha) / (1.0 + state.alpha)
        assert float(rel.max()) <= 1e-6

    def test_trace_csv_roundtrip(self, tmp_path):
        cfg, H = make_instance(1)
        _, trace = run_algorithm1(H, cfg)
        path = tmp_path / "trace.csv"
        trace.write_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "iteration,f1,f1a,wall_time"
        assert len(lines) == len(trace) + 1
        first = lines[1].split(",")
        assert float(first[1]) == trace.objective_f1[0]

    def test_validate_rejects_decreasing_trace(self):
        trace = ConvergenceTrace(
            objective_f1=np.array([1.0, 2.0]),
            objective_f1a=np.array([1.0, 0.5]),
            objective_f3=np.zeros(2),
            phi_accepted=np.ones(2, bool),
            wall_time=np.zeros(2),
            terminated_by="threshold",
        )
        with pytest.raises(ValueError, match="decreased"):
            trace.validate()

    def test_max_iters_respected(self):
        cfg, H = make_instance(2)
        _, trace = run_algorithm1(H, cfg, tol=-1.0, max_iters=12)
        assert len(trace) == 12
        assert trace.terminated_by == "max_iters"

    def test_more_users_than_antennas(self):
        cfg, H = make_instance(8, m=1, n=4, k=3)
        state, trace = run_algorithm1(H, cfg, tol=1e-6, max_iters=60)
        trace.validate(step_tol=1e-9)
        state.validate(cfg.transmit_power)
        assert np.all(np.isfinite(trace.objective_f1))

    def test_vanishing_user_channel(self):
        # one user essentially unreachable: its rate pins at zero, no NaNs
        cfg, H = make_instance(9, k=2)
        H = H.copy()
        H[1] *= 1e-12
        state, trace = run_algorithm1(H, cfg, tol=1e-6, max_iters=60)
        trace.validate(step_tol=1e-9)
        h = ops.effective_channels(H, state.phi)
        gamma = ops.sinr_per_user(state.W, h, cfg.noise_power)
        assert np.all(np.isfinite(gamma))

    def test_multiple_inner_sweeps_stay_monotone(self):
        cfg, H = make_instance(6)
        state, trace = run_algorithm1(H, cfg, tol=1e-6, max_iters=60, n_sweeps=3)
        trace.validate(step_tol=1e-9)
        state.validate(cfg.transmit_power)

    def test_record_exposes_internals(self):
        cfg, H = make_instance(4, n=6)
        record = []
        run_algorithm1(H, cfg, tol=-1.0, max_iters=3, record=record)
        assert len(record) == 3
        assert {"beta", "epsilon", "b", "h", "lam"} <= set(record[0])


class TestAlgorithm2:
    def test_equals_algorithm1_with_perfect_estimates(self):
        cfg, H = make_instance(11)
        s1, t1 = run_algorithm1(H, cfg)
        s2, t2, realized = run_algorithm2(H, H, cfg)
        assert np.array_equal(t1.objective_f1a, t2.objective_f1a)
        assert np.array_equal(t1.objective_f1, t2.objective_f1)
        assert np.array_equal(s1.W, s2.W)
        assert np.array_equal(s1.phi, s2.phi)
        assert realized.sum_rate == pytest.approx(t2.objective_f1[-1], rel=1e-12)

    def test_designed_objective_monotone_with_errors(self):
        for seed in range(10):
            cfg, H = make_instance(seed)
            noisy = H + 0.3 * np.abs(H).mean() * (
                np.random.default_rng(seed).standard_normal(H.shape)
                + 1j * np.random.default_rng(seed + 1).standard_normal(H.shape)
            )
            _, trace, realized = run_algorithm2(noisy, H, cfg, tol=1e-6, max_iters=60)
            trace.validate(step_tol=1e-9)
            assert realized.sum_rate >= 0.0
            assert realized.per_iteration.shape == (len(trace),)

    def test_shape_mismatch_rejected(self):
        cfg, H = make_instance(0)
        with pytest.raises(ValueError, match="shapes differ"):
            run_algorithm2(H[:, :, :-1], H, cfg)
