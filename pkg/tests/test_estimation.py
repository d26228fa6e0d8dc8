import numpy as np
import pytest

from conftest import rand_complex
from risfp.channel import SystemConfig, draw_channels
from risfp.estimation import (
    dft_pilot_matrix,
    dft_pilot_plan,
    estimate_cascaded,
    expected_ls_error,
    ls_estimate,
    simulate_uplink_pilots,
)


class TestDftMatrix:
    def test_row_vector(self):
        np.testing.assert_allclose(dft_pilot_matrix(1, 2), [[1.0, 1.0]], atol=1e-15)

    def test_two_point(self):
        np.testing.assert_allclose(
            dft_pilot_matrix(2, 2), [[1.0, 1.0], [1.0, -1.0]], atol=1e-12
        )

    def test_orthogonal_rows(self):
        psi = dft_pilot_matrix(4, 8)
        np.testing.assert_allclose(psi @ psi.conj().T, 8 * np.eye(4), atol=1e-12)

    def test_short_pilots_rejected(self):
        with pytest.raises(ValueError, match="must be >="):
            dft_pilot_matrix(4, 3)
        with pytest.raises(ValueError):
            dft_pilot_plan(4, 2)

    def test_qpsk_symbols_unit_modulus(self):
        plan = dft_pilot_plan(4, 8, symbols="qpsk", rng=np.random.default_rng(0))
        np.testing.assert_allclose(np.abs(plan.symbols), 1.0, atol=1e-12)
        plan.validate()


class TestPilotSimulation:
    def test_noiseless_is_exact(self, rng):
        plan = dft_pilot_plan(6, 6, pilot_power=2.0, uplink_noise_power=0.0)
        H = rand_complex(rng, (3, 6))
        y = simulate_uplink_pilots(H, plan, rng)
        np.testing.assert_allclose(y, H @ plan.X, atol=1e-15)

    def test_zero_channel_noise_variance(self):
        plan = dft_pilot_plan(4, 4, uplink_noise_power=0.7)
        rng = np.random.default_rng(3)
        samples = [
            simulate_uplink_pilots(np.zeros((8, 4), complex), plan, rng)
            for _ in range(400)
        ]
        var = float(np.mean(np.abs(np.stack(samples)) ** 2))
        assert var == pytest.approx(0.7, rel=0.03)

    def test_deterministic_for_fixed_seed(self, rng):
        plan = dft_pilot_plan(4, 8, uplink_noise_power=1e-3)
        H = rand_complex(rng, (2, 4))
        y1 = simulate_uplink_pilots(H, plan, np.random.default_rng(9))
        y2 = simulate_uplink_pilots(H, plan, np.random.default_rng(9))
        assert np.array_equal(y1, y2)

    def test_shape_mismatch(self, rng):
        plan = dft_pilot_plan(4, 8)
        with pytest.raises(ValueError, match="elements"):
            simulate_uplink_pilots(rand_complex(rng, (2, 5)), plan, rng)


class TestLsEstimate:
    def test_noiseless_round_trip(self, rng):
        plan = dft_pilot_plan(8, 8, pilot_power=3.0, uplink_noise_power=0.0)
        H = rand_complex(rng, (4, 8))
        est = ls_estimate(simulate_uplink_pilots(H, plan, rng), plan)
        assert np.linalg.norm(est - H) / np.linalg.norm(H) <= 1e-9

    def test_error_equals_projected_noise(self, rng):
        # with known injected noise, H - Hhat = -N X^+
        plan = dft_pilot_plan(4, 8, pilot_power=1.5, uplink_noise_power=0.0)
        H = rand_complex(rng, (3, 4))
        noise = rand_complex(rng, (3, 8), scale=0.1)
        est = ls_estimate(H @ plan.X + noise, plan)
        x = plan.X
        x_pinv = x.conj().T @ np.linalg.inv(x @ x.conj().T)
        np.testing.assert_allclose(H - est, -noise @ x_pinv, atol=1e-12)

    def test_mean_error_matches_analytic(self):
        # (M, N, L, sigma_n^2, P_k) = (4, 16, 16, 1, 1): expectation is 4.0
        plan = dft_pilot_plan(16, 16, pilot_power=1.0, uplink_noise_power=1.0)
        assert expected_ls_error(plan, 4) == pytest.approx(4.0, abs=1e-12)
        rng = np.random.default_rng(17)
        H = np.zeros((4, 16), complex)
        errors = [
            float(np.linalg.norm(H - ls_estimate(simulate_uplink_pilots(H, plan, rng), plan)) ** 2)
            for _ in range(3000)
        ]
        assert float(np.mean(errors)) == pytest.approx(4.0, rel=0.03)


class TestExpectedError:
    def test_zero_noise(self):
        plan = dft_pilot_plan(4, 8, uplink_noise_power=0.0)
        assert expected_ls_error(plan, 4) == 0.0

    def test_doubling_length_halves_error(self):
        a = expected_ls_error(dft_pilot_plan(8, 16, uplink_noise_power=1.0), 4)
        b = expected_ls_error(dft_pilot_plan(8, 32, uplink_noise_power=1.0), 4)
        assert a == pytest.approx(2.0 * b, rel=1e-12)

    def test_power_scaling(self):
        # amplitude factor P_k enters squared
        a = expected_ls_error(dft_pilot_plan(8, 16, pilot_power=1.0, uplink_noise_power=1.0), 4)
        b = expected_ls_error(dft_pilot_plan(8, 16, pilot_power=2.0, uplink_noise_power=1.0), 4)
        assert a == pytest.approx(4.0 * b, rel=1e-12)


class TestStatisticalProperties:
    def test_unbiasedness(self, rng):
        plan = dft_pilot_plan(4, 8, pilot_power=1.0, uplink_noise_power=0.5)
        H = rand_complex(rng, (2, 4))
        trials = 4000
        acc = np.zeros_like(H)
        gen = np.random.default_rng(5)
        for _ in range(trials):
            acc += ls_estimate(simulate_uplink_pilots(H, plan, gen), plan)
        mean_err = acc / trials - H
        entry_sigma = np.sqrt(expected_ls_error(plan, 2) / H.size)
        assert np.max(np.abs(mean_err)) <= 4.5 * entry_sigma / np.sqrt(trials)

    def test_error_independent_of_channel(self, rng):
        # Welch-style z statistic on error norms for two different channels
        plan = dft_pilot_plan(4, 8, pilot_power=1.0, uplink_noise_power=1.0)
        gen = np.random.default_rng(6)
        norms = []
        for scale in (1.0, 10.0):
            H = rand_complex(rng, (3, 4), scale=scale)
            errs = [
                float(np.linalg.norm(H - ls_estimate(simulate_uplink_pilots(H, plan, gen), plan)) ** 2)
                for _ in range(800)
            ]
            norms.append(np.asarray(errs))
        a, b = norms
        z = abs(a.mean() - b.mean()) / np.sqrt(a.var(ddof=1) / len(a) + b.var(ddof=1) / len(b))
        assert z <= 3.0

    def test_estimate_cascaded_with_channelset(self):
        cfg = SystemConfig(num_bs_antennas=2, num_ris_elements=8, num_users=2, rng_seed=0)
        channels = draw_channels(cfg)
        plan = dft_pilot_plan(8, 16, pilot_power=10.0, uplink_noise_power=1e-14)
        result = estimate_cascaded(channels, plan, np.random.default_rng(1))
        result.validate()
        assert len(result.H_hat) == 2
        assert result.stacked().shape == (2, 2, 8)
        for k in range(2):
            scaled = result.per_user_sq_error[k] / np.linalg.norm(channels.cascaded[k]) ** 2
            assert scaled < 1.0  # meaningful estimates at this pilot SNR

    def test_result_csv(self, tmp_path):
        cfg = SystemConfig(num_bs_antennas=2, num_ris_elements=4, num_users=2, rng_seed=0)
        plan = dft_pilot_plan(4, 4)
        result = estimate_cascaded(draw_channels(cfg), plan, np.random.default_rng(0))
        path = tmp_path / "est.csv"
        result.write_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0].startswith("user,sq_error,pilot_length")
        assert len(lines) == 3
