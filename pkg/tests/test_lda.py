import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from p300snr.accuracy import SpellerGeometry, score_moments, symbol_accuracy
from p300snr.errors import DataError, NumericalError
from p300snr.lda import (
    LdaEstimates, Shrinkage, average_stimulus_signals, correctness_by_cycles, detect_symbol,
    fit_lda, fit_lda_trials, load_estimates, oracle_weights, save_estimates, score)
from p300snr.session import SessionConfig
from p300snr.simulate import (
    build_model, make_rng, make_synthetic_model, random_targets, sample_trial, simulate_session)

SIX = SpellerGeometry()


def session_for(model, n_symbols, cycles=15, seed=0):
    cfg = SessionConfig(SIX, cycles, random_targets(SIX, n_symbols, seed + 1000), seed)
    return simulate_session(model, cfg)


class TestFit:
    def test_noiseless_with_ridge(self):
        x = np.array([[0.0, 0.0]] * 3 + [[1.0, 0.0]] * 3)
        est = fit_lda(x, [0, 0, 0, 1, 1, 1], Shrinkage.fixed(1.0))
        np.testing.assert_allclose(est.weights, [1.0, 0.0])

    def test_one_dimensional_by_hand(self):
        est = fit_lda([[-1.0], [1.0], [1.0], [3.0]], [0, 0, 1, 1], Shrinkage.fixed(0.0))
        assert est.mu0_hat[0] == pytest.approx(0.0)
        assert est.mu1_hat[0] == pytest.approx(2.0)
        assert est.sigma_hat[0, 0] == pytest.approx(1.0)
        assert est.weights[0] == pytest.approx(2.0)

    def test_mismatched_dimensions(self):
        with pytest.raises(DataError):
            fit_lda_trials([([0.0, 1.0], 0), ([1.0], 1), ([0.0, 0.0], 0), ([2.0, 1.0], 1)])

    def test_insufficient_class(self):
        with pytest.raises(DataError):
            fit_lda([[0.0], [1.0], [2.0]], [0, 0, 1])

    def test_singular_reports_lambda(self):
        x = np.array([[0.0, 0.0]] * 3 + [[1.0, 0.0]] * 3)
        with pytest.raises(NumericalError, match="lambda = 0.0"):
            fit_lda(x, [0, 0, 0, 1, 1, 1], Shrinkage.fixed(0.0))

    def test_pooled_ml_covariance_and_solve(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((50, 4))
        y = np.r_[np.zeros(30), np.ones(20)].astype(int)
        est = fit_lda(x, y, Shrinkage.relative(1e-3))
        c0 = x[y == 0] - x[y == 0].mean(0)
        c1 = x[y == 1] - x[y == 1].mean(0)
        np.testing.assert_allclose(est.sigma_hat, (c0.T @ c0 + c1.T @ c1) / 50, atol=1e-14)
        lam = 1e-3 * np.trace(est.sigma_hat) / 4
        assert est.shrinkage == pytest.approx(lam)
        a = est.sigma_hat + lam * np.eye(4)
        residual = a @ est.weights - est.mean_difference
        assert np.linalg.norm(residual) <= 1e-8 * np.linalg.norm(est.mean_difference)

    def test_converges_to_oracle(self):
        model = make_synthetic_model(8, 1.0, "ar1", rho=0.4, rng=6)
        rng = make_rng(2)
        labels = (rng.random(100_000) < 0.5).astype(int)
        x = np.stack([sample_trial(model, bool(l), rng) for l in labels])
        w_fit = fit_lda(x, labels, Shrinkage.fixed(0.0)).weights
        w_true = oracle_weights(model).weights
        assert np.linalg.norm(w_fit - w_true) / np.linalg.norm(w_true) <= 0.05

    def test_shrinkage_parse(self):
        assert Shrinkage.parse("fixed:0.5") == Shrinkage.fixed(0.5)
        assert Shrinkage.parse("1e-4") == Shrinkage.relative(1e-4)


class TestScore:
    def test_dot(self):
        est = oracle_weights(build_model(np.zeros(3), np.eye(3)[0], np.eye(3)))
        assert score(est, [3.0, 5.0, 7.0]) == 3.0
        assert score(est, np.zeros(3)) == 0.0

    @settings(max_examples=50, deadline=None)
    @given(st.floats(-10, 10), st.floats(-10, 10), st.integers(0, 2 ** 32 - 1))
    def test_linear(self, a, b, seed):
        rng = np.random.default_rng(seed)
        w, x, y = rng.standard_normal((3, 5))
        est = LdaEstimates(np.zeros(5), w, np.eye(5), w)
        assert score(est, a * x + b * y) == pytest.approx(a * score(est, x) + b * score(est, y),
                                                          abs=1e-12 * (1 + abs(a) + abs(b)) * 10)

    def test_dimension_mismatch(self):
        est = LdaEstimates(np.zeros(2), np.ones(2), np.eye(2), np.ones(2))
        with pytest.raises(DataError):
            score(est, np.ones(3))


class TestDetection:
    def test_single_cycle_average_is_trial(self):
        s = session_for(make_synthetic_model(4, 1.0, rng=0), 2)
        avg = average_stimulus_signals(s, 1, 1)
        for t in s.trials:
            if t.symbol_index == 1 and t.cycle_index == 0:
                np.testing.assert_array_equal(avg[t.stimulus_id], t.features)

    def test_full_averages_count(self):
        s = session_for(make_synthetic_model(4, 1.0, rng=0), 1)
        assert average_stimulus_signals(s, 0, 15).shape == (12, 4)

    def test_noiseless_target_average(self):
        m = build_model(np.zeros(3), np.ones(3), 1e-30 * np.eye(3))
        s = session_for(m, 3)
        row, col = s.config.symbols[2]
        avg = average_stimulus_signals(s, 2, 15)
        np.testing.assert_allclose(avg[row], np.ones(3), atol=1e-12)
        np.testing.assert_allclose(avg[6 + col], np.ones(3), atol=1e-12)

    def test_noiseless_detects_every_symbol(self):
        m = build_model(np.zeros(3), np.ones(3), 1e-12 * np.eye(3))
        s = session_for(m, 20)
        est = oracle_weights(m)
        for i, (row, col) in enumerate(s.config.symbols):
            res = detect_symbol(est, s, i, 1)
            assert (res.row, res.col) == (row, col)

    def test_out_of_range(self):
        s = session_for(make_synthetic_model(2, 1.0, rng=0), 2)
        est = oracle_weights(make_synthetic_model(2, 1.0, rng=0))
        with pytest.raises(DataError):
            detect_symbol(est, s, 2, 1)
        with pytest.raises(DataError):
            detect_symbol(est, s, 0, 16)
        with pytest.raises(DataError):
            average_stimulus_signals(s, 0, 0)

    def test_ties_go_to_lowest_index(self):
        s = session_for(make_synthetic_model(2, 1.0, rng=0), 1)
        est = LdaEstimates(np.zeros(2), np.zeros(2), np.eye(2), np.zeros(2))
        res = detect_symbol(est, s, 0, 15)
        assert (res.row, res.col) == (0, 0)

    def test_vectorized_agrees_with_detect_symbol(self):
        m = make_synthetic_model(5, 0.7, rng=3)
        s = session_for(m, 30)
        est = oracle_weights(m)
        fast = correctness_by_cycles(est, s)
        for i in range(30):
            for n in (1, 2, 7, 15):
                res = detect_symbol(est, s, i, n)
                assert fast[i, n - 1] == ((res.row, res.col) == s.config.symbols[i])

    @pytest.mark.parametrize("scale,shift", [(3.0, 0.0), (0.01, 0.0), (1.0, 5.0)])
    def test_argmax_invariance(self, scale, shift):
        m = make_synthetic_model(5, 0.7, rng=3)
        s = session_for(m, 10)
        est = oracle_weights(m)
        for i in range(10):
            base = detect_symbol(est, s, i, 3)
            scores = scale * np.r_[base.row_scores, base.col_scores] + shift
            assert (int(np.argmax(scores[:6])), int(np.argmax(scores[6:]))) == (base.row, base.col)

    def test_model_scaling_keeps_detection(self):
        m = make_synthetic_model(5, 0.7, rng=3)
        s = session_for(m, 10)
        c = 4.0
        scaled = build_model(c * m.mu0, c * m.mu1, c * c * m.sigma)
        # same noise draws scaled by c
        s_scaled = type(s)(s.config, c * s.features, s.labels, s.stimulus_ids, s.cycle_indices,
                           s.symbol_indices)
        a = correctness_by_cycles(oracle_weights(m), s)
        b = correctness_by_cycles(oracle_weights(scaled), s_scaled)
        np.testing.assert_array_equal(a, b)

    def test_chance_at_zero_snr(self):
        m = make_synthetic_model(4, 0.0, rng=1)
        s = session_for(m, 3000, cycles=2)
        est = LdaEstimates(m.mu0, m.mu1, m.sigma, np.random.default_rng(0).standard_normal(4))
        p = correctness_by_cycles(est, s)[:, 1].mean()
        assert abs(p - 1 / 36) <= 3 * math.sqrt((1 / 36) * (35 / 36) / 3000)


class TestOracleWeights:
    def test_identity(self):
        est = oracle_weights(build_model(np.zeros(3), np.eye(3)[0], np.eye(3)))
        np.testing.assert_allclose(est.weights, np.eye(3)[0])
        assert est.shrinkage == 0.0

    def test_hand_system(self):
        sigma = np.array([[4.0, 2.0], [2.0, 3.0]])
        est = oracle_weights(build_model(np.zeros(2), [1.0, 1.0], sigma))
        # [[4,2],[2,3]] w = [1,1]  ->  w = [1/8, 1/4]
        np.testing.assert_allclose(est.weights, [0.125, 0.25], atol=1e-15)

    def test_averaged_target_score_moments(self):
        m = make_synthetic_model(6, 0.9, "ar1", rho=0.3, rng=8)
        s = session_for(m, 10_000, cycles=4, seed=2)
        est = oracle_weights(m)
        n = 4
        idx = s.grid_index[:, :n]
        avg_scores = score(est, s.features)[idx].mean(axis=1)
        rows = np.array([r for r, _ in s.config.symbols])
        target = avg_scores[np.arange(s.n_symbols), rows]
        mom = score_moments(m.mu0, m.mu1, m.sigma, n)
        se_mean = mom.sigma_n / math.sqrt(target.size)
        assert abs(target.mean() - mom.m1) <= 3 * se_mean
        se_sd = mom.sigma_n / math.sqrt(2 * (target.size - 1))
        assert abs(target.std(ddof=1) - mom.sigma_n) <= 3 * se_sd


class TestMonteCarloOracle:
    def test_gamma_one_fifteen_cycles(self):
        m = make_synthetic_model(8, 1.0, rng=12)
        s = session_for(m, 10_000, seed=12)
        p_obs = correctness_by_cycles(oracle_weights(m), s)[:, 14].mean()
        p = symbol_accuracy(SIX, 15, 1.0)
        assert abs(p_obs - p) <= 3 * math.sqrt(p * (1 - p) / 10_000)


class TestSerialization:
    def test_round_trip(self, tmp_path):
        est = fit_lda(np.random.default_rng(1).standard_normal((40, 3)), [0] * 20 + [1] * 20)
        save_estimates(est, tmp_path / "lda.json")
        back = load_estimates(tmp_path / "lda.json")
        for name in ("mu0_hat", "mu1_hat", "sigma_hat", "weights"):
            np.testing.assert_array_equal(getattr(back, name), getattr(est, name))
        assert back.shrinkage == est.shrinkage

    def test_corrupt(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text('{"format": "p300snr.lda", "dim": ')
        with pytest.raises(DataError, match="line 1"):
            load_estimates(p)
