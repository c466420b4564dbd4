import math

import numpy as np
import pytest

from p300snr.accuracy import SpellerGeometry
from p300snr.errors import ConfigError, DataError, DomainError, NumericalError
from p300snr.session import SessionConfig, SessionData
from p300snr.simulate import (
    ar1_covariance, build_model, make_localized_model, make_rng, make_synthetic_model,
    random_targets, sample_trial, simulate_session, theoretical_snr)


def e(i, d):
    return np.eye(d)[i]


class TestBuildModel:
    def test_identity(self):
        m = build_model(np.zeros(3), e(0, 3), np.eye(3))
        np.testing.assert_array_equal(m.chol_lower, np.eye(3))

    def test_zero_diagonal_is_not_pd(self):
        with pytest.raises(NumericalError, match="order 2"):
            build_model(np.zeros(3), e(0, 3), np.diag([1.0, 0.0, 1.0]))

    def test_hand_cholesky(self):
        sigma = np.array([[4.0, 2.0], [2.0, 3.0]])
        m = build_model(np.zeros(2), np.ones(2), sigma)
        np.testing.assert_allclose(m.chol_lower, [[2, 0], [1, math.sqrt(2)]], atol=1e-15)
        np.testing.assert_allclose(m.chol_lower @ m.chol_lower.T, sigma, rtol=1e-12)

    def test_asymmetric(self):
        with pytest.raises(NumericalError, match="symmetric"):
            build_model(np.zeros(2), np.ones(2), [[1.0, 0.1], [0.0, 1.0]])

    def test_shape_mismatch(self):
        with pytest.raises(DomainError):
            build_model(np.zeros(2), np.ones(3), np.eye(2))

    def test_immutable(self):
        m = build_model(np.zeros(2), np.ones(2), np.eye(2))
        with pytest.raises(ValueError):
            m.mu1[0] = 5.0


class TestTheoreticalSnr:
    def test_unit(self):
        assert theoretical_snr(build_model(np.zeros(2), e(0, 2), np.eye(2))) == pytest.approx(1.0)

    def test_scale_cancels(self):
        assert theoretical_snr(build_model(np.zeros(2), 3 * e(0, 2), 9 * np.eye(2))) == pytest.approx(1.0)

    def test_diagonal_by_explicit_inverse(self):
        d = np.array([1.0, 1.0])
        sigma = np.diag([1.0, 4.0])
        expected = math.sqrt(d @ np.linalg.inv(sigma) @ d)
        assert expected == pytest.approx(math.sqrt(1.25))
        assert theoretical_snr(build_model(np.zeros(2), d, sigma)) == pytest.approx(1.1180340, abs=1e-7)

    @pytest.mark.parametrize("c", [0.1, 2.0, 30.0])
    def test_scale_and_shift_invariance(self, c):
        m = make_synthetic_model(5, 0.9, "ar1", rho=0.3, rng=2)
        shift = np.arange(5.0)
        scaled = build_model(c * m.mu0 + shift, c * m.mu1 + shift, c * c * m.sigma)
        assert theoretical_snr(scaled) == pytest.approx(theoretical_snr(m), rel=1e-12)


class TestSampleTrial:
    def test_near_zero_noise(self):
        m = build_model(np.zeros(4), e(1, 4), 1e-12 * np.eye(4))
        x = sample_trial(m, True, make_rng(0))
        np.testing.assert_allclose(x, e(1, 4), atol=1e-5)

    def test_law_of_large_numbers(self):
        m = build_model(np.zeros(2), e(0, 2), np.eye(2))
        rng = make_rng(11)
        draws = np.stack([sample_trial(m, True, rng) for _ in range(100_000)])
        np.testing.assert_allclose(draws.mean(axis=0), e(0, 2), atol=0.01)

    def test_deterministic(self):
        m = make_synthetic_model(7, 1.0, rng=0)
        np.testing.assert_array_equal(sample_trial(m, False, make_rng(3)),
                                      sample_trial(m, False, make_rng(3)))


class TestSimulateSession:
    @pytest.fixture
    def session(self):
        m = make_synthetic_model(6, 0.8, rng=1)
        cfg = SessionConfig(SpellerGeometry(6, 6), 15, ((2, 3), (0, 5), (5, 0)), rng_seed=9)
        return simulate_session(m, cfg)

    def test_trial_count_per_symbol(self):
        m = make_synthetic_model(4, 0.5, rng=0)
        s = simulate_session(m, SessionConfig(SpellerGeometry(), 15, ((1, 1),), 0))
        assert s.n_trials == 180

    def test_two_targets_per_cycle(self, session):
        counts = np.zeros((3, 15), dtype=int)
        np.add.at(counts, (session.symbol_indices, session.cycle_indices), session.labels)
        assert np.all(counts == 2)

    def test_every_stimulus_once_per_cycle(self, session):
        for s in range(3):
            for c in range(15):
                sel = (session.symbol_indices == s) & (session.cycle_indices == c)
                assert sorted(session.stimulus_ids[sel]) == list(range(12))

    def test_presentation_order_is_shuffled(self, session):
        first = session.stimulus_ids[:12]
        assert not np.array_equal(first, np.arange(12))

    def test_labels_follow_targets(self, session):
        for t in session.trials[:60]:
            row, col = session.config.symbols[t.symbol_index]
            assert t.label == int(t.stimulus_id == row or t.stimulus_id - 6 == col)

    def test_reproducible(self, session):
        m = make_synthetic_model(6, 0.8, rng=1)
        again = simulate_session(m, session.config)
        assert again == session
        np.testing.assert_array_equal(again.features, session.features)

    def test_symbol_substreams_independent_of_count(self):
        # symbol i draws from substream i, so appending symbols leaves earlier ones intact
        m = make_synthetic_model(3, 1.0, rng=0)
        short = simulate_session(m, SessionConfig(SpellerGeometry(), 2, ((0, 0),), 4))
        long = simulate_session(m, SessionConfig(SpellerGeometry(), 2, ((0, 0), (1, 1)), 4))
        np.testing.assert_array_equal(short.features, long.features[:short.n_trials])

    def test_target_out_of_bounds(self):
        with pytest.raises(ConfigError):
            SessionConfig(SpellerGeometry(6, 6), 15, ((6, 0),))

    def test_target_mean_matches_mu1(self):
        m = make_synthetic_model(3, 1.0, rng=4)
        cfg = SessionConfig(SpellerGeometry(), 15, random_targets(SpellerGeometry(), 300, 0), 1)
        s = simulate_session(m, cfg)
        target = s.features[s.labels == 1]
        se = 1 / math.sqrt(target.shape[0])
        np.testing.assert_allclose(target.mean(axis=0), m.mu1, atol=4 * se)

    def test_structure_violation_rejected(self, session):
        stim = session.stimulus_ids.copy()
        stim[0] = stim[1]
        with pytest.raises(DataError):
            SessionData(session.config, session.features, session.labels, stim,
                        session.cycle_indices, session.symbol_indices)


class TestSyntheticModels:
    def test_identity_full_size(self):
        m = make_synthetic_model(312, 0.7, rng=0)
        assert theoretical_snr(m) == pytest.approx(0.7, abs=1e-10)

    def test_zero_gamma(self):
        m = make_synthetic_model(4, 0.0, "ar1", rho=0.2, rng=0)
        np.testing.assert_array_equal(m.mu0, m.mu1)

    def test_ar1_by_explicit_inverse(self):
        m = make_synthetic_model(8, 1.2, "ar1", rho=0.5, rng=3)
        sigma = np.array([[0.5 ** abs(i - j) for j in range(8)] for i in range(8)])
        np.testing.assert_allclose(m.sigma, sigma)
        d = m.mu1 - m.mu0
        assert math.sqrt(d @ np.linalg.inv(sigma) @ d) == pytest.approx(1.2, abs=1e-10)
        assert theoretical_snr(m) == pytest.approx(1.2, abs=1e-10)

    @pytest.mark.parametrize("rho", [1.0, -1.0, 1.5])
    def test_bad_rho(self, rho):
        with pytest.raises(DomainError):
            make_synthetic_model(4, 1.0, "ar1", rho=rho)

    def test_ar1_covariance_shape(self):
        assert ar1_covariance(3, 0.5, 2.0)[0, 2] == pytest.approx(4 * 0.25)

    def test_localized_shares(self):
        m = make_localized_model(4, 5, 2.0, [1, 0, 3, 0], rng=0)
        d = m.mu1 - m.mu0
        energy = [float(d[i * 5:(i + 1) * 5] @ d[i * 5:(i + 1) * 5]) for i in range(4)]
        np.testing.assert_allclose(energy, [1.0, 0.0, 3.0, 0.0], atol=1e-12)
        assert theoretical_snr(m) == pytest.approx(2.0)
