"""Predict and validate P300 speller symbol accuracy from the single-trial SNR."""

__version__ = "0.1.0"

from p300snr.accuracy import (
    QuadratureConfig, ScoreMoments, SpellerGeometry, accuracy_function,
    accuracy_function_derivative, invert_accuracy, score_moments, symbol_accuracy)
from p300snr.errors import ConfigError, DataError, DomainError, NumericalError, P300Error
from p300snr.harness import (
    AccuracyCurve, FitResult, RegressionStats, SubsetRanking, accuracy_vs_repetitions, fit_gamma,
    linear_fit, proxy_accuracy_comparison, rank_electrode_subsets)
from p300snr.lda import (
    DetectionResult, LdaEstimates, Shrinkage, average_stimulus_signals, detect_symbol, fit_lda,
    oracle_weights, score)
from p300snr.session import SessionConfig, SessionData, Trial
from p300snr.simulate import (
    GaussianP300Model, build_model, make_synthetic_model, sample_trial, simulate_session,
    theoretical_snr)
from p300snr.snr import SnrReport, empirical_snr, snr_report
