"""Empirical SNR of fitted LDA estimates and the amplitude-based proxies."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from p300snr.lda import LdaEstimates
from p300snr.linalg import solve_lower


@dataclass(frozen=True)
class SnrReport:
    empirical_snr: float
    peak_to_peak_v1: float
    peak_to_peak_v2: float
    area_under_curve: float
    shrinkage_used: float

    def as_dict(self) -> dict:
        return asdict(self)


def empirical_snr(est: LdaEstimates) -> float:
    """Mahalanobis norm of the mean difference under ``sigma_hat + lambda*I``.

    Uses the same ridge as the classifier weights, so it equals
    ``sqrt(d.T @ w)``.
    """
    return float(np.linalg.norm(solve_lower(est.regularized_chol(), est.mean_difference)))


def peak_to_peak_v1(est: LdaEstimates) -> float:
    """Largest coordinate of ``mu1_hat - mu0_hat``."""
    return float(np.max(est.mean_difference))


def peak_to_peak_v2(est: LdaEstimates) -> float:
    """``max(mu1_hat) - max(mu0_hat)``."""
    return float(np.max(est.mu1_hat) - np.max(est.mu0_hat))


def area_under_curve(est: LdaEstimates) -> float:
    return float(np.sum(est.mean_difference))


def snr_report(est: LdaEstimates) -> SnrReport:
    return SnrReport(
        empirical_snr=empirical_snr(est),
        peak_to_peak_v1=peak_to_peak_v1(est),
        peak_to_peak_v2=peak_to_peak_v2(est),
        area_under_curve=area_under_curve(est),
        shrinkage_used=est.shrinkage,
    )
