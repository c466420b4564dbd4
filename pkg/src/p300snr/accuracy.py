"""Selection accuracy of the row/column speller under Gaussian scores.

``accuracy_function(N, x)`` is the probability that a unit-variance
Gaussian score with mean ``x`` beats the maximum of ``N - 1`` independent
standard normal scores. Symbol accuracy is the product of the row and
column terms evaluated at the effective SNR ``sqrt(cycles) * gamma``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import log_ndtr

from p300snr.errors import DomainError

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class QuadratureConfig:
    """Composite Gauss-Legendre rule: ``panel_count`` panels of ``order`` nodes."""

    panel_count: int = 64
    half_width: float = 12.0
    order: int = 16

    def __post_init__(self):
        if self.panel_count < 16:
            raise DomainError(f"panel_count must be >= 16, got {self.panel_count}")
        if not self.half_width >= 8:
            raise DomainError(f"half_width must be >= 8, got {self.half_width}")
        if self.order < 2:
            raise DomainError(f"order must be >= 2, got {self.order}")


DEFAULT_QUAD = QuadratureConfig()


@dataclass(frozen=True)
class SpellerGeometry:
    n_rows: int = 6
    n_cols: int = 6

    def __post_init__(self):
        if self.n_rows < 2 or self.n_cols < 2:
            raise DomainError(
                f"speller needs at least 2 rows and 2 columns, got {self.n_rows}x{self.n_cols}")

    @property
    def n_stimuli(self) -> int:
        return self.n_rows + self.n_cols

    @property
    def chance(self) -> float:
        return 1.0 / (self.n_rows * self.n_cols)


@dataclass(frozen=True)
class ScoreMoments:
    """Mean LDA score of non-target (``m0``) and target (``m1``) stimuli and
    the common score standard deviation after averaging."""

    m0: float
    m1: float
    sigma_n: float


@lru_cache(maxsize=None)
def _panel_rule(panel_count: int, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the composite rule on [0, 1]."""
    t, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(0.0, 1.0, panel_count + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mid[:, None] + half[:, None] * t[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def _normal_pdf(z):
    return _INV_SQRT_2PI * np.exp(-0.5 * z * z)


def _cdf_power(z, power: int):
    # exp(k * log Phi) keeps Phi**k representable for large k
    return np.exp(power * log_ndtr(z))


def _check_args(n_alternatives, x):
    if int(n_alternatives) != n_alternatives or n_alternatives < 2:
        raise DomainError(f"number of alternatives must be an integer >= 2, got {n_alternatives}")
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise DomainError("effective SNR must be finite")
    return int(n_alternatives), x


def accuracy_values(n_alternatives: int, x, quad: QuadratureConfig = DEFAULT_QUAD) -> np.ndarray:
    """Vectorized :func:`accuracy_function` over an array of effective SNRs."""
    n, x = _check_args(n_alternatives, x)
    hw = quad.half_width
    nodes, weights = _panel_rule(quad.panel_count, quad.order)
    flat = x.ravel()
    lo = np.minimum(-hw, flat - hw)
    hi = np.maximum(hw, flat + hw)
    span = (hi - lo)[:, None]
    z = lo[:, None] + span * nodes[None, :]
    integrand = _normal_pdf(z - flat[:, None]) * _cdf_power(z, n - 1)
    values = span[:, 0] * (integrand @ weights)
    return np.clip(values, 0.0, 1.0).reshape(x.shape)


def accuracy_function(n_alternatives: int, effective_snr: float,
                      quad: QuadratureConfig = DEFAULT_QUAD) -> float:
    """Probability of picking the target out of ``n_alternatives``.

    Parameters
    ----------
    n_alternatives : int
        Number of competing stimuli on one axis (rows or columns), >= 2.
    effective_snr : float
        Separation of the target score mean from the non-target mean in
        units of the score standard deviation, i.e. ``sqrt(n) * gamma``.
    quad : QuadratureConfig
        Integration rule. The defaults are accurate to about 1e-12.

    Returns
    -------
    float
        A probability in [0, 1]; exactly ``1/N`` at zero SNR up to
        quadrature error.
    """
    return float(accuracy_values(n_alternatives, effective_snr, quad))


def accuracy_function_derivative(n_alternatives: int, effective_snr: float,
                                 quad: QuadratureConfig = DEFAULT_QUAD) -> float:
    """d/dx of :func:`accuracy_function`, computed from the folded form

    ``int_0^inf y*phi(y) * (Phi^(N-1)(x+y) - Phi^(N-1)(x-y)) dy``

    truncated at ``y = half_width``. Both factors are non-negative, which
    is what makes the accuracy function increasing.
    """
    n, x = _check_args(n_alternatives, effective_snr)
    x = float(x)
    nodes, weights = _panel_rule(quad.panel_count, quad.order)
    y = quad.half_width * nodes
    kernel = y * _normal_pdf(y)
    spread = _cdf_power(x + y, n - 1) - _cdf_power(x - y, n - 1)
    return float(quad.half_width * np.dot(weights, kernel * spread))


def symbol_accuracy(geometry: SpellerGeometry, cycles: int, gamma: float,
                    quad: QuadratureConfig = DEFAULT_QUAD) -> float:
    """Probability that both the row and the column are selected correctly
    after averaging ``cycles`` repetitions at single-trial SNR ``gamma``."""
    return float(symbol_accuracy_values(geometry, cycles, gamma, quad))


def symbol_accuracy_values(geometry: SpellerGeometry, cycles, gamma,
                           quad: QuadratureConfig = DEFAULT_QUAD) -> np.ndarray:
    """Broadcasting version of :func:`symbol_accuracy`."""
    cycles = np.asarray(cycles)
    gamma = np.asarray(gamma, dtype=float)
    if np.any(cycles < 1):
        raise DomainError("cycles must be >= 1")
    if np.any(gamma < 0):
        raise DomainError("gamma is a norm and cannot be negative")
    x = np.sqrt(cycles) * gamma
    rows = accuracy_values(geometry.n_rows, x, quad)
    if geometry.n_cols == geometry.n_rows:
        return rows * rows
    return rows * accuracy_values(geometry.n_cols, x, quad)


def score_moments(mu0, mu1, sigma, cycles: int = 1) -> ScoreMoments:
    """Moments of the averaged score ``w.T @ xbar`` with ``w = inv(sigma) @ (mu1 - mu0)``."""
    from p300snr.linalg import cholesky, solve_lower

    if cycles < 1:
        raise DomainError("cycles must be >= 1")
    mu0 = np.asarray(mu0, dtype=float)
    mu1 = np.asarray(mu1, dtype=float)
    chol = cholesky(np.asarray(sigma, dtype=float))
    # whiten: w.T @ mu = (L^-1 d) . (L^-1 mu)
    d_white = solve_lower(chol, mu1 - mu0)
    m0 = float(d_white @ solve_lower(chol, mu0))
    m1 = float(d_white @ solve_lower(chol, mu1))
    gamma = float(np.linalg.norm(d_white))
    return ScoreMoments(m0=m0, m1=m1, sigma_n=gamma / math.sqrt(cycles))


def invert_accuracy(geometry: SpellerGeometry, cycles: int, target_accuracy: float,
                    quad: QuadratureConfig = DEFAULT_QUAD, tol: float = 1e-12) -> float:
    """SNR ``gamma`` at which :func:`symbol_accuracy` equals ``target_accuracy``.

    Bisection on [0, 20]; the forward map is strictly increasing in gamma.
    """
    if not geometry.chance < target_accuracy < 1.0:
        raise DomainError(
            f"target accuracy must lie strictly between chance ({geometry.chance:.6g}) and 1, "
            f"got {target_accuracy}")
    lo, hi = 0.0, 20.0
    if symbol_accuracy(geometry, cycles, hi, quad) < target_accuracy:
        raise DomainError(f"target accuracy {target_accuracy!r} is beyond the bisection bracket")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if symbol_accuracy(geometry, cycles, mid, quad) < target_accuracy:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
