"""Gaussian generative model of single-trial responses and session simulator.

A trial is ``mu1 + z`` when its stimulus contains the target and ``mu0 + z``
otherwise, with ``z ~ N(0, sigma)`` drawn independently for every trial.

Random numbers come from PCG64. A session seed is expanded with
``SeedSequence(seed).spawn(n_symbols)`` so that symbol ``i`` always uses
substream ``i``; within a symbol the generator first draws the flash order
for every cycle, then the noise for every trial. Standard normals are
produced by the inverse normal CDF of 53-bit uniforms on the open unit
interval, so each trial consumes exactly ``dim`` draws.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import ndtri

from p300snr.accuracy import SpellerGeometry
from p300snr.errors import ConfigError, DomainError, NumericalError
from p300snr.linalg import cholesky, solve_lower
from p300snr.session import SessionConfig, SessionData, target_labels

_TWO_53 = float(2 ** 53)


@dataclass(frozen=True, eq=False)
class GaussianP300Model:
    mu0: np.ndarray
    mu1: np.ndarray
    sigma: np.ndarray
    chol_lower: np.ndarray

    @property
    def dim(self) -> int:
        return self.mu0.shape[0]

    def mean(self, is_target) -> np.ndarray:
        return self.mu1 if is_target else self.mu0


def build_model(mu0, mu1, sigma) -> GaussianP300Model:
    """Validate the parameters and cache the Cholesky factor of ``sigma``."""
    mu0 = np.array(mu0, dtype=float).reshape(-1)
    mu1 = np.array(mu1, dtype=float).reshape(-1)
    sigma = np.array(sigma, dtype=float)
    if sigma.ndim == 0:
        sigma = sigma.reshape(1, 1)
    d = mu0.shape[0]
    if mu1.shape != (d,) or sigma.shape != (d, d):
        raise DomainError(f"shape mismatch: mu0 {mu0.shape}, mu1 {mu1.shape}, sigma {sigma.shape}")
    if not (np.all(np.isfinite(mu0)) and np.all(np.isfinite(mu1)) and np.all(np.isfinite(sigma))):
        raise DomainError("model parameters must be finite")
    scale = max(float(np.max(np.abs(sigma))), np.finfo(float).tiny)
    asym = float(np.max(np.abs(sigma - sigma.T)))
    if asym > 1e-10 * scale:
        raise NumericalError(f"sigma is not symmetric (max |s_ij - s_ji| = {asym:.3g})")
    chol = cholesky(sigma, "sigma")
    for arr in (mu0, mu1, sigma, chol):
        arr.setflags(write=False)
    return GaussianP300Model(mu0, mu1, sigma, chol)


def theoretical_snr(model: GaussianP300Model) -> float:
    """Mahalanobis distance between the two means under the noise covariance."""
    return float(np.linalg.norm(solve_lower(model.chol_lower, model.mu1 - model.mu0)))


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def standard_normals(rng: np.random.Generator, shape) -> np.ndarray:
    u = (rng.integers(0, 2 ** 53, size=shape, dtype=np.uint64) + 0.5) / _TWO_53
    return ndtri(u)


def sample_trial(model: GaussianP300Model, is_target: bool, rng: np.random.Generator) -> np.ndarray:
    z = standard_normals(rng, model.dim)
    return model.mean(is_target) + model.chol_lower @ z


def simulate_session(model: GaussianP300Model, config: SessionConfig,
                     electrode_count: int | None = None) -> SessionData:
    """Simulate every symbol of ``config``.

    Each cycle flashes all rows and columns once in a fresh uniformly
    random order.
    """
    geometry = config.geometry
    k = geometry.n_stimuli
    c = config.cycles_per_symbol
    s = config.n_symbols
    d = model.dim
    stim = np.empty((s, c, k), dtype=np.int64)
    noise = np.empty((s, c * k, d))
    for i, seq in enumerate(np.random.SeedSequence(config.rng_seed).spawn(s)):
        rng = np.random.Generator(np.random.PCG64(seq))
        stim[i] = np.argsort(rng.random((c, k)), axis=1)
        noise[i] = standard_normals(rng, (c * k, d))
    stim = stim.reshape(-1)
    symbol_idx = np.repeat(np.arange(s), c * k)
    cycle_idx = np.tile(np.repeat(np.arange(c), k), s)
    targets = np.asarray(config.symbols, dtype=np.int64).reshape(-1, 2)[symbol_idx]
    labels = target_labels(geometry, targets, stim)
    means = np.where(labels[:, None] == 1, model.mu1, model.mu0)
    features = means + noise.reshape(-1, d) @ model.chol_lower.T
    return SessionData(config, features, labels, stim, cycle_idx, symbol_idx,
                       electrode_count=electrode_count)


def ar1_covariance(dim: int, rho: float, scale: float = 1.0) -> np.ndarray:
    if not -1.0 < rho < 1.0:
        raise DomainError(f"AR(1) coefficient must satisfy |rho| < 1, got {rho}")
    lags = np.abs(np.subtract.outer(np.arange(dim), np.arange(dim)))
    return scale ** 2 * rho ** lags


def _rescale_to_snr(mu0, direction, sigma, gamma):
    chol = cholesky(sigma, "sigma")
    norm = np.linalg.norm(solve_lower(chol, direction))
    if gamma == 0:
        return build_model(mu0, mu0, sigma)
    return build_model(mu0, mu0 + direction * (gamma / norm), sigma)


def make_synthetic_model(dim: int, gamma: float, structure: str = "identity", rho: float = 0.0,
                         noise_scale: float = 1.0, rng=None) -> GaussianP300Model:
    """Random model with theoretical SNR exactly ``gamma``.

    ``structure`` is ``"identity"`` (``sigma = noise_scale**2 * I``) or
    ``"ar1"`` (``sigma_ij = noise_scale**2 * rho**|i-j|``). The baseline mean
    and the direction of the mean difference are standard normal draws.
    """
    if dim < 1:
        raise DomainError("dim must be >= 1")
    if gamma < 0:
        raise DomainError("gamma must be >= 0")
    if noise_scale <= 0:
        raise DomainError("noise_scale must be > 0")
    rng = make_rng(rng)
    if structure == "identity":
        sigma = noise_scale ** 2 * np.eye(dim)
    elif structure == "ar1":
        sigma = ar1_covariance(dim, rho, noise_scale)
    else:
        raise DomainError(f"unknown covariance structure {structure!r}")
    mu0 = rng.standard_normal(dim) * noise_scale
    direction = rng.standard_normal(dim)
    return _rescale_to_snr(mu0, direction, sigma, gamma)


def make_localized_model(electrode_count: int, samples_per_electrode: int, gamma: float,
                         shares: Sequence[float], noise_scale: float = 1.0,
                         rng=None) -> GaussianP300Model:
    """Identity-noise model whose squared SNR is split across electrode blocks.

    Electrode ``e`` contributes ``shares[e] / sum(shares)`` of ``gamma**2``;
    a zero share leaves that block without any P300 signal.
    """
    shares = np.asarray(shares, dtype=float)
    if shares.shape != (electrode_count,) or np.any(shares < 0) or shares.sum() <= 0:
        raise DomainError("need one non-negative share per electrode, not all zero")
    rng = make_rng(rng)
    t = samples_per_electrode
    dim = electrode_count * t
    mu0 = rng.standard_normal(dim) * noise_scale
    diff = np.zeros(dim)
    fractions = shares / shares.sum()
    for e, frac in enumerate(fractions):
        block = rng.standard_normal(t)
        diff[e * t:(e + 1) * t] = block / np.linalg.norm(block) * np.sqrt(frac) * gamma * noise_scale
    return build_model(mu0, mu0 + diff, noise_scale ** 2 * np.eye(dim))


def random_targets(geometry: SpellerGeometry, n_symbols: int, rng=None) -> tuple[tuple[int, int], ...]:
    if n_symbols < 0:
        raise ConfigError("n_symbols must be >= 0")
    rng = make_rng(rng)
    rows = rng.integers(0, geometry.n_rows, n_symbols)
    cols = rng.integers(0, geometry.n_cols, n_symbols)
    return tuple(zip(rows.tolist(), cols.tolist()))
