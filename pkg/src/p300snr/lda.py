"""Two-class LDA scoring and averaged-signal symbol detection.

Only the score ``w.T @ x`` is used; the symbol is the intersection of the
row and the column whose averaged signal scores highest. There is no
decision threshold.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from p300snr.errors import DataError, DomainError, NumericalError
from p300snr.linalg import chol_solve, cholesky
from p300snr.session import SessionData
from p300snr.simulate import GaussianP300Model

FORMAT_NAME = "p300snr.lda"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class Shrinkage:
    """Ridge added to the pooled covariance before solving for ``w``.

    ``fixed``: lambda = value. ``relative``: lambda = value * trace(S) / dim.
    """

    kind: str = "relative"
    value: float = 1e-6

    def __post_init__(self):
        if self.kind not in ("fixed", "relative"):
            raise DomainError(f"unknown shrinkage kind {self.kind!r}")
        if not self.value >= 0:
            raise DomainError("shrinkage value must be >= 0")

    @classmethod
    def fixed(cls, lam: float) -> Shrinkage:
        return cls("fixed", lam)

    @classmethod
    def relative(cls, eps: float) -> Shrinkage:
        return cls("relative", eps)

    @classmethod
    def parse(cls, text: str) -> Shrinkage:
        """Parse ``"fixed:0.1"``, ``"relative:1e-6"`` or a bare number (relative)."""
        kind, _, value = text.partition(":")
        if not value:
            kind, value = "relative", kind
        try:
            return cls(kind.strip(), float(value))
        except ValueError as exc:
            raise DomainError(f"cannot parse shrinkage {text!r}") from exc

    def amount(self, sigma_hat: np.ndarray) -> float:
        if self.kind == "fixed":
            return float(self.value)
        return float(self.value * np.trace(sigma_hat) / sigma_hat.shape[0])

    def __str__(self):
        return f"{self.kind}:{self.value!r}"


DEFAULT_SHRINKAGE = Shrinkage()


@dataclass(frozen=True, eq=False)
class LdaEstimates:
    mu0_hat: np.ndarray
    mu1_hat: np.ndarray
    sigma_hat: np.ndarray
    weights: np.ndarray
    shrinkage: float = 0.0

    @property
    def dim(self) -> int:
        return self.weights.shape[0]

    @property
    def mean_difference(self) -> np.ndarray:
        return self.mu1_hat - self.mu0_hat

    def regularized_chol(self) -> np.ndarray:
        a = self.sigma_hat + self.shrinkage * np.eye(self.dim)
        try:
            return cholesky(a, "regularized covariance")
        except NumericalError as exc:
            raise NumericalError(f"{exc} (shrinkage lambda = {self.shrinkage!r})") from None


@dataclass(frozen=True)
class DetectionResult:
    row: int
    col: int
    row_scores: np.ndarray
    col_scores: np.ndarray


def _solve_weights(mu0, mu1, sigma, lam):
    est = LdaEstimates(mu0, mu1, sigma, np.zeros_like(mu0), lam)
    return LdaEstimates(mu0, mu1, sigma, chol_solve(est.regularized_chol(), mu1 - mu0), lam)


def fit_lda(features, labels, shrinkage: Shrinkage = DEFAULT_SHRINKAGE) -> LdaEstimates:
    """Class means, pooled maximum-likelihood covariance and ``w``.

    The covariance divides by the total number of trials. ``w`` solves
    ``(sigma_hat + lambda * I) w = mu1_hat - mu0_hat`` by Cholesky.
    """
    x = np.asarray(features, dtype=float)
    y = np.asarray(labels).reshape(-1)
    if x.ndim != 2:
        raise DataError(f"features must be 2-D, got shape {x.shape}")
    if y.shape[0] != x.shape[0]:
        raise DataError(f"{x.shape[0]} feature vectors but {y.shape[0]} labels")
    target = y == 1
    n1 = int(target.sum())
    n0 = int((y == 0).sum())
    if n0 + n1 != y.shape[0]:
        raise DataError("labels must be 0 or 1")
    if n0 < 2 or n1 < 2:
        raise DataError(f"need at least 2 trials per class, got {n0} non-target and {n1} target")
    mu0 = x[~target].mean(axis=0)
    mu1 = x[target].mean(axis=0)
    centered = x - np.where(target[:, None], mu1, mu0)
    sigma = centered.T @ centered / x.shape[0]
    return _solve_weights(mu0, mu1, sigma, shrinkage.amount(sigma))


def fit_lda_trials(trials: Sequence, shrinkage: Shrinkage = DEFAULT_SHRINKAGE) -> LdaEstimates:
    """:func:`fit_lda` on a sequence of ``(features, label)`` pairs or Trials."""
    if not trials:
        raise DataError("no trials")
    dims = {np.shape(t[0]) for t in trials}
    if len(dims) != 1:
        raise DataError(f"trials have mismatched feature shapes: {sorted(dims)}")
    return fit_lda(np.stack([np.asarray(t[0], dtype=float) for t in trials]),
                   [t[1] for t in trials], shrinkage)


def fit_lda_session(session: SessionData, symbols=None,
                    shrinkage: Shrinkage = DEFAULT_SHRINKAGE) -> LdaEstimates:
    """Fit on every trial of the given symbols (all symbols by default)."""
    if symbols is None:
        return fit_lda(session.features, session.labels, shrinkage)
    mask = session.symbol_mask(symbols)
    return fit_lda(session.features[mask], session.labels[mask], shrinkage)


def oracle_weights(model: GaussianP300Model) -> LdaEstimates:
    """Estimates replaced by the true model parameters (no shrinkage)."""
    w = chol_solve(model.chol_lower, model.mu1 - model.mu0)
    return LdaEstimates(model.mu0.copy(), model.mu1.copy(), model.sigma.copy(), w, 0.0)


def score(est: LdaEstimates, x) -> float | np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != est.dim:
        raise DataError(f"feature dimension {x.shape[-1]} does not match weights ({est.dim})")
    return x @ est.weights


def _check_symbol(session: SessionData, symbol_index: int, use_cycles: int):
    if not 0 <= symbol_index < session.n_symbols:
        raise DataError(f"symbol_index {symbol_index} out of range 0..{session.n_symbols - 1}")
    if not 1 <= use_cycles <= session.config.cycles_per_symbol:
        raise DataError(
            f"use_cycles must be in 1..{session.config.cycles_per_symbol}, got {use_cycles}")


def average_stimulus_signals(session: SessionData, symbol_index: int, use_cycles: int) -> np.ndarray:
    """Mean feature vector per stimulus id over the first ``use_cycles`` cycles.

    Returns an array of shape ``(n_rows + n_cols, dim)``.
    """
    _check_symbol(session, symbol_index, use_cycles)
    idx = session.grid_index[symbol_index, :use_cycles]
    return session.features[idx].mean(axis=0)


def _split_argmax(scores: np.ndarray, n_rows: int):
    # np.argmax returns the first maximum, i.e. the lowest index on ties
    return np.argmax(scores[..., :n_rows], axis=-1), np.argmax(scores[..., n_rows:], axis=-1)


def detect_symbol(est: LdaEstimates, session: SessionData, symbol_index: int,
                  use_cycles: int) -> DetectionResult:
    averages = average_stimulus_signals(session, symbol_index, use_cycles)
    scores = score(est, averages)
    n_rows = session.geometry.n_rows
    row, col = _split_argmax(scores, n_rows)
    return DetectionResult(int(row), int(col), scores[:n_rows], scores[n_rows:])


def correctness_by_cycles(est: LdaEstimates, session: SessionData, symbols=None) -> np.ndarray:
    """Boolean ``(len(symbols), cycles_per_symbol)`` array: entry ``[i, n-1]``
    tells whether symbol ``symbols[i]`` is detected correctly from its first
    ``n`` cycles.

    Scores are linear, so the score of an averaged signal equals the average
    of the single-trial scores; averaging scores avoids materializing every
    prefix average.
    """
    if symbols is None:
        symbols = np.arange(session.n_symbols)
    symbols = np.asarray(symbols, dtype=np.int64)
    cycles = session.config.cycles_per_symbol
    if symbols.size == 0 or cycles == 0:
        return np.zeros((symbols.size, cycles), dtype=bool)
    trial_scores = score(est, session.features)[session.grid_index[symbols]]
    prefix = np.cumsum(trial_scores, axis=1) / np.arange(1, cycles + 1)[None, :, None]
    rows, cols = _split_argmax(prefix, session.geometry.n_rows)
    targets = np.asarray(session.config.symbols, dtype=np.int64).reshape(-1, 2)[symbols]
    return (rows == targets[:, 0:1]) & (cols == targets[:, 1:2])


def estimates_to_dict(est: LdaEstimates) -> dict:
    return {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "dim": est.dim,
        "shrinkage": est.shrinkage,
        "mu0_hat": est.mu0_hat.tolist(),
        "mu1_hat": est.mu1_hat.tolist(),
        "sigma_hat": est.sigma_hat.tolist(),
        "weights": est.weights.tolist(),
    }


def estimates_from_dict(doc: dict) -> LdaEstimates:
    if doc.get("format") != FORMAT_NAME:
        raise DataError(f"not an LDA estimates document (format={doc.get('format')!r})")
    try:
        d = int(doc["dim"])
        arrays = {k: np.asarray(doc[k], dtype=float) for k in ("mu0_hat", "mu1_hat", "weights")}
        sigma = np.asarray(doc["sigma_hat"], dtype=float).reshape(d, d)
        lam = float(doc["shrinkage"])
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed LDA estimates: {exc}") from None
    if any(a.shape != (d,) for a in arrays.values()):
        raise DataError("LDA vectors do not match the declared dimension")
    return LdaEstimates(arrays["mu0_hat"], arrays["mu1_hat"], sigma, arrays["weights"], lam)


def save_estimates(est: LdaEstimates, path) -> None:
    # json writes floats with repr(), the shortest string that round-trips exactly
    Path(path).write_text(json.dumps(estimates_to_dict(est)))


def load_estimates(path) -> LdaEstimates:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return estimates_from_dict(doc)
