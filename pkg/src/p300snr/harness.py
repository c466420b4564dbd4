"""Validation protocol: accuracy-vs-repetitions curves, SNR fitting,
proxy regressions and brute-force electrode subset ranking."""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import betainc

from p300snr.accuracy import DEFAULT_QUAD, QuadratureConfig, SpellerGeometry, symbol_accuracy_values
from p300snr.errors import DataError, DomainError
from p300snr.lda import DEFAULT_SHRINKAGE, Shrinkage, correctness_by_cycles, fit_lda_session
from p300snr.session import SessionData
from p300snr.simulate import make_rng
from p300snr.snr import SnrReport, snr_report

GAMMA_GRID_MAX = 5.0
GAMMA_GRID_STEP = 0.01
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True, eq=False)
class AccuracyCurve:
    """Empirical symbol accuracy for every number of averaged cycles.

    ``se`` is the standard error over symbols: the standard deviation of
    each symbol's hit rate (across the repetitions that tested it) over
    ``sqrt(n_symbols)``. ``se_reps`` is the between-repetition standard
    deviation over ``sqrt(n_reps)``; it only measures split-to-split
    variation and ignores the finite symbol pool. ``train_sets[r]`` lists
    the symbols used for training in repetition ``r``; all other symbols
    were tested.
    """

    cycles: np.ndarray
    accuracy: np.ndarray
    se: np.ndarray
    n_train: int
    n_reps: int
    train_sets: np.ndarray | None = None
    se_reps: np.ndarray | None = None

    def rows(self):
        return list(zip(self.cycles.tolist(), self.accuracy.tolist(), self.se.tolist()))


@dataclass(frozen=True)
class FitResult:
    gamma_fit: float
    sse: float


@dataclass(frozen=True)
class RegressionStats:
    slope: float
    intercept: float
    pearson_r: float
    p_value: float
    n: int


@dataclass
class SubsetEntry:
    electrodes: tuple[int, ...]
    empirical_snr: float
    accuracy_by_n: dict[int, float]
    se_by_n: dict[int, float]

    def scaled_snr(self, n: int) -> float:
        return math.sqrt(n) * self.empirical_snr


@dataclass
class SubsetRanking:
    electrode_count: int
    keep: int
    n_values: tuple[int, ...]
    entries: list[SubsetEntry]
    snr_seconds: float = 0.0
    validation_seconds: float = 0.0

    def ranked_by_snr(self) -> list[SubsetEntry]:
        return sorted(self.entries, key=lambda e: -e.empirical_snr)

    def ranked_by_accuracy(self, n: int) -> list[SubsetEntry]:
        return sorted(self.entries, key=lambda e: -e.accuracy_by_n[n])

    def dropped(self, entry: SubsetEntry) -> tuple[int, ...]:
        return tuple(sorted(set(range(self.electrode_count)) - set(entry.electrodes)))

    def critical_electrodes(self, by: str = "snr", n: int | None = None) -> tuple[int, ...]:
        """Electrodes missing from the worst subset: the ones whose removal hurts most."""
        if by == "snr":
            worst = self.ranked_by_snr()[-1]
        elif by == "accuracy":
            worst = self.ranked_by_accuracy(n if n is not None else self.n_values[0])[-1]
        else:
            raise DomainError(f"unknown ranking key {by!r}")
        return self.dropped(worst)


@dataclass
class ProxyComparison:
    fixed_n: int
    reports: list[SnrReport]
    accuracy: list[float]
    regressions: dict[str, RegressionStats] = field(default_factory=dict)

    PROXIES = ("empirical_snr", "peak_to_peak_v1", "peak_to_peak_v2", "area_under_curve")

    def column(self, name: str) -> list[float]:
        return [getattr(r, name) for r in self.reports]


def draw_splits(n_symbols: int, n_train: int, n_reps: int, rng) -> np.ndarray:
    """``(n_reps, n_train)`` array of training symbols, one random subset per row."""
    rng = make_rng(rng)
    return np.stack([np.sort(rng.permutation(n_symbols)[:n_train]) for _ in range(n_reps)]) \
        if n_reps else np.zeros((0, n_train), dtype=np.int64)


def accuracy_vs_repetitions(session: SessionData, n_train: int = 10, n_reps: int = 100,
                            shrinkage: Shrinkage = DEFAULT_SHRINKAGE, rng=0) -> AccuracyCurve:
    """Repeated random train/test splits by symbol.

    Each repetition trains on all trials of ``n_train`` random symbols and
    detects every remaining symbol from its first ``n`` cycles, for every
    ``n``. Trials of one symbol are never split between train and test.
    """
    s = session.n_symbols
    if n_train < 1 or n_reps < 1:
        raise DomainError("n_train and n_reps must be >= 1")
    if s <= n_train:
        raise DataError(f"need more than n_train={n_train} symbols, session has {s}")
    splits = draw_splits(s, n_train, n_reps, rng)
    c = session.config.cycles_per_symbol
    per_rep = np.empty((n_reps, c))
    hits = np.zeros((s, c))
    tested = np.zeros(s, dtype=np.int64)
    everyone = np.arange(s)
    for r, train in enumerate(splits):
        test = np.setdiff1d(everyone, train, assume_unique=True)
        est = fit_lda_session(session, train, shrinkage)
        correct = correctness_by_cycles(est, session, test)
        per_rep[r] = correct.mean(axis=0)
        hits[test] += correct
        tested[test] += 1
    mean = per_rep.mean(axis=0)
    se_reps = per_rep.std(axis=0, ddof=1) / math.sqrt(n_reps) if n_reps > 1 else np.zeros(c)
    # symbols are the independent units; every repetition reuses the same pool
    rate = hits[tested > 0] / tested[tested > 0, None]
    se = rate.std(axis=0, ddof=1) / math.sqrt(rate.shape[0])
    cycles = np.arange(1, c + 1)
    return AccuracyCurve(cycles, mean, se, n_train, n_reps, splits, se_reps)


def analytic_curve(geometry: SpellerGeometry, cycles, gamma: float,
                   quad: QuadratureConfig = DEFAULT_QUAD) -> np.ndarray:
    return symbol_accuracy_values(geometry, np.asarray(cycles), gamma, quad)


def _sse(geometry, cycles, accuracy, gamma, quad):
    return float(np.sum((accuracy - symbol_accuracy_values(geometry, cycles, gamma, quad)) ** 2))


def fit_gamma(curve: AccuracyCurve | tuple, geometry: SpellerGeometry,
              quad: QuadratureConfig = DEFAULT_QUAD, tol: float = 1e-5) -> FitResult:
    """Least-squares SNR for an accuracy curve.

    Coarse grid over [0, 5] in steps of 0.01, then golden-section search in
    the two grid cells around the best grid point. ``curve`` may also be a
    ``(cycles, accuracy)`` pair.
    """
    if isinstance(curve, AccuracyCurve):
        cycles, accuracy = curve.cycles, curve.accuracy
    else:
        cycles, accuracy = curve
    cycles = np.asarray(cycles)
    accuracy = np.asarray(accuracy, dtype=float)
    if cycles.size == 0:
        raise DataError("empty accuracy curve")
    grid = np.round(np.arange(0.0, GAMMA_GRID_MAX + GAMMA_GRID_STEP / 2, GAMMA_GRID_STEP), 10)
    predicted = symbol_accuracy_values(geometry, cycles[None, :], grid[:, None], quad)
    sse_grid = np.sum((accuracy[None, :] - predicted) ** 2, axis=1)
    best = int(np.argmin(sse_grid))
    a = grid[max(best - 1, 0)]
    b = grid[min(best + 1, grid.size - 1)]
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc = _sse(geometry, cycles, accuracy, c, quad)
    fd = _sse(geometry, cycles, accuracy, d, quad)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = _sse(geometry, cycles, accuracy, c, quad)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = _sse(geometry, cycles, accuracy, d, quad)
    candidates = [(sse_grid[best], grid[best]), (fc, c), (fd, d)]
    sse, gamma = min(candidates)
    return FitResult(gamma_fit=float(gamma), sse=float(sse))


def t_two_sided_pvalue(t: float, df: int) -> float:
    """Two-sided Student-t tail probability via the regularized incomplete beta."""
    if math.isinf(t):
        return 0.0
    return float(betainc(df / 2.0, 0.5, df / (df + t * t)))


def linear_fit(xs: Sequence[float], ys: Sequence[float]) -> RegressionStats:
    """Ordinary least squares of ``ys`` on ``xs`` with Pearson r and its p-value."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise DataError("xs and ys must be 1-D and of equal length")
    n = x.size
    if n < 3:
        raise DataError(f"linear fit needs at least 3 points, got {n}")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    if sxx <= 1e-300 or np.ptp(x) == 0:
        raise DataError("degenerate regression: all xs are equal")
    slope = float(dx @ dy) / sxx
    intercept = float(y.mean() - slope * x.mean())
    syy = float(dy @ dy)
    if syy == 0:
        r = 0.0
    else:
        r = float(np.clip((dx @ dy) / math.sqrt(sxx * syy), -1.0, 1.0))
    df = n - 2
    if abs(r) >= 1.0:
        p = 0.0
    else:
        p = t_two_sided_pvalue(r * math.sqrt(df / (1.0 - r * r)), df)
    return RegressionStats(slope, intercept, r, p, n)


def rank_electrode_subsets(session: SessionData, keep: int, n_values: Sequence[int] = (1, 3, 5),
                           electrode_count: int | None = None, n_train: int = 10,
                           n_reps: int = 100, shrinkage: Shrinkage = DEFAULT_SHRINKAGE,
                           rng=0) -> SubsetRanking:
    """Score every ``keep``-electrode subset by empirical SNR and by validation accuracy.

    Features are split into ``electrode_count`` equal electrode-major
    blocks. The empirical SNR of a subset comes from one LDA fit on all its
    data; validation accuracy runs the full repeated-split protocol. Both
    passes are timed separately.
    """
    if electrode_count is None:
        electrode_count = session.electrode_count
    if electrode_count is None:
        raise DataError("electrode_count unknown: pass it or store it in the session")
    if session.dim % electrode_count:
        raise DataError(f"dimension {session.dim} is not divisible into {electrode_count} electrodes")
    if not 1 <= keep < electrode_count:
        raise DomainError(f"keep must be in 1..{electrode_count - 1}, got {keep}")
    n_values = tuple(int(n) for n in n_values)
    if any(not 1 <= n <= session.config.cycles_per_symbol for n in n_values):
        raise DomainError("requested n outside 1..cycles_per_symbol")
    if session.electrode_count != electrode_count:
        session = SessionData(session.config, session.features, session.labels, session.stimulus_ids,
                              session.cycle_indices, session.symbol_indices, electrode_count)
    subsets = list(itertools.combinations(range(electrode_count), keep))
    sliced = [session.select_electrodes(sub) for sub in subsets]

    start = time.perf_counter()
    snrs = [snr_report(fit_lda_session(sub, shrinkage=shrinkage)).empirical_snr for sub in sliced]
    snr_seconds = time.perf_counter() - start

    seed = make_rng(rng).integers(0, 2 ** 63)
    start = time.perf_counter()
    curves = [accuracy_vs_repetitions(sub, n_train, n_reps, shrinkage, rng=seed) for sub in sliced]
    validation_seconds = time.perf_counter() - start

    entries = [SubsetEntry(sub, g, {n: float(cv.accuracy[n - 1]) for n in n_values},
                           {n: float(cv.se[n - 1]) for n in n_values})
               for sub, g, cv in zip(subsets, snrs, curves)]
    return SubsetRanking(electrode_count, keep, n_values, entries, snr_seconds, validation_seconds)


def proxy_accuracy_comparison(sessions: Sequence[SessionData], fixed_n: int = 3, n_train: int = 10,
                              n_reps: int = 100, shrinkage: Shrinkage = DEFAULT_SHRINKAGE,
                              rng=0) -> ProxyComparison:
    """Regress validation accuracy at ``fixed_n`` cycles on each SNR proxy."""
    if len(sessions) < 3:
        raise DataError(f"need at least 3 sessions, got {len(sessions)}")
    seeds = make_rng(rng).integers(0, 2 ** 63, size=len(sessions))
    reports, accuracy = [], []
    for session, seed in zip(sessions, seeds):
        if not 1 <= fixed_n <= session.config.cycles_per_symbol:
            raise DomainError(f"fixed_n={fixed_n} outside 1..{session.config.cycles_per_symbol}")
        reports.append(snr_report(fit_lda_session(session, shrinkage=shrinkage)))
        curve = accuracy_vs_repetitions(session, n_train, n_reps, shrinkage, rng=seed)
        accuracy.append(float(curve.accuracy[fixed_n - 1]))
    out = ProxyComparison(fixed_n, reports, accuracy)
    for name in ProxyComparison.PROXIES:
        out.regressions[name] = linear_fit(out.column(name), accuracy)
    return out
