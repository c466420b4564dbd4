"""Speller sessions: labeled single-trial feature vectors in presentation order.

Stimulus ids number the rows first (``0 .. n_rows-1``) and then the columns
(``n_rows .. n_rows+n_cols-1``). A trial is a target (label 1) when its
stimulus is the row or the column containing the symbol being spelled.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np

from p300snr.accuracy import SpellerGeometry
from p300snr.errors import ConfigError, DataError


@dataclass(frozen=True)
class SessionConfig:
    geometry: SpellerGeometry = field(default_factory=SpellerGeometry)
    cycles_per_symbol: int = 15
    symbols: tuple[tuple[int, int], ...] = ()
    rng_seed: int = 0

    def __post_init__(self):
        if self.cycles_per_symbol < 1:
            raise ConfigError(f"cycles_per_symbol must be >= 1, got {self.cycles_per_symbol}")
        if self.rng_seed < 0:
            raise ConfigError("rng_seed must be an unsigned integer")
        targets = tuple((int(r), int(c)) for r, c in self.symbols)
        for i, (r, c) in enumerate(targets):
            if not (0 <= r < self.geometry.n_rows and 0 <= c < self.geometry.n_cols):
                raise ConfigError(
                    f"symbol {i} target ({r}, {c}) outside a "
                    f"{self.geometry.n_rows}x{self.geometry.n_cols} matrix")
        object.__setattr__(self, "symbols", targets)

    @property
    def n_symbols(self) -> int:
        return len(self.symbols)


class Trial(NamedTuple):
    features: np.ndarray
    label: int
    stimulus_id: int
    cycle_index: int
    symbol_index: int


def target_labels(geometry: SpellerGeometry, targets: np.ndarray, stimulus_ids: np.ndarray) -> np.ndarray:
    """1 where the stimulus flashes the target row or column, else 0.

    ``targets`` holds one (row, col) pair per trial.
    """
    targets = np.asarray(targets, dtype=np.int64).reshape(-1, 2)
    stim = np.asarray(stimulus_ids, dtype=np.int64)
    is_row = stim < geometry.n_rows
    hit = np.where(is_row, stim == targets[:, 0], stim - geometry.n_rows == targets[:, 1])
    return hit.astype(np.int8)


@dataclass(frozen=True, eq=False)
class SessionData:
    """A full session, stored column-wise.

    ``features`` has shape ``(n_trials, dim)``; the remaining arrays hold
    one entry per trial. ``electrode_count`` is set when the features are
    electrode-major concatenations of equal-length blocks.
    """

    config: SessionConfig
    features: np.ndarray
    labels: np.ndarray
    stimulus_ids: np.ndarray
    cycle_indices: np.ndarray
    symbol_indices: np.ndarray
    electrode_count: int | None = None

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=float)
        if feats.ndim != 2:
            raise DataError(f"features must be 2-D (trials x dim), got shape {feats.shape}")
        object.__setattr__(self, "features", feats)
        for name, dtype in [("labels", np.int8), ("stimulus_ids", np.int64),
                            ("cycle_indices", np.int64), ("symbol_indices", np.int64)]:
            arr = np.asarray(getattr(self, name), dtype=dtype).reshape(-1)
            if arr.shape[0] != feats.shape[0]:
                raise DataError(f"{name} has {arr.shape[0]} entries for {feats.shape[0]} trials")
            object.__setattr__(self, name, arr)
        if self.electrode_count is not None:
            if self.electrode_count < 1 or feats.shape[1] % self.electrode_count:
                raise DataError(
                    f"dimension {feats.shape[1]} does not split into {self.electrode_count} "
                    "equal electrode blocks")
        self._validate_structure()

    def _validate_structure(self):
        cfg = self.config
        k = cfg.geometry.n_stimuli
        expected = cfg.n_symbols * cfg.cycles_per_symbol * k
        if self.n_trials != expected:
            raise DataError(
                f"expected {expected} trials ({cfg.n_symbols} symbols x {cfg.cycles_per_symbol} "
                f"cycles x {k} stimuli), got {self.n_trials}")
        if expected == 0:
            return
        if (self.symbol_indices.min() < 0 or self.symbol_indices.max() >= cfg.n_symbols
                or self.cycle_indices.min() < 0 or self.cycle_indices.max() >= cfg.cycles_per_symbol
                or self.stimulus_ids.min() < 0 or self.stimulus_ids.max() >= k):
            raise DataError("trial metadata out of range")
        slot = (self.symbol_indices * cfg.cycles_per_symbol + self.cycle_indices) * k + self.stimulus_ids
        if np.bincount(slot, minlength=expected).max() != 1:
            raise DataError("every stimulus must flash exactly once per symbol and cycle")
        targets = np.asarray(cfg.symbols, dtype=np.int64)[self.symbol_indices]
        if not np.array_equal(target_labels(cfg.geometry, targets, self.stimulus_ids), self.labels):
            raise DataError("labels disagree with the symbol targets")

    @property
    def n_trials(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def n_symbols(self) -> int:
        return self.config.n_symbols

    @property
    def geometry(self) -> SpellerGeometry:
        return self.config.geometry

    @property
    def samples_per_electrode(self) -> int | None:
        if self.electrode_count is None:
            return None
        return self.dim // self.electrode_count

    @property
    def trials(self) -> list[Trial]:
        return [Trial(self.features[i], int(self.labels[i]), int(self.stimulus_ids[i]),
                      int(self.cycle_indices[i]), int(self.symbol_indices[i]))
                for i in range(self.n_trials)]

    @cached_property
    def grid_index(self) -> np.ndarray:
        """Trial indices arranged as ``(symbol, cycle, stimulus)``."""
        cfg = self.config
        order = np.lexsort((self.stimulus_ids, self.cycle_indices, self.symbol_indices))
        return order.reshape(cfg.n_symbols, cfg.cycles_per_symbol, cfg.geometry.n_stimuli)

    def symbol_mask(self, symbols: Sequence[int] | np.ndarray) -> np.ndarray:
        return np.isin(self.symbol_indices, np.asarray(symbols))

    def electrode_columns(self, electrodes: Sequence[int]) -> np.ndarray:
        """Feature columns of the given electrode blocks, in the order given."""
        if self.electrode_count is None:
            raise DataError("session has no electrode layout")
        t = self.samples_per_electrode
        for e in electrodes:
            if not 0 <= e < self.electrode_count:
                raise DataError(f"electrode {e} out of range 0..{self.electrode_count - 1}")
        return np.concatenate([np.arange(e * t, (e + 1) * t) for e in electrodes])

    def select_electrodes(self, electrodes: Sequence[int]) -> SessionData:
        cols = self.electrode_columns(electrodes)
        return SessionData(self.config, self.features[:, cols], self.labels, self.stimulus_ids,
                           self.cycle_indices, self.symbol_indices, electrode_count=len(electrodes))

    def __eq__(self, other):
        if not isinstance(other, SessionData):
            return NotImplemented
        return (self.config == other.config and self.electrode_count == other.electrode_count
                and self.features.shape == other.features.shape
                and np.array_equal(self.features, other.features)
                and all(np.array_equal(getattr(self, n), getattr(other, n))
                        for n in ("labels", "stimulus_ids", "cycle_indices", "symbol_indices")))

    __hash__ = None


def session_from_trials(config: SessionConfig, trials: Sequence[Trial], dim: int | None = None,
                        electrode_count: int | None = None) -> SessionData:
    if trials:
        features = np.stack([np.asarray(t.features, dtype=float) for t in trials])
    else:
        features = np.zeros((0, dim or 0))
    meta = np.array([(t.label, t.stimulus_id, t.cycle_index, t.symbol_index) for t in trials],
                    dtype=np.int64).reshape(-1, 4)
    return SessionData(config, features, meta[:, 0], meta[:, 1], meta[:, 2], meta[:, 3],
                       electrode_count=electrode_count)
