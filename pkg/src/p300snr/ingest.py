"""Epoching of pre-filtered recordings and the JSON session file format.

Session file layout (UTF-8 JSON, one document)::

    {
      "format": "p300snr.session",
      "version": 1,
      "header": {
        "n_rows": 6, "n_cols": 6, "cycles_per_symbol": 15,
        "dimension": 312, "electrode_count": 8, "samples_per_electrode": 39,
        "rng_seed": 0, "n_trials": 180
      },
      "symbols": [[row, col], ...],
      "trials": [
        {"symbol": 0, "cycle": 0, "stimulus": 4, "label": 0, "features": [...]},
        ...
      ]
    }

``electrode_count`` and ``samples_per_electrode`` are ``null`` when the
features have no electrode layout. Floats are written with Python's
shortest round-trip representation (at most 17 significant digits), so
reading a file back reproduces every value bit for bit.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from p300snr.accuracy import SpellerGeometry
from p300snr.errors import DataError, DomainError, P300Error
from p300snr.lda import average_stimulus_signals
from p300snr.session import SessionConfig, SessionData, Trial, session_from_trials

FORMAT_NAME = "p300snr.session"
FORMAT_VERSION = 1

ACQUISITION_RATE_HZ = 256.0
DEFAULT_WINDOW_MS = 600.0
DEFAULT_DOWNSAMPLE = 4


class SessionFormatError(DataError):
    """A session file could not be parsed or violates the schema."""


class Event(NamedTuple):
    sample_index: int
    stimulus_id: int
    is_target: int
    symbol_index: int
    cycle_index: int


@dataclass(frozen=True, eq=False)
class RawRecording:
    """Continuous multichannel signal with flash-onset events.

    ``channels`` has shape ``(n_channels, n_samples)``.
    """

    sample_rate: float
    channels: np.ndarray
    events: tuple[Event, ...] = ()

    def __post_init__(self):
        ch = np.atleast_2d(np.asarray(self.channels, dtype=float))
        if ch.ndim != 2:
            raise DataError(f"channels must be 2-D, got shape {ch.shape}")
        if not self.sample_rate > 0:
            raise DataError("sample_rate must be positive")
        object.__setattr__(self, "channels", ch)
        object.__setattr__(self, "events", tuple(Event(*map(int, e)) for e in self.events))

    @property
    def n_channels(self) -> int:
        return self.channels.shape[0]

    @property
    def n_samples(self) -> int:
        return self.channels.shape[1]


@dataclass(frozen=True)
class EpochConfig:
    window_ms: float = DEFAULT_WINDOW_MS
    downsample_factor: int = DEFAULT_DOWNSAMPLE
    electrode_order: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.downsample_factor < 1:
            raise DomainError("downsample_factor must be >= 1")
        if not self.window_ms > 0:
            raise DomainError("window_ms must be positive")


def samples_per_epoch(window_ms: float, sample_rate: float) -> int:
    """Samples covering ``window_ms`` from the onset sample.

    Partial samples count: 600 ms at 64 Hz is 38.4 sample periods and
    therefore 39 samples.
    """
    count = math.ceil(round(window_ms * sample_rate / 1000.0, 9))
    if count < 1:
        raise DomainError(f"a {window_ms} ms window at {sample_rate} Hz holds no samples")
    return count


def downsample(raw: RawRecording, factor: int) -> RawRecording:
    """Average each run of ``factor`` consecutive samples.

    Trailing samples that do not fill a run are dropped. Event positions
    become ``sample_index // factor``.
    """
    if int(factor) != factor or factor < 1:
        raise DomainError(f"downsample factor must be an integer >= 1, got {factor}")
    factor = int(factor)
    if factor == 1:
        return raw
    usable = raw.n_samples - raw.n_samples % factor
    blocks = raw.channels[:, :usable].reshape(raw.n_channels, usable // factor, factor)
    events = tuple(e._replace(sample_index=e.sample_index // factor) for e in raw.events)
    return RawRecording(raw.sample_rate / factor, blocks.mean(axis=2), events)


def extract_epochs(raw: RawRecording, cfg: EpochConfig = EpochConfig()) -> list[Trial]:
    """Downsample ``raw`` by ``cfg.downsample_factor`` and cut one epoch per event.

    Each feature vector is electrode-major: all samples of the first listed
    electrode, then the second, and so on. Windows of neighbouring events
    may overlap.
    """
    ds = downsample(raw, cfg.downsample_factor)
    t = samples_per_epoch(cfg.window_ms, ds.sample_rate)
    order = tuple(range(ds.n_channels)) if cfg.electrode_order is None else tuple(cfg.electrode_order)
    for e in order:
        if not 0 <= e < ds.n_channels:
            raise DataError(f"electrode {e} not in recording with {ds.n_channels} channels")
    picked = ds.channels[list(order)]
    trials = []
    for i, ev in enumerate(ds.events):
        start = ev.sample_index
        if start < 0 or start + t > ds.n_samples:
            raise DataError(
                f"event {i} (sample {start}, stimulus {ev.stimulus_id}, symbol {ev.symbol_index}, "
                f"cycle {ev.cycle_index}) window of {t} samples exceeds recording of {ds.n_samples}")
        trials.append(Trial(picked[:, start:start + t].reshape(-1), int(ev.is_target),
                            ev.stimulus_id, ev.cycle_index, ev.symbol_index))
    return trials


def epochs_to_session(trials: Sequence[Trial], geometry: SpellerGeometry, cycles_per_symbol: int,
                      symbols: Sequence[tuple[int, int]], electrode_count: int | None = None,
                      rng_seed: int = 0) -> SessionData:
    config = SessionConfig(geometry, cycles_per_symbol, tuple(symbols), rng_seed)
    return session_from_trials(config, trials, electrode_count=electrode_count)


def session_to_dict(session: SessionData) -> dict:
    cfg = session.config
    header = {
        "n_rows": cfg.geometry.n_rows,
        "n_cols": cfg.geometry.n_cols,
        "cycles_per_symbol": cfg.cycles_per_symbol,
        "dimension": session.dim,
        "electrode_count": session.electrode_count,
        "samples_per_electrode": session.samples_per_electrode,
        "rng_seed": cfg.rng_seed,
        "n_trials": session.n_trials,
    }
    trials = [
        {"symbol": int(sym), "cycle": int(cyc), "stimulus": int(stim), "label": int(lab),
         "features": feat}
        for sym, cyc, stim, lab, feat in zip(
            session.symbol_indices, session.cycle_indices, session.stimulus_ids, session.labels,
            session.features.tolist())
    ]
    return {"format": FORMAT_NAME, "version": FORMAT_VERSION, "header": header,
            "symbols": [list(s) for s in cfg.symbols], "trials": trials}


def _field(doc, key, kind, where):
    if not isinstance(doc, dict) or key not in doc:
        raise SessionFormatError(f"{where}: missing field {key!r}")
    value = doc[key]
    if kind is int and (isinstance(value, bool) or not isinstance(value, int)):
        raise SessionFormatError(f"{where}.{key}: expected integer, got {value!r}")
    if kind is list and not isinstance(value, list):
        raise SessionFormatError(f"{where}.{key}: expected array")
    if kind is dict and not isinstance(value, dict):
        raise SessionFormatError(f"{where}.{key}: expected object")
    return value


def session_from_dict(doc: dict) -> SessionData:
    if not isinstance(doc, dict) or doc.get("format") != FORMAT_NAME:
        raise SessionFormatError("not a session document (missing format tag)")
    if doc.get("version") != FORMAT_VERSION:
        raise SessionFormatError(f"unsupported session format version {doc.get('version')!r}")
    header = _field(doc, "header", dict, "$")
    n_rows = _field(header, "n_rows", int, "header")
    n_cols = _field(header, "n_cols", int, "header")
    cycles = _field(header, "cycles_per_symbol", int, "header")
    dim = _field(header, "dimension", int, "header")
    seed = _field(header, "rng_seed", int, "header")
    electrodes = header.get("electrode_count")
    if electrodes is not None and not isinstance(electrodes, int):
        raise SessionFormatError("header.electrode_count: expected integer or null")
    symbols = _field(doc, "symbols", list, "$")
    raw_trials = _field(doc, "trials", list, "$")
    if "n_trials" in header and header["n_trials"] != len(raw_trials):
        raise SessionFormatError(
            f"header.n_trials = {header['n_trials']} but {len(raw_trials)} trials present")
    try:
        targets = [tuple(int(v) for v in s) for s in symbols]
        if any(len(t) != 2 for t in targets):
            raise ValueError("each symbol must be a [row, col] pair")
        config = SessionConfig(SpellerGeometry(n_rows, n_cols), cycles, tuple(targets), seed)
    except (TypeError, ValueError) as exc:
        raise SessionFormatError(f"header/symbols: {exc}") from None
    features = np.empty((len(raw_trials), dim))
    meta = np.empty((len(raw_trials), 4), dtype=np.int64)
    for i, tr in enumerate(raw_trials):
        where = f"trials[{i}]"
        meta[i] = [_field(tr, k, int, where) for k in ("label", "stimulus", "cycle", "symbol")]
        feat = _field(tr, "features", list, where)
        if len(feat) != dim:
            raise SessionFormatError(f"{where}.features: length {len(feat)}, header says {dim}")
        try:
            features[i] = feat
        except (TypeError, ValueError):
            raise SessionFormatError(f"{where}.features: non-numeric entry") from None
    try:
        return SessionData(config, features, meta[:, 0], meta[:, 1], meta[:, 2], meta[:, 3],
                           electrode_count=electrodes)
    except P300Error as exc:
        raise SessionFormatError(str(exc)) from None


def write_session(session: SessionData, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(session_to_dict(session), fh, allow_nan=False)


def read_session(path) -> SessionData:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read session file {path}: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SessionFormatError(
            f"{path}: line {exc.lineno} column {exc.colno} (offset {exc.pos}): {exc.msg}") from None
    try:
        return session_from_dict(doc)
    except SessionFormatError as exc:
        raise SessionFormatError(f"{path}: {exc}") from None


def export_averaged_erps(session: SessionData, path, use_cycles: int | None = None) -> None:
    """CSV of per-stimulus averaged signals, one row per (symbol, stimulus).

    Columns: ``symbol, stimulus, label, f0, f1, ...``.
    """
    n = use_cycles or session.config.cycles_per_symbol
    targets = session.config.symbols
    n_rows = session.geometry.n_rows
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["symbol", "stimulus", "label"] + [f"f{j}" for j in range(session.dim)])
        for s in range(session.n_symbols):
            averages = average_stimulus_signals(session, s, n)
            row, col = targets[s]
            for k, avg in enumerate(averages):
                label = int(k == row or k - n_rows == col)
                writer.writerow([s, k, label] + [repr(float(v)) for v in avg])
