"""Command-line interface.

Every command writes a CSV table (plus JSON where noted) and a
``<output>.manifest.json`` sidecar holding the command, the resolved
parameters, the seed, the toolkit version and a timestamp.

Exit codes: 0 success, 1 unexpected toolkit error, 2 configuration or
argument error, 3 data error, 4 numerical error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from p300snr import __version__
from p300snr.accuracy import SpellerGeometry, accuracy_values, symbol_accuracy_values
from p300snr.errors import ConfigError, DataError, P300Error
from p300snr.harness import (
    ProxyComparison, accuracy_vs_repetitions, analytic_curve, fit_gamma, proxy_accuracy_comparison,
    rank_electrode_subsets)
from p300snr.ingest import read_session, write_session
from p300snr.lda import Shrinkage, fit_lda_session
from p300snr.session import SessionConfig
from p300snr.simulate import make_localized_model, make_synthetic_model, random_targets, simulate_session
from p300snr.snr import snr_report

CURVE_HEADER = ["n", "accuracy", "se", "se_reps", "predicted"]
ACCURACY_HEADER = ["N", "x", "H"]
SYMBOL_HEADER = ["n_rows", "n_cols", "cycles", "gamma", "accuracy"]
PROXY_HEADER = ["session", "empirical_snr", "peak_to_peak_v1", "peak_to_peak_v2",
                "area_under_curve", "accuracy"]

# reference acquisition defaults: 6x6 matrix, 15 cycles, 8 electrodes x 39 samples
SIMULATION_DEFAULTS = {
    "geometry": {"n_rows": 6, "n_cols": 6},
    "cycles_per_symbol": 15,
    "n_symbols": 50,
    "seed": 0,
    "electrode_count": 8,
    "model": {"kind": "synthetic", "dim": 312, "gamma": 0.5, "structure": "identity",
              "rho": 0.0, "noise_scale": 1.0},
}

ANALYSIS_DEFAULTS = {
    "seed": 0,
    "geometry": {"n_rows": 6, "n_cols": 6},
    "n_train": 10,
    "n_reps": 100,
    "shrinkage": "relative:1e-6",
    "keep": 7,
    "n_values": [1, 3, 5, 10, 15],
    "electrode_count": None,
    "fixed_n": 3,
    "n_list": [2, 4, 6, 12, 36],
    "x_min": -2.0,
    "x_max": 8.0,
    "x_step": 0.1,
    "cycles": None,
}


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return doc


def _merge(defaults: dict, config: dict, flags: dict) -> dict:
    out = json.loads(json.dumps(defaults))
    for source in (config, flags):
        for key, value in source.items():
            if value is None:
                continue
            if isinstance(value, dict) and isinstance(out.get(key), dict):
                out[key] = {**out[key], **value}
            else:
                out[key] = value
    return out


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _write_manifest(output: Path, command: str, params: dict) -> None:
    manifest = {
        "command": command,
        "parameters": params,
        "rng_seed": params.get("seed"),
        "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    Path(f"{output}.manifest.json").write_text(json.dumps(manifest, indent=2, default=str))


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _shrinkage(params) -> Shrinkage:
    return Shrinkage.parse(str(params["shrinkage"]))


def cmd_accuracy_table(args, params):
    n_list = params["n_list"]
    if params["x_step"] <= 0 or params["x_max"] < params["x_min"]:
        raise ConfigError("x grid needs x_step > 0 and x_max >= x_min")
    steps = int(math.floor((params["x_max"] - params["x_min"]) / params["x_step"] + 1e-9))
    xs = np.round(params["x_min"] + params["x_step"] * np.arange(steps + 1), 12)
    rows = []
    for n in n_list:
        for x, h in zip(xs, accuracy_values(n, xs)):
            rows.append([n, repr(float(x)), repr(float(h))])
    _write_csv(args.output, ACCURACY_HEADER, rows)
    if params["cycles"]:
        gammas = xs[xs >= 0]
        sym_rows = []
        for n in params["n_list"]:
            geometry = SpellerGeometry(n, n)
            for c in params["cycles"]:
                for g, acc in zip(gammas, symbol_accuracy_values(geometry, c, gammas)):
                    sym_rows.append([n, n, c, repr(float(g)), repr(float(acc))])
        sym_path = args.output.with_name(args.output.stem + "_symbol" + args.output.suffix)
        _write_csv(sym_path, SYMBOL_HEADER, sym_rows)


def build_simulation(params):
    geometry = SpellerGeometry(**params["geometry"])
    seed = int(params["seed"])
    model_rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    spec = params["model"]
    kind = spec.get("kind", "synthetic")
    electrode_count = params.get("electrode_count")
    if kind == "synthetic":
        model = make_synthetic_model(int(spec["dim"]), float(spec["gamma"]),
                                     spec.get("structure", "identity"), float(spec.get("rho", 0.0)),
                                     float(spec.get("noise_scale", 1.0)), model_rng)
        if electrode_count and model.dim % electrode_count:
            electrode_count = None
    elif kind == "localized":
        electrode_count = int(spec["electrode_count"])
        model = make_localized_model(electrode_count, int(spec["samples_per_electrode"]),
                                     float(spec["gamma"]), spec["shares"],
                                     float(spec.get("noise_scale", 1.0)), model_rng)
    else:
        raise ConfigError(f"unknown model kind {kind!r}")
    if params.get("symbols"):
        symbols = tuple(tuple(s) for s in params["symbols"])
    else:
        symbols = random_targets(geometry, int(params["n_symbols"]),
                                 np.random.default_rng(np.random.SeedSequence([seed, 2])))
    config = SessionConfig(geometry, int(params["cycles_per_symbol"]), symbols, seed)
    return model, config, electrode_count


def cmd_simulate(args, params):
    model, config, electrode_count = build_simulation(params)
    write_session(simulate_session(model, config, electrode_count), args.output)


def _read_curve_csv(path: Path):
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        cycles = np.array([int(r["n"]) for r in rows])
        acc = np.array([float(r["accuracy"]) for r in rows])
    except OSError as exc:
        raise DataError(f"cannot read curve {path}: {exc}") from None
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: curve CSV needs integer 'n' and numeric 'accuracy' columns ({exc})") from None
    return cycles, acc


def cmd_fit_curve(args, params):
    if args.session.suffix.lower() == ".csv":
        # an already measured curve: fit only
        geometry = SpellerGeometry(**params["geometry"])
        cycles, acc = _read_curve_csv(args.session)
        fit = fit_gamma((cycles, acc), geometry)
        predicted = analytic_curve(geometry, cycles, fit.gamma_fit)
        rows = [[n, repr(float(a)), "", "", repr(float(p))] for n, a, p in zip(cycles.tolist(), acc, predicted)]
        _write_csv(args.output, CURVE_HEADER, rows)
        fit_doc = {"gamma_fit": fit.gamma_fit, "sse": fit.sse}
        Path(args.output.with_suffix(".fit.json")).write_text(json.dumps(fit_doc, indent=2))
        return
    session = read_session(args.session)
    curve = accuracy_vs_repetitions(session, params["n_train"], params["n_reps"],
                                    _shrinkage(params), rng=params["seed"])
    fit = fit_gamma(curve, session.geometry)
    predicted = analytic_curve(session.geometry, curve.cycles, fit.gamma_fit)
    rows = [[n, repr(a), repr(se), repr(sr), repr(float(p))]
            for n, a, se, sr, p in zip(curve.cycles.tolist(), curve.accuracy.tolist(),
                                       curve.se.tolist(), curve.se_reps.tolist(), predicted)]
    _write_csv(args.output, CURVE_HEADER, rows)
    est = fit_lda_session(session, shrinkage=_shrinkage(params))
    fit_doc = {"gamma_fit": fit.gamma_fit, "sse": fit.sse,
               "empirical_snr": snr_report(est).empirical_snr,
               "n_train": curve.n_train, "n_reps": curve.n_reps}
    Path(args.output.with_suffix(".fit.json")).write_text(json.dumps(fit_doc, indent=2))


def cmd_rank_electrodes(args, params):
    session = read_session(args.session)
    ranking = rank_electrode_subsets(session, params["keep"], params["n_values"],
                                     params["electrode_count"], params["n_train"], params["n_reps"],
                                     _shrinkage(params), rng=params["seed"])
    n_values = ranking.n_values
    header = (["subset", "dropped", "empirical_snr"] + [f"scaled_snr_n{n}" for n in n_values]
              + [f"accuracy_n{n}" for n in n_values])
    rows = []
    for e in ranking.ranked_by_snr():
        rows.append([" ".join(map(str, e.electrodes)), " ".join(map(str, ranking.dropped(e))),
                     repr(e.empirical_snr)]
                    + [repr(e.scaled_snr(n)) for n in n_values]
                    + [repr(e.accuracy_by_n[n]) for n in n_values])
    _write_csv(args.output, header, rows)


def cmd_proxies(args, params):
    sessions = [read_session(p) for p in args.sessions]
    table = proxy_accuracy_comparison(sessions, params["fixed_n"], params["n_train"],
                                      params["n_reps"], _shrinkage(params), rng=params["seed"])
    rows = []
    for path, report, acc in zip(args.sessions, table.reports, table.accuracy):
        rows.append([str(path)] + [repr(getattr(report, k)) for k in ProxyComparison.PROXIES]
                    + [repr(acc)])
    _write_csv(args.output, PROXY_HEADER, rows)
    stats = {name: vars(st) for name, st in table.regressions.items()}
    Path(args.output.with_suffix(".regression.json")).write_text(json.dumps(stats, indent=2))


def cmd_snr(args, params):
    session = read_session(args.session)
    report = snr_report(fit_lda_session(session, shrinkage=_shrinkage(params)))
    _write_csv(args.output, list(report.as_dict()), [[repr(v) for v in report.as_dict().values()]])


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override its fields")
    common.add_argument("--seed", type=int)
    common.add_argument("--output", "-o", type=Path, required=True)

    ridge = argparse.ArgumentParser(add_help=False)
    ridge.add_argument("--shrinkage", help="fixed:LAMBDA or relative:EPS (default relative:1e-6)")
    validation = argparse.ArgumentParser(add_help=False, parents=[ridge])
    validation.add_argument("--n-train", type=int, dest="n_train")
    validation.add_argument("--n-reps", type=int, dest="n_reps")

    parser = argparse.ArgumentParser(prog="p300snr", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("accuracy-table", parents=[common], help="tabulate H_N(x)")
    p.add_argument("--n-list", type=_int_list, dest="n_list")
    p.add_argument("--x-min", type=float, dest="x_min")
    p.add_argument("--x-max", type=float, dest="x_max")
    p.add_argument("--x-step", type=float, dest="x_step")
    p.add_argument("--cycles", type=_int_list,
                   help="also tabulate symbol accuracy of square NxN spellers at these cycle counts")
    p.set_defaults(func=cmd_accuracy_table)

    p = sub.add_parser("simulate", parents=[common], help="simulate a session file")
    p.add_argument("--cycles", type=int, dest="cycles_per_symbol")
    p.add_argument("--symbols", type=int, dest="n_symbols", help="number of random target symbols")
    p.add_argument("--gamma", type=float, help="theoretical single-trial SNR")
    p.add_argument("--dim", type=int)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit-curve", parents=[common, validation],
                       help="accuracy vs repetitions and best-fit SNR")
    p.add_argument("session", type=Path,
                   help="session JSON, or a CSV with columns n, accuracy to fit directly")
    p.set_defaults(func=cmd_fit_curve)

    p = sub.add_parser("rank-electrodes", parents=[common, validation],
                       help="brute-force electrode subset ranking")
    p.add_argument("session", type=Path)
    p.add_argument("--keep", type=int)
    p.add_argument("--n-values", type=_int_list, dest="n_values")
    p.add_argument("--electrodes", type=int, dest="electrode_count",
                   help="number of electrode blocks (default: from the session header)")
    p.set_defaults(func=cmd_rank_electrodes)

    p = sub.add_parser("proxies", parents=[common, validation],
                       help="compare SNR and amplitude proxies against accuracy")
    p.add_argument("sessions", type=Path, nargs="+")
    p.add_argument("--fixed-n", type=int, dest="fixed_n")
    p.set_defaults(func=cmd_proxies)

    p = sub.add_parser("snr", parents=[common, ridge], help="empirical SNR and proxies")
    p.add_argument("session", type=Path)
    p.set_defaults(func=cmd_snr)
    return parser


_NON_PARAMS = {"func", "command", "config", "output", "session", "sessions"}


def _resolve(args) -> dict:
    flags = {k: v for k, v in vars(args).items() if k not in _NON_PARAMS}
    config = _load_config(args.config)
    if args.command == "simulate":
        model_flags = {k: flags.pop(k) for k in ("gamma", "dim")}
        flags["model"] = {k: v for k, v in model_flags.items() if v is not None}
        return _merge(SIMULATION_DEFAULTS, config, flags)
    return _merge(ANALYSIS_DEFAULTS, config, flags)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        params = _resolve(args)
        args.func(args, params)
        _write_manifest(args.output, args.command, params)
    except P300Error as exc:
        print(f"p300snr {args.command}: {exc}", file=sys.stderr)
        return exc.exit_code
    except (KeyError, TypeError) as exc:
        print(f"p300snr {args.command}: bad configuration: {exc}", file=sys.stderr)
        return ConfigError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
