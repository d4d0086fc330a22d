"""Command-line front end.

Subcommands ``sweep``, ``fa`` and ``coverage`` run Monte Carlo experiments
from a JSON config; ``estimate`` fits one estimator to a training-matrix file;
``detect`` applies the AMF to one test vector. Exit status is 0 on success,
2 for invalid input and 3 for numerical failures.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
import warnings
from pathlib import Path
from typing import Sequence

import numpy as np

from . import detection as det
from .core import InputError, NumericalError, hermitian_eig
from .datagen import load_covariance, load_matrix, load_vector, save_covariance
from .harness import (
    ESTIMATORS,
    EstimatorSpec,
    ExperimentConfig,
    TrialError,
    warn_square,
    coverage_experiment,
    false_alarm_experiment,
    sweep,
)
from .shrinkage import anderson, fml, lw_linear, lwd_shrink, oracle_shrinker, scm, scm_estimator

TRIAL_HEADER = "estimator,n,trial,eta,eta_tilde,xi,nu_sq,nu_hat,runtime_s"
PERCENTILE_HEADER = "estimator,n,metric,percentile,value"
FA_HEADER = "estimator,n,draw,xi,pfa_conditional,pfa_empirical,stderr,test_draws"
COVERAGE_HEADER = "estimator,n,q,trials,covered,coverage"
DETECT_HEADER = "statistic,threshold,decision,xi,nu_hat,pfa_predicted,pd_lower,pd_upper,confidence"

REQUIRED_KEYS = ("p", "n_values", "estimators")
CONFIG_KEYS = {
    "p": int,
    "n_values": list,
    "estimators": list,
    "trials": int,
    "tau": float,
    "q": float,
    "percentiles": list,
    "seed": int,
    "spikes": list,
    "covariance_path": str,
    "distribution": str,
    "amplitude": float,
    "fa_test_draws": int,
    "lwd_allow_square": bool,
}
ESTIMATOR_KEYS = ("tag", "noise_floor", "rank", "kernel", "isotonic", "name")


class ConfigError(InputError):
    pass


def _num(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return format(float(v), ".17g")


def _check_type(key: str, value, kind):
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if kind is int and isinstance(value, float) and value.is_integer():
        return int(value)
    if kind is str and value is None:
        return None
    if not isinstance(value, kind) or (kind is int and isinstance(value, bool)):
        raise ConfigError(f"config field {key!r}: expected {kind.__name__}, got {value!r}")
    return value


def _parse_estimator(i: int, entry) -> EstimatorSpec:
    if isinstance(entry, str):
        return EstimatorSpec(entry)
    if not isinstance(entry, dict) or "tag" not in entry:
        raise ConfigError(f"config field 'estimators[{i}]': expected a tag or an object with 'tag'")
    unknown = set(entry) - set(ESTIMATOR_KEYS)
    if unknown:
        raise ConfigError(f"config field 'estimators[{i}]': unknown keys {sorted(unknown)}")
    try:
        return EstimatorSpec(**entry)
    except TypeError as exc:
        raise ConfigError(f"config field 'estimators[{i}]': {exc}") from exc


def _parse_override(item: str) -> tuple[str, object]:
    key, sep, text = item.partition("=")
    key = key.strip()
    if not sep or not key:
        raise ConfigError(f"override {item!r} is not KEY=VALUE")
    if key not in CONFIG_KEYS:
        raise ConfigError(f"override {item!r}: unknown config key {key!r}")
    try:
        value = json.loads(text)
    except json.JSONDecodeError:
        value = text
    return key, value


def parse_config(path: str | Path | None, overrides: Sequence[str] = (), seed: int | None = None) -> ExperimentConfig:
    """Read a flat JSON config, apply ``KEY=VALUE`` overrides, validate.

    Defaults: trials=100, tau=3, q=0.9, percentiles=[10, 50, 90], seed=0,
    spikes=[25, 16, 9, 4, 2], distribution="gaussian", amplitude=1,
    fa_test_draws=100000, lwd_allow_square=false.
    """
    raw: dict = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from exc
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: top-level JSON value must be an object")
    unknown = sorted(set(raw) - set(CONFIG_KEYS))
    if unknown:
        raise ConfigError(f"{path}: unknown config keys {unknown}")
    for item in overrides:
        key, value = _parse_override(item)
        raw[key] = value
    if seed is not None:
        raw["seed"] = seed
    missing = [k for k in REQUIRED_KEYS if k not in raw]
    if missing:
        raise ConfigError(f"config is missing required fields {missing}")
    fields = {k: _check_type(k, v, CONFIG_KEYS[k]) for k, v in raw.items()}
    fields["estimators"] = tuple(_parse_estimator(i, e) for i, e in enumerate(fields["estimators"]))
    for key in ("n_values", "percentiles", "spikes"):
        if key in fields:
            fields[key] = tuple(fields[key])
    try:
        config = ExperimentConfig(**fields)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config: {exc}") from exc
    warn_square(config, stacklevel=2)
    return config


# --- writers --------------------------------------------------------------------


def _header_lines(kind: str, config: ExperimentConfig, wall: float) -> list[str]:
    return [
        f"# stapshrink {kind} config_hash={config.config_hash()} seed={config.seed}",
        f"# wall_clock_s={wall:.3f}",
    ]


def format_sweep(table, config: ExperimentConfig, timing: bool = False) -> str:
    """Trial block, blank line, percentile block. Only the second comment line varies between runs."""
    lines = _header_lines("sweep", config, table.metadata["wall_clock_s"])
    lines.append(TRIAL_HEADER)
    for r in table.records:
        vals = [r.eta, r.eta_tilde, r.xi, r.nu_sq, r.nu_hat]
        runtime = format(r.runtime_seconds, ".6g") if timing else ""
        lines.append(",".join([r.estimator, str(r.n), str(r.trial), *map(_num, vals), runtime]))
    lines.append("")
    lines.append(PERCENTILE_HEADER)
    for est, n, metric, pct, value in table.percentiles:
        lines.append(",".join([est, str(n), metric, _num(pct), _num(value)]))
    return "\n".join(lines) + "\n"


def read_sweep_csv(path) -> tuple[list[dict], list[dict]]:
    """Parse a sweep CSV back into trial and percentile row dicts."""
    trials, pcts, target, header = [], [], None, None
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line or line.startswith("#"):
            continue
        if line == TRIAL_HEADER:
            target, header = trials, TRIAL_HEADER.split(",")
            continue
        if line == PERCENTILE_HEADER:
            target, header = pcts, PERCENTILE_HEADER.split(",")
            continue
        if target is None:
            raise InputError(f"{path}: data before a header line")
        target.append(dict(zip(header, line.split(","))))
    return trials, pcts


def _write(out: str | None, text: str) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


# --- subcommands ----------------------------------------------------------------


def _cmd_sweep(args) -> tuple[int, str]:
    config = parse_config(args.config, args.set, args.seed)
    table = sweep(config, workers=args.workers)
    _write(args.out, format_sweep(table, config, timing=args.timing))
    return (
        len(table.records) + len(table.percentiles),
        f"{len(table.records)} trial rows, {len(table.percentiles)} percentile rows",
    )


def _cmd_fa(args) -> tuple[int, str]:
    config = parse_config(args.config, args.set, args.seed)
    started = time.time()
    rows = false_alarm_experiment(config, workers=args.workers)
    lines = _header_lines("fa", config, time.time() - started)
    lines.append(FA_HEADER)
    for r in rows:
        vals = [r.xi, r.pfa_conditional, r.pfa_empirical, r.stderr]
        lines.append(",".join([r.estimator, str(r.n), str(r.draw), *map(_num, vals), str(r.test_draws)]))
    _write(args.out, "\n".join(lines) + "\n")
    return len(rows), f"{len(rows)} false-alarm rows"


def _cmd_coverage(args) -> tuple[int, str]:
    config = parse_config(args.config, args.set, args.seed)
    started = time.time()
    rows = coverage_experiment(config, workers=args.workers)
    lines = _header_lines("coverage", config, time.time() - started)
    lines.append(COVERAGE_HEADER)
    for r in rows:
        lines.append(",".join([r.estimator, str(r.n), _num(r.q), str(r.trials), str(r.covered), _num(r.coverage)]))
    _write(args.out, "\n".join(lines) + "\n")
    return len(rows), f"{len(rows)} coverage rows"


def _cmd_estimate(args) -> tuple[int, str]:
    X = load_matrix(args.training)
    S_eig = hermitian_eig(scm(X))
    tag = args.estimator
    if tag == "SCM":
        est = scm_estimator(S_eig)
    elif tag == "Oracle":
        if args.true_covariance is None:
            raise InputError("the Oracle estimator needs --true-covariance")
        est = oracle_shrinker(S_eig, load_covariance(args.true_covariance))
    elif tag == "FML":
        est = fml(S_eig, args.noise_floor)
    elif tag == "AndersonR":
        if args.rank is None:
            raise InputError("AndersonR needs --rank")
        est = anderson(S_eig, args.rank)
    elif tag == "LWLinear":
        est = lw_linear(X, S_eig)
    else:
        est = lwd_shrink(
            X, args.noise_floor, kernel=args.kernel, allow_square=args.allow_square, S_eig=S_eig
        )
    if args.out is None:
        raise InputError("estimate needs --out for the covariance file")
    save_covariance(args.out, est.matrix)
    return 1, f"{tag} estimate ({est.dim}x{est.dim})"


def _cmd_detect(args) -> tuple[int, str]:
    R_hat = load_covariance(args.covariance)
    s = load_vector(args.steering)
    x = load_vector(args.test)
    R = load_covariance(args.true_covariance) if args.true_covariance else None
    report = det.detect(s, R_hat, x, tau=args.tau, q=args.q, R=R)
    row = report.as_row()
    text = DETECT_HEADER + "\n" + ",".join(
        v if isinstance(v, str) else _num(v) for v in (row[k] for k in DETECT_HEADER.split(","))
    ) + "\n"
    _write(args.out, text)
    return 1, f"decision {report.decision} (T = {report.statistic:.4g})"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stapshrink", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p):
        p.add_argument("--out", metavar="PATH", help="output CSV (default: stdout)")
        p.add_argument("--quiet", action="store_true", help="no summary line, no warnings")

    for name, fn, help_ in (
        ("sweep", _cmd_sweep, "NSINR / xi percentile sweep over n"),
        ("fa", _cmd_fa, "conditional vs empirical false-alarm rates"),
        ("coverage", _cmd_coverage, "coverage of the detection-rate interval"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", metavar="PATH", required=True)
        p.add_argument("--set", metavar="KEY=VALUE", action="append", default=[])
        p.add_argument("--seed", type=int, metavar="U64")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--timing", action="store_true", help="fill the runtime_s column")
        common(p)
        p.set_defaults(func=fn)

    p = sub.add_parser("estimate", help="fit an estimator to a training-matrix file")
    p.add_argument("--training", required=True, metavar="PATH")
    p.add_argument("--estimator", choices=[e for e in ESTIMATORS if e != "Population"], default="LWD")
    p.add_argument("--noise-floor", type=float, default=1.0)
    p.add_argument("--rank", type=int)
    p.add_argument("--kernel", choices=["semicircle", "unnormalized"], default="semicircle")
    p.add_argument("--allow-square", action="store_true")
    p.add_argument("--true-covariance", metavar="PATH")
    common(p)
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("detect", help="AMF decision and performance report for one test vector")
    p.add_argument("--covariance", required=True, metavar="PATH", help="covariance estimate")
    p.add_argument("--steering", required=True, metavar="PATH")
    p.add_argument("--test", required=True, metavar="PATH")
    p.add_argument("--true-covariance", metavar="PATH", help="population covariance, for xi")
    p.add_argument("--tau", type=float, default=3.0)
    p.add_argument("--q", type=float, default=0.9)
    common(p)
    p.set_defaults(func=_cmd_detect)
    return parser


def _show_warning(message, category, filename, lineno, file=None, line=None):
    print(f"warning: {message}", file=sys.stderr)


def run(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore" if args.quiet else "once")
        warnings.showwarning = _show_warning
        try:
            _, summary = args.func(args)
        except TrialError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 3 if isinstance(exc.cause, NumericalError) else 2
        except InputError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        except NumericalError as exc:
            extra = f" {exc.context}" if exc.context else ""
            print(f"error: {exc}{extra}", file=sys.stderr)
            return 3
    if not args.quiet:
        dest = args.out or "stdout"
        print(f"{args.subcommand}: {summary} -> {dest} in {time.perf_counter() - started:.2f} s")
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return run(args)


if __name__ == "__main__":
    sys.exit(main())
