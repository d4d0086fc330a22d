"""Monte Carlo experiments: NSINR/xi sweeps, false-alarm and coverage checks.

Every random draw is keyed by ``(seed, label, n, trial)`` so results do not
depend on how work items are distributed over processes. Within one
``(n, trial)`` cell all estimators see the same steering vector, training
matrix and test vector.
"""

from __future__ import annotations

import hashlib
import json
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from . import detection as det
from .core import InputError, NumericalError, hermitian_eig, sqrt_factor
from .datagen import (
    SpikedSpectrum,
    derive_rng,
    load_covariance,
    sample_steering,
    sample_test_vector,
    sample_training,
    spiked_covariance,
)
from .shrinkage import (
    anderson,
    fml,
    lw_linear,
    lwd_shrink,
    oracle_shrinker,
    scm,
    scm_estimator,
)

__all__ = [
    "ESTIMATORS",
    "METRICS",
    "EstimatorSpec",
    "ExperimentConfig",
    "TrialRecord",
    "SweepTable",
    "TrialError",
    "nearest_rank",
    "run_trial",
    "sweep",
    "false_alarm_experiment",
    "coverage_experiment",
]

# "Population" plugs in the true covariance; it is a reference, not an estimator.
ESTIMATORS = ("SCM", "Oracle", "FML", "AndersonR", "LWLinear", "LWD", "Population")
METRICS = ("eta", "eta_tilde", "xi", "nu_sq", "nu_hat")
DEFAULT_SPIKES = (25.0, 16.0, 9.0, 4.0, 2.0)


class TrialError(RuntimeError):
    """An estimator failed inside a trial; carries the trial key."""

    def __init__(self, key: dict, cause: Exception):
        super().__init__(f"trial {key} failed: {type(cause).__name__}: {cause}")
        self.key = key
        self.cause = cause


@dataclass(frozen=True)
class EstimatorSpec:
    tag: str
    noise_floor: float = 1.0
    rank: int | None = None
    kernel: str = "semicircle"
    isotonic: bool = True
    name: str | None = None

    def __post_init__(self):
        if self.tag not in ESTIMATORS:
            raise InputError(f"unknown estimator {self.tag!r}; choose from {', '.join(ESTIMATORS)}")
        if not self.noise_floor > 0:
            raise InputError(f"{self.tag}: noise_floor must be positive")
        if self.kernel not in ("semicircle", "unnormalized"):
            raise InputError(f"{self.tag}: unknown kernel {self.kernel!r}")

    @property
    def label(self) -> str:
        return self.name or self.tag


@dataclass(frozen=True)
class ExperimentConfig:
    p: int
    n_values: tuple[int, ...]
    estimators: tuple[EstimatorSpec, ...]
    trials: int = 100
    tau: float = 3.0
    q: float = 0.9
    percentiles: tuple[float, ...] = (10.0, 50.0, 90.0)
    seed: int = 0
    spikes: tuple[float, ...] = DEFAULT_SPIKES
    covariance_path: str | None = None
    distribution: str = "gaussian"
    amplitude: float = 1.0
    fa_test_draws: int = 100_000
    lwd_allow_square: bool = False

    def __post_init__(self):
        object.__setattr__(self, "n_values", tuple(int(n) for n in self.n_values))
        object.__setattr__(self, "percentiles", tuple(float(v) for v in self.percentiles))
        object.__setattr__(self, "spikes", tuple(float(v) for v in self.spikes))
        specs = tuple(e if isinstance(e, EstimatorSpec) else EstimatorSpec(e) for e in self.estimators)
        if self.covariance_path is None:
            # known spike count is the natural Anderson rank
            specs = tuple(
                replace(e, rank=len(self.spikes)) if e.tag == "AndersonR" and e.rank is None else e
                for e in specs
            )
        object.__setattr__(self, "estimators", specs)
        if self.p < 2:
            raise InputError("p must be at least 2")
        if not self.n_values or min(self.n_values) < 1:
            raise InputError("n_values must be a non-empty list of positive counts")
        if not specs:
            raise InputError("at least one estimator is required")
        if len({e.label for e in specs}) != len(specs):
            raise InputError("estimators must be distinct")
        if self.trials < 1:
            raise InputError("trials must be at least 1")
        if list(self.percentiles) != sorted(self.percentiles) or not all(
            0 <= v <= 100 for v in self.percentiles
        ):
            raise InputError("percentiles must be sorted values in [0, 100]")
        if not 0 <= self.q < 1:
            raise InputError("q must lie in [0, 1)")
        if self.tau < 0:
            raise InputError("tau must be nonnegative")
        if self.distribution not in ("gaussian", "laplace"):
            raise InputError(f"unknown distribution {self.distribution!r}")
        if self.fa_test_draws < 1:
            raise InputError("fa_test_draws must be positive")
        if self.covariance_path is None:
            SpikedSpectrum(self.p, self.spikes)
        if not 0 <= int(self.seed) < 2**64:
            raise InputError("seed must be an unsigned 64-bit integer")

    def population(self) -> tuple[np.ndarray, np.ndarray, det.HermitianSolver]:
        """``(R, R^{1/2}, solver for R)``, cached per process."""
        return _population(self.p, self.spikes, self.covariance_path)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["n_values"] = list(self.n_values)
        d["estimators"] = [asdict(e) for e in self.estimators]
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]

    def active_estimators(self, n: int) -> tuple[EstimatorSpec, ...]:
        """Estimators evaluated at sample count ``n`` (LWD drops out at n = p)."""
        if n == self.p and not self.lwd_allow_square:
            return tuple(e for e in self.estimators if e.tag != "LWD")
        return self.estimators


@lru_cache(maxsize=8)
def _population(p: int, spikes: tuple[float, ...], path: str | None):
    if path is None:
        R = spiked_covariance(SpikedSpectrum(p, spikes))
    else:
        R = load_covariance(path)
        if R.shape[0] != p:
            raise InputError(f"{path}: covariance is {R.shape[0]}x{R.shape[0]}, config has p={p}")
    R.setflags(write=False)
    F = sqrt_factor(R)
    F.setflags(write=False)
    return R, F, det.HermitianSolver(R)


@dataclass(frozen=True)
class TrialRecord:
    estimator: str
    n: int
    trial: int
    eta: float
    eta_tilde: float
    xi: float
    nu_sq: float
    nu_hat: float
    runtime_seconds: float = field(default=0.0, compare=False)

    def metric(self, name: str) -> float:
        return getattr(self, name)


@dataclass
class SweepTable:
    records: list[TrialRecord]
    percentiles: list[tuple[str, int, str, float, float]]
    metadata: dict

    def percentile(self, estimator: str, n: int, metric: str, pct: float) -> float:
        for row in self.percentiles:
            if row[:4] == (estimator, n, metric, float(pct)):
                return row[4]
        raise KeyError((estimator, n, metric, pct))

    def values(self, estimator: str, n: int, metric: str) -> np.ndarray:
        return np.array(
            [r.metric(metric) for r in self.records if r.estimator == estimator and r.n == n]
        )


def nearest_rank(values: Sequence[float], pct: float) -> float:
    """Nearest-rank percentile: the ``ceil(pct/100 * N)``-th smallest value."""
    data = sorted(values)
    if not data:
        raise InputError("percentile of an empty sample")
    k = max(1, math.ceil(pct / 100.0 * len(data)))
    return data[min(k, len(data)) - 1]


# --- single trials ------------------------------------------------------------


@dataclass(frozen=True)
class _Draw:
    s: np.ndarray
    X: np.ndarray
    x: np.ndarray


def _draw(config: ExperimentConfig, n: int, trial: int, prefix: str = "") -> _Draw:
    R, F, _ = config.population()
    s = sample_steering(config.p, derive_rng(config.seed, prefix + "steering", n, trial))
    X = sample_training(
        R, n, config.distribution, derive_rng(config.seed, prefix + "training", n, trial), factor=F
    )
    hyp = "H1" if config.amplitude != 0 else "H0"
    x = sample_test_vector(
        R, s, config.amplitude, hyp, derive_rng(config.seed, prefix + "test", n, trial), factor=F
    )
    return _Draw(s, X, x)


def _fit(spec: EstimatorSpec, X: np.ndarray, S_eig, R, allow_square: bool):
    if spec.tag == "Population":
        return det.HermitianSolver(R)
    if spec.tag == "SCM":
        return scm_estimator(S_eig)
    if spec.tag == "Oracle":
        return oracle_shrinker(S_eig, R)
    if spec.tag == "FML":
        return fml(S_eig, spec.noise_floor)
    if spec.tag == "AndersonR":
        if spec.rank is None:
            raise InputError("AndersonR needs a rank")
        return anderson(S_eig, spec.rank)
    if spec.tag == "LWLinear":
        return lw_linear(X, S_eig)
    if spec.tag == "LWD":
        return lwd_shrink(
            X,
            spec.noise_floor,
            kernel=spec.kernel,
            isotonic=spec.isotonic,
            allow_square=allow_square,
            S_eig=S_eig,
        )
    raise InputError(f"unknown estimator {spec.tag!r}")


def _record(config, spec, n, trial, draw, S_eig) -> TrialRecord:
    R, _, R_solver = config.population()
    start = time.perf_counter()
    try:
        est = _fit(spec, draw.X, S_eig, R, config.lwd_allow_square)
        m = det.sinr_metrics(draw.s, est, R_solver, config.amplitude)
        nh = det.nu_hat(draw.s, est, draw.x)
    except (InputError, NumericalError) as exc:
        raise TrialError({"estimator": spec.label, "n": n, "trial": trial}, exc) from exc
    return TrialRecord(
        spec.label, n, trial, m.eta, m.eta_tilde, m.xi, m.nu_sq, nh, time.perf_counter() - start
    )


def _cell(config: ExperimentConfig, n: int, trial: int) -> list[TrialRecord]:
    draw = _draw(config, n, trial)
    S_eig = hermitian_eig(scm(draw.X))
    return [_record(config, spec, n, trial, draw, S_eig) for spec in config.active_estimators(n)]


def run_trial(config: ExperimentConfig, estimator: str | EstimatorSpec, n: int, trial_index: int) -> TrialRecord:
    """One estimator on the ``(n, trial_index)`` draw of the configured scenario."""
    spec = estimator if isinstance(estimator, EstimatorSpec) else _spec_by_label(config, estimator)
    draw = _draw(config, n, trial_index)
    S_eig = hermitian_eig(scm(draw.X))
    return _record(config, spec, n, trial_index, draw, S_eig)


def _spec_by_label(config: ExperimentConfig, label: str) -> EstimatorSpec:
    for spec in config.estimators:
        if spec.label == label:
            return spec
    return EstimatorSpec(label)


def _map(fn: Callable, config: ExperimentConfig, keys: list[tuple[int, int]], workers: int) -> list:
    if workers <= 1 or len(keys) <= 1:
        return [fn(config, n, t) for n, t in keys]
    chunk = max(1, len(keys) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, [config] * len(keys), *zip(*keys), chunksize=chunk))


def warn_square(config: ExperimentConfig, stacklevel: int = 3) -> None:
    """Warn when LWD will be skipped at ``n = p``."""
    if config.p in config.n_values and not config.lwd_allow_square:
        if any(e.tag == "LWD" for e in config.estimators):
            warnings.warn(
                f"n = p = {config.p}: LWD is unsupported at aspect ratio 1 and is skipped for that n",
                stacklevel=stacklevel,
            )


def sweep(config: ExperimentConfig, workers: int = 1) -> SweepTable:
    """All trials for every ``(estimator, n)`` plus nearest-rank percentiles per metric."""
    warn_square(config)
    started = time.time()
    keys = [(n, t) for n in config.n_values for t in range(config.trials)]
    cells = _map(_cell, config, keys, workers)
    order = {spec.label: i for i, spec in enumerate(config.estimators)}
    n_order = {n: i for i, n in enumerate(config.n_values)}
    records = sorted(
        (r for cell in cells for r in cell),
        key=lambda r: (order[r.estimator], n_order[r.n], r.trial),
    )
    rows = []
    for spec in config.estimators:
        for n in config.n_values:
            group = [r for r in records if r.estimator == spec.label and r.n == n]
            if not group:
                continue
            for metric in METRICS:
                vals = [r.metric(metric) for r in group]
                for pct in config.percentiles:
                    rows.append((spec.label, n, metric, pct, nearest_rank(vals, pct)))
    meta = {
        "config_hash": config.config_hash(),
        "seed": config.seed,
        "wall_clock_s": time.time() - started,
    }
    return SweepTable(records, rows, meta)


# --- false alarms ---------------------------------------------------------------


@dataclass(frozen=True)
class FalseAlarmRow:
    estimator: str
    n: int
    draw: int
    xi: float
    pfa_conditional: float
    pfa_empirical: float
    stderr: float
    test_draws: int


def _fa_cell(config: ExperimentConfig, n: int, draw_index: int) -> list[FalseAlarmRow]:
    R, F, R_solver = config.population()
    d = _draw(config, n, draw_index, prefix="fa-")
    S_eig = hermitian_eig(scm(d.X))
    rows = []
    for k, spec in enumerate(config.active_estimators(n)):
        try:
            est = _fit(spec, d.X, S_eig, R, config.lwd_allow_square)
            scale = det.xi(d.s, est, R_solver)
        except (InputError, NumericalError) as exc:
            raise TrialError({"estimator": spec.label, "n": n, "trial": draw_index}, exc) from exc
        pfa = det.pfa_conditional(config.tau, scale)
        w = est.solve(d.s)
        gain = float(np.real(np.vdot(d.s, w)))
        g = F.conj().T @ w  # w' x = (F' w)' z for x = F z
        rng = derive_rng(config.seed, "fa-h0", n, draw_index, k)
        exceed, left = 0, config.fa_test_draws
        while left:
            m = min(left, 20_000)
            z = (rng.standard_normal((config.p, m)) + 1j * rng.standard_normal((config.p, m))) / math.sqrt(2)
            T = np.abs(g.conj() @ z) ** 2 / gain
            exceed += int(np.count_nonzero(T > config.tau))
            left -= m
        mcount = config.fa_test_draws
        rows.append(
            FalseAlarmRow(
                spec.label, n, draw_index, scale, pfa, exceed / mcount,
                math.sqrt(pfa * (1 - pfa) / mcount), mcount,
            )
        )
    return rows


def false_alarm_experiment(config: ExperimentConfig, workers: int = 1) -> list[FalseAlarmRow]:
    """Conditional false-alarm rate ``exp(-tau/xi)`` and its empirical counterpart.

    ``config.trials`` training draws per ``n``, each tested with
    ``config.fa_test_draws`` H0 returns.
    """
    if not config.tau > 0:
        raise InputError("false-alarm experiment needs tau > 0")
    warn_square(config)
    keys = [(n, t) for n in config.n_values for t in range(config.trials)]
    rows = [r for cell in _map(_fa_cell, config, keys, workers) for r in cell]
    order = {spec.label: i for i, spec in enumerate(config.estimators)}
    n_order = {n: i for i, n in enumerate(config.n_values)}
    return sorted(rows, key=lambda r: (order[r.estimator], n_order[r.n], r.draw))


# --- coverage -------------------------------------------------------------------


@dataclass(frozen=True)
class CoverageTrial:
    estimator: str
    n: int
    trial: int
    pd_true: float
    pd_lower: float
    pd_upper: float

    @property
    def covered(self) -> bool:
        return self.pd_lower <= self.pd_true <= self.pd_upper


@dataclass(frozen=True)
class CoverageRow:
    estimator: str
    n: int
    q: float
    trials: int
    covered: int

    @property
    def coverage(self) -> float:
        return self.covered / self.trials


def _coverage_cell(config: ExperimentConfig, n: int, trial: int) -> list[CoverageTrial]:
    R, _, R_solver = config.population()
    d = _draw(config, n, trial, prefix="cov-")
    S_eig = hermitian_eig(scm(d.X))
    out = []
    for spec in config.active_estimators(n):
        try:
            est = _fit(spec, d.X, S_eig, R, config.lwd_allow_square)
            scale = det.xi(d.s, est, R_solver)
            nu_sq = det.effective_sinr(d.s, est, R_solver, config.amplitude)
            nh = det.nu_hat(d.s, est, d.x)
        except (InputError, NumericalError) as exc:
            raise TrialError({"estimator": spec.label, "n": n, "trial": trial}, exc) from exc
        lo, hi = det.pd_interval(config.tau, nh, config.q)
        out.append(CoverageTrial(spec.label, n, trial, det.pd_conditional(config.tau, scale, nu_sq), lo, hi))
    return out


def coverage_experiment(
    config: ExperimentConfig, workers: int = 1, *, return_trials: bool = False
):
    """Fraction of trials whose true conditional detection rate lies in the interval."""
    if config.amplitude == 0:
        raise InputError("coverage experiment needs a nonzero amplitude")
    warn_square(config)
    keys = [(n, t) for n in config.n_values for t in range(config.trials)]
    trials = [c for cell in _map(_coverage_cell, config, keys, workers) for c in cell]
    rows = []
    for spec in config.estimators:
        for n in config.n_values:
            group = [c for c in trials if c.estimator == spec.label and c.n == n]
            if group:
                rows.append(CoverageRow(spec.label, n, config.q, len(group), sum(c.covered for c in group)))
    return (rows, trials) if return_trials else rows

