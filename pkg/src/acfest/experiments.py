"""Monte Carlo scenarios pitting the estimators against each other.

A :class:`Scenario` bundles a true model, a sampling recipe and a replicate
budget.  :func:`run_scenario` simulates each replicate once and hands the
same record to every requested estimator, so method comparisons are paired.
Per-replicate substreams keyed by ``(seed, replicate)`` make the output
independent of the worker count.

The built-in scenarios mirror the benchmark settings this package exists to
reproduce: a smooth model observed over 32 timescales at two samples per
timescale (medium), a quarter of that data (small), a larger record with
doubled span and rate, rough-versus-smooth rational-spectrum variants, and
a squared (chi-squared) arm whose effective second-order truth follows from
the Gaussian moment identities.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__
from .models import (
    GaussianACF,
    ModelKind,
    ModelParams,
    RationalSpectrum,
    kind_to_dict,
)
from .simulate import SimConfig, TimeSeries, generate_gaussian, subsample, transform_square
from .variogram import empirical_semivariogram, fit_wls, wls_std_errs
from .likelihood import fit_mle, fit_whittle
from .uncertainty import (
    MIN_COVERAGE_REPLICATES,
    coverage_stats,
    mle_std_errs,
    wald_intervals,
)

__all__ = [
    "Scenario",
    "ReplicateResult",
    "ScenarioReport",
    "ScenarioError",
    "effective_truth",
    "run_scenario",
    "summarize",
    "smoothed_histogram",
    "builtin_scenarios",
]

ESTIMATOR_NAMES = ("wls", "mle", "whittle")
PARAM_NAMES = ("mu", "sigma2", "tau")
# A scenario aborts when more than this fraction of any method's replicates
# raise outright.
MAX_FAILURE_FRACTION = 0.10
QUANTILE_PROBS = (0.05, 0.25, 0.50, 0.75, 0.95)


class ScenarioError(RuntimeError):
    """Too many replicates failed for the scenario to be meaningful."""


@dataclass(frozen=True)
class Scenario:
    """One Monte Carlo experiment: truth, sampling recipe, replicate budget."""

    name: str
    kind: ModelKind
    params: ModelParams
    dt: float
    n: int
    transform: str = "none"
    replicates: int = 1000
    seed: int = 0
    estimators: tuple = ("wls", "mle")
    oversample: int = 4
    pad_factor: int = 4
    level: float = 0.95

    def __post_init__(self):
        if self.transform not in ("none", "square"):
            raise ValueError(f"transform must be 'none' or 'square', got {self.transform!r}")
        if self.replicates < 1:
            raise ValueError("replicates must be positive")
        if not self.estimators:
            raise ValueError("estimator set must be nonempty")
        for name in self.estimators:
            if name not in ESTIMATOR_NAMES:
                raise ValueError(f"unknown estimator {name!r}")
        if len(set(self.estimators)) != len(self.estimators):
            raise ValueError("estimator set has duplicates")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "kind": kind_to_dict(self.kind),
            "params": {
                "mu": self.params.mu,
                "sigma2": self.params.sigma2,
                "tau": self.params.tau,
            },
            "dt": self.dt,
            "n": self.n,
            "transform": self.transform,
            "replicates": self.replicates,
            "seed": self.seed,
            "estimators": list(self.estimators),
            "oversample": self.oversample,
            "pad_factor": self.pad_factor,
            "level": self.level,
        }

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class ReplicateResult:
    """One estimator's outcome on one replicate.

    ``reason`` is empty for a completed fit (converged or not) and carries
    the exception class name when the replicate failed outright, in which
    case the estimates are NaN.
    """

    replicate: int
    method: str
    estimates: dict
    std_errs: dict
    converged: bool
    reason: str = ""

    def failed(self) -> bool:
        return bool(self.reason)


@dataclass
class ScenarioReport:
    """Rows, derived summaries and provenance for one scenario run."""

    scenario: Scenario
    truth: ModelParams
    truth_kind: ModelKind
    rows: list
    summaries: dict
    provenance: dict


def effective_truth(scenario: Scenario) -> tuple:
    """Model family and parameters the estimators are judged against.

    For the identity transform this is the scenario truth itself.  Squaring
    a zero-mean record maps the autocovariance through the fourth-moment
    identity to ``2 C(t)^2``, which stays inside the model family for the
    squared-exponential correlation (timescale divided by sqrt(2)) and the
    rational ``d = 0`` model (timescale halved); the squared process mean
    is the original variance.  Other combinations have no in-family truth
    and raise ``ValueError``.
    """
    if scenario.transform == "none":
        return scenario.kind, scenario.params
    params = scenario.params
    if params.mu != 0.0:
        raise ValueError("squared-process truth is only defined for mu = 0")
    sigma2_sq = 2.0 * params.sigma2**2
    mean_sq = params.sigma2
    if isinstance(scenario.kind, GaussianACF):
        return scenario.kind, ModelParams(mean_sq, sigma2_sq, params.tau / math.sqrt(2.0))
    if isinstance(scenario.kind, RationalSpectrum) and scenario.kind.d == 0:
        return scenario.kind, ModelParams(mean_sq, sigma2_sq, params.tau / 2.0)
    raise ValueError(
        "squared-process truth leaves the model family for "
        f"{scenario.kind!r}; only the squared-exponential and d=0 rational "
        "models are closed under squaring"
    )


def _default_init(series: TimeSeries) -> ModelParams:
    variance = float(np.var(series.values))
    if variance <= 0.0:
        variance = 1e-12
    return ModelParams(
        float(np.mean(series.values)), variance, series.dt * max(1.0, series.n / 8.0)
    )


def _replicate_series(scenario: Scenario, rep: int) -> TimeSeries:
    cfg = SimConfig(
        kind=scenario.kind,
        params=scenario.params,
        n_target=scenario.n,
        dt=scenario.dt,
        oversample=scenario.oversample,
        pad_factor=scenario.pad_factor,
        seed=scenario.seed,
    )
    full = generate_gaussian(cfg, replicate=rep)
    series = subsample(full, stride=scenario.oversample, count=scenario.n)
    if scenario.transform == "square":
        series = transform_square(series)
    return series


def _nan_dict() -> dict:
    return {name: math.nan for name in PARAM_NAMES}


def _run_replicate(scenario: Scenario, rep: int) -> list:
    """Simulate replicate ``rep`` once and run every estimator on it."""
    rows = []
    try:
        series = _replicate_series(scenario, rep)
    except Exception as exc:  # simulation failure poisons every method
        reason = type(exc).__name__
        return [
            ReplicateResult(rep, method, _nan_dict(), _nan_dict(), False, reason)
            for method in scenario.estimators
        ]
    fit_kind, _ = effective_truth(scenario)
    init = _default_init(series)
    for method in scenario.estimators:
        try:
            if method == "wls":
                vgram = empirical_semivariogram(series)
                fit = fit_wls(vgram, fit_kind, init)
                std_errs = _guarded_std_errs(
                    lambda: wls_std_errs(vgram, fit_kind, fit.params_hat)
                )
            elif method == "mle":
                fit = fit_mle(series, fit_kind, init)
                std_errs = _guarded_std_errs(
                    lambda: mle_std_errs(series, fit_kind, fit.params_hat)
                )
            else:
                fit = fit_whittle(series, fit_kind, init)
                std_errs = _guarded_std_errs(
                    lambda: mle_std_errs(
                        series, fit_kind, fit.params_hat, loglik="whittle"
                    )
                )
            rows.append(
                ReplicateResult(
                    rep, method, fit.estimates(), std_errs, fit.converged, ""
                )
            )
        except Exception as exc:
            rows.append(
                ReplicateResult(
                    rep, method, _nan_dict(), _nan_dict(), False, type(exc).__name__
                )
            )
    return rows


def _guarded_std_errs(compute) -> dict:
    """Standard errors, or NaN entries when the error model degenerates."""
    try:
        return compute()
    except Exception:
        return _nan_dict()


def _run_replicate_star(args) -> list:
    return _run_replicate(*args)


def run_scenario(scenario: Scenario, workers: int = 1) -> ScenarioReport:
    """Run every replicate and estimator, then summarize.

    ``workers`` > 1 distributes replicates over processes; the output is
    byte-identical to a serial run because each replicate owns its RNG
    substream and rows are assembled in replicate order.

    Raises :class:`ScenarioError` if more than ``MAX_FAILURE_FRACTION`` of
    any method's replicates fail outright.
    """
    truth_kind, truth = effective_truth(scenario)
    tasks = [(scenario, rep) for rep in range(scenario.replicates)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            nested = list(pool.map(_run_replicate_star, tasks, chunksize=8))
    else:
        nested = [_run_replicate(scenario, rep) for rep in range(scenario.replicates)]
    rows = [row for group in nested for row in group]

    for method in scenario.estimators:
        failed = sum(1 for row in rows if row.method == method and row.failed())
        if failed > MAX_FAILURE_FRACTION * scenario.replicates:
            raise ScenarioError(
                f"{scenario.name}: {failed}/{scenario.replicates} {method} "
                "replicates failed"
            )

    summaries = summarize(rows, truth, scenario.level)
    provenance = {
        "seed": scenario.seed,
        "config_hash": scenario.config_hash(),
        "code_version": __version__,
    }
    return ScenarioReport(
        scenario=scenario,
        truth=truth,
        truth_kind=truth_kind,
        rows=rows,
        summaries=summaries,
        provenance=provenance,
    )


def summarize(rows: list, truth: ModelParams, level: float = 0.95) -> dict:
    """Per-method accuracy and calibration summaries, recomputable from rows.

    Bias, RMSE and quantiles use converged replicates only; failed and
    non-converged counts are reported alongside.  Interval calibration uses
    converged replicates with finite positive standard errors and is only
    attempted when at least ``MIN_COVERAGE_REPLICATES`` qualify.
    """
    truth_by_name = {"mu": truth.mu, "sigma2": truth.sigma2, "tau": truth.tau}
    methods = sorted({row.method for row in rows})
    out = {}
    for method in methods:
        group = [row for row in rows if row.method == method]
        completed = [row for row in group if not row.failed()]
        converged = [row for row in completed if row.converged]
        entry = {
            "n_replicates": len(group),
            "n_failed": len(group) - len(completed),
            "n_converged": len(converged),
            "params": {},
            "coverage": {},
        }
        reasons: dict = {}
        for row in group:
            if row.failed():
                reasons[row.reason] = reasons.get(row.reason, 0) + 1
        if reasons:
            entry["failure_reasons"] = dict(sorted(reasons.items()))
        for name in PARAM_NAMES:
            values = np.array(
                [row.estimates[name] for row in converged], dtype=float
            )
            values = values[np.isfinite(values)]
            stats: dict = {"n_used": int(values.size)}
            if values.size:
                err = values - truth_by_name[name]
                stats["bias"] = float(np.mean(err))
                stats["rmse"] = float(np.sqrt(np.mean(err * err)))
                quantiles = np.quantile(values, QUANTILE_PROBS)
                stats["quantiles"] = {
                    f"q{int(100 * p):02d}": float(q)
                    for p, q in zip(QUANTILE_PROBS, quantiles)
                }
            entry["params"][name] = stats
        for name in PARAM_NAMES:
            valid = [
                row
                for row in converged
                if math.isfinite(row.std_errs.get(name, math.nan))
                and row.std_errs[name] > 0
                and math.isfinite(row.estimates[name])
            ]
            if len(valid) < MIN_COVERAGE_REPLICATES:
                continue
            estimates = []
            for row in valid:
                params_hat = ModelParams(
                    row.estimates["mu"] if math.isfinite(row.estimates["mu"]) else 0.0,
                    row.estimates["sigma2"],
                    row.estimates["tau"],
                )
                for interval in wald_intervals(
                    params_hat, {name: row.std_errs[name]}, level
                ):
                    if interval.param == name:
                        estimates.append(interval)
            stats_cov = coverage_stats(estimates, truth)[name]
            ratio_sq = stats_cov.err_over_se_sq
            entry["coverage"][name] = {
                "n_used": stats_cov.n,
                "coverage": stats_cov.coverage,
                "frac_beyond_3se": stats_cov.frac_beyond_3se,
                "err_over_se_sq": {
                    "q50": float(np.quantile(ratio_sq, 0.50)),
                    "q90": float(np.quantile(ratio_sq, 0.90)),
                    "q99": float(np.quantile(ratio_sq, 0.99)),
                    "max": float(ratio_sq[-1]),
                },
            }
        out[method] = entry
    return out


def smoothed_histogram(samples, bandwidth: float | None = None) -> tuple:
    """Gaussian kernel density on a 512-point grid.

    The default bandwidth is Silverman's robust rule,
    ``0.9 min(sd, iqr / 1.34) n^{-1/5}``, floored to a small multiple of
    the sample scale so that identical samples yield a finite spike.  The
    grid spans the sample range padded by three bandwidths.

    Returns ``(grid, density)``.
    """
    samples = np.asarray(samples, dtype=float)
    samples = samples[np.isfinite(samples)]
    if samples.size < 10:
        raise ValueError("need at least ten finite samples for a density")
    if bandwidth is None:
        sd = float(np.std(samples))
        iqr = float(np.quantile(samples, 0.75) - np.quantile(samples, 0.25))
        spread = min(sd, iqr / 1.34) if iqr > 0 else sd
        bandwidth = 0.9 * spread * samples.size ** (-0.2)
    scale = float(np.max(np.abs(samples)))
    floor = 1e-3 * scale if scale > 0 else 1e-12
    bandwidth = max(float(bandwidth), floor, 1e-300)
    lo = float(samples.min()) - 3.0 * bandwidth
    hi = float(samples.max()) + 3.0 * bandwidth
    grid = np.linspace(lo, hi, 512)
    z = (grid[:, None] - samples[None, :]) / bandwidth
    density = np.mean(np.exp(-0.5 * z * z), axis=1) / (bandwidth * math.sqrt(2 * math.pi))
    return grid, density


def builtin_scenarios() -> dict:
    """The benchmark suite, keyed by name.

    All use a unit-variance, unit-timescale, zero-mean truth and 1000
    replicates.  ``fig2-M`` observes a smooth model at two samples per
    timescale over 32 timescales; ``fig2-S`` at one per timescale over 16;
    ``fig5-L`` doubles the medium span and rate; ``fig3-*`` swap in rough
    and smooth rational-spectrum models; ``fig1-*`` contrast Gaussian and
    squared (chi-squared) records; ``fig4`` re-runs the medium setting for
    error calibration.
    """
    base = ModelParams(0.0, 1.0, 1.0)
    smooth = GaussianACF()
    scenarios = [
        Scenario("fig1-normal", smooth, base, dt=0.5, n=64, seed=101),
        Scenario("fig1-chi2", smooth, base, dt=0.5, n=64, transform="square", seed=102),
        Scenario("fig2-S", smooth, base, dt=1.0, n=16, seed=201),
        Scenario("fig2-M", smooth, base, dt=0.5, n=64, seed=202),
        Scenario("fig3-d0", RationalSpectrum(0), base, dt=0.5, n=64, seed=301),
        Scenario("fig3-d2", RationalSpectrum(2), base, dt=0.5, n=64, seed=302),
        Scenario("fig4", smooth, base, dt=0.5, n=64, seed=401),
        Scenario("fig5-L", smooth, base, dt=0.25, n=256, seed=501),
    ]
    return {s.name: s for s in scenarios}
