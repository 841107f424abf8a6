"""Standard errors, Wald intervals and calibration summaries.

Likelihood standard errors come from the observed information, a central
finite-difference Hessian in ``(mu, log sigma2, log tau)`` mapped back to
the natural scale by the delta method.  Intervals for the positive
parameters are Wald on the log scale, which respects positivity and keeps
the interval endpoints ordered around the point estimate.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .models import ModelKind, ModelParams
from .simulate import TimeSeries
from . import likelihood as _likelihood

__all__ = [
    "IntervalEstimate",
    "CoverageSummary",
    "NonPositiveCurvatureError",
    "fd_hessian",
    "mle_std_errs",
    "wald_intervals",
    "coverage_stats",
]

# Relative finite-difference step for the observed information.
FD_RELATIVE_STEP = 1e-4
# Warn when halving the step moves the Hessian more than this (relative).
FD_DRIFT_WARN = 5e-2
# Minimum replicate count for a meaningful coverage estimate.
MIN_COVERAGE_REPLICATES = 100


class NonPositiveCurvatureError(RuntimeError):
    """The observed information is not positive definite at the estimate."""


@dataclass
class IntervalEstimate:
    """Point estimate with standard error and a two-sided interval."""

    param: str
    estimate: float
    std_err: float
    lower: float
    upper: float
    level: float = 0.95

    def __post_init__(self):
        if not (math.isfinite(self.std_err) and self.std_err > 0):
            raise ValueError(f"std_err must be positive, got {self.std_err}")
        if not self.lower <= self.estimate <= self.upper:
            raise ValueError(
                f"interval [{self.lower}, {self.upper}] must bracket {self.estimate}"
            )
        if not 0 < self.level < 1:
            raise ValueError(f"level must be in (0, 1), got {self.level}")

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper


@dataclass
class CoverageSummary:
    """Calibration of one parameter's intervals across replicates."""

    n: int
    coverage: float
    frac_beyond_3se: float
    err_over_se_sq: np.ndarray


def fd_hessian(fn, x: np.ndarray, steps: np.ndarray) -> np.ndarray:
    """Central finite-difference Hessian of a scalar function."""
    x = np.asarray(x, dtype=float)
    steps = np.asarray(steps, dtype=float)
    dim = x.size
    hessian = np.empty((dim, dim))
    f0 = fn(x)
    for a in range(dim):
        ea = np.zeros(dim)
        ea[a] = steps[a]
        hessian[a, a] = (fn(x + ea) - 2.0 * f0 + fn(x - ea)) / steps[a] ** 2
        for b in range(a + 1, dim):
            eb = np.zeros(dim)
            eb[b] = steps[b]
            cross = (
                fn(x + ea + eb) - fn(x + ea - eb) - fn(x - ea + eb) + fn(x - ea - eb)
            ) / (4.0 * steps[a] * steps[b])
            hessian[a, b] = hessian[b, a] = cross
    return hessian


def _loglik_fn(series: TimeSeries, kind: ModelKind, which: str):
    if which == "exact":
        base = _likelihood.exact_loglik
    elif which == "whittle":
        base = _likelihood.whittle_loglik
    else:
        raise ValueError(f"loglik must be 'exact' or 'whittle', got {which!r}")

    def fn(eta: np.ndarray) -> float:
        params = ModelParams(eta[0], math.exp(eta[1]), math.exp(eta[2]))
        return base(series, kind, params)

    return fn


def mle_std_errs(
    series: TimeSeries,
    kind: ModelKind,
    params_hat: ModelParams,
    loglik: str = "exact",
) -> dict:
    """Observed-information standard errors at a likelihood optimum.

    The Hessian is differenced at the relative step and again at half the
    step as a consistency check; the half-step value is used.  Standard
    errors for ``sigma2`` and ``tau`` are delta-method transforms of the
    log-scale curvature.

    Raises
    ------
    NonPositiveCurvatureError
        If the negated Hessian is not positive definite, in which case the
        estimate's uncertainty is unreliable.
    """
    fn = _loglik_fn(series, kind, loglik)
    eta = np.array(
        [params_hat.mu, math.log(params_hat.sigma2), math.log(params_hat.tau)]
    )
    steps = FD_RELATIVE_STEP * np.array(
        [
            max(math.sqrt(params_hat.sigma2), abs(params_hat.mu)),
            max(1.0, abs(eta[1])),
            max(1.0, abs(eta[2])),
        ]
    )
    coarse = fd_hessian(fn, eta, steps)
    fine = fd_hessian(fn, eta, 0.5 * steps)
    scale = float(np.max(np.abs(fine)))
    if scale > 0:
        drift = float(np.max(np.abs(fine - coarse))) / scale
        if drift > FD_DRIFT_WARN:
            warnings.warn(
                f"finite-difference Hessian drift {drift:.2e} on step halving",
                RuntimeWarning,
                stacklevel=2,
            )
    information = -fine
    eigenvalues = np.linalg.eigvalsh(information)
    if eigenvalues.min() <= 0:
        raise NonPositiveCurvatureError(
            "observed information is not positive definite at the estimate"
        )
    cov = np.linalg.inv(information)
    se = np.sqrt(np.diag(cov))
    return {
        "mu": float(se[0]),
        "sigma2": float(params_hat.sigma2 * se[1]),
        "tau": float(params_hat.tau * se[2]),
    }


def wald_intervals(
    params_hat: ModelParams, std_errs: dict, level: float = 0.95
) -> list:
    """Wald intervals for each parameter with a finite positive standard error.

    ``mu`` is treated on the natural scale; ``sigma2`` and ``tau`` on the
    log scale (the natural-scale standard error divided by the estimate is
    the log-scale one, undoing the delta method).  Parameters whose standard
    error is missing or nonpositive are skipped.
    """
    z = float(norm.ppf(0.5 * (1.0 + level)))
    out = []
    se_mu = std_errs.get("mu", math.nan)
    if math.isfinite(se_mu) and se_mu > 0:
        out.append(
            IntervalEstimate(
                "mu",
                params_hat.mu,
                se_mu,
                params_hat.mu - z * se_mu,
                params_hat.mu + z * se_mu,
                level,
            )
        )
    for name in ("sigma2", "tau"):
        point = getattr(params_hat, name)
        se = std_errs.get(name, math.nan)
        if not (math.isfinite(se) and se > 0):
            continue
        log_se = se / point
        out.append(
            IntervalEstimate(
                name,
                point,
                se,
                point * math.exp(-z * log_se),
                point * math.exp(z * log_se),
                level,
            )
        )
    return out


def coverage_stats(estimates: list, truth: ModelParams) -> dict:
    """Calibration summary of interval estimates against the true parameters.

    Groups the estimates by parameter name; each group needs at least
    ``MIN_COVERAGE_REPLICATES`` entries.  Returns a dict mapping parameter
    name to :class:`CoverageSummary` with the empirical coverage, the full
    sorted distribution of squared errors over squared standard errors, and
    the fraction of estimates more than three standard errors from truth.
    The result is invariant to the order of the input.
    """
    truth_by_name = {"mu": truth.mu, "sigma2": truth.sigma2, "tau": truth.tau}
    groups: dict = {}
    for est in estimates:
        if est.param not in truth_by_name:
            raise ValueError(f"unknown parameter name {est.param!r}")
        groups.setdefault(est.param, []).append(est)
    out = {}
    for name, group in sorted(groups.items()):
        if len(group) < MIN_COVERAGE_REPLICATES:
            raise ValueError(
                f"{name}: need at least {MIN_COVERAGE_REPLICATES} replicates, "
                f"got {len(group)}"
            )
        true_value = truth_by_name[name]
        covered = np.array([e.contains(true_value) for e in group])
        ratio = np.array([(e.estimate - true_value) / e.std_err for e in group])
        out[name] = CoverageSummary(
            n=len(group),
            coverage=float(np.mean(covered)),
            frac_beyond_3se=float(np.mean(np.abs(ratio) > 3.0)),
            err_over_se_sq=np.sort(ratio * ratio),
        )
    return out
