"""Empirical semivariograms and weighted least-squares model fits.

The fit minimizes the Cressie criterion
``sum_t n(t) * (gamma_hat(t) / gamma(t | theta) - 1)^2``,
which is the weighted squared error with chi-squared-motivated weights
``w(t) = n(t) / gamma(t | theta)^2`` re-evaluated at the current parameters
on every objective call.  Standard errors come from the usual regression
formula and deliberately ignore correlation between variogram ordinates;
that optimism is part of what the benchmark scenarios measure.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .models import (
    ModelKind,
    ModelParams,
    correlation,
    acf_tau_gradient,
    semivariogram,
)
from .simulate import TimeSeries

__all__ = [
    "EmpiricalVariogram",
    "FitResult",
    "EmptyLagError",
    "DegenerateVariogramError",
    "SingularJacobianError",
    "empirical_semivariogram",
    "wls_objective",
    "fit_wls",
    "semivariogram_jacobian",
    "wls_std_errs",
]

PARAM_NAMES = ("mu", "sigma2", "tau")


class EmptyLagError(ValueError):
    """A requested lag has no point pairs in the record."""


class DegenerateVariogramError(ValueError):
    """All variogram ordinates are equal, so the fit has no shape information."""


class SingularJacobianError(RuntimeError):
    """The design matrix of the variogram regression is rank deficient."""


@dataclass
class EmpiricalVariogram:
    """Method-of-moments semivariogram of one evenly sampled record.

    ``lags`` are positive multiples of the sampling interval, ``gamma_hat``
    the half mean squared increments, and ``pair_count`` the number of pairs
    entering each ordinate.  ``sample_mean`` carries the record mean along
    for fits, since the variogram itself is blind to the mean.
    """

    lags: np.ndarray
    gamma_hat: np.ndarray
    pair_count: np.ndarray
    sample_mean: float = math.nan

    def __post_init__(self):
        self.lags = np.asarray(self.lags, dtype=float)
        self.gamma_hat = np.asarray(self.gamma_hat, dtype=float)
        self.pair_count = np.asarray(self.pair_count, dtype=int)
        if not (self.lags.shape == self.gamma_hat.shape == self.pair_count.shape):
            raise ValueError("lags, gamma_hat and pair_count must have equal shape")
        if self.lags.ndim != 1 or self.lags.size == 0:
            raise ValueError("variogram must hold at least one lag")
        if np.any(self.lags <= 0):
            raise ValueError("lags must be positive")
        if np.any(self.gamma_hat < 0):
            raise ValueError("gamma_hat must be nonnegative")
        if np.any(self.pair_count < 1):
            raise ValueError("every retained lag needs at least one pair")

    def write_csv(self, path) -> None:
        """Write ``lag, gamma_hat, pair_count`` rows for inspection."""
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["lag", "gamma_hat", "pair_count"])
            for lag, gamma, count in zip(self.lags, self.gamma_hat, self.pair_count):
                writer.writerow([f"{lag:.17g}", f"{gamma:.17g}", int(count)])

    @classmethod
    def read_csv(cls, path) -> "EmpiricalVariogram":
        """Read a file written by :meth:`write_csv` (sample mean is lost)."""
        lags, gammas, counts = [], [], []
        with open(path, newline="") as handle:
            for row in csv.DictReader(handle):
                lags.append(float(row["lag"]))
                gammas.append(float(row["gamma_hat"]))
                counts.append(int(row["pair_count"]))
        return cls(np.array(lags), np.array(gammas), np.array(counts))


@dataclass
class FitResult:
    """Outcome of one estimator run.

    ``std_errs`` maps parameter names to standard errors and may hold NaN
    for parameters the method cannot assess.  ``objective`` is the criterion
    value at ``params_hat`` (weighted squared error for the variogram fit,
    log-likelihood for likelihood fits).
    """

    params_hat: ModelParams
    std_errs: dict
    objective: float
    converged: bool
    iterations: int
    method: str = ""
    message: str = ""

    def estimates(self) -> dict:
        return {
            "mu": self.params_hat.mu,
            "sigma2": self.params_hat.sigma2,
            "tau": self.params_hat.tau,
        }


def empirical_semivariogram(series: TimeSeries, max_lag: float | None = None) -> EmpiricalVariogram:
    """Method-of-moments semivariogram on the record's own lag grid.

    Parameters
    ----------
    series : TimeSeries
        Evenly sampled record with at least two points.
    max_lag : float, optional
        Largest lag to retain.  Defaults to half the record length; lag zero
        is never included.

    Raises
    ------
    EmptyLagError
        If no lag at or below ``max_lag`` has any point pairs.
    """
    x = series.values
    n = x.size
    if n < 2:
        raise ValueError("need at least two points to form increments")
    if max_lag is None:
        max_lag = 0.5 * n * series.dt
    k_max = int(math.floor(max_lag / series.dt + 1e-9))
    k_max = min(k_max, n - 1)
    if k_max < 1:
        raise EmptyLagError(
            f"no lags at or below max_lag={max_lag} have pairs at dt={series.dt}"
        )
    lags = np.empty(k_max)
    gamma = np.empty(k_max)
    counts = np.empty(k_max, dtype=int)
    for k in range(1, k_max + 1):
        diff = x[k:] - x[:-k]
        lags[k - 1] = k * series.dt
        gamma[k - 1] = 0.5 * np.mean(diff * diff)
        counts[k - 1] = n - k
    return EmpiricalVariogram(lags, gamma, counts, sample_mean=float(np.mean(x)))


def wls_objective(vgram: EmpiricalVariogram, kind: ModelKind, params: ModelParams) -> float:
    """Cressie criterion ``sum n(t) (gamma_hat / gamma(theta) - 1)^2``."""
    model = semivariogram(kind, params, vgram.lags)
    with np.errstate(divide="ignore", over="ignore"):
        ratio = vgram.gamma_hat / model
        terms = vgram.pair_count * (ratio - 1.0) ** 2
    total = float(np.sum(terms))
    return total if math.isfinite(total) else math.inf


def _objective_logspace(vgram, kind, z) -> float:
    params = ModelParams(0.0, math.exp(z[0]), math.exp(z[1]))
    return wls_objective(vgram, kind, params)


def fit_wls(vgram: EmpiricalVariogram, kind: ModelKind, init: ModelParams) -> FitResult:
    """Fit ``(sigma2, tau)`` to an empirical semivariogram.

    Runs a Nelder-Mead simplex over ``(log sigma2, log tau)`` seeded from
    the better of ``init`` and a coarse parameter grid.  The mean is not
    estimable from increments, so ``params_hat.mu`` is the sample mean of
    the source record, or 0 when the variogram carries none (noted in
    ``message`` either way).

    Raises
    ------
    DegenerateVariogramError
        If all ordinates are equal, including the all-zero variogram of a
        constant record.
    """
    if vgram.lags.size < 3:
        raise ValueError("need at least three lags to fit two parameters")
    spread = np.ptp(vgram.gamma_hat)
    scale = max(float(np.max(np.abs(vgram.gamma_hat))), 1.0)
    if spread <= 1e-12 * scale:
        raise DegenerateVariogramError("variogram ordinates are all equal")

    z_init = np.array([math.log(init.sigma2), math.log(init.tau)])
    best_z, best_f = z_init, _objective_logspace(vgram, kind, z_init)

    # Coarse grid fallback: bracket the sill by the ordinate range and the
    # timescale by the lag range.
    top = float(np.max(vgram.gamma_hat))
    for s2 in np.geomspace(0.25 * top, 4.0 * top, 9):
        for tau in np.geomspace(0.5 * vgram.lags[0], 2.0 * vgram.lags[-1], 17):
            z = np.array([math.log(s2), math.log(tau)])
            f = _objective_logspace(vgram, kind, z)
            if f < best_f:
                best_z, best_f = z, f

    result = minimize(
        lambda z: _objective_logspace(vgram, kind, z),
        best_z,
        method="Nelder-Mead",
        options={"maxiter": 400, "xatol": 1e-8, "fatol": 1e-12},
    )
    if result.fun <= best_f:
        z_hat, f_hat = result.x, float(result.fun)
    else:  # pragma: no cover - Nelder-Mead never worsens its start
        z_hat, f_hat = best_z, best_f
    converged = bool(result.success)
    if math.isfinite(vgram.sample_mean):
        mu_hat = vgram.sample_mean
        message = "mu set to sample mean"
    else:
        mu_hat = 0.0
        message = "no sample mean on the variogram, mu set to 0"
    if not converged:
        message += "; simplex iteration cap reached, best point reported"
    params_hat = ModelParams(mu_hat, math.exp(z_hat[0]), math.exp(z_hat[1]))
    return FitResult(
        params_hat=params_hat,
        std_errs={"mu": math.nan, "sigma2": math.nan, "tau": math.nan},
        objective=f_hat,
        converged=converged,
        iterations=int(result.nit),
        method="wls",
        message=message,
    )


def semivariogram_jacobian(kind: ModelKind, params: ModelParams, lags) -> np.ndarray:
    """Analytic Jacobian of ``gamma(lag | theta)`` in ``(sigma2, tau)``.

    Returns an array of shape ``(len(lags), 2)``.
    """
    lags = np.asarray(lags, dtype=float)
    d_sigma2 = 1.0 - correlation(kind, params.tau, lags)
    d_tau = -acf_tau_gradient(kind, params, lags)
    return np.column_stack([d_sigma2, d_tau])


def wls_std_errs(
    vgram: EmpiricalVariogram, kind: ModelKind, params_hat: ModelParams
) -> dict:
    """Conventional regression standard errors for the variogram fit.

    Uses the Gauss-Markov form ``(J' W J)^{-1}`` scaled by the weighted
    residual mean square, treating the ordinates as independent.  Returns a
    dict over ``mu``, ``sigma2``, ``tau``; the mean is not part of the
    regression so its entry is NaN.  A residual scale of zero (exact-model
    input) yields zero standard errors and a warning.

    Raises
    ------
    SingularJacobianError
        If the weighted normal matrix is numerically rank deficient.
    """
    t_count = vgram.lags.size
    if t_count < 3:
        raise ValueError("need at least three lags for a residual scale")
    model = semivariogram(kind, params_hat, vgram.lags)
    weights = vgram.pair_count / model**2
    jac = semivariogram_jacobian(kind, params_hat, vgram.lags)
    normal = jac.T @ (weights[:, None] * jac)
    if not np.all(np.isfinite(normal)) or np.linalg.cond(normal) > 1e12:
        raise SingularJacobianError(
            "variogram regression design is rank deficient at the fitted parameters"
        )
    resid = vgram.gamma_hat - model
    resid_scale = float(np.sum(weights * resid * resid) / (t_count - 2))
    if resid_scale == 0.0:
        warnings.warn(
            "zero residual scale, standard errors degenerate",
            RuntimeWarning,
            stacklevel=2,
        )
    cov = resid_scale * np.linalg.inv(normal)
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    return {"mu": math.nan, "sigma2": float(se[0]), "tau": float(se[1])}
