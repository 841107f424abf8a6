"""Exact Gaussian and Whittle log-likelihoods with profile fits.

The exact likelihood factors the Toeplitz covariance of the evenly sampled
record by Cholesky; the log determinant comes from the factor diagonal and
the quadratic form from triangular solves, never from an explicit inverse.
The mean and variance profile out in closed form, leaving a bracketed 1-D
search over the timescale.

The Whittle likelihood scores the discrete Fourier transform of the record
against the model's discrete-time spectral density (the continuous density
folded across the sampling Nyquist band), evaluated on the DFT grid.  For a
flat spectrum it coincides with the exact likelihood up to a constant, and
it needs no matrix factorization at all.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular, toeplitz
from scipy.optimize import minimize_scalar

from .models import ModelKind, ModelParams, acf, correlation
from .simulate import TimeSeries
from .variogram import FitResult

__all__ = [
    "NotPositiveDefiniteError",
    "ZeroSpectrumError",
    "Periodogram",
    "covariance_matrix",
    "exact_loglik",
    "profile_mean_variance",
    "fit_mle",
    "periodogram",
    "dft_spectrum",
    "whittle_loglik",
    "fit_whittle",
]

# Diagonal jitter (times sigma2) added once if the first Cholesky fails.
CHOLESKY_JITTER = 1e-10
# Below this record length LAPACK's dense Cholesky beats the O(n^2) Durbin
# recursion, whose Python-level loop has per-order overhead.
LEVINSON_MIN_N = 256
# Prediction-error variances at or below this floor mean the recursion has
# lost all precision; the dense path takes over.
LEVINSON_FLOOR = 1e-13
# Search bracket for the timescale, in units of (dt, n * dt).
TAU_BRACKET_LOW = 0.1
TAU_BRACKET_HIGH = 10.0
# Model spectra flatter than this dynamic range cannot be resolved in
# double precision FFTs.
SPECTRUM_FLOOR = 1e-13


class NotPositiveDefiniteError(RuntimeError):
    """The model covariance matrix failed Cholesky factorization."""


class ZeroSpectrumError(RuntimeError):
    """The model spectral density underflows on the needed frequency grid."""


@dataclass
class Periodogram:
    """DFT of a record under the unitary ``1/sqrt(n)`` convention.

    ``coefficients[j]`` is ``(1/sqrt(n)) sum_t exp(+2 pi i f_j t) x(t)`` at
    frequency ``f_j = j * df``; this preserves total power, so
    ``sum |coefficients|^2 == sum x^2``.
    """

    frequencies: np.ndarray
    coefficients: np.ndarray
    df: float


def covariance_matrix(kind: ModelKind, params: ModelParams, n: int, dt: float) -> np.ndarray:
    """Toeplitz model covariance of an evenly sampled record."""
    if n < 1:
        raise ValueError("n must be positive")
    return toeplitz(acf(kind, params, dt * np.arange(n)))


def _cholesky_with_jitter(matrix: np.ndarray, sigma2: float) -> np.ndarray:
    try:
        return np.linalg.cholesky(matrix)
    except np.linalg.LinAlgError:
        pass
    bumped = matrix + (CHOLESKY_JITTER * sigma2) * np.eye(matrix.shape[0])
    try:
        return np.linalg.cholesky(bumped)
    except np.linalg.LinAlgError:
        raise NotPositiveDefiniteError(
            "covariance matrix is not positive definite even after jitter"
        ) from None


class _LevinsonUnstable(Exception):
    """Internal: the Durbin recursion hit its precision floor."""


def _durbin_forms(corr_row: np.ndarray, vectors: np.ndarray) -> tuple:
    """Log-determinant and Gram matrix of a correlation Toeplitz system.

    ``corr_row`` is the first row with ``corr_row[0] == 1``; ``vectors`` has
    one vector per row.  Returns ``(logdet R, G)`` with
    ``G[i, j] = vectors[i] @ R^{-1} @ vectors[j]``, both computed in
    O(n^2) by the Durbin recursion in innovations form.  Raises
    :class:`_LevinsonUnstable` when a prediction-error variance falls to the
    precision floor, which the dense path must then handle.
    """
    r = corr_row
    n = r.size
    eps = vectors[:, 0].copy()
    gram = np.outer(eps, eps)
    logdet = 0.0
    v = 1.0
    phi = np.empty(n - 1) if n > 1 else np.empty(0)
    for k in range(1, n):
        head = phi[: k - 1]
        kappa = (r[k] - float(head @ r[k - 1 : 0 : -1])) / v
        head -= kappa * head[::-1].copy()
        phi[k - 1] = kappa
        v *= 1.0 - kappa * kappa
        if not v > LEVINSON_FLOOR:
            raise _LevinsonUnstable
        logdet += math.log(v)
        eps = vectors[:, k] - vectors[:, k - 1 :: -1][:, : k] @ phi[:k]
        gram += np.outer(eps, eps) / v
    return logdet, gram


def exact_loglik(series: TimeSeries, kind: ModelKind, params: ModelParams) -> float:
    """Exact Gaussian log-likelihood of the record under the model.

    Long records go through the O(n^2) Durbin recursion on the Toeplitz
    structure; short or numerically borderline ones through a dense
    Cholesky factor (log determinant from the factor diagonal, quadratic
    form via a triangular solve).  Raises
    :class:`NotPositiveDefiniteError` if factorization fails even after
    one jitter retry.
    """
    n = series.n
    sigma2 = params.sigma2
    centered = series.values - params.mu
    if n >= LEVINSON_MIN_N:
        corr_row = acf(kind, params, series.dt * np.arange(n)) / sigma2
        try:
            logdet_r, gram = _durbin_forms(corr_row, centered[None, :])
            log_det = n * math.log(sigma2) + logdet_r
            return -0.5 * log_det - 0.5 * float(gram[0, 0]) / sigma2
        except _LevinsonUnstable:
            pass
    sigma = covariance_matrix(kind, params, n, series.dt)
    factor = _cholesky_with_jitter(sigma, sigma2)
    white = solve_triangular(factor, centered, lower=True)
    log_det = 2.0 * float(np.sum(np.log(np.diag(factor))))
    return -0.5 * log_det - 0.5 * float(white @ white)


def profile_mean_variance(series: TimeSeries, kind: ModelKind, tau: float) -> tuple:
    """Closed-form mean and variance at a fixed timescale.

    Returns ``(mu_hat, sigma2_hat, loglik)`` where the mean is the
    generalized least squares estimate, the variance the matching quadratic
    form over ``n``, and ``loglik`` the exact log-likelihood at the profiled
    parameters.
    """
    n = series.n
    corr_row = correlation(kind, tau, series.dt * np.arange(n))
    logdet_r = None
    if n >= LEVINSON_MIN_N:
        try:
            logdet_r, gram = _durbin_forms(
                corr_row, np.vstack([series.values, np.ones(n)])
            )
            s_xx, s_x1, s_11 = gram[0, 0], gram[0, 1], gram[1, 1]
        except _LevinsonUnstable:
            logdet_r = None
    if logdet_r is None:
        factor = _cholesky_with_jitter(toeplitz(corr_row), 1.0)
        logdet_r = 2.0 * float(np.sum(np.log(np.diag(factor))))
        white_x = solve_triangular(factor, series.values, lower=True)
        white_1 = solve_triangular(factor, np.ones(n), lower=True)
        s_xx = float(white_x @ white_x)
        s_x1 = float(white_1 @ white_x)
        s_11 = float(white_1 @ white_1)
    mu_hat = s_x1 / s_11
    sigma2_hat = (s_xx - s_x1 * s_x1 / s_11) / n
    if sigma2_hat <= 0.0:
        raise ValueError("profiled variance is zero; record has no variation")
    loglik = -0.5 * (n * math.log(sigma2_hat) + logdet_r) - 0.5 * n
    return mu_hat, sigma2_hat, loglik


def _search_tau(profile, dt: float, n: int, init_tau: float) -> tuple:
    """Maximize a profiled likelihood over the timescale.

    Coarse log-spaced scan over ``[dt/10, 10 n dt]`` followed by bounded
    golden-section/parabolic refinement between the bracketing grid
    neighbors.  If the best grid point lands on the bracket edge the
    bracket widens once (tenfold each way); landing on the edge again is
    reported rather than retried.

    Returns ``(tau_hat, evaluations, converged, message)``.
    """
    lo = TAU_BRACKET_LOW * dt
    hi = TAU_BRACKET_HIGH * n * dt
    evaluations = 0
    message = ""
    for attempt in range(2):
        grid = np.geomspace(lo, hi, 41)
        if lo < init_tau < hi:
            grid = np.sort(np.append(grid, init_tau))
        values = np.array([profile(t) for t in grid])
        evaluations += grid.size
        if not np.any(np.isfinite(values)):
            raise NotPositiveDefiniteError(
                "no feasible timescale in the search bracket"
            )
        best = int(np.argmax(values))
        if 0 < best < grid.size - 1:
            break
        if attempt == 0:
            lo, hi = lo / 10.0, hi * 10.0
            message = "bracket widened once"
    at_edge = best in (0, grid.size - 1)
    if at_edge:
        low_idx = max(best - 1, 0)
        high_idx = min(best + 1, grid.size - 1)
    else:
        low_idx, high_idx = best - 1, best + 1

    def negative(log_tau: float) -> float:
        return -profile(math.exp(log_tau))

    result = minimize_scalar(
        negative,
        bounds=(math.log(grid[low_idx]), math.log(grid[high_idx])),
        method="bounded",
        options={"xatol": 1e-6, "maxiter": 200},
    )
    evaluations += int(result.nfev)
    tau_hat = math.exp(float(result.x))
    converged = bool(result.success) and not at_edge
    if at_edge:
        message = (message + "; " if message else "") + "timescale at search boundary"
    elif not result.success:
        message = (message + "; " if message else "") + "refinement iteration cap reached"
    return tau_hat, evaluations, converged, message


def fit_mle(series: TimeSeries, kind: ModelKind, init: ModelParams) -> FitResult:
    """Maximum likelihood fit via the profiled exact likelihood.

    Only the timescale is searched; mean and variance come from
    :func:`profile_mean_variance` at the optimum.  Standard errors are left
    NaN here; see ``uncertainty.mle_std_errs``.
    """
    if series.n < 3:
        raise ValueError("need at least three points for a three-parameter fit")

    def profiled(tau: float) -> float:
        try:
            return profile_mean_variance(series, kind, tau)[2]
        except NotPositiveDefiniteError:
            return -math.inf

    tau_hat, evaluations, converged, message = _search_tau(
        profiled, series.dt, series.n, init.tau
    )
    mu_hat, sigma2_hat, loglik = profile_mean_variance(series, kind, tau_hat)
    return FitResult(
        params_hat=ModelParams(mu_hat, sigma2_hat, tau_hat),
        std_errs={"mu": math.nan, "sigma2": math.nan, "tau": math.nan},
        objective=loglik,
        converged=converged,
        iterations=evaluations,
        method="mle",
        message=message,
    )


def periodogram(series: TimeSeries) -> Periodogram:
    """Unitary DFT of the record on the full frequency grid ``j / (n dt)``."""
    n = series.n
    coefficients = math.sqrt(n) * np.fft.ifft(series.values)
    df = 1.0 / (n * series.dt)
    return Periodogram(frequencies=df * np.arange(n), coefficients=coefficients, df=df)


def dft_spectrum(kind: ModelKind, params: ModelParams, n: int, dt: float) -> np.ndarray:
    """Discrete-time model spectral density on the length-``n`` DFT grid.

    Folds the continuous density across the sampling band by summing the
    autocovariance over all lags, wrapped modulo the record period.  Raises
    :class:`ZeroSpectrumError` when the dynamic range exceeds what double
    precision can represent, as happens for very smooth models sampled
    finely.
    """
    tail = _decay_lag_count(kind, params.tau, dt)
    k_max = max(n, tail)
    k = np.arange(k_max + 1)
    cov = acf(kind, params, k * dt)
    wrapped = np.bincount(k % n, weights=cov, minlength=n)
    wrapped += np.bincount((-k[1:]) % n, weights=cov[1:], minlength=n)
    spectrum = dt * np.fft.fft(wrapped).real
    top = float(spectrum.max())
    if top <= 0.0 or float(spectrum.min()) < SPECTRUM_FLOOR * top:
        raise ZeroSpectrumError(
            "model spectrum underflows on the DFT grid; the frequency-domain "
            "fit cannot resolve it in double precision"
        )
    return spectrum


def _decay_lag_count(kind: ModelKind, tau: float, dt: float) -> int:
    """Smallest lag index beyond which the correlation is below 1e-17."""
    from .models import GaussianACF, RationalSpectrum

    if isinstance(kind, GaussianACF):
        u_stop = 9.0
    elif isinstance(kind, RationalSpectrum):
        u_stop = 50.0 + 5.0 * kind.d
    else:
        raise TypeError(f"unknown model kind {kind!r}")
    return int(math.ceil(u_stop * tau / dt)) + 1


def whittle_loglik(series: TimeSeries, kind: ModelKind, params: ModelParams) -> float:
    """Whittle approximation to the log-likelihood, summed over the DFT grid.

    The zero-frequency term keeps its variance contribution; the model mean
    enters only there, through the DFT of a constant record.
    """
    n = series.n
    dt = series.dt
    coefficients = math.sqrt(n) * np.fft.ifft(series.values)
    spectrum = dft_spectrum(kind, params, n, dt)
    resid2 = np.abs(coefficients) ** 2
    resid2[0] = abs(coefficients[0] - math.sqrt(n) * params.mu) ** 2
    return float(np.sum(-0.5 * np.log(spectrum) - resid2 * dt / (2.0 * spectrum)))


def fit_whittle(series: TimeSeries, kind: ModelKind, init: ModelParams) -> FitResult:
    """Frequency-domain fit mirroring :func:`fit_mle`, FFT only.

    The mean profiles to the sample mean (it only enters the zero-frequency
    term) and the variance to a weighted mean of the periodogram, leaving
    the same bracketed timescale search as the exact fit.
    """
    if series.n < 3:
        raise ValueError("need at least three points for a three-parameter fit")
    n = series.n
    dt = series.dt
    coefficients = math.sqrt(n) * np.fft.ifft(series.values)
    mu_hat = float(np.mean(series.values))
    resid2 = np.abs(coefficients) ** 2
    resid2[0] = 0.0  # mean term vanishes at the profiled mean

    def profile_sigma2(tau: float) -> float:
        unit = dft_spectrum(kind, ModelParams(0.0, 1.0, tau), n, dt)
        return float(np.sum(resid2 / unit)) * dt / n, unit

    def profiled(tau: float) -> float:
        try:
            sigma2_hat, unit = profile_sigma2(tau)
        except ZeroSpectrumError:
            return -math.inf
        if sigma2_hat <= 0.0:
            return -math.inf
        return -0.5 * float(np.sum(np.log(sigma2_hat * unit))) - 0.5 * n

    tau_hat, evaluations, converged, message = _search_tau(
        profiled, dt, n, init.tau
    )
    sigma2_hat, _ = profile_sigma2(tau_hat)
    params_hat = ModelParams(mu_hat, sigma2_hat, tau_hat)
    return FitResult(
        params_hat=params_hat,
        std_errs={"mu": math.nan, "sigma2": math.nan, "tau": math.nan},
        objective=whittle_loglik(series, kind, params_hat),
        converged=converged,
        iterations=evaluations,
        method="whittle",
        message=message,
    )
