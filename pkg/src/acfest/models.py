"""Stationary autocorrelation models and their three equivalent descriptions.

Each model is a positive-definite autocovariance family parameterized by a
mean ``mu``, a variance ``sigma2`` and a correlation timescale ``tau``.  The
module exposes the autocovariance function, the semivariogram and the
one-sided-decay spectral density for two families:

* ``GaussianACF``: infinitely smooth squared-exponential correlation.
* ``RationalSpectrum(d)``: spectral density proportional to
  ``1 / (1 + (2 pi f tau)^2)^(1 + d)``.  For integer ``d`` the
  autocovariance has the Matern half-integer closed form (exponential times
  a degree-``d`` polynomial); ``d = 0`` is the Ornstein-Uhlenbeck model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Union

import numpy as np

__all__ = [
    "ModelParams",
    "GaussianACF",
    "RationalSpectrum",
    "ModelKind",
    "acf",
    "correlation",
    "semivariogram",
    "spectral_density",
    "acf_tau_gradient",
    "kind_to_dict",
    "kind_from_dict",
    "kind_label",
]


@dataclass(frozen=True)
class ModelParams:
    """Mean, variance and correlation timescale of a stationary model.

    Raises ``ValueError`` on construction if ``sigma2`` or ``tau`` is not a
    strictly positive finite number, or if ``mu`` is not finite.
    """

    mu: float
    sigma2: float
    tau: float

    def __post_init__(self):
        for name in ("mu", "sigma2", "tau"):
            value = getattr(self, name)
            if not isinstance(value, (int, float, np.integer, np.floating)):
                raise ValueError(f"{name} must be a real number, got {value!r}")
            if not math.isfinite(float(value)):
                raise ValueError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, float(value))
        if self.sigma2 <= 0.0:
            raise ValueError(f"sigma2 must be positive, got {self.sigma2}")
        if self.tau <= 0.0:
            raise ValueError(f"tau must be positive, got {self.tau}")


@dataclass(frozen=True)
class GaussianACF:
    """Squared-exponential correlation, ``rho(t) = exp(-t^2 / (2 tau^2))``."""


@dataclass(frozen=True)
class RationalSpectrum:
    """Rational spectral density with integer tail exponent ``1 + d``.

    ``d`` must be a nonnegative integer.  ``d = 0`` gives the
    Ornstein-Uhlenbeck model with ``rho(t) = exp(-|t| / tau)``.
    """

    d: int

    def __post_init__(self):
        if isinstance(self.d, bool) or not isinstance(self.d, (int, np.integer)):
            raise ValueError(f"d must be an integer, got {self.d!r}")
        if self.d < 0:
            raise ValueError(f"d must be nonnegative, got {self.d}")
        object.__setattr__(self, "d", int(self.d))


ModelKind = Union[GaussianACF, RationalSpectrum]


@lru_cache(maxsize=None)
def _matern_poly(d: int) -> tuple:
    """Coefficients of the degree-``d`` polynomial in the half-integer ACF.

    The correlation at scaled lag ``u = |t| / tau`` is
    ``exp(-u) * sum_j a_j u^j`` with a_0 = 1.  Coefficients are exact
    integer ratios evaluated in float.
    """
    coeffs = []
    for j in range(d + 1):
        num = math.factorial(d) * math.factorial(2 * d - j) * 2**j
        den = math.factorial(2 * d) * math.factorial(d - j) * math.factorial(j)
        coeffs.append(num / den)
    return tuple(coeffs)


def correlation(kind: ModelKind, tau: float, lag) -> np.ndarray:
    """Normalized autocorrelation ``rho(lag)`` with ``rho(0) = 1``."""
    u = np.abs(np.asarray(lag, dtype=float)) / tau
    if isinstance(kind, GaussianACF):
        return np.exp(-0.5 * u * u)
    if isinstance(kind, RationalSpectrum):
        poly = np.polynomial.polynomial.polyval(u, _matern_poly(kind.d))
        return np.exp(-u) * poly
    raise TypeError(f"unknown model kind {kind!r}")


def acf(kind: ModelKind, params: ModelParams, lag) -> np.ndarray:
    """Autocovariance ``C(lag)``; ``C(0) = sigma2``.

    Vectorized over ``lag``; scalars in, scalar array out.
    """
    return params.sigma2 * correlation(kind, params.tau, lag)


def semivariogram(kind: ModelKind, params: ModelParams, lag) -> np.ndarray:
    """Semivariogram ``gamma(lag) = C(0) - C(lag) = sigma2 (1 - rho)``."""
    return params.sigma2 * (1.0 - correlation(kind, params.tau, lag))


def spectral_density(kind: ModelKind, params: ModelParams, f) -> np.ndarray:
    """Two-sided spectral density ``s(f)`` with ``integral s df = sigma2``."""
    f = np.asarray(f, dtype=float)
    tau = params.tau
    if isinstance(kind, GaussianACF):
        # Fourier transform of the squared-exponential autocovariance.
        return (
            params.sigma2
            * tau
            * math.sqrt(2.0 * math.pi)
            * np.exp(-2.0 * (math.pi * f * tau) ** 2)
        )
    if isinstance(kind, RationalSpectrum):
        d = kind.d
        norm = 2.0 * tau * 4.0**d / math.comb(2 * d, d)
        return params.sigma2 * norm / (1.0 + (2.0 * math.pi * f * tau) ** 2) ** (1 + d)
    raise TypeError(f"unknown model kind {kind!r}")


def acf_tau_gradient(kind: ModelKind, params: ModelParams, lag) -> np.ndarray:
    """Partial derivative of the autocovariance with respect to ``tau``."""
    u = np.abs(np.asarray(lag, dtype=float)) / params.tau
    if isinstance(kind, GaussianACF):
        return params.sigma2 * u * u * np.exp(-0.5 * u * u) / params.tau
    if isinstance(kind, RationalSpectrum):
        coeffs = _matern_poly(kind.d)
        poly = np.polynomial.polynomial.polyval(u, coeffs)
        dpoly = np.polynomial.polynomial.polyval(
            u, tuple(j * c for j, c in enumerate(coeffs))[1:] or (0.0,)
        )
        return params.sigma2 * np.exp(-u) * (poly - dpoly) * u / params.tau
    raise TypeError(f"unknown model kind {kind!r}")


def kind_label(kind: ModelKind) -> str:
    """Short human-readable name, e.g. ``gaussian`` or ``rational(d=2)``."""
    if isinstance(kind, GaussianACF):
        return "gaussian"
    if isinstance(kind, RationalSpectrum):
        return f"rational(d={kind.d})"
    raise TypeError(f"unknown model kind {kind!r}")


def kind_to_dict(kind: ModelKind) -> dict:
    """Serializable form: ``{"family": "gaussian"}`` or with a ``d`` field."""
    if isinstance(kind, GaussianACF):
        return {"family": "gaussian"}
    if isinstance(kind, RationalSpectrum):
        return {"family": "rational", "d": kind.d}
    raise TypeError(f"unknown model kind {kind!r}")


def kind_from_dict(payload: dict) -> ModelKind:
    """Inverse of :func:`kind_to_dict`; raises ``ValueError`` on bad input."""
    family = payload.get("family")
    if family == "gaussian":
        return GaussianACF()
    if family == "rational":
        if "d" not in payload:
            raise ValueError("rational family requires a 'd' field")
        return RationalSpectrum(d=payload["d"])
    raise ValueError(f"unknown model family {family!r}")
