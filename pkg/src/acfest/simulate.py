"""Exact simulation of stationary Gaussian series and pointwise transforms.

Generation uses circulant embedding of the target autocovariance, so the
sampled series has the exact model second-order structure (no harmonic
truncation error).  Replicates draw from counter-based Philox substreams
keyed by ``(seed, replicate)``, which makes output independent of scheduling
and bit-reproducible for a fixed seed.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .models import ModelKind, ModelParams, acf

__all__ = [
    "TimeSeries",
    "SimConfig",
    "NegativeSpectrumError",
    "OutOfRangeError",
    "generate_gaussian",
    "subsample",
    "transform_square",
    "chi2_moments",
]

# Circulant eigenvalues more negative than this multiple of sigma2 mean the
# embedding genuinely failed; anything between it and zero is roundoff.
EIGENVALUE_TOL = -1e-10


class NegativeSpectrumError(RuntimeError):
    """Circulant embedding produced eigenvalues below the roundoff tolerance."""


class OutOfRangeError(IndexError):
    """Requested subsample indices fall outside the parent series."""


@dataclass
class TimeSeries:
    """Evenly sampled record: values, sampling interval ``dt``, origin ``t0``."""

    values: np.ndarray
    dt: float
    t0: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1 or self.values.size == 0:
            raise ValueError("values must be a nonempty 1-D array")
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"dt must be positive, got {self.dt}")

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n)


@dataclass(frozen=True)
class SimConfig:
    """Recipe for one simulated record.

    ``n_target`` is the length of the series the caller ultimately wants at
    spacing ``dt``.  Generation happens on a grid refined by ``oversample``
    and extended by ``pad_factor``, so :func:`generate_gaussian` returns
    ``n_target * oversample * pad_factor`` points at spacing
    ``dt / oversample``; :func:`subsample` recovers the target grid.
    """

    kind: ModelKind
    params: ModelParams
    n_target: int
    dt: float = 1.0
    oversample: int = 1
    pad_factor: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.n_target < 2:
            raise ValueError("n_target must be at least 2")
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if int(self.oversample) < 1:
            raise ValueError("oversample must be an integer >= 1")
        if int(self.pad_factor) < 2:
            raise ValueError("pad_factor must be an integer >= 2")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")


def _substream(seed: int, replicate: int) -> np.random.Generator:
    """Counter-based generator for one replicate of one experiment."""
    if replicate < 0:
        raise ValueError("replicate index must be nonnegative")
    key = (int(seed) << 64) + int(replicate)
    return np.random.Generator(np.random.Philox(key=key))


def generate_gaussian(cfg: SimConfig, replicate: int = 0) -> TimeSeries:
    """Draw one exact stationary Gaussian record via circulant embedding.

    Parameters
    ----------
    cfg : SimConfig
        Model, grid and seed.  The returned series has
        ``cfg.n_target * cfg.oversample * cfg.pad_factor`` points at spacing
        ``cfg.dt / cfg.oversample``.
    replicate : int
        Index of the substream to draw from; output for ``(seed, replicate)``
        is bit-reproducible.

    Raises
    ------
    NegativeSpectrumError
        If any circulant eigenvalue falls below ``EIGENVALUE_TOL * sigma2``.
        Eigenvalues between that and zero are clipped with a warning.
    """
    dt_gen = cfg.dt / cfg.oversample
    n_gen = cfg.n_target * cfg.oversample * cfg.pad_factor
    lags = dt_gen * np.arange(n_gen)
    cov = acf(cfg.kind, cfg.params, lags)
    # First row of the 2(n-1)-point circulant that embeds the Toeplitz
    # covariance of the generation grid.
    circ = np.concatenate([cov, cov[-2:0:-1]])
    m = circ.size
    eig = np.fft.fft(circ).real

    sigma2 = cfg.params.sigma2
    min_eig = float(eig.min())
    if min_eig < EIGENVALUE_TOL * sigma2:
        raise NegativeSpectrumError(
            f"circulant embedding has eigenvalue {min_eig:.3e} "
            f"below tolerance {EIGENVALUE_TOL * sigma2:.3e}"
        )
    if min_eig < 0.0:
        warnings.warn(
            f"clipping negative circulant eigenvalues (min {min_eig:.3e})",
            RuntimeWarning,
            stacklevel=2,
        )
        eig = np.clip(eig, 0.0, None)

    rng = _substream(cfg.seed, replicate)
    noise = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    spectrum_draw = np.sqrt(eig) * noise
    # Real part of the transformed draw has covariance exactly Toeplitz(cov).
    values = np.fft.fft(spectrum_draw).real[:n_gen] / math.sqrt(m)
    values += cfg.params.mu
    return TimeSeries(values, dt=dt_gen, t0=0.0)


def subsample(series: TimeSeries, stride: int, count: int, offset: int = 0) -> TimeSeries:
    """Every ``stride``-th point starting at ``offset``, ``count`` points total.

    Raises ``OutOfRangeError`` if the requested indices leave the record.
    """
    if stride < 1:
        raise ValueError("stride must be a positive integer")
    if count < 1:
        raise ValueError("count must be a positive integer")
    if offset < 0:
        raise ValueError("offset must be nonnegative")
    last = offset + stride * (count - 1)
    if last >= series.n:
        raise OutOfRangeError(
            f"subsample needs index {last} but the series has {series.n} points"
        )
    values = series.values[offset : last + 1 : stride]
    return TimeSeries(values, dt=series.dt * stride, t0=series.t0 + series.dt * offset)


def transform_square(series: TimeSeries) -> TimeSeries:
    """Pointwise square, turning a Gaussian record into a chi-squared one."""
    return TimeSeries(series.values**2, dt=series.dt, t0=series.t0)


def chi2_moments(kind: ModelKind, params: ModelParams, lag) -> tuple:
    """Mean and autocovariance of the squared process at the given lag.

    By the Gaussian fourth-moment (Isserlis) identity the squared process
    has mean ``mu^2 + sigma2`` and autocovariance
    ``2 C(lag)^2 + 4 mu^2 C(lag)``.
    """
    c = acf(kind, params, lag)
    mean = params.mu**2 + params.sigma2
    cov = 2.0 * c * c + 4.0 * params.mu**2 * c
    return mean, cov
