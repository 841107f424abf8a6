"""Estimators and Monte Carlo benchmarks for autocorrelation model parameters.

The package compares three routes to the parameters of a stationary
autocorrelation model, a weighted least-squares fit to the empirical
semivariogram, the exact Gaussian maximum likelihood, and the Whittle
frequency-domain approximation, together with an exact simulator and a
scenario harness that measures accuracy and error calibration.
"""

__version__ = "0.1.0"

from .models import (
    GaussianACF,
    ModelParams,
    RationalSpectrum,
    acf,
    semivariogram,
    spectral_density,
)
from .simulate import (
    NegativeSpectrumError,
    OutOfRangeError,
    SimConfig,
    TimeSeries,
    chi2_moments,
    generate_gaussian,
    subsample,
    transform_square,
)
from .variogram import (
    DegenerateVariogramError,
    EmptyLagError,
    EmpiricalVariogram,
    FitResult,
    SingularJacobianError,
    empirical_semivariogram,
    fit_wls,
    wls_std_errs,
)
from .likelihood import (
    NotPositiveDefiniteError,
    Periodogram,
    ZeroSpectrumError,
    exact_loglik,
    fit_mle,
    fit_whittle,
    periodogram,
    profile_mean_variance,
    whittle_loglik,
)
from .uncertainty import (
    CoverageSummary,
    IntervalEstimate,
    NonPositiveCurvatureError,
    coverage_stats,
    mle_std_errs,
    wald_intervals,
)
from .experiments import (
    Scenario,
    ScenarioError,
    ScenarioReport,
    builtin_scenarios,
    effective_truth,
    run_scenario,
    smoothed_histogram,
)
from .report import emit_report, load_rows_csv, verify_report

__all__ = [
    "__version__",
    "GaussianACF",
    "ModelParams",
    "RationalSpectrum",
    "acf",
    "semivariogram",
    "spectral_density",
    "NegativeSpectrumError",
    "OutOfRangeError",
    "SimConfig",
    "TimeSeries",
    "chi2_moments",
    "generate_gaussian",
    "subsample",
    "transform_square",
    "DegenerateVariogramError",
    "EmptyLagError",
    "EmpiricalVariogram",
    "FitResult",
    "SingularJacobianError",
    "empirical_semivariogram",
    "fit_wls",
    "wls_std_errs",
    "NotPositiveDefiniteError",
    "Periodogram",
    "ZeroSpectrumError",
    "exact_loglik",
    "fit_mle",
    "fit_whittle",
    "periodogram",
    "profile_mean_variance",
    "whittle_loglik",
    "CoverageSummary",
    "IntervalEstimate",
    "NonPositiveCurvatureError",
    "coverage_stats",
    "mle_std_errs",
    "wald_intervals",
    "Scenario",
    "ScenarioError",
    "ScenarioReport",
    "builtin_scenarios",
    "effective_truth",
    "run_scenario",
    "smoothed_histogram",
    "emit_report",
    "load_rows_csv",
    "verify_report",
]
