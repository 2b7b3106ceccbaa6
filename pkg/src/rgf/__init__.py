"""Outlier-robust Gaussian filtering via feature-space pseudo measurements.

The package provides a plain Gaussian filter with pluggable
moment-matching backends (:mod:`rgf.gf`), sensor models split into a
Gaussian body and a fat tail (:mod:`rgf.models`), and the robust update
that filters with a responsibility feature of the measurement instead
of the measurement itself (:mod:`rgf.robust`).  :mod:`rgf.benchmarks`
reproduces the linear, tail-sensitivity, and radar tracking experiments
behind the ``rgf-bench`` command line tool.
"""

from .distributions import (
    CauchyDensity,
    GaussianDensity,
    MixtureNoise,
    cauchy_logpdf,
    gaussian_logpdf,
    sample,
    standard_normal,
)
from .gf import (
    ExactLinearBackend,
    GaussianBelief,
    MomentTriple,
    MonteCarloBackend,
    UnscentedBackend,
    predict,
    propagate_moments,
    update,
)
from .linalg import NumericalError
from .models import (
    FilterTrack,
    LinearGaussianSensor,
    RadarConstants,
    ShiftedTail,
    SimulationError,
    TailedSensorModel,
    TrajectoryLog,
    TransitionModel,
    radar_constants_from_json,
    radar_measurement,
    radar_transition,
    simulate_trajectory,
)
from .robust import (
    FeatureContext,
    FeatureVector,
    approx_posterior_mean,
    feature,
    gaussian_conditioning,
    predict_body_moments,
    rgf_step,
    rgf_update,
)

__all__ = [
    "CauchyDensity",
    "ExactLinearBackend",
    "FeatureContext",
    "FeatureVector",
    "FilterTrack",
    "GaussianBelief",
    "GaussianDensity",
    "LinearGaussianSensor",
    "MixtureNoise",
    "MomentTriple",
    "MonteCarloBackend",
    "NumericalError",
    "RadarConstants",
    "ShiftedTail",
    "SimulationError",
    "TailedSensorModel",
    "TrajectoryLog",
    "TransitionModel",
    "UnscentedBackend",
    "approx_posterior_mean",
    "cauchy_logpdf",
    "feature",
    "gaussian_conditioning",
    "gaussian_logpdf",
    "predict",
    "predict_body_moments",
    "propagate_moments",
    "radar_constants_from_json",
    "radar_measurement",
    "radar_transition",
    "rgf_step",
    "rgf_update",
    "sample",
    "simulate_trajectory",
    "standard_normal",
    "update",
]

__version__ = "0.1.0"
