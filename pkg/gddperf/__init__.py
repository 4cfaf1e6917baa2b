"""
gdd-insight - detection performance of adaptive generalized-direction detectors

Statistics, closed-form PD/PFA and a seeded Monte Carlo engine for the
GLRGDD and AMGDD detectors with a known spatial steering vector.
"""

from .version import __version__, __version_info__
from .analytic import DistParams, QuadratureRule, invert_threshold
from .config import RunConfig, load_config, parse_config
from .detectors import Detector, DetectorOutput, ScmMode, amgdd, evaluate, evaluate_batch, glrgdd
from .exceptions import GddError, ConfigurationError, ScenarioError, DomainError, NumericalError
from .model import NoiseModel, Scenario, SignalModel, TrialData, default_signal_model, snr_to_theta
from .montecarlo import McResult, PerfPoint, calibrate_threshold, estimate_pd, sweep

__all__ = [
    "__version__",
    "__version_info__",
    "DistParams",
    "QuadratureRule",
    "invert_threshold",
    "RunConfig",
    "load_config",
    "parse_config",
    "Detector",
    "DetectorOutput",
    "ScmMode",
    "amgdd",
    "evaluate",
    "evaluate_batch",
    "glrgdd",
    "GddError",
    "ConfigurationError",
    "ScenarioError",
    "DomainError",
    "NumericalError",
    "NoiseModel",
    "Scenario",
    "SignalModel",
    "TrialData",
    "default_signal_model",
    "snr_to_theta",
    "McResult",
    "PerfPoint",
    "calibrate_threshold",
    "estimate_pd",
    "sweep",
]
