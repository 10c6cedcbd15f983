"""Photon statistics, detection, sampling and fitting for tripartite light
generated by two interlinked parametric interactions."""

from .core import CouplingConfig, ModeMeans, Regime, conservation_defect, mode_means
from .detection import (
    DetectionConfig,
    bipartite_nonclassicality_region,
    detected_correlation,
    detected_moments,
    noise_reduction,
    povm_weight,
)
from .errors import (
    ConfigError,
    ConvergenceError,
    InvalidParameterError,
    OverSubtractionError,
    TripartiteError,
    UndefinedCorrelationError,
)
from .estimators import EstimateReport, estimate_statistics
from .fitting import FitResult, FitSpec, ScanData, fit_pump_scan
from .sampling import (
    CoherenceMismatch,
    NoiseModel,
    ShotRecord,
    ShotSet,
    sample_dark_run,
    sample_run,
    sample_shot,
)
from .scan import ScanConfig, run_scan
from .statistics import (
    Grouping,
    MomentSet,
    correlation_coefficient,
    joint_pmf,
    marginal_pmf,
    photon_moments,
)

__version__ = "0.1.0"
