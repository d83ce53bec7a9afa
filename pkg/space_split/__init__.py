__version__ = "0.1.0"
__author__ = "Space-split sensitivity contributors"

from .src.errors import ConfigError, NonFinite, RankDeficient, RunFailed, S3Error, Singular
from .src.linalg import QrPair, congruence_rescale, qr_positive, upper_tri_inverse
from .src.map_system import MapSystem
from .src.baker_map import BakerMap
from .src.solenoid_map import SolenoidMap
from .src.observables import Observable
from .src.registry import get_map, get_observable
from .src.s3core import S3Config, SensitivityResult, run
from .src.oracles import (
    FdConfig,
    convergence_probe,
    fd_sensitivity,
    lyapunov_exponents,
    mean_observable,
    polyfit_sensitivity,
    tangent_growth_probe,
)
from .src.config import ExperimentConfig, parse_config
from .src.emit import emit, read_artifact
from .src.experiments import run_experiment
from .src.terminal import ColorPrinter

__all__ = [
    "S3Error",
    "RankDeficient",
    "Singular",
    "NonFinite",
    "ConfigError",
    "RunFailed",
    "QrPair",
    "qr_positive",
    "upper_tri_inverse",
    "congruence_rescale",
    "MapSystem",
    "BakerMap",
    "SolenoidMap",
    "Observable",
    "get_map",
    "get_observable",
    "S3Config",
    "SensitivityResult",
    "run",
    "FdConfig",
    "fd_sensitivity",
    "mean_observable",
    "lyapunov_exponents",
    "convergence_probe",
    "tangent_growth_probe",
    "polyfit_sensitivity",
    "ExperimentConfig",
    "parse_config",
    "emit",
    "read_artifact",
    "run_experiment",
    "ColorPrinter",
]
