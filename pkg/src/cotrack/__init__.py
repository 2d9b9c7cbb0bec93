"""Multi-feature correlation-filter tracking with jointly solved filters."""
from .config import SolverConfig, TrackerConfig, load_config
from .core import BBox
from .errors import ConfigError, CotrackError, DataError, InvalidArgument, NumericalError, SingularError, TrackingLost
from .evalbench import load_otb_sequence, overlap_ratio, success_analysis
from .solver import ProblemInstance, solve_joint_filters
from .synth import SynthSpec, generate_synthetic
from .tracker import track_sequence

__version__ = "0.1.0"

__all__ = [
    "BBox",
    "ConfigError",
    "CotrackError",
    "DataError",
    "InvalidArgument",
    "NumericalError",
    "ProblemInstance",
    "SingularError",
    "SolverConfig",
    "SynthSpec",
    "TrackerConfig",
    "TrackingLost",
    "generate_synthetic",
    "load_config",
    "load_otb_sequence",
    "overlap_ratio",
    "solve_joint_filters",
    "success_analysis",
    "track_sequence",
]
