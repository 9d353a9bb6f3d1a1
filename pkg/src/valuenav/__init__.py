"""Training-free instruction navigation over fused value maps."""
from .dcon import DconChain, DconStep, NavAction, TaskKind
from .episode import EpisodeConfig, EpisodeResult, EpisodeSpec, run_episode
from .grid import GridSpec
from .metrics import MetricsTable, compute_metrics
from .simulator import Scene, load_scene
from .suite import fixture_path, load_suite, run_suite
from .valuemaps import ValueMap, Waypoint
from .worldmodel import Observation, Pose, WorldState

__version__ = "0.1.0"
