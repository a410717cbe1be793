"""Space-time kernel density estimation on voxel grids."""

from .algorithms import ALGORITHMS, PARALLEL_ALGORITHMS, SEQUENTIAL_ALGORITHMS, run_algorithm
from .core import *  # noqa: F401,F403
from .core import __all__ as _core_all
from .decomposition import Decomposition, adjust_decomposition, parse_decomposition
from .domain import MemoryBudgetError
from .estimator import SpaceTimeKDE
from .io import generate_synthetic, load_points_csv, read_volume, write_volume
from .stats import OpCounters, RunStats, ScheduleStats

__version__ = "0.1.0"

__all__ = [
    *_core_all,
    "ALGORITHMS",
    "SEQUENTIAL_ALGORITHMS",
    "PARALLEL_ALGORITHMS",
    "run_algorithm",
    "Decomposition",
    "adjust_decomposition",
    "parse_decomposition",
    "MemoryBudgetError",
    "SpaceTimeKDE",
    "generate_synthetic",
    "load_points_csv",
    "read_volume",
    "write_volume",
    "OpCounters",
    "RunStats",
    "ScheduleStats",
]
