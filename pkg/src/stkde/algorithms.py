"""Uniform entry point over every algorithm."""

from .core import as_points
from .decomposition import Decomposition, adjust_decomposition
from .domain import run_pb_sym_dd, run_pb_sym_dr
from .point import run_pb_sym_pd, run_pb_sym_pd_rep, run_pb_sym_pd_sched
from .sequential import SEQUENTIAL
from .stats import RunStats

__all__ = ["ALGORITHMS", "SEQUENTIAL_ALGORITHMS", "PARALLEL_ALGORITHMS", "run_algorithm"]

SEQUENTIAL_ALGORITHMS = tuple(SEQUENTIAL)
PARALLEL_ALGORITHMS = (
    "pb-sym-dr",
    "pb-sym-dd",
    "pb-sym-pd",
    "pb-sym-pd-sched",
    "pb-sym-pd-rep",
)
ALGORITHMS = SEQUENTIAL_ALGORITHMS + PARALLEL_ALGORITHMS
_POINT_DECOMPOSED = {
    "pb-sym-pd": run_pb_sym_pd,
    "pb-sym-pd-sched": run_pb_sym_pd_sched,
}


def run_algorithm(name, points, grid, decomposition=(1, 1, 1), threads=1, mem_budget=None):
    """Run algorithm ``name`` and return ``(DensityVolume, RunStats)``.

    Point-decomposed algorithms coarsen ``decomposition`` with
    :func:`~stkde.decomposition.adjust_decomposition` first; the adjusted
    value is what ``stats.decomposition`` reports.
    """
    if name not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {name!r}; choose from {', '.join(ALGORITHMS)}")
    if threads < 1:
        raise ValueError("threads must be >= 1")
    points = as_points(points)
    if not isinstance(decomposition, Decomposition):
        decomposition = Decomposition(*decomposition, tuple(grid.shape))

    if name in SEQUENTIAL:
        stats = RunStats(name, n_points=len(points), grid_shape=grid.shape)
        volume, stats.counters = SEQUENTIAL[name](points, grid, stats=stats)
        return volume, stats
    if name == "pb-sym-dr":
        return run_pb_sym_dr(points, grid, threads, mem_budget=mem_budget)
    if name == "pb-sym-dd":
        return run_pb_sym_dd(points, grid, decomposition, threads)
    dec = adjust_decomposition(decomposition, grid)
    if name == "pb-sym-pd-rep":
        return run_pb_sym_pd_rep(points, grid, dec, threads, mem_budget=mem_budget)
    return _POINT_DECOMPOSED[name](points, grid, dec, threads)
