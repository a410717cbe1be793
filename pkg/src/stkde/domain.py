"""Domain-parallel strategies: full replication (DR) and decomposition (DD)."""

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import psutil

from . import _kernels as K
from .core import DensityVolume
from .decomposition import Decomposition, bucket_indices
from .sequential import normalization, prepare
from .stats import OpCounters, RunStats

__all__ = [
    "MemoryBudgetError",
    "dr_memory_estimate",
    "run_pb_sym_dr",
    "assign_points_dd",
    "run_pb_sym_dd",
    "default_threads",
]


class MemoryBudgetError(MemoryError):
    """Refusal to allocate beyond the configured memory budget."""


def default_threads():
    """Physical core count (hyperthreads excluded)."""
    return psutil.cpu_count(logical=False) or os.cpu_count() or 1


def dr_memory_estimate(grid, threads):
    """Bytes of the private volumes of DR: ``P Gx Gy Gt 8``."""
    return threads * grid.n_voxels * 8


def _chunks(n, parts):
    edges = np.linspace(0, n, parts + 1).round().astype(np.int64)
    return [np.arange(edges[p], edges[p + 1], dtype=np.int64) for p in range(parts)]


def _no_trace():
    return np.zeros((0, 0, 0), dtype=np.int64)


def run_pb_sym_dr(points, grid, threads=1, mem_budget=None):
    """Each worker scatters a contiguous chunk into a private full volume.

    Copies are summed per voxel in ascending worker order, so the result is
    bitwise reproducible for a given ``threads``.

    Raises
    ------
    MemoryBudgetError
        If ``threads`` full volumes exceed ``mem_budget`` bytes; raised
        before anything is allocated.
    """
    if threads < 1:
        raise ValueError("threads must be >= 1")
    need = dr_memory_estimate(grid, threads)
    if mem_budget is not None and need > mem_budget:
        raise MemoryBudgetError(
            f"PB-SYM-DR needs {need} bytes for {threads} copies, budget is {mem_budget}"
        )
    pts, vox, fp, ip = prepare(points, grid)
    stats = RunStats("pb-sym-dr", threads=threads, n_points=len(pts), grid_shape=grid.shape)
    norm = normalization(len(pts), grid)
    lo = np.zeros(3, dtype=np.int64)
    hi = np.array(grid.shape, dtype=np.int64)
    off = np.zeros(3, dtype=np.int64)
    chunks = _chunks(len(pts), threads)
    slabs = _chunks(grid.Gx, threads)

    with stats.phase("init"):
        copies = np.empty((threads,) + grid.shape, dtype=np.float64)
        out = np.empty(grid.shape, dtype=np.float64)
    cnts = np.zeros((threads, 4), dtype=np.int64)

    with ThreadPoolExecutor(threads) as pool:
        with stats.phase("init"):
            list(pool.map(lambda p: K.zero_fill(copies[p], 0, grid.Gx), range(threads)))

        def work(p):
            if len(pts):
                K.pb_sym(
                    pts, vox, chunks[p], fp, ip, norm, lo, hi, off,
                    copies[p], cnts[p], _no_trace(),
                )

        def reduce(slab):
            if len(slab):
                K.sum_copies(copies, out, slab[0], slab[-1] + 1)

        with stats.phase("compute"):
            list(pool.map(work, range(threads)))
        with stats.phase("reduce"):
            list(pool.map(reduce, slabs))
    stats.counters = OpCounters.from_array(cnts)
    return DensityVolume(grid, out), stats


def assign_points_dd(points, grid, dec, vox=None):
    """Point lists per subdomain for domain decomposition.

    A point is listed in every subdomain its ``(Hs, Hs, Ht)`` scatter box
    (clipped to the grid) intersects. Lists preserve input order.

    Returns
    -------
    lists : list of int64 arrays, indexed by flat subdomain id
    """
    if vox is None:
        _, vox, _, _ = prepare(points, grid)
    n = len(vox)
    if n == 0:
        return [np.empty(0, dtype=np.int64) for _ in range(dec.n_subdomains)]
    H = np.array([grid.Hs, grid.Hs, grid.Ht], dtype=np.int64)
    G = np.array(grid.shape, dtype=np.int64)
    first = bucket_indices(np.maximum(vox - H, 0), dec)
    last = bucket_indices(np.minimum(vox + H, G - 1), dec)
    span = last - first + 1
    rows, subs = [], []
    for da in range(int(span[:, 0].max())):
        for db in range(int(span[:, 1].max())):
            for dc in range(int(span[:, 2].max())):
                ok = (da < span[:, 0]) & (db < span[:, 1]) & (dc < span[:, 2])
                i = np.flatnonzero(ok)
                s = dec.flat(first[i, 0] + da, first[i, 1] + db, first[i, 2] + dc)
                rows.append(i)
                subs.append(s)
    rows = np.concatenate(rows)
    subs = np.concatenate(subs)
    order = np.lexsort((rows, subs))
    rows, subs = rows[order], subs[order]
    cuts = np.searchsorted(subs, np.arange(dec.n_subdomains + 1))
    return [rows[cuts[s]:cuts[s + 1]].astype(np.int64) for s in range(dec.n_subdomains)]


def run_pb_sym_dd(points, grid, dec, threads=1):
    """Process each subdomain independently with PB-SYM clipped to its range.

    Subdomains own disjoint voxel ranges of the shared output. They enter a
    dynamic pool in descending order of point count (ties by index).
    ``stats.work_overhead_ratio`` compares the kernel-evaluation plus
    scatter counters against an undecomposed PB-SYM on the same points.
    """
    if not isinstance(dec, Decomposition):
        dec = Decomposition(*dec, tuple(grid.shape))
    pts, vox, fp, ip = prepare(points, grid)
    stats = RunStats(
        "pb-sym-dd", threads=threads, decomposition=dec.counts,
        n_points=len(pts), grid_shape=grid.shape,
    )
    norm = normalization(len(pts), grid)
    with stats.phase("init"):
        values = np.zeros(grid.shape, dtype=np.float64)
    with stats.phase("bucket"):
        lists = assign_points_dd(pts, grid, dec, vox=vox)
    order = sorted(range(dec.n_subdomains), key=lambda s: (-len(lists[s]), s))
    cnts = np.zeros((dec.n_subdomains, 4), dtype=np.int64)
    off = np.zeros(3, dtype=np.int64)

    def work(s):
        if len(lists[s]) == 0:
            return
        lo, hi = dec.region(s)
        K.pb_sym(
            pts, vox, lists[s], fp, ip, norm,
            np.array(lo, dtype=np.int64), np.array(hi, dtype=np.int64),
            off, values, cnts[s], _no_trace(),
        )

    with stats.phase("compute"):
        with ThreadPoolExecutor(threads) as pool:
            list(pool.map(work, order))

    stats.counters = OpCounters.from_array(cnts)
    base = np.zeros(4, dtype=np.int64)
    K.sym_counts(
        vox, np.arange(len(pts), dtype=np.int64), ip,
        np.zeros(3, dtype=np.int64), np.array(grid.shape, dtype=np.int64), base,
    )
    base = OpCounters.from_array(base)
    stats.work_overhead_ratio = stats.counters.work / base.work if base.work else 1.0
    stats.replication_factor = sum(len(l) for l in lists) / len(pts) if len(pts) else 1.0
    return DensityVolume(grid, values), stats
