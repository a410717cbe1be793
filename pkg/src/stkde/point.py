"""Point decomposition: PB-SYM-PD and its scheduled and replicated variants.

Points are bucketed by the subdomain of their voxel. Once every subdomain
spans at least ``2H+1`` voxels per axis, buckets that are not stencil
neighbours scatter into disjoint voxel sets, so they can run concurrently
on one shared volume without cutting any cylinder.
"""

from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction

import numpy as np

from . import _kernels as K
from .core import DensityVolume
from .decomposition import Decomposition, adjust_decomposition, bucket_indices
from .domain import MemoryBudgetError
from .scheduling import (
    SubdomainGraph,
    build_dag,
    critical_path,
    execute_dag,
    greedy_color,
    simulate_list_schedule,
)
from .sequential import normalization, prepare
from .stats import OpCounters, RunStats, ScheduleStats

__all__ = [
    "bucket_points",
    "task_write_sets",
    "run_pb_sym_pd",
    "run_pb_sym_pd_sched",
    "plan_replication",
    "run_pb_sym_pd_rep",
]


def _as_dec(dec, grid):
    if not isinstance(dec, Decomposition):
        dec = Decomposition(*dec, tuple(grid.shape))
    return dec


def _require_adjusted(dec, grid):
    if adjust_decomposition(dec, grid) != dec:
        raise ValueError(
            f"decomposition {dec} has subdomains narrower than 2H+1 voxels; "
            f"use adjust_decomposition (gives {adjust_decomposition(dec, grid)})"
        )


def bucket_points(points, grid, dec, vox=None):
    """Bucket every point into the subdomain ``floor(A X / Gx), ...`` of its voxel."""
    dec = _as_dec(dec, grid)
    if vox is None:
        _, vox, _, _ = prepare(points, grid)
    if len(vox):
        b = bucket_indices(vox, dec)
        flat = dec.flat(b[:, 0], b[:, 1], b[:, 2])
    else:
        flat = np.empty(0, dtype=np.int64)
    order = np.argsort(flat, kind="stable").astype(np.int64)
    counts = np.bincount(flat, minlength=dec.n_subdomains)
    cuts = np.concatenate([[0], np.cumsum(counts)])
    members = [order[cuts[s]:cuts[s + 1]] for s in range(dec.n_subdomains)]
    return SubdomainGraph(dec, counts.astype(np.int64), members)


class _Scatter:
    """Shared state for scattering buckets with the PB-SYM kernel."""

    def __init__(self, points, grid):
        self.grid = grid
        self.pts, self.vox, self.fp, self.ip = prepare(points, grid)
        self.n = len(self.pts)
        self.norm = normalization(self.n, grid)
        self.lo = np.zeros(3, dtype=np.int64)
        self.hi = np.array(grid.shape, dtype=np.int64)
        self.zero = np.zeros(3, dtype=np.int64)
        self.trace = np.zeros((0, 0, 0), dtype=np.int64)

    def run(self, idx, out, cnt, lo=None, hi=None, off=None, trace=None):
        if len(idx) == 0:
            return
        K.pb_sym(
            self.pts, self.vox, idx, self.fp, self.ip, self.norm,
            self.lo if lo is None else lo,
            self.hi if hi is None else hi,
            self.zero if off is None else off,
            out, cnt, self.trace if trace is None else trace,
        )


def task_write_sets(points, grid, dec):
    """Boolean voxel masks written by each bucket's scatter.

    Runs the real scatter kernel per bucket on scratch memory and records
    every voxel it writes. Intended for small grids.
    """
    dec = _as_dec(dec, grid)
    sc = _Scatter(points, grid)
    graph = bucket_points(points, grid, dec, vox=sc.vox)
    scratch = np.zeros(grid.shape)
    cnt = np.zeros(4, dtype=np.int64)
    sets = []
    for s in range(dec.n_subdomains):
        trace = np.zeros(grid.shape, dtype=np.int64)
        sc.run(graph.members[s], scratch, cnt, trace=trace)
        sets.append(trace > 0)
    return graph, sets


def _base_stats(name, sc, dec, threads):
    return RunStats(
        name, threads=threads, decomposition=dec.counts,
        n_points=sc.n, grid_shape=sc.grid.shape,
    )


def run_pb_sym_pd(points, grid, dec, threads=1):
    """Eight phases over the parity classes of the subdomains.

    Within a phase the same-parity buckets run in parallel and scatter
    their full (grid-clipped) cylinders into the shared volume.
    """
    dec = _as_dec(dec, grid)
    _require_adjusted(dec, grid)
    sc = _Scatter(points, grid)
    stats = _base_stats("pb-sym-pd", sc, dec, threads)
    with stats.phase("init"):
        values = np.zeros(grid.shape, dtype=np.float64)
    with stats.phase("bucket"):
        graph = bucket_points(points, grid, dec, vox=sc.vox)
    cnts = np.zeros((dec.n_subdomains, 4), dtype=np.int64)
    phases = [[] for _ in range(8)]
    for s in range(dec.n_subdomains):
        phases[graph.parity_class(s)].append(s)

    with stats.phase("compute"):
        with ThreadPoolExecutor(threads) as pool:
            for tasks in phases:
                list(pool.map(lambda s: sc.run(graph.members[s], values, cnts[s]), tasks))

    stats.counters = OpCounters.from_array(cnts)
    greedy_color(graph, "parity")
    preds, succs = build_dag(graph)
    w = [int(v) for v in graph.weights]
    tinf, _ = critical_path(preds, succs, w)
    stats.schedule = ScheduleStats(T1=sc.n, Tinf=tinf)
    stats.colors_used = graph.n_colors
    return DensityVolume(grid, values), stats


def _sched_graph(points, grid, dec, sc, stats):
    with stats.phase("bucket"):
        graph = bucket_points(points, grid, dec, vox=sc.vox)
        greedy_color(graph, "weight")
        dag = build_dag(graph)
    return graph, dag


def _priority(graph):
    return lambda s: (-int(graph.weights[s]), s)


def run_pb_sym_pd_sched(points, grid, dec, threads=1):
    """Load-aware coloring plus dependency-driven execution.

    Subdomains are colored greedily by non-increasing point count; a bucket
    starts as soon as all lower-colored stencil neighbours are done.
    """
    dec = _as_dec(dec, grid)
    _require_adjusted(dec, grid)
    sc = _Scatter(points, grid)
    stats = _base_stats("pb-sym-pd-sched", sc, dec, threads)
    with stats.phase("init"):
        values = np.zeros(grid.shape, dtype=np.float64)
    graph, (preds, succs) = _sched_graph(points, grid, dec, sc, stats)
    cnts = np.zeros((dec.n_subdomains, 4), dtype=np.int64)

    def jobs(s):
        return [lambda: sc.run(graph.members[s], values, cnts[s])]

    with stats.phase("compute"):
        execute_dag(preds, succs, _priority(graph), jobs, threads)
    stats.counters = OpCounters.from_array(cnts)
    w = [int(v) for v in graph.weights]
    stats.schedule = simulate_list_schedule((preds, succs), w, threads)
    stats.colors_used = graph.n_colors
    return DensityVolume(grid, values), stats


def plan_replication(graph, dag, P, n):
    """Replication factors shortening the critical path.

    While the critical path is longer than ``n / (2P)``, every positive-weight
    task on a critical path with factor below ``P`` gets one more replica,
    with replica weight ``bucket / r``. Stops when a step would not shorten
    the path (a critical path is saturated at ``P``).

    Returns
    -------
    factors : list of int
    history : list of Fraction
        ``Tinf`` after each accepted step, starting with the initial value.
    """
    preds, succs = dag
    weights = [int(v) for v in graph.weights]
    r = [1] * len(weights)

    def path(factors):
        return critical_path(preds, succs, [Fraction(w, f) for w, f in zip(weights, factors)])

    tinf, on_path = path(r)
    history = [tinf]
    threshold = Fraction(n, 2 * P)
    while tinf > threshold:
        cand = [v for v, on in enumerate(on_path) if on and weights[v] > 0 and r[v] < P]
        if not cand:
            break
        trial = list(r)
        for v in cand:
            trial[v] += 1
        t2, p2 = path(trial)
        if t2 >= tinf:
            break
        r, tinf, on_path = trial, t2, p2
        history.append(tinf)
    return r, history


def _halo(dec, s, grid):
    lo, hi = dec.region(s)
    H = (grid.Hs, grid.Hs, grid.Ht)
    lo = np.array([max(l - h, 0) for l, h in zip(lo, H)], dtype=np.int64)
    hi = np.array([min(u + h, G) for u, h, G in zip(hi, H, grid.shape)], dtype=np.int64)
    return lo, hi


def replication_memory(graph, factors, grid):
    """Bytes of the private halo buffers for a replication plan."""
    total = 0
    for s, r in enumerate(factors):
        if r > 1:
            lo, hi = _halo(graph.dec, s, grid)
            total += r * int(np.prod(hi - lo)) * 8
    return total


def run_pb_sym_pd_rep(points, grid, dec, threads=1, mem_budget=None):
    """PD-SCHED with critical-path buckets split across private replicas.

    A bucket with factor ``r`` is cut into ``r`` input-order chunks, each
    scattered into a private buffer covering the subdomain plus its
    ``(Hs, Hs, Ht)`` halo. The last replica to finish adds the buffers into
    the shared volume in replica order before the bucket's successors start.
    """
    dec = _as_dec(dec, grid)
    _require_adjusted(dec, grid)
    if threads < 1:
        raise ValueError("threads must be >= 1")
    sc = _Scatter(points, grid)
    stats = _base_stats("pb-sym-pd-rep", sc, dec, threads)
    graph, dag = _sched_graph(points, grid, dec, sc, stats)
    with stats.phase("bucket"):
        factors, history = plan_replication(graph, dag, threads, sc.n)
    need = replication_memory(graph, factors, grid) + grid.n_voxels * 8
    if mem_budget is not None and need > mem_budget:
        raise MemoryBudgetError(
            f"PB-SYM-PD-REP needs {need} bytes including halo buffers, budget is {mem_budget}"
        )
    with stats.phase("init"):
        values = np.zeros(grid.shape, dtype=np.float64)
    preds, succs = dag
    n_sub = dec.n_subdomains
    cnts = np.zeros((n_sub, max(factors), 4), dtype=np.int64)
    buffers = {}

    def jobs(s):
        r = factors[s]
        if r == 1:
            return [lambda: sc.run(graph.members[s], values, cnts[s, 0])]
        lo, hi = _halo(dec, s, grid)
        bufs = [np.zeros(tuple(hi - lo)) for _ in range(r)]
        buffers[s] = (lo, bufs)
        chunks = np.array_split(graph.members[s], r)
        return [
            (lambda k=k: sc.run(chunks[k], bufs[k], cnts[s, k], lo=lo, hi=hi, off=lo))
            for k in range(r)
        ]

    def finish(s):
        if s in buffers:
            lo, bufs = buffers.pop(s)
            for buf in bufs:
                K.add_block(values, buf, lo)

    def priority(s):
        return (-Fraction(int(graph.weights[s]), factors[s]), s)

    with stats.phase("compute"):
        execute_dag(preds, succs, priority, jobs, threads, finish=finish)

    stats.counters = OpCounters.from_array(cnts.reshape(-1, 4))
    stats.schedule = ScheduleStats(
        T1=sc.n, Tinf=float(history[-1]), P=threads,
    )
    stats.colors_used = graph.n_colors
    stats.replication = [int(f) for f in factors]
    stats.tinf_history = [float(t) for t in history]
    return DensityVolume(grid, values), stats
