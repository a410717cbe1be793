"""Stencil graph of subdomains, greedy coloring, task DAG and list scheduling.

The subdomains of a decomposition form a 27-point stencil graph. A proper
coloring orients every stencil edge from the lower to the higher color,
which yields the dependency DAG that makes concurrent point scatters safe.
"""

import heapq
import threading
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .decomposition import Decomposition
from .stats import ScheduleStats

__all__ = [
    "SubdomainGraph",
    "stencil_neighbors",
    "coloring_order",
    "greedy_color",
    "build_dag",
    "critical_path",
    "build_dag_and_critical_path",
    "simulate_list_schedule",
    "execute_dag",
]


def stencil_neighbors(dec):
    """Neighbours of each flat subdomain under the 27-point stencil."""
    nbrs = []
    for s in range(dec.n_subdomains):
        a, b, c = dec.unflat(s)
        out = []
        for da in (-1, 0, 1):
            for db in (-1, 0, 1):
                for dc in (-1, 0, 1):
                    if da == db == dc == 0:
                        continue
                    i, j, k = a + da, b + db, c + dc
                    if 0 <= i < dec.A and 0 <= j < dec.B and 0 <= k < dec.C:
                        out.append(dec.flat(i, j, k))
        nbrs.append(out)
    return nbrs


@dataclass
class SubdomainGraph:
    """Subdomains with their point buckets, stencil adjacency and coloring.

    ``members[s]`` lists the points bucketed in subdomain ``s`` in input
    order; ``weights[s]`` is its length.
    """

    dec: Decomposition
    weights: np.ndarray
    members: list = field(default_factory=list)
    neighbors: list = None
    colors: np.ndarray = None

    def __post_init__(self):
        if self.neighbors is None:
            self.neighbors = stencil_neighbors(self.dec)

    @property
    def n_vertices(self):
        return self.dec.n_subdomains

    @property
    def n_colors(self):
        return 0 if self.colors is None else int(self.colors.max()) + 1

    def parity_class(self, s):
        a, b, c = self.dec.unflat(s)
        return (a % 2) * 4 + (b % 2) * 2 + (c % 2)

    def is_proper(self):
        return all(
            self.colors[s] != self.colors[t]
            for s in range(self.n_vertices)
            for t in self.neighbors[s]
        )


def coloring_order(graph, order):
    """Vertex visiting order for greedy coloring.

    ``"parity"`` visits the eight parity classes in turn (reproducing the
    checkerboard), ``"weight"`` visits by non-increasing weight with ties in
    index order, ``"index"`` is plain index order. A sequence is used as is.
    """
    V = range(graph.n_vertices)
    if isinstance(order, str):
        if order == "parity":
            return sorted(V, key=lambda s: (graph.parity_class(s), s))
        if order == "weight":
            return sorted(V, key=lambda s: (-int(graph.weights[s]), s))
        if order == "index":
            return list(V)
        raise ValueError(f"unknown coloring order {order!r}")
    order = list(order)
    if sorted(order) != list(V):
        raise ValueError("order must be a permutation of the subdomains")
    return order


def greedy_color(graph, order="weight"):
    """Give each vertex, in ``order``, the smallest color unused by its
    already-colored neighbours. Colors are stored on ``graph`` and returned."""
    colors = np.full(graph.n_vertices, -1, dtype=np.int64)
    for s in coloring_order(graph, order):
        taken = {colors[t] for t in graph.neighbors[s] if colors[t] >= 0}
        c = 0
        while c in taken:
            c += 1
        colors[s] = c
    graph.colors = colors
    return graph


def build_dag(graph):
    """Orient stencil edges low color -> high color.

    Returns ``(preds, succs)`` adjacency lists.
    """
    if graph.colors is None:
        raise ValueError("graph must be colored first")
    col = graph.colors
    preds = [[] for _ in range(graph.n_vertices)]
    succs = [[] for _ in range(graph.n_vertices)]
    for s in range(graph.n_vertices):
        for t in graph.neighbors[s]:
            if col[s] < col[t]:
                succs[s].append(t)
                preds[t].append(s)
            elif col[s] == col[t]:
                raise ValueError(f"improper coloring: {s} and {t} share color {col[s]}")
    return preds, succs


def _topological(preds, succs):
    indeg = [len(p) for p in preds]
    stack = [v for v in range(len(preds)) if indeg[v] == 0]
    out = []
    while stack:
        v = stack.pop()
        out.append(v)
        for u in succs[v]:
            indeg[u] -= 1
            if indeg[u] == 0:
                stack.append(u)
    if len(out) != len(preds):
        raise ValueError("dependency graph has a cycle")
    return out


def critical_path(preds, succs, weights):
    """Longest weight-inclusive chain.

    Returns ``(Tinf, on_path)`` where ``on_path`` flags every vertex lying on
    at least one chain of weight ``Tinf``. Weights may be ints or Fractions
    for exact comparisons.
    """
    topo = _topological(preds, succs)
    if not topo:
        return 0, []
    head = [0] * len(topo)
    tail = [0] * len(topo)
    for v in topo:
        head[v] = weights[v] + max((head[u] for u in preds[v]), default=0)
    for v in reversed(topo):
        tail[v] = weights[v] + max((tail[u] for u in succs[v]), default=0)
    tinf = max(head)
    on_path = [head[v] + tail[v] - weights[v] == tinf for v in range(len(topo))]
    return tinf, on_path


def build_dag_and_critical_path(graph, weights=None):
    """DAG of a colored graph and its critical path weight ``Tinf``."""
    preds, succs = build_dag(graph)
    w = [int(v) for v in graph.weights] if weights is None else list(weights)
    tinf, _ = critical_path(preds, succs, w)
    return (preds, succs), tinf


def simulate_list_schedule(dag, weights, P):
    """Event-driven greedy list schedule on ``P`` identical workers.

    A task becomes ready when all its predecessors have completed; idle
    workers claim ready tasks by descending weight, ties by index.

    Returns
    -------
    ScheduleStats
        With ``makespan`` filled. Graham's bound is checked.
    """
    preds, succs = dag
    n = len(preds)
    w = list(weights)
    T1 = sum(w)
    tinf, _ = critical_path(preds, succs, w) if n else (0, [])
    remaining = [len(p) for p in preds]
    ready = [(-w[v], v) for v in range(n) if remaining[v] == 0]
    heapq.heapify(ready)
    running = []  # (finish_time, task)
    now = 0
    idle = P
    done = 0
    while done < n:
        while idle and ready:
            _, v = heapq.heappop(ready)
            heapq.heappush(running, (now + w[v], v))
            idle -= 1
        now, v = heapq.heappop(running)
        finished = [v]
        while running and running[0][0] == now:
            finished.append(heapq.heappop(running)[1])
        for v in finished:
            idle += 1
            done += 1
            for u in succs[v]:
                remaining[u] -= 1
                if remaining[u] == 0:
                    heapq.heappush(ready, (-w[u], u))
    stats = ScheduleStats(T1=T1, Tinf=tinf, makespan=now, P=P)
    bound = stats.graham_bound
    slack = 1e-9 * max(1, abs(bound)) if isinstance(bound, float) else 0
    assert now <= bound + slack, f"makespan {now} exceeds Graham bound {bound}"
    return stats


def execute_dag(preds, succs, priority, jobs_of, threads, finish=None):
    """Run a task DAG on ``threads`` Python threads.

    When a task becomes ready, ``jobs_of(task)`` gives the callables to run
    for it; they go into a shared ready queue ordered by ``priority(task)``
    (smaller first). After the last job of a task completes, ``finish(task)``
    runs in that worker before the successors are released.
    """
    n = len(preds)
    if n == 0:
        return
    cond = threading.Condition()
    remaining = [len(p) for p in preds]
    pending = [0] * n
    queue = []
    seq = 0
    state = {"done": 0, "error": None}

    def release(t):
        nonlocal seq
        jobs = list(jobs_of(t))
        if not jobs:
            jobs = [None]
        pending[t] = len(jobs)
        for j in jobs:
            heapq.heappush(queue, (priority(t), seq, t, j))
            seq += 1

    with cond:
        for t in range(n):
            if remaining[t] == 0:
                release(t)

    def worker():
        while True:
            with cond:
                while not queue and state["done"] < n and state["error"] is None:
                    cond.wait()
                if state["done"] >= n or state["error"] is not None:
                    cond.notify_all()
                    return
                _, _, t, job = heapq.heappop(queue)
            try:
                if job is not None:
                    job()
                with cond:
                    pending[t] -= 1
                    last = pending[t] == 0
                if last:
                    if finish is not None:
                        finish(t)
                    with cond:
                        state["done"] += 1
                        for u in succs[t]:
                            remaining[u] -= 1
                            if remaining[u] == 0:
                                release(u)
                        cond.notify_all()
            except BaseException as exc:  # propagate to the caller
                with cond:
                    state["error"] = exc
                    cond.notify_all()
                return

    workers = [threading.Thread(target=worker, daemon=True) for _ in range(threads)]
    for th in workers:
        th.start()
    for th in workers:
        th.join()
    if state["error"] is not None:
        raise state["error"]


def as_fraction_weights(weights, factors):
    return [Fraction(int(w), int(r)) for w, r in zip(weights, factors)]
