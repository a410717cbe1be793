"""Run instrumentation: operation counters, phase timings, schedule metrics."""

import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field

import numpy as np

__all__ = ["OpCounters", "ScheduleStats", "RunStats"]


@dataclass
class OpCounters:
    """Work counters of one algorithm run.

    ``distance_tests`` counts gate evaluations (VB's combined space/time test
    counts once). A kernel evaluation is counted whenever a kernel factor is
    produced for use: inline evaluations count only when the gate passes,
    invariant-table entries count whether they hold a kernel value or a
    gated zero. ``voxel_updates`` counts writes into the output.
    """

    distance_tests: int = 0
    kernel_evals_spatial: int = 0
    kernel_evals_temporal: int = 0
    voxel_updates: int = 0

    @classmethod
    def from_array(cls, cnt):
        return cls(*(int(v) for v in np.asarray(cnt).reshape(-1, 4).sum(axis=0)))

    @property
    def kernel_evals(self):
        return self.kernel_evals_spatial + self.kernel_evals_temporal

    @property
    def work(self):
        """Kernel evaluations plus scatter writes, the overhead measure."""
        return self.kernel_evals + self.voxel_updates

    def __add__(self, other):
        return OpCounters(
            self.distance_tests + other.distance_tests,
            self.kernel_evals_spatial + other.kernel_evals_spatial,
            self.kernel_evals_temporal + other.kernel_evals_temporal,
            self.voxel_updates + other.voxel_updates,
        )


@dataclass
class ScheduleStats:
    T1: float
    Tinf: float
    makespan: float | None = None
    P: int | None = None

    @property
    def graham_bound(self):
        if self.P is None:
            return None
        return (self.T1 - self.Tinf) / self.P + self.Tinf


@dataclass
class RunStats:
    """Everything one run reports; ``to_dict`` gives the flat JSON schema."""

    algorithm: str
    threads: int = 1
    decomposition: tuple | None = None
    n_points: int = 0
    grid_shape: tuple = ()
    counters: OpCounters = field(default_factory=OpCounters)
    phases: dict = field(
        default_factory=lambda: {"init": 0.0, "bucket": 0.0, "compute": 0.0, "reduce": 0.0}
    )
    schedule: ScheduleStats | None = None
    colors_used: int | None = None
    replication: list | None = None
    work_overhead_ratio: float | None = None
    replication_factor: float | None = None
    tinf_history: list | None = None

    @contextmanager
    def phase(self, name):
        start = time.perf_counter()
        try:
            yield
        finally:
            self.phases[name] = self.phases.get(name, 0.0) + time.perf_counter() - start

    @property
    def total_seconds(self):
        return sum(self.phases.values())

    def to_dict(self):
        d = {
            "algorithm": self.algorithm,
            "threads": self.threads,
            "decomposition": (
                "x".join(str(v) for v in self.decomposition) if self.decomposition else None
            ),
            "n_points": self.n_points,
            "grid": "x".join(str(v) for v in self.grid_shape),
            "init_seconds": self.phases.get("init", 0.0),
            "bucket_seconds": self.phases.get("bucket", 0.0),
            "compute_seconds": self.phases.get("compute", 0.0),
            "reduce_seconds": self.phases.get("reduce", 0.0),
            "total_seconds": self.total_seconds,
        }
        d.update(asdict(self.counters))
        sched = self.schedule
        d["T1"] = sched.T1 if sched else None
        d["Tinf"] = sched.Tinf if sched else None
        d["graham_bound"] = sched.graham_bound if sched else None
        d["makespan"] = sched.makespan if sched else None
        d["colors_used"] = self.colors_used
        d["replication_factors"] = self.replication
        d["work_overhead_ratio"] = self.work_overhead_ratio
        d["point_replication_factor"] = self.replication_factor
        d["tinf_history"] = self.tinf_history
        return d
