"""Sequential algorithms: voxel-based oracles and the point-based ladder.

Every ``run_*`` function takes an ``(n, 3)`` point array (or anything
:func:`~stkde.core.as_points` accepts) and a :class:`~stkde.core.GridSpec`,
and returns ``(DensityVolume, OpCounters)``. Passing a
:class:`~stkde.stats.RunStats` as ``stats`` records phase timings into it.
"""

import numpy as np

from . import _kernels as K
from .core import DensityVolume, as_points, points_to_voxels
from .stats import OpCounters, RunStats

__all__ = [
    "prepare",
    "normalization",
    "run_vb",
    "run_vb_dec",
    "run_pb",
    "run_pb_disk",
    "run_pb_bar",
    "run_pb_sym",
]


def normalization(n, grid):
    """The ``n hs^2 ht`` divisor; ``n`` counts accepted points."""
    return n * grid.hs * grid.hs * grid.ht


def prepare(points, grid):
    """Validated points, their voxel indices and the kernel geometry arrays."""
    pts = as_points(points)
    vox = points_to_voxels(pts, grid)
    fp, ip = K.grid_arrays(grid)
    return pts, vox, fp, ip


def _alloc(grid, stats):
    stats = stats if stats is not None else RunStats("")
    with stats.phase("init"):
        values = np.zeros(grid.shape, dtype=np.float64)
    return values


def _no_trace():
    return np.zeros((0, 0, 0), dtype=np.int64)


def run_vb(points, grid, stats=None):
    """Brute-force voxel-based estimate: every voxel tests every point."""
    pts, _, fp, ip = prepare(points, grid)
    values = _alloc(grid, stats)
    cnt = np.zeros(4, dtype=np.int64)
    if len(pts):
        with (stats or RunStats("")).phase("compute"):
            K.vb(pts, fp, ip, normalization(len(pts), grid), values, cnt)
    return DensityVolume(grid, values), OpCounters.from_array(cnt)


def vb_dec_bins(vox, grid):
    """Bin the points by ``(Hs, Hs, Ht)`` voxel blocks.

    Returns ``(bins, bin_start, bin_order)`` where ``bins`` holds the block
    sizes and block counts, and ``bin_order[bin_start[b]:bin_start[b+1]]``
    lists the points of bin ``b`` in input order.
    """
    bs = np.array([max(grid.Hs, 1), max(grid.Hs, 1), max(grid.Ht, 1)], dtype=np.int64)
    nb = -(-np.array(grid.shape, dtype=np.int64) // bs)
    bins = np.concatenate([bs, nb])
    if len(vox):
        b3 = vox // bs
        flat = (b3[:, 0] * nb[1] + b3[:, 1]) * nb[2] + b3[:, 2]
    else:
        flat = np.empty(0, dtype=np.int64)
    order = np.argsort(flat, kind="stable").astype(np.int64)
    counts = np.bincount(flat, minlength=int(nb.prod()))
    start = np.zeros(len(counts) + 1, dtype=np.int64)
    np.cumsum(counts, out=start[1:])
    return bins, start, order


def run_vb_dec(points, grid, stats=None):
    """Voxel-based estimate restricted to points in neighbouring bins.

    Candidate points are visited in input order, so the result is bitwise
    equal to :func:`run_vb`.
    """
    pts, vox, fp, ip = prepare(points, grid)
    values = _alloc(grid, stats)
    cnt = np.zeros(4, dtype=np.int64)
    if len(pts):
        with (stats or RunStats("")).phase("compute"):
            bins, start, order = vb_dec_bins(vox, grid)
            K.vb_dec(pts, fp, ip, bins, start, order, normalization(len(pts), grid), values, cnt)
    return DensityVolume(grid, values), OpCounters.from_array(cnt)


def _run_point_based(kernel, points, grid, stats):
    pts, vox, fp, ip = prepare(points, grid)
    values = _alloc(grid, stats)
    cnt = np.zeros(4, dtype=np.int64)
    if len(pts):
        idx = np.arange(len(pts), dtype=np.int64)
        with (stats or RunStats("")).phase("compute"):
            kernel(pts, vox, idx, fp, ip, normalization(len(pts), grid), values, cnt)
    return DensityVolume(grid, values), OpCounters.from_array(cnt)


def run_pb(points, grid, stats=None):
    """Point-based scatter: each point visits its ``(2Hs+1)^2 (2Ht+1)`` box."""
    return _run_point_based(K.pb, points, grid, stats)


def run_pb_disk(points, grid, stats=None):
    """PB with the spatial plane computed once per point."""
    return _run_point_based(K.pb_disk, points, grid, stats)


def run_pb_bar(points, grid, stats=None):
    """PB with the temporal line computed once per point."""
    return _run_point_based(K.pb_bar, points, grid, stats)


def run_pb_sym(points, grid, volume=None, region=None, indices=None, stats=None):
    """Separable point-based scatter (spatial plane times temporal line).

    Parameters
    ----------
    points : array-like of shape (n, 3)
    grid : GridSpec
    volume : DensityVolume, optional
        Accumulate into this volume instead of a fresh zero one.
    region : ((X0, Y0, T0), (X1, Y1, T1)), optional
        Half-open voxel range the scatter is clipped to. Defaults to the grid.
    indices : array of int, optional
        Subset of points to process, in the given order. The normalisation
        still uses the full point count.
    stats : RunStats, optional

    Returns
    -------
    volume : DensityVolume
    counters : OpCounters
    """
    pts, vox, fp, ip = prepare(points, grid)
    if volume is None:
        volume = DensityVolume(grid, _alloc(grid, stats))
    elif volume.values.shape != grid.shape:
        raise ValueError("volume does not match grid")
    lo, hi = region if region is not None else ((0, 0, 0), grid.shape)
    lo = np.asarray(lo, dtype=np.int64)
    hi = np.asarray(hi, dtype=np.int64)
    idx = (
        np.arange(len(pts), dtype=np.int64)
        if indices is None
        else np.asarray(indices, dtype=np.int64)
    )
    cnt = np.zeros(4, dtype=np.int64)
    if len(pts):
        with (stats or RunStats("")).phase("compute"):
            K.pb_sym(
                pts, vox, idx, fp, ip, normalization(len(pts), grid),
                lo, hi, np.zeros(3, dtype=np.int64), volume.values, cnt, _no_trace(),
            )
    return volume, OpCounters.from_array(cnt)


SEQUENTIAL = {
    "vb": run_vb,
    "vb-dec": run_vb_dec,
    "pb": run_pb,
    "pb-disk": run_pb_disk,
    "pb-bar": run_pb_bar,
    "pb-sym": run_pb_sym,
}
