"""Domain types, world/voxel mapping and the two kernel functions."""

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

__all__ = [
    "DomainError",
    "Point",
    "GridSpec",
    "VoxelIndex",
    "DensityVolume",
    "InvariantPlanes",
    "kernel_spatial",
    "kernel_temporal",
    "make_grid",
    "point_to_voxel",
    "points_to_voxels",
    "voxel_center",
    "as_points",
]


class DomainError(ValueError):
    """A point lies outside the half-open domain box."""


class Point(NamedTuple):
    x: float
    y: float
    t: float


class VoxelIndex(NamedTuple):
    X: int
    Y: int
    T: int


def kernel_spatial(u, v):
    """Spatial kernel ``(pi/2) (1-u)^2 (1-v)^2``.

    The distance gate is the caller's business; the kernel is total.
    """
    return (math.pi / 2.0) * (1.0 - u) ** 2 * (1.0 - v) ** 2


def kernel_temporal(w):
    """Temporal kernel ``(3/4) (1-w)^2``."""
    return 0.75 * (1.0 - w) ** 2


@dataclass(frozen=True)
class GridSpec:
    """World domain, resolutions and bandwidths of a voxel grid.

    Use :func:`make_grid` to build one; it validates the parameters.
    Derived voxel counts ``Gx, Gy, Gt`` and voxel radii ``Hs, Ht`` are
    ceilings of the world quantities over the resolutions.
    """

    origin: tuple
    extent: tuple
    sres: float
    tres: float
    hs: float
    ht: float
    Gx: int = field(init=False)
    Gy: int = field(init=False)
    Gt: int = field(init=False)
    Hs: int = field(init=False)
    Ht: int = field(init=False)

    def __post_init__(self):
        gx, gy, gt = self.extent
        object.__setattr__(self, "Gx", max(1, math.ceil(gx / self.sres)))
        object.__setattr__(self, "Gy", max(1, math.ceil(gy / self.sres)))
        object.__setattr__(self, "Gt", max(1, math.ceil(gt / self.tres)))
        object.__setattr__(self, "Hs", math.ceil(self.hs / self.sres))
        object.__setattr__(self, "Ht", math.ceil(self.ht / self.tres))

    @property
    def shape(self):
        return (self.Gx, self.Gy, self.Gt)

    @property
    def n_voxels(self):
        return self.Gx * self.Gy * self.Gt

    @property
    def key(self):
        """Fields that identify the grid of a stored volume."""
        return (self.shape, self.sres, self.tres, tuple(self.origin), self.hs, self.ht)


def make_grid(origin, extent, sres, tres, hs, ht):
    """Build a validated :class:`GridSpec`.

    Parameters
    ----------
    origin : (x0, y0, t0)
        Lower corner of the domain in world units.
    extent : (gx, gy, gt)
        Size of the domain in world units, all strictly positive.
    sres, tres : float
        Spatial and temporal voxel sizes.
    hs, ht : float
        Spatial and temporal bandwidths.

    Raises
    ------
    ValueError
        If a parameter is non-positive or non-finite; the message names it.
    """
    origin = tuple(float(v) for v in origin)
    extent = tuple(float(v) for v in extent)
    if len(origin) != 3 or len(extent) != 3:
        raise ValueError("origin and extent must have three components")
    for name, value in zip(("x0", "y0", "t0"), origin):
        if not math.isfinite(value):
            raise ValueError(f"{name} must be finite, got {value!r}")
    checks = [
        ("extent_x", extent[0]),
        ("extent_y", extent[1]),
        ("extent_t", extent[2]),
        ("sres", sres),
        ("tres", tres),
        ("hs", hs),
        ("ht", ht),
    ]
    for name, value in checks:
        value = float(value)
        if not math.isfinite(value) or value <= 0.0:
            raise ValueError(f"{name} must be strictly positive, got {value!r}")
    return GridSpec(origin, extent, float(sres), float(tres), float(hs), float(ht))


def _axis_index(value, lo, ext, res, count, name):
    if not (lo <= value < lo + ext):
        raise DomainError(f"{name}={value!r} outside [{lo!r}, {lo + ext!r})")
    idx = math.floor((value - lo) / res)
    return min(max(idx, 0), count - 1)


def point_to_voxel(p, g):
    """Voxel containing point ``p``; upper-edge rounding clamps to ``G-1``."""
    x, y, t = p
    (x0, y0, t0), (gx, gy, gt) = g.origin, g.extent
    return VoxelIndex(
        _axis_index(x, x0, gx, g.sres, g.Gx, "x"),
        _axis_index(y, y0, gy, g.sres, g.Gy, "y"),
        _axis_index(t, t0, gt, g.tres, g.Gt, "t"),
    )


def in_domain_mask(points, g):
    """Boolean mask of rows of an ``(n, 3)`` array inside the domain box."""
    lo = np.asarray(g.origin)
    hi = lo + np.asarray(g.extent)
    return np.all((points >= lo) & (points < hi), axis=1)


def points_to_voxels(points, g):
    """Vectorised :func:`point_to_voxel` returning an ``(n, 3)`` int64 array."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if points.shape[0] and not in_domain_mask(points, g).all():
        bad = int(np.flatnonzero(~in_domain_mask(points, g))[0])
        raise DomainError(f"point {bad} {tuple(points[bad])} outside the domain")
    res = np.array([g.sres, g.sres, g.tres])
    idx = np.floor((points - np.asarray(g.origin)) / res).astype(np.int64)
    np.clip(idx, 0, np.array(g.shape) - 1, out=idx)
    return idx


def voxel_center(v, g):
    """World coordinates of the sampling location (centre) of voxel ``v``."""
    X, Y, T = v
    x0, y0, t0 = g.origin
    return (
        x0 + (X + 0.5) * g.sres,
        y0 + (Y + 0.5) * g.sres,
        t0 + (T + 0.5) * g.tres,
    )


def as_points(points):
    """Validate a point collection into a C-contiguous ``(n, 3)`` float64 array."""
    arr = np.asarray(points, dtype=np.float64)
    if arr.size == 0:
        return np.empty((0, 3), dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValueError(f"points must have shape (n, 3), got {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError("points contain NaN or Inf")
    return np.ascontiguousarray(arr)


@dataclass
class DensityVolume:
    """Density estimates on a grid, ``values[X, Y, T]`` with T innermost."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != self.grid.shape:
            raise ValueError(
                f"values shape {self.values.shape} does not match grid {self.grid.shape}"
            )

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.shape, dtype=np.float64))

    def linear_index(self, X, Y, T):
        return (X * self.grid.Gy + Y) * self.grid.Gt + T


@dataclass
class InvariantPlanes:
    """Per-point separable factors: spatial plane ``Ks`` and temporal line ``Kt``."""

    Ks: np.ndarray
    Kt: np.ndarray


def invariant_planes(point, g, n=1):
    """Compute the unclipped invariants of one point.

    ``Ks`` carries the ``1 / (n hs^2 ht)`` normalisation, ``Kt`` does not.
    Entries whose voxel centre fails the gate are zero.
    """
    X, Y, T = point_to_voxel(point, g)
    x, y, t = point
    Hs, Ht = g.Hs, g.Ht
    norm = n * g.hs * g.hs * g.ht
    Ks = np.zeros((2 * Hs + 1, 2 * Hs + 1))
    Kt = np.zeros(2 * Ht + 1)
    for i in range(2 * Hs + 1):
        for j in range(2 * Hs + 1):
            cx, cy, _ = voxel_center((X - Hs + i, Y - Hs + j, 0), g)
            dx, dy = abs(cx - x), abs(cy - y)
            if math.sqrt(dx * dx + dy * dy) < g.hs:
                Ks[i, j] = kernel_spatial(dx / g.hs, dy / g.hs) / norm
    for k in range(2 * Ht + 1):
        _, _, ct = voxel_center((0, 0, T - Ht + k), g)
        dt = abs(ct - t)
        if dt <= g.ht:
            Kt[k] = kernel_temporal(dt / g.ht)
    return InvariantPlanes(Ks, Kt)
