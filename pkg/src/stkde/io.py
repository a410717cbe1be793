"""Point ingestion, synthetic instances, and the volume / stats file formats.

Volume files (``STKDE1``) are five ASCII header lines followed by the raw
little-endian float64 payload in ``(X * Gy + Y) * Gt + T`` order::

    STKDE1
    Gx Gy Gt
    sres tres
    x0 y0 t0
    hs ht
    <Gx*Gy*Gt * 8 bytes>

Floats in the header use shortest round-trip formatting (``repr``).
"""

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from .core import DensityVolume, DomainError, GridSpec, make_grid

__all__ = [
    "PointParseError",
    "VolumeFormatError",
    "InstanceConfig",
    "SplitMix64",
    "load_points_csv",
    "write_points_csv",
    "generate_synthetic",
    "auto_domain",
    "build_instance",
    "write_volume",
    "read_volume",
    "write_stats_json",
]

MAGIC = b"STKDE1"


class PointParseError(ValueError):
    pass


class VolumeFormatError(ValueError):
    pass


# ---------------------------------------------------------------- synthetic

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


class SplitMix64:
    """SplitMix64 stream; ``next(k)`` returns the next ``k`` outputs at once."""

    def __init__(self, seed):
        self.state = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)

    def next(self, k):
        with np.errstate(over="ignore"):
            steps = np.arange(1, k + 1, dtype=np.uint64)
            z = self.state + steps * _GAMMA
            if k:
                self.state = z[-1]
            z = (z ^ (z >> np.uint64(30))) * _M1
            z = (z ^ (z >> np.uint64(27))) * _M2
            return z ^ (z >> np.uint64(31))

    def uniform(self, k):
        """``k`` doubles ``(x >> 11) * 2**-53`` in (0, 1), zero mapped to ``2**-53``."""
        u = (self.next(k) >> np.uint64(11)).astype(np.float64) * 2.0**-53
        u[u == 0.0] = 2.0**-53
        return u


def _domain(domain):
    if isinstance(domain, GridSpec):
        return np.asarray(domain.origin), np.asarray(domain.extent)
    origin, extent = domain
    return np.asarray(origin, dtype=np.float64), np.asarray(extent, dtype=np.float64)


def generate_synthetic(n, clusters, cluster_sigma_xy, cluster_sigma_t, domain, seed):
    """Deterministic clustered point set.

    Stream layout: ``3 * clusters`` uniforms for the centres (x, y, t per
    cluster), then per point one uniform picking the cluster and four
    feeding two Box-Muller pairs (x/y offsets, then t offset). Points are
    clamped into the half-open domain box.

    Parameters
    ----------
    n : int
    clusters : int
    cluster_sigma_xy, cluster_sigma_t : float
        Standard deviations of the Gaussian offsets, in world units.
    domain : GridSpec or (origin, extent)
    seed : int

    Returns
    -------
    ndarray of shape (n, 3)
    """
    if n < 0 or clusters < 1 or cluster_sigma_xy < 0 or cluster_sigma_t < 0:
        raise ValueError("need n >= 0, clusters >= 1 and non-negative sigmas")
    origin, extent = _domain(domain)
    rng = SplitMix64(seed)
    centers = origin + rng.uniform(3 * clusters).reshape(clusters, 3) * extent
    if n == 0:
        return np.empty((0, 3))
    u = rng.uniform(5 * n).reshape(n, 5)
    which = np.minimum((u[:, 0] * clusters).astype(np.int64), clusters - 1)
    r1 = np.sqrt(-2.0 * np.log(u[:, 1]))
    r2 = np.sqrt(-2.0 * np.log(u[:, 3]))
    offsets = np.column_stack([
        r1 * np.cos(2.0 * np.pi * u[:, 2]) * cluster_sigma_xy,
        r1 * np.sin(2.0 * np.pi * u[:, 2]) * cluster_sigma_xy,
        r2 * np.cos(2.0 * np.pi * u[:, 4]) * cluster_sigma_t,
    ])
    pts = centers[which] + offsets
    hi = np.nextafter(origin + extent, -np.inf)
    return np.clip(pts, origin, hi)


# ---------------------------------------------------------------------- csv


@dataclass
class InstanceConfig:
    """How to obtain the points and the grid of one run.

    ``origin`` / ``extent`` of ``None`` mean "auto": the tight bounding box of
    the points, with the upper bound padded so the maximal point stays inside
    the half-open domain. ``synthetic`` is ``(n, clusters, sigma_xy, sigma_t,
    seed)`` and requires an explicit extent.
    """

    sres: float
    tres: float
    hs: float
    ht: float
    input: str | None = None
    synthetic: tuple | None = None
    origin: tuple | None = None
    extent: tuple | None = None
    on_out_of_domain: str = "fail"

    def __post_init__(self):
        if (self.input is None) == (self.synthetic is None):
            raise ValueError("exactly one of input and synthetic must be given")
        if self.on_out_of_domain not in ("fail", "skip"):
            raise ValueError("on_out_of_domain must be 'fail' or 'skip'")


def _is_number(text):
    try:
        float(text)
    except ValueError:
        return False
    return True


def _read_rows(path):
    rows = []
    with open(path, newline="") as fh:
        for lineno, fields in enumerate(csv.reader(fh), start=1):
            if not fields or all(not f.strip() for f in fields):
                continue
            if lineno == 1 and not _is_number(fields[0].strip()):
                continue
            if len(fields) != 3:
                raise PointParseError(f"line {lineno}: expected 3 fields, got {len(fields)}")
            try:
                vals = tuple(float(f) for f in fields)
            except ValueError:
                raise PointParseError(f"line {lineno}: malformed number in {fields!r}") from None
            if not all(math.isfinite(v) for v in vals):
                raise PointParseError(f"line {lineno}: non-finite coordinate")
            rows.append((lineno, vals))
    return rows


def load_points_csv(path, config=None, grid=None):
    """Read ``x,y,t`` lines, in file order.

    An optional header is recognised by a non-numeric first field on line 1.
    Points outside ``grid`` (if given) are rejected or skipped according to
    ``config.on_out_of_domain``.

    Returns
    -------
    points : ndarray of shape (n, 3)
    skipped : int
    """
    policy = config.on_out_of_domain if config is not None else "fail"
    rows = _read_rows(path)
    pts = np.array([v for _, v in rows], dtype=np.float64).reshape(-1, 3)
    if grid is None or not len(pts):
        return pts, 0
    lo = np.asarray(grid.origin)
    hi = lo + np.asarray(grid.extent)
    inside = np.all((pts >= lo) & (pts < hi), axis=1)
    if not inside.all() and policy == "fail":
        k = int(np.flatnonzero(~inside)[0])
        raise DomainError(f"line {rows[k][0]}: point {rows[k][1]} outside the domain")
    return pts[inside], int((~inside).sum())


def write_points_csv(points, path, header=True):
    with open(path, "w", newline="") as fh:
        if header:
            fh.write("x,y,t\n")
        for x, y, t in np.asarray(points, dtype=np.float64).reshape(-1, 3):
            fh.write(f"{float(x)!r},{float(y)!r},{float(t)!r}\n")


def auto_domain(points, origin=None):
    """Tight bounding box ``(origin, extent)`` with an ulp-padded upper edge."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if not len(pts):
        raise ValueError("cannot derive a domain from zero points")
    lo = pts.min(axis=0) if origin is None else np.asarray(origin, dtype=np.float64)
    top = pts.max(axis=0)
    extent = []
    for l, t in zip(lo, top):
        e = max(np.nextafter(t, np.inf) - l, np.nextafter(0.0, 1.0))
        while l + e <= t:
            e = np.nextafter(e, np.inf)
        extent.append(float(e))
    return tuple(float(v) for v in lo), tuple(extent)


def build_instance(config):
    """Points and grid described by an :class:`InstanceConfig`.

    Returns
    -------
    points : ndarray of shape (n, 3)
    grid : GridSpec
    skipped : int
    """
    c = config
    if c.synthetic is not None:
        if c.extent is None:
            raise ValueError("synthetic instances need an explicit extent")
        origin = c.origin if c.origin is not None else (0.0, 0.0, 0.0)
        grid = make_grid(origin, c.extent, c.sres, c.tres, c.hs, c.ht)
        n, clusters, sxy, st, seed = c.synthetic
        return generate_synthetic(int(n), int(clusters), sxy, st, grid, int(seed)), grid, 0
    if c.extent is not None and c.origin is not None:
        grid = make_grid(c.origin, c.extent, c.sres, c.tres, c.hs, c.ht)
        pts, skipped = load_points_csv(c.input, c, grid)
        return pts, grid, skipped
    pts, _ = load_points_csv(c.input, c)
    origin, extent = auto_domain(pts, c.origin)
    if c.extent is not None:
        extent = c.extent
    grid = make_grid(origin, extent, c.sres, c.tres, c.hs, c.ht)
    pts, skipped = load_points_csv(c.input, c, grid)
    return pts, grid, skipped


# ------------------------------------------------------------------- volume


def _header(grid):
    x0, y0, t0 = grid.origin
    lines = [
        "STKDE1",
        f"{grid.Gx} {grid.Gy} {grid.Gt}",
        f"{grid.sres!r} {grid.tres!r}",
        f"{x0!r} {y0!r} {t0!r}",
        f"{grid.hs!r} {grid.ht!r}",
    ]
    return ("\n".join(lines) + "\n").encode("ascii")


def write_volume(volume, path):
    values = np.asarray(volume.values, dtype=np.float64)
    if not np.isfinite(values).all():
        raise ValueError("internal error: refusing to write non-finite densities")
    with open(path, "wb") as fh:
        fh.write(_header(volume.grid))
        fh.write(values.astype("<f8", copy=False).tobytes(order="C"))


def _extent_for(count, res):
    e = count * res
    while math.ceil(e / res) > count:
        e = math.nextafter(e, 0.0)
    while math.ceil(e / res) < count:
        e = math.nextafter(e, math.inf)
    return e


def read_volume(path):
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(MAGIC + b"\n"):
        raise VolumeFormatError("bad magic")
    parts = data.split(b"\n", 5)
    if len(parts) < 6:
        raise VolumeFormatError("bad header: fewer than five lines")
    try:
        Gx, Gy, Gt = (int(v) for v in parts[1].split())
        sres, tres = (float(v) for v in parts[2].split())
        x0, y0, t0 = (float(v) for v in parts[3].split())
        hs, ht = (float(v) for v in parts[4].split())
    except ValueError as exc:
        raise VolumeFormatError(f"bad header: {exc}") from None
    if min(Gx, Gy, Gt) < 1:
        raise VolumeFormatError("bad header: non-positive grid size")
    payload = parts[5]
    expected = Gx * Gy * Gt * 8
    if len(payload) < expected:
        raise VolumeFormatError(
            f"truncated payload: {len(payload)} bytes, header requires {expected}"
        )
    if len(payload) > expected:
        raise VolumeFormatError(
            f"size mismatch: {len(payload)} payload bytes, header requires {expected}"
        )
    try:
        grid = make_grid(
            (x0, y0, t0),
            (_extent_for(Gx, sres), _extent_for(Gy, sres), _extent_for(Gt, tres)),
            sres, tres, hs, ht,
        )
    except ValueError as exc:
        raise VolumeFormatError(f"bad header: {exc}") from None
    values = np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(Gx, Gy, Gt)
    return DensityVolume(grid, values)


# -------------------------------------------------------------------- stats


def write_stats_json(stats, path):
    """Write a :class:`~stkde.stats.RunStats` as one flat JSON object."""
    with open(path, "w") as fh:
        json.dump(stats.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
