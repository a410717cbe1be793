"""Uniform A x B x C decomposition of the voxel grid."""

from dataclasses import dataclass

import numpy as np

__all__ = ["Decomposition", "parse_decomposition", "adjust_decomposition", "bucket_indices"]


def _lo(a, G, A):
    return -(-a * G // A)


@dataclass(frozen=True)
class Decomposition:
    """``A x B x C`` subdomains of a grid of shape ``(Gx, Gy, Gt)``.

    Subdomain ``a`` along x owns the half-open voxel range
    ``[ceil(a Gx / A), ceil((a+1) Gx / A))``, which is exactly the set of
    voxels ``X`` with ``floor(A X / Gx) == a``. Ranges along an axis are
    therefore disjoint and cover the axis.
    """

    A: int
    B: int
    C: int
    shape: tuple

    def __post_init__(self):
        for name, k, G in zip("ABC", self.counts, self.shape):
            if not (1 <= k <= G):
                raise ValueError(f"{name}={k} must lie in [1, {G}]")

    @property
    def counts(self):
        return (self.A, self.B, self.C)

    @property
    def n_subdomains(self):
        return self.A * self.B * self.C

    def axis_bounds(self, axis):
        k, G = self.counts[axis], self.shape[axis]
        return np.array([_lo(a, G, k) for a in range(k + 1)], dtype=np.int64)

    def flat(self, a, b, c):
        return (a * self.B + b) * self.C + c

    def unflat(self, s):
        c = s % self.C
        b = (s // self.C) % self.B
        return s // (self.B * self.C), b, c

    def region(self, s):
        """Half-open voxel range ``(lo, hi)`` of flat subdomain ``s``."""
        idx = self.unflat(s)
        lo = tuple(_lo(i, G, k) for i, G, k in zip(idx, self.shape, self.counts))
        hi = tuple(_lo(i + 1, G, k) for i, G, k in zip(idx, self.shape, self.counts))
        return lo, hi

    def __str__(self):
        return f"{self.A}x{self.B}x{self.C}"


def parse_decomposition(text, shape):
    """Parse ``"AxBxC"``."""
    try:
        A, B, C = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise ValueError(f"decomposition must look like AxBxC, got {text!r}") from None
    return Decomposition(A, B, C, tuple(shape))


def adjust_decomposition(dec, grid):
    """Coarsen ``dec`` so every subdomain spans at least ``2H+1`` voxels.

    With that width, points bucketed in subdomains two apart along any axis
    cannot write to a common voxel.
    """
    widths = (2 * grid.Hs + 1, 2 * grid.Hs + 1, 2 * grid.Ht + 1)
    counts = [
        min(k, max(1, G // w)) for k, G, w in zip(dec.counts, grid.shape, widths)
    ]
    return Decomposition(*counts, tuple(grid.shape))


def bucket_indices(vox, dec):
    """Per-axis subdomain index ``floor(A X / Gx)`` of each voxel row."""
    counts = np.asarray(dec.counts, dtype=np.int64)
    shape = np.asarray(dec.shape, dtype=np.int64)
    return (counts * vox) // shape
