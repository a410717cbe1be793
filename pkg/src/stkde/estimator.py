"""Estimator-style wrapper so the density engine composes with scikit-learn."""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .algorithms import ALGORITHMS, run_algorithm
from .core import in_domain_mask, make_grid, points_to_voxels
from .domain import default_threads
from .io import auto_domain

__all__ = ["SpaceTimeKDE"]


class SpaceTimeKDE(BaseEstimator):
    """Space-time kernel density estimate on a voxel grid.

    Parameters
    ----------
    sres, tres : float
        Spatial and temporal voxel sizes.
    hs, ht : float
        Spatial and temporal bandwidths, in world units.
    algorithm : str, default="pb-sym"
        One of :data:`stkde.algorithms.ALGORITHMS`.
    decomposition : tuple of int, default=(1, 1, 1)
        ``(A, B, C)`` subdomains for the decomposed algorithms.
    n_jobs : int, optional
        Worker threads. None means 1 and -1 means every available core.
    origin, extent : tuple of float, optional
        Domain box. None derives it from the training points.
    mem_budget : int, optional
        Byte budget checked by the replicating algorithms.

    Attributes
    ----------
    grid_ : GridSpec
    density_ : DensityVolume
    stats_ : RunStats
    n_points_ : int

    Examples
    --------
    >>> import numpy as np
    >>> kde = SpaceTimeKDE(sres=0.1, tres=0.1, hs=0.2, ht=0.2,
    ...                    origin=(0, 0, 0), extent=(1, 1, 1))
    >>> kde.fit(np.full((1, 3), 0.55)).density_.values.shape
    (10, 10, 10)
    """

    def __init__(
        self,
        sres=1.0,
        tres=1.0,
        hs=1.0,
        ht=1.0,
        *,
        algorithm="pb-sym",
        decomposition=(1, 1, 1),
        n_jobs=None,
        origin=None,
        extent=None,
        mem_budget=None,
    ):
        self.sres = sres
        self.tres = tres
        self.hs = hs
        self.ht = ht
        self.algorithm = algorithm
        self.decomposition = decomposition
        self.n_jobs = n_jobs
        self.origin = origin
        self.extent = extent
        self.mem_budget = mem_budget

    def _threads(self):
        if self.n_jobs is None:
            return 1
        if self.n_jobs == -1:
            return default_threads()
        if self.n_jobs < 1:
            raise ValueError(f"n_jobs must be None, -1 or >= 1, got {self.n_jobs}")
        return int(self.n_jobs)

    def fit(self, X, y=None):
        """Compute the density volume of the points ``X``.

        Parameters
        ----------
        X : array-like of shape (n_samples, 3)
            Columns are x, y, t.
        y : None
            Ignored.

        Returns
        -------
        self
        """
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        X = check_array(X, dtype=np.float64, ensure_min_samples=0)
        if X.shape[1] != 3:
            raise ValueError(f"X must have 3 columns (x, y, t), got {X.shape[1]}")
        origin, extent = self.origin, self.extent
        if origin is None or extent is None:
            auto_origin, auto_extent = auto_domain(X, origin)
            origin = auto_origin if origin is None else origin
            extent = auto_extent if extent is None else extent
        self.grid_ = make_grid(origin, extent, self.sres, self.tres, self.hs, self.ht)
        self.density_, self.stats_ = run_algorithm(
            self.algorithm, X, self.grid_, tuple(self.decomposition),
            self._threads(), self.mem_budget,
        )
        self.n_points_ = X.shape[0]
        return self

    def score_samples(self, X):
        """Density of the voxel containing each row of ``X`` (0 outside the grid)."""
        check_is_fitted(self, "density_")
        X = check_array(X, dtype=np.float64)
        g = self.grid_
        inside = in_domain_mask(X, g)
        out = np.zeros(X.shape[0])
        if inside.any():
            idx = points_to_voxels(X[inside], g)
            out[inside] = self.density_.values[idx[:, 0], idx[:, 1], idx[:, 2]]
        return out

    def fit_transform(self, X, y=None):
        """Fit and return the dense ``(Gx, Gy, Gt)`` density array."""
        return self.fit(X).density_.values
