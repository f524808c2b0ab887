"""Estimator-style front end for geodesic solves.

>>> from almostlocal import ShapeGeodesic, make_icosphere
>>> start, end = make_icosphere(1, 0.4), make_icosphere(1, 0.8)
>>> est = ShapeGeodesic(metric={"type": "ConformalPower", "k": 1}, n_timesteps=6).fit(start, end)
>>> est.transform([0.0, 0.5, 1.0]).shape
(3, 42, 3)
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from ._validation import check_positions, check_timesteps, check_unit_times
from .mesh import TriMesh, build_combinatorics
from .metric import from_dict
from .optimizer import SolverConfig, solve_geodesic


class ShapeGeodesic(BaseEstimator):
    """Geodesic between two shapes with the same combinatorics.

    Parameters
    ----------
    metric : str, dict or MetricWeight
        Weight ``Phi``, e.g. ``{"type": "GAPower", "A": 0.0625, "k": 2}``.
    n_timesteps : int
        Number of time steps ``N`` of the discrete path.
    penalty_factor, penalty_exponent : float
        Weight and exponent of the angle-regularity penalty.
    faces : array_like of shape (F, 3), optional
        Needed only when ``fit`` receives bare position arrays.
    max_iterations, grad_tolerance, rel_energy_tolerance, memory :
        Passed to :class:`SolverConfig`.

    Attributes
    ----------
    path_ : ShapePath
    report_ : SolveReport
    energy_ : float
        Path energy of the solution (penalty excluded).
    """

    def __init__(
        self,
        metric="G0",
        n_timesteps=20,
        penalty_factor=1.0,
        penalty_exponent=2,
        faces=None,
        max_iterations=2000,
        grad_tolerance=None,
        rel_energy_tolerance=1e-10,
        memory=10,
    ):
        self.metric = metric
        self.n_timesteps = n_timesteps
        self.penalty_factor = penalty_factor
        self.penalty_exponent = penalty_exponent
        self.faces = faces
        self.max_iterations = max_iterations
        self.grad_tolerance = grad_tolerance
        self.rel_energy_tolerance = rel_energy_tolerance
        self.memory = memory

    def _as_mesh(self, shape, reference: TriMesh | None = None) -> TriMesh:
        if isinstance(shape, TriMesh):
            return shape
        if reference is not None:
            return reference.with_positions(check_positions(shape, reference.n_vertices))
        if self.faces is None:
            raise ValueError("faces must be given when fitting on position arrays")
        return build_combinatorics(check_positions(shape), self.faces)

    def fit(self, X, y):
        """Solve for the geodesic from shape ``X`` to shape ``y``."""
        start = self._as_mesh(X)
        end = self._as_mesh(y, reference=start)
        config = SolverConfig(
            max_iterations=self.max_iterations,
            grad_tolerance=self.grad_tolerance,
            rel_energy_tolerance=self.rel_energy_tolerance,
            memory=self.memory,
        )
        self.metric_ = from_dict(self.metric)
        self.path_, self.report_ = solve_geodesic(
            start,
            end,
            check_timesteps(self.n_timesteps),
            self.metric_,
            penalty_factor=self.penalty_factor,
            penalty_exponent=self.penalty_exponent,
            config=config,
        )
        self.energy_ = self.report_.breakdown.energy
        return self

    def transform(self, X):
        """Shapes at normalized times ``X`` in ``[0, 1]``, piecewise linear between frames.

        Returns an array of shape ``(len(X), V, 3)``.
        """
        if not hasattr(self, "path_"):
            raise NotFittedError("call fit before transform")
        t = check_unit_times(X) * self.path_.n_timesteps
        lo = np.minimum(np.floor(t).astype(int), self.path_.n_timesteps - 1)
        s = (t - lo)[:, None, None]
        frames = self.path_.frames
        return (1.0 - s) * frames[lo] + s * frames[lo + 1]

    def score(self, X=None, y=None):
        """Negative path energy, so that larger is better."""
        if not hasattr(self, "path_"):
            raise NotFittedError("call fit before score")
        return -self.energy_
