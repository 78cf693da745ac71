"""Estimator-style wrappers: configure with parameters, ``fit`` on a field, read trailing-underscore results."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .agmon import agmon_distance_field
from .grid import ScalarField
from .landscape import landscape_bounded
from .maximal import maximal_function


def _require_field(X, what):
    if not isinstance(X, ScalarField):
        raise TypeError(f"{what} expects a ScalarField, got {type(X).__name__}")
    return X


class LandscapeFunction(TransformerMixin, BaseEstimator):
    """Dirichlet landscape ``u`` of ``-div A grad + V`` on the potential's grid.

    ``fit(V)`` stores ``u_`` (a ScalarField) and ``operator_``;
    ``transform(V)`` returns the node values of ``u``.
    """

    def __init__(self, A=None, tol=1e-12):
        self.A = A
        self.tol = tol

    def fit(self, X, y=None):
        V = _require_field(X, "LandscapeFunction")
        res = landscape_bounded(V.grid, self.A, V, tol=self.tol)
        self.u_ = res.u
        self.operator_ = res.operator
        self.result_ = res
        return self

    def transform(self, X):
        if not hasattr(self, "u_"):
            raise NotFittedError("LandscapeFunction is not fitted yet")
        V = _require_field(X, "LandscapeFunction")
        if V.grid != self.u_.grid:
            return self.fit(V).u_.values
        return self.u_.values

    def effective_potential(self):
        """Node array of ``1/u``: finite inside, ``inf`` on the boundary."""
        if not hasattr(self, "u_"):
            raise NotFittedError("LandscapeFunction is not fitted yet")
        vals = np.full(self.u_.grid.shape, np.inf)
        inner = self.u_.grid.interior_mask
        vals[inner] = 1.0 / self.u_.values[inner]
        return vals


class MaximalFunction(TransformerMixin, BaseEstimator):
    def __init__(self, C1=1.0, r_max=None):
        self.C1 = C1
        self.r_max = r_max

    def fit(self, X, y=None, nodes=None):
        w = _require_field(X, "MaximalFunction")
        self.field_ = maximal_function(w, self.C1, nodes=nodes, r_max=self.r_max)
        self.m_ = self.field_.m
        self.clamped_ = self.field_.clamped
        return self

    def transform(self, X):
        if not hasattr(self, "m_"):
            raise NotFittedError("MaximalFunction is not fitted yet")
        return self.m_.values


class AgmonDistance(BaseEstimator):
    """Agmon distance to a source set; ``fit(w, sources)`` stores ``rho_``."""

    def __init__(self, A=None, stencil_radius=2):
        self.A = A
        self.stencil_radius = stencil_radius

    def fit(self, X, sources):
        w = _require_field(X, "AgmonDistance")
        self.geodesic_ = agmon_distance_field(w, sources, self.A, self.stencil_radius)
        self.rho_ = self.geodesic_.rho
        self.lipschitz_slack_ = self.geodesic_.lipschitz_slack
        return self

    def predict(self, idx):
        """Distances at the given ``(k, n)`` multi-indices."""
        if not hasattr(self, "rho_"):
            raise NotFittedError("AgmonDistance is not fitted yet")
        idx = np.atleast_2d(np.asarray(idx, dtype=int))
        return self.rho_.values[tuple(idx.T)]
