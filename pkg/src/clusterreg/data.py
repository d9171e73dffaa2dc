"""Data containers shared by all estimation code.

A `Dataset` carries the response and the design matrix (intercept column
included), `MixtureParams` is the full parameter set of a G-component
mixture of linear regressions, and `Posteriors` holds the n x G matrix of
component responsibilities.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["Dataset", "MixtureParams", "Posteriors"]

WEIGHT_SUM_TOL = 1e-12
ROW_SUM_TOL = 1e-12


def _float_array(x, name: str, ndim: int) -> np.ndarray:
    arr = np.ascontiguousarray(x, dtype=float)
    if arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class Dataset:
    """Response vector y (length n) plus design matrix X (n x P).

    Column 0 of ``X`` is the constant intercept column whenever
    ``has_intercept`` is set (the default); the remaining P - 1 columns are
    regressors. ``n_regressors`` reports the regressor count excluding the
    intercept.
    """

    y: np.ndarray
    X: np.ndarray
    has_intercept: bool = True

    def __post_init__(self):
        y = _float_array(self.y, "y", 1)
        X = _float_array(self.X, "X", 2)
        if y.shape[0] < 1:
            raise ValueError("dataset must contain at least one observation")
        if X.shape[0] != y.shape[0]:
            raise ValueError(f"X has {X.shape[0]} rows but y has {y.shape[0]}")
        if X.shape[1] < 1:
            raise ValueError("X must have at least one column")
        if self.has_intercept and not np.all(X[:, 0] == 1.0):
            raise ValueError("column 0 of X must be identically 1 when has_intercept is set")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def n_cols(self) -> int:
        """Total design columns P, intercept included."""
        return self.X.shape[1]

    @property
    def n_regressors(self) -> int:
        return self.n_cols - 1 if self.has_intercept else self.n_cols

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(self.y[idx], self.X[idx], has_intercept=self.has_intercept)


@dataclass(frozen=True)
class MixtureParams:
    """Mixing weights, per-component coefficient rows and variances.

    ``weights`` lives on the open simplex (every entry positive, summing to
    one within 1e-12); ``coefficients`` is G x P with one row per component;
    ``variances`` is strictly positive.
    """

    weights: np.ndarray
    coefficients: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        w = _float_array(self.weights, "weights", 1)
        b = _float_array(self.coefficients, "coefficients", 2)
        v = _float_array(self.variances, "variances", 1)
        g = w.shape[0]
        if g < 1:
            raise ValueError("at least one component required")
        if b.shape[0] != g or v.shape[0] != g:
            raise ValueError(
                f"component counts disagree: weights {g}, coefficients {b.shape[0]}, variances {v.shape[0]}"
            )
        if np.any(w <= 0.0):
            raise ValueError("every mixing weight must be positive")
        if abs(w.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(f"weights sum to {w.sum()!r}, not 1")
        if np.any(v <= 0.0):
            raise ValueError("every variance must be strictly positive")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "coefficients", b)
        object.__setattr__(self, "variances", v)

    @classmethod
    def _unchecked(cls, weights, coefficients, variances) -> "MixtureParams":
        """Skip validation for arrays coming out of the EM backends, which
        guarantee the invariants by construction (hot path)."""
        self = object.__new__(cls)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "coefficients", coefficients)
        object.__setattr__(self, "variances", variances)
        return self

    @property
    def n_components(self) -> int:
        return self.weights.shape[0]

    @property
    def n_cols(self) -> int:
        return self.coefficients.shape[1]

    def permuted(self, order) -> "MixtureParams":
        """Same mixture with components reordered by ``order``."""
        order = np.asarray(order, dtype=int)
        if sorted(order.tolist()) != list(range(self.n_components)):
            raise ValueError(f"{order} is not a permutation of 0..{self.n_components - 1}")
        return MixtureParams(self.weights[order], self.coefficients[order], self.variances[order])


@dataclass(frozen=True)
class Posteriors:
    """n x G responsibilities; each row sums to one within 1e-12."""

    z: np.ndarray

    def __post_init__(self):
        z = _float_array(self.z, "z", 2)
        if np.any(z < 0.0) or np.any(z > 1.0):
            raise ValueError("responsibilities must lie in [0, 1]")
        rows = z.sum(axis=1)
        bad = np.abs(rows - 1.0) > ROW_SUM_TOL
        if np.any(bad):
            i = int(np.argmax(bad))
            raise ValueError(f"row {i} of z sums to {rows[i]!r}, not 1")
        object.__setattr__(self, "z", z)

    @classmethod
    def _unchecked(cls, z) -> "Posteriors":
        """Skip validation for backend-produced responsibilities (hot path)."""
        self = object.__new__(cls)
        object.__setattr__(self, "z", z)
        return self

    @property
    def n(self) -> int:
        return self.z.shape[0]

    @property
    def n_components(self) -> int:
        return self.z.shape[1]
