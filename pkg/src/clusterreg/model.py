"""Likelihood evaluation for the mixture-of-linear-regressions model.

The observation density is a G-component Gaussian mixture whose g-th
component is N(x'beta_g, sigma2_g) with mixing weight p_g. Everything is
evaluated in log space through log-sum-exp, so near-degenerate variances
produce large finite values rather than overflow.
"""

from __future__ import annotations

import math

import numpy as np

from .data import Dataset, MixtureParams, Posteriors

__all__ = [
    "component_log_density",
    "mixture_log_density",
    "log_likelihood",
    "individual_log_terms",
    "map_partition",
]

LOG_2PI = math.log(2.0 * math.pi)


def component_log_density(yi: float, xi, beta, var: float) -> float:
    """Gaussian log density of one observation under one component."""
    if not var > 0.0:
        raise ValueError(f"variance must be positive, got {var}")
    xi = np.asarray(xi, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if xi.shape != beta.shape:
        raise ValueError(f"xi has shape {xi.shape} but beta has shape {beta.shape}")
    r = float(yi) - float(xi @ beta)
    return -0.5 * (LOG_2PI + math.log(var)) - r * r / (2.0 * var)


def log_density_matrix(X: np.ndarray, y: np.ndarray, coefficients: np.ndarray, variances: np.ndarray) -> np.ndarray:
    """n x G matrix of per-component Gaussian log densities (no weights)."""
    resid = y[:, None] - X @ coefficients.T
    return -0.5 * (LOG_2PI + np.log(variances))[None, :] - resid**2 / (2.0 * variances)[None, :]


def _check_dims(data: Dataset, params: MixtureParams) -> None:
    if data.n_cols != params.n_cols:
        raise ValueError(f"dataset has {data.n_cols} design columns but params have {params.n_cols}")


def mixture_log_density(yi: float, xi, params: MixtureParams) -> float:
    """log sum_g p_g phi_g(yi | xi) via log-sum-exp."""
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (params.n_cols,):
        raise ValueError(f"xi has shape {xi.shape}, expected ({params.n_cols},)")
    lp = np.log(params.weights) + log_density_matrix(
        xi[None, :], np.array([float(yi)]), params.coefficients, params.variances
    )[0]
    m = lp.max()
    return float(m + np.log(np.exp(lp - m).sum()))


def individual_log_terms(data: Dataset, params: MixtureParams) -> np.ndarray:
    """Per-observation mixture log densities; element i is ln f(y_i | x_i)."""
    _check_dims(data, params)
    lp = np.log(params.weights)[None, :] + log_density_matrix(
        data.X, data.y, params.coefficients, params.variances
    )
    m = lp.max(axis=1)
    return m + np.log(np.exp(lp - m[:, None]).sum(axis=1))


def log_likelihood(data: Dataset, params: MixtureParams) -> float:
    """Sample log likelihood: the sum of the individual log terms."""
    return float(individual_log_terms(data, params).sum())


def map_partition(post: Posteriors) -> np.ndarray:
    """Crisp labels: argmax responsibility per row, ties to the smallest index."""
    return np.argmax(post.z, axis=1)
