"""Evaluation metrics: adjusted Rand index and label-aligned parameter MSE."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb

import numpy as np

from .data import MixtureParams

__all__ = ["adjusted_rand", "LabelAlignment", "align_labels", "param_mse"]

MAX_ALIGN_COMPONENTS = 8


def adjusted_rand(a, b) -> float:
    """Hubert-Arabie adjusted Rand index between two partitions.

    Computed from the contingency table with exact integer pair counts;
    1.0 for identical partitions, 0 expected under independence.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("label vectors must be 1-d and of equal length")
    n = a.shape[0]
    if n < 2:
        raise ValueError("adjusted Rand needs at least two observations")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)

    together_both = sum(comb(int(x), 2) for x in table.ravel())
    together_a = sum(comb(int(x), 2) for x in table.sum(axis=1))
    together_b = sum(comb(int(x), 2) for x in table.sum(axis=0))
    fn = together_a - together_both
    fp = together_b - together_both
    tn = comb(n, 2) - together_a - together_b + together_both
    if fn == 0 and fp == 0:
        return 1.0
    return 2 * (together_both * tn - fn * fp) / (
        (together_both + fn) * (fn + tn) + (together_both + fp) * (fp + tn)
    )


@dataclass(frozen=True)
class LabelAlignment:
    """``permutation[j]`` is the true component matched to estimated component j."""

    permutation: np.ndarray
    cost: float


def align_labels(true_params: MixtureParams, est_params: MixtureParams) -> LabelAlignment:
    """Match estimated to true components by total squared coefficient error.

    Exhaustive search over all G! assignments (G <= 8), deterministic: the
    lexicographically first optimal permutation wins.
    """
    g = true_params.n_components
    if est_params.n_components != g:
        raise ValueError(f"component counts differ: {g} vs {est_params.n_components}")
    if est_params.n_cols != true_params.n_cols:
        raise ValueError("coefficient dimensions differ")
    if g > MAX_ALIGN_COMPONENTS:
        raise ValueError(f"alignment supports at most {MAX_ALIGN_COMPONENTS} components, got {g}")
    diff = est_params.coefficients[:, None, :] - true_params.coefficients[None, :, :]
    cost_matrix = (diff**2).sum(axis=2)  # [est j, true t]
    best_perm = None
    best_cost = np.inf
    for perm in itertools.permutations(range(g)):
        cost = sum(cost_matrix[j, perm[j]] for j in range(g))
        if cost < best_cost:
            best_cost = cost
            best_perm = perm
    return LabelAlignment(np.array(best_perm, dtype=int), float(best_cost))


def param_mse(true_params: MixtureParams, est_params: MixtureParams) -> tuple[float, float]:
    """Label-aligned mean squared errors of coefficients and variances.

    Alignment is by coefficients; the first value averages over all G x P
    coefficient entries, the second over the G component variances.
    """
    alignment = align_labels(true_params, est_params)
    g, p = true_params.coefficients.shape
    aligned_coef = np.empty_like(true_params.coefficients)
    aligned_var = np.empty_like(true_params.variances)
    for j, t in enumerate(alignment.permutation):
        aligned_coef[t] = est_params.coefficients[j]
        aligned_var[t] = est_params.variances[j]
    mse_beta = float(((aligned_coef - true_params.coefficients) ** 2).mean())
    mse_sigma2 = float(((aligned_var - true_params.variances) ** 2).mean())
    return mse_beta, mse_sigma2
