"""Pure-NumPy EM backend.

`em_run` executes one full EM trajectory from an initial posterior matrix.
The compiled backend in `_em_kernel.pyx` implements the same contract; this
module is the fallback used when the extension is unavailable, and the
reference the kernel is tested against.

Contract shared by both backends
--------------------------------
``em_run(X, y, z0, mode_code, c, target, max_iter, rel_tol, min_weight,
floor)`` returns ``(weights, betas, variances, z, trace, converged,
degenerate, status)`` where

* the initial M-step is taken from ``z0``, then E/M alternate until the
  per-observation log-likelihood change ``|dll| <= rel_tol * n`` or
  ``max_iter`` M-steps (the change is invariant under response rescaling,
  which keeps the constrained fit exactly equivariant);
* ``trace`` holds the log likelihood at every E-step, ``z`` matches the
  returned parameters (computed by the final E-step at those parameters);
* heteroscedastic runs stop when any raw variance drops below ``floor``;
  the pre-collapse iterate is returned with ``degenerate`` set;
* homoscedastic pooled variances are clamped at ``floor`` and flagged;
* constrained variances are clamped into
  ``[target * sqrt(c), target / sqrt(c)]``;
* ``status`` is 0 on a normal exit, 1 when a component mass fell below
  ``min_weight * n`` mid-run (the last consistent iterate is returned so
  the driver can restart), 2 when that happened on the very first M-step
  and no iterate exists.

``mode_code``: 0 homoscedastic, 1 heteroscedastic, 2 constrained.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.linalg

from .model import LOG_2PI

MODE_HOM = 0
MODE_HET = 1
MODE_CON = 2

name = "python"


def estep_arrays(X, y, weights, betas, variances):
    """Responsibilities and log likelihood at the given parameters."""
    resid = y[:, None] - X @ betas.T
    lp = (np.log(weights) - 0.5 * (LOG_2PI + np.log(variances)))[None, :] - resid**2 / (
        2.0 * variances
    )[None, :]
    m = lp.max(axis=1)
    expd = np.exp(lp - m[:, None])
    rowsum = expd.sum(axis=1)
    ll = float((m + np.log(rowsum)).sum())
    return expd / rowsum[:, None], ll


def mstep_arrays(X, y, z, min_weight):
    """Weights, WLS coefficients and raw per-component variances.

    Returns None when any component mass is below ``min_weight * n``.
    """
    n = X.shape[0]
    mass = z.sum(axis=0)
    if np.any(mass < min_weight * n):
        return None
    weights = mass / n
    g_count = z.shape[1]
    betas = np.empty((g_count, X.shape[1]))
    for g in range(g_count):
        sw = np.sqrt(z[:, g])
        sol, _, _, _ = scipy.linalg.lstsq(
            X * sw[:, None], y * sw, lapack_driver="gelsy", check_finite=False
        )
        betas[g] = sol
    resid = y[:, None] - X @ betas.T
    rss = (z * resid**2).sum(axis=0)
    return weights, betas, rss / mass, float(rss.sum())


def _mode_variances(v_raw, rss_total, n, mode_code, c, target, floor):
    """Apply the variance regime; returns (variances, floored_flag)."""
    if mode_code == MODE_HET:
        return v_raw, False
    if mode_code == MODE_HOM:
        pooled = rss_total / n
        if pooled < floor:
            return np.full_like(v_raw, floor), True
        return np.full_like(v_raw, pooled), False
    lo = target * math.sqrt(c)
    hi = target / math.sqrt(c)
    return np.clip(v_raw, lo, hi), False


def em_run(X, y, z0, mode_code, c, target, max_iter, rel_tol, min_weight, floor):
    n = X.shape[0]

    first = mstep_arrays(X, y, z0, min_weight)
    if first is None:
        return None, None, None, None, None, False, False, 2
    weights, betas, v_raw, rss_total = first
    degenerate = False
    if mode_code == MODE_HET and np.any(v_raw < floor):
        # Collapse straight out of the initial posteriors: no earlier iterate
        # exists, so return the floored parameters themselves.
        variances = np.maximum(v_raw, floor)
        z, ll = estep_arrays(X, y, weights, betas, variances)
        return weights, betas, variances, z, np.array([ll]), False, True, 0
    variances, floored = _mode_variances(v_raw, rss_total, n, mode_code, c, target, floor)
    degenerate |= floored

    trace = []
    prev_ll = None
    converged = False
    it = 0
    while True:
        z, ll = estep_arrays(X, y, weights, betas, variances)
        trace.append(ll)
        if prev_ll is not None and abs(ll - prev_ll) <= rel_tol * n:
            converged = True
            break
        prev_ll = ll
        if it >= max_iter:
            break
        step = mstep_arrays(X, y, z, min_weight)
        if step is None:
            return weights, betas, variances, z, np.asarray(trace), False, degenerate, 1
        new_weights, new_betas, v_raw, rss_total = step
        if mode_code == MODE_HET and np.any(v_raw < floor):
            degenerate = True
            break
        weights, betas = new_weights, new_betas
        variances, floored = _mode_variances(v_raw, rss_total, n, mode_code, c, target, floor)
        degenerate |= floored
        it += 1

    return weights, betas, variances, z, np.asarray(trace), converged, degenerate, 0
