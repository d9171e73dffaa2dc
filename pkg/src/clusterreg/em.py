"""EM estimation of the mixture under three variance regimes.

The regimes: unconstrained per-component variances (heteroscedastic), a
single pooled variance (homoscedastic), and variances clamped into the
interval ``[target * sqrt(c), target / sqrt(c)]`` around a target variance
(constrained). Clamping is a projection onto that interval, so every
iteration keeps the ascent property of EM and the fitted variances satisfy
the bounds exactly.

`fit_em` runs a single trajectory from given initial posteriors and
restarts (reseeded, at most three times) when a component empties out;
`multi_start_fit` runs several independent random starts and keeps the best
non-degenerate solution, returning all local maximizers for root-selection
consumers.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg

from . import _em_py, backends
from ._parallel import parallel_map
from .data import Dataset, MixtureParams, Posteriors
from .seeds import NS_RESTART, NS_START, child_seed, rng_from

__all__ = [
    "VarianceMode",
    "EmConfig",
    "FitResult",
    "MultiStartResult",
    "EmptyComponentError",
    "RankDeficientWarning",
    "wls_solve",
    "e_step",
    "m_step",
    "init_random",
    "fit_em",
    "multi_start_fit",
]

HOMOSCEDASTIC = "homoscedastic"
HETEROSCEDASTIC = "heteroscedastic"
CONSTRAINED = "constrained"

_MODE_CODES = {HOMOSCEDASTIC: _em_py.MODE_HOM, HETEROSCEDASTIC: _em_py.MODE_HET, CONSTRAINED: _em_py.MODE_CON}

MAX_EMPTY_RESTARTS = 3


class EmptyComponentError(RuntimeError):
    """Raised when a component's responsibility mass falls below the floor."""


class RankDeficientWarning(UserWarning):
    """Weighted design was rank deficient; the minimum-norm solution is used."""


@dataclass(frozen=True)
class VarianceMode:
    """Variance regime selector.

    Use the constructors: ``VarianceMode.homoscedastic()``,
    ``VarianceMode.heteroscedastic()`` or ``VarianceMode.constrained(c,
    target)`` with scale balance ``0 < c <= 1`` and ``target > 0``.
    """

    kind: str
    c: float | None = None
    target: float | None = None

    def __post_init__(self):
        if self.kind not in _MODE_CODES:
            raise ValueError(f"unknown variance mode {self.kind!r}")
        if self.kind == CONSTRAINED:
            if self.c is None or not 0.0 < self.c <= 1.0:
                raise ValueError(f"scale balance c must lie in (0, 1], got {self.c}")
            if self.target is None or not self.target > 0.0:
                raise ValueError(f"target variance must be positive, got {self.target}")
        elif self.c is not None or self.target is not None:
            raise ValueError(f"c/target only apply to the constrained mode, not {self.kind!r}")

    @classmethod
    def homoscedastic(cls) -> "VarianceMode":
        return cls(HOMOSCEDASTIC)

    @classmethod
    def heteroscedastic(cls) -> "VarianceMode":
        return cls(HETEROSCEDASTIC)

    @classmethod
    def constrained(cls, c: float, target: float) -> "VarianceMode":
        return cls(CONSTRAINED, c=float(c), target=float(target))

    @property
    def bounds(self) -> tuple[float, float]:
        """Variance interval implied by the mode (constrained only)."""
        if self.kind != CONSTRAINED:
            raise ValueError(f"{self.kind} mode has no variance bounds")
        return self.target * np.sqrt(self.c), self.target / np.sqrt(self.c)


@dataclass(frozen=True)
class EmConfig:
    """Knobs of the EM drivers.

    ``degeneracy_floor=None`` resolves to 1e-12 times the sample variance of
    the response at fit time. Convergence stops when the log-likelihood
    change per observation drops below ``rel_tol``; the change is invariant
    under response rescaling, so stopping is scale-equivariant.
    """

    max_iter: int = 500
    rel_tol: float = 1e-8
    n_starts: int = 10
    seed: int = 0
    min_weight: float = 1e-6
    degeneracy_floor: float | None = None

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")
        if not 0.0 < self.rel_tol < 1.0:
            raise ValueError("rel_tol must lie in (0, 1)")
        if self.n_starts < 1:
            raise ValueError("n_starts must be positive")
        if self.seed < 0:
            raise ValueError("seed must be a non-negative integer")
        if not self.min_weight > 0.0:
            raise ValueError("min_weight must be positive")
        if self.degeneracy_floor is not None and not self.degeneracy_floor > 0.0:
            raise ValueError("degeneracy_floor must be positive")

    def resolve_floor(self, y: np.ndarray) -> float:
        if self.degeneracy_floor is not None:
            return self.degeneracy_floor
        var = float(np.var(y))
        return 1e-12 * var if var > 0.0 else 1e-12


@dataclass(frozen=True)
class FitResult:
    """One converged (or stopped) EM trajectory.

    ``loglik`` equals the last entry of ``loglik_trace``; ``n_iter`` counts
    E-steps. ``degenerate`` marks a heteroscedastic variance collapse (the
    pre-collapse iterate is what is stored) or a homoscedastic fit clamped
    at the degeneracy floor.
    """

    params: MixtureParams
    posteriors: Posteriors
    loglik: float
    loglik_trace: np.ndarray
    converged: bool
    n_iter: int
    degenerate: bool
    mode: VarianceMode
    diagnostics: dict = field(default_factory=dict)

    @property
    def failed(self) -> bool:
        return bool(self.diagnostics.get("empty_failure", False))


@dataclass(frozen=True)
class MultiStartResult:
    best: FitResult
    starts: list[FitResult]
    n_degenerate: int
    n_failed: int


def wls_solve(X, y, w) -> np.ndarray:
    """Weighted least squares by QR on the sqrt(w)-scaled system.

    Returns the minimizer of sum_i w_i (y_i - x_i'b)^2; on a rank-deficient
    weighted design the minimum-norm solution is returned and a
    `RankDeficientWarning` is emitted.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    if X.ndim != 2 or y.ndim != 1 or w.ndim != 1:
        raise ValueError("X must be a matrix, y and w vectors")
    if X.shape[0] != y.shape[0] or w.shape[0] != y.shape[0]:
        raise ValueError("X, y and w must agree on the number of rows")
    if np.any(w < 0.0):
        raise ValueError("weights must be non-negative")
    if not np.any(w > 0.0):
        raise ValueError("at least one weight must be positive")
    sw = np.sqrt(w)
    beta, _, rank, _ = scipy.linalg.lstsq(X * sw[:, None], y * sw, lapack_driver="gelsy")
    if rank < X.shape[1]:
        warnings.warn(
            f"weighted design has rank {rank} < {X.shape[1]}; returning the minimum-norm solution",
            RankDeficientWarning,
            stacklevel=2,
        )
    return beta


def e_step(data: Dataset, params: MixtureParams) -> Posteriors:
    """Responsibilities z[i, g] proportional to p_g phi_g(y_i | x_i)."""
    if data.n_cols != params.n_cols:
        raise ValueError(f"dataset has {data.n_cols} design columns but params have {params.n_cols}")
    z, _ = _em_py.estep_arrays(data.X, data.y, params.weights, params.coefficients, params.variances)
    return Posteriors(z)


def m_step(data: Dataset, post: Posteriors, mode: VarianceMode, min_weight: float = 1e-6) -> MixtureParams:
    """Maximize the expected complete log likelihood under the given regime.

    Raises `EmptyComponentError` when a component's mass is below
    ``min_weight * n`` (callers should restart from a fresh init), and a
    ValueError if a variance comes out exactly zero (exact interpolation);
    the fit drivers guard the latter with the degeneracy floor.
    """
    if post.n != data.n:
        raise ValueError(f"posteriors cover {post.n} rows but dataset has {data.n}")
    out = _em_py.mstep_arrays(data.X, data.y, post.z, min_weight)
    if out is None:
        mass = post.z.sum(axis=0)
        g = int(np.argmin(mass))
        raise EmptyComponentError(f"component {g} has responsibility mass {mass[g]:.3g} < {min_weight * data.n:.3g}")
    weights, betas, v_raw, rss_total = out
    variances, _ = _em_py._mode_variances(
        v_raw, rss_total, data.n, _MODE_CODES[mode.kind], mode.c or 0.0, mode.target or 0.0, 0.0
    )
    return MixtureParams(weights / weights.sum(), betas, variances)


def _random_posterior_rows(n: int, g: int, rng: np.random.Generator, min_weight: float) -> np.ndarray:
    z = None
    for _ in range(100):
        z = rng.dirichlet(np.ones(g), size=n)
        if np.all(z.sum(axis=0) >= min_weight * n):
            return z
    for comp in range(g):
        z[comp] = 0.0
        z[comp, comp] = 1.0
    return z


def init_random(n: int, g: int, seed: int, min_weight: float = 1e-6) -> Posteriors:
    """Random initial posteriors: rows drawn from a flat Dirichlet.

    Redraws (up to 100 times) until every column mass is at least
    ``min_weight * n``, then falls back to dedicating one observation per
    component. Deterministic in ``seed``.
    """
    if g < 1:
        raise ValueError("need at least one component")
    if n < g:
        raise ValueError(f"cannot initialize {g} components with only {n} observations")
    return Posteriors(_random_posterior_rows(n, g, rng_from(seed), min_weight))


def _build_result(data, mode, run, diagnostics) -> FitResult:
    weights, betas, variances, z, trace, converged, degenerate, _ = run
    params = MixtureParams(weights / weights.sum(), betas, variances)
    return FitResult(
        params=params,
        posteriors=Posteriors(z),
        loglik=float(trace[-1]),
        loglik_trace=np.asarray(trace),
        converged=bool(converged),
        n_iter=len(trace),
        degenerate=bool(degenerate),
        mode=mode,
        diagnostics=diagnostics,
    )


def fit_em(
    data: Dataset,
    init: Posteriors,
    g: int,
    mode: VarianceMode,
    cfg: EmConfig = EmConfig(),
    seed_path: tuple[int, ...] = (),
) -> FitResult:
    """Alternate E and M steps from ``init`` until convergence.

    An `EmptyComponentError` inside the loop triggers an automatic reseeded
    restart (at most three); if all restarts fail the last consistent
    iterate is returned with ``converged=False`` and
    ``diagnostics["empty_failure"]`` set.
    """
    if init.n != data.n:
        raise ValueError(f"init covers {init.n} rows but dataset has {data.n}")
    if init.n_components != g:
        raise ValueError(f"init has {init.n_components} components, expected {g}")
    floor = cfg.resolve_floor(data.y)
    mode_code = _MODE_CODES[mode.kind]
    c = mode.c if mode.c is not None else 0.0
    target = mode.target if mode.target is not None else 0.0

    z0 = init.z
    last_valid = None
    restarts = 0
    for attempt in range(1 + MAX_EMPTY_RESTARTS):
        run = backends.em_run(
            data.X, data.y, z0, mode_code, c, target,
            cfg.max_iter, cfg.rel_tol, cfg.min_weight, floor,
        )
        status = run[7]
        if status == 0:
            return _build_result(data, mode, run, {"restarts": restarts})
        if status == 1:
            last_valid = run
        if attempt < MAX_EMPTY_RESTARTS:
            restarts += 1
            z0 = init_random(
                data.n, g, child_seed(cfg.seed, NS_RESTART, *seed_path, attempt), cfg.min_weight
            ).z
    if last_valid is None:
        raise EmptyComponentError(
            "a component emptied on the first M-step of every restart; "
            "check the initial posteriors and min_weight"
        )
    result = _build_result(
        data, mode, last_valid, {"restarts": restarts, "empty_failure": True}
    )
    return replace(result, converged=False)


def multi_start_fit(
    data: Dataset,
    g: int,
    mode: VarianceMode,
    cfg: EmConfig = EmConfig(),
    seed_path: tuple[int, ...] = (),
    threads: int = 1,
) -> MultiStartResult:
    """Best of ``cfg.n_starts`` independent random starts.

    The winner is the non-degenerate, non-failed fit with the highest log
    likelihood (ties to the lowest start index); if every start degenerated
    or failed, the highest-likelihood one is returned as-is. The reduction
    is by start index, so results do not depend on ``threads``.
    """

    def one_start(s: int) -> FitResult:
        init = init_random(data.n, g, child_seed(cfg.seed, NS_START, *seed_path, s), cfg.min_weight)
        return fit_em(data, init, g, mode, cfg, seed_path=seed_path + (s,))

    fits = parallel_map(one_start, range(cfg.n_starts), threads)
    usable = [f for f in fits if not f.degenerate and not f.failed]
    pool = usable if usable else fits
    best = pool[0]
    for f in pool[1:]:
        if f.loglik > best.loglik:
            best = f
    return MultiStartResult(
        best=best,
        starts=fits,
        n_degenerate=sum(f.degenerate for f in fits),
        n_failed=sum(f.failed for f in fits),
    )
