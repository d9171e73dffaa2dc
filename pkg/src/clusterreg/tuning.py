"""Data-driven selection of the scale balance c.

Two tuners over a grid of candidate c values: `tune_c_cv` maximizes the
cross-validated log likelihood (sum of held-out test-set log likelihoods
over M random splits, with the same splits reused for every c), and
`tune_c_kdeleted` maximizes the k-deleted log likelihood of the
best-of-starts constrained solution, which needs no refitting per fold and
is the computational shortcut. `target_variance` supplies the center of the
constraint interval: the common variance of a homoscedastic fit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from ._parallel import parallel_map
from .data import Dataset
from .em import EmConfig, FitResult, VarianceMode, multi_start_fit
from .model import individual_log_terms, log_likelihood
from .seeds import NS_FOLD, child_seed, rng_from

__all__ = [
    "CGrid",
    "CvConfig",
    "TuningResult",
    "default_k",
    "target_variance",
    "cv_folds",
    "cv_criterion",
    "tune_c_cv",
    "k_deleted_loglik",
    "select_root_kdeleted",
    "tune_c_kdeleted",
]

MIN_FOLD_SUCCESS = 0.8

K_CHOICES = ("1", "2", "jg", "n10", "n5", "n2", "n125", "n111")


def round_half_away(x: float) -> int:
    """Round positive reals half away from zero."""
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class CGrid:
    """Strictly increasing candidate c values in (0, 1], always including 1."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size < 1:
            raise ValueError("grid must be a non-empty vector")
        if np.any(v <= 0.0) or np.any(v > 1.0):
            raise ValueError("grid values must lie in (0, 1]")
        if np.any(np.diff(v) <= 0.0):
            raise ValueError("grid values must be strictly increasing")
        if v[-1] != 1.0:
            raise ValueError("grid must contain 1.0 (the homoscedastic endpoint)")
        object.__setattr__(self, "values", v)

    @classmethod
    def default(cls, n_points: int = 20, low: float = 0.001) -> "CGrid":
        v = np.geomspace(low, 1.0, n_points)
        v[-1] = 1.0
        return cls(v)

    @classmethod
    def of(cls, values) -> "CGrid":
        return cls(np.sort(np.unique(np.asarray(values, dtype=float))))

    def __len__(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class CvConfig:
    """Cross-validation protocol: M random train/test splits.

    Defaults resolve against the dataset: ``m_partitions = n/5`` and
    ``test_size = n/10`` (rounded half away from zero), with the test size
    floored at G + P so the training fit never starves.
    """

    m_partitions: int | None = None
    test_size: int | None = None
    seed: int = 0

    def resolved(self, n: int, g: int, p: int) -> tuple[int, int]:
        m = self.m_partitions if self.m_partitions is not None else max(round_half_away(n / 5), 1)
        test = self.test_size if self.test_size is not None else max(round_half_away(n / 10), g + p)
        if m < 1:
            raise ValueError("m_partitions must be at least 1")
        if not 0 < test < n:
            raise ValueError(f"test_size must lie in (0, n); got {test} with n={n}")
        return m, test


@dataclass(frozen=True)
class TuningResult:
    chosen_c: float
    criterion_curve: list[tuple[float, float]]
    fit_at_c: FitResult
    method: str
    diagnostics: dict = field(default_factory=dict)


def default_k(n: int, p: int, g: int, choice="n5") -> int:
    """Map a symbolic k choice to an integer, clamped to [0, n - 1].

    ``p`` counts all design columns; the regressor count used by the "jg"
    rule is p - 1. Integer choices pass through (clamped).
    """
    if n < 2:
        raise ValueError("need at least two observations")
    if isinstance(choice, (int, np.integer)):
        k = int(choice)
    else:
        choice = str(choice)
        if choice not in K_CHOICES:
            raise ValueError(f"unknown k choice {choice!r}; expected one of {K_CHOICES} or an integer")
        if choice == "1":
            k = 1
        elif choice == "2":
            k = 2
        elif choice == "jg":
            k = (p - 1) * (g - 1)
        else:
            divisor = {"n10": 10.0, "n5": 5.0, "n2": 2.0, "n125": 1.25, "n111": 1.11}[choice]
            k = round_half_away(n / divisor)
    return min(max(k, 0), n - 1)


def target_variance(data: Dataset, g: int, cfg: EmConfig = EmConfig(), threads: int = 1) -> float:
    """Common variance of the homoscedastic multi-start fit.

    On zero-residual data the value sits at the degeneracy floor; the flag
    lives on the homoscedastic FitResult, re-obtainable via
    `multi_start_fit`.
    """
    if data.n <= data.n_cols:
        raise ValueError(f"need n > P to estimate a target variance; n={data.n}, P={data.n_cols}")
    ms = multi_start_fit(data, g, VarianceMode.homoscedastic(), cfg, threads=threads)
    if ms.best.failed:
        raise RuntimeError(f"homoscedastic fit failed: {ms.best.diagnostics}")
    return float(ms.best.params.variances[0])


def cv_folds(n: int, cv: CvConfig, g: int, p: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Deterministic (train, test) index pairs; split m depends only on (seed, m)."""
    m_partitions, test_size = cv.resolved(n, g, p)
    folds = []
    for m in range(m_partitions):
        perm = rng_from(cv.seed, NS_FOLD, m).permutation(n)
        folds.append((np.sort(perm[test_size:]), np.sort(perm[:test_size])))
    return folds


def _fit_fold(data, g, c, fold, cfg, fold_target=None):
    """Constrained fit on one training set, scored on its test set.

    Seeds derive from cfg alone (not the fold position or c), so the fold
    contribution is a pure function of the fold indices: the same splits are
    comparable across the whole grid, and duplicated folds contribute
    identical values.
    """
    train_idx, test_idx = fold
    train = data.subset(train_idx)
    if fold_target is None:
        fold_target = _fold_target(data, g, fold, cfg)
    mode = VarianceMode.constrained(c, fold_target)
    ms = multi_start_fit(train, g, mode, replace(cfg, seed=child_seed(cfg.seed, NS_FOLD, 1)))
    if ms.best.failed:
        return None, ms
    return float(log_likelihood(data.subset(test_idx), ms.best.params)), ms


def _fold_target(data, g, fold, cfg):
    return target_variance(data.subset(fold[0]), g, replace(cfg, seed=child_seed(cfg.seed, NS_FOLD, 0)))


def cv_criterion(
    data: Dataset,
    g: int,
    c: float,
    cv: CvConfig = CvConfig(),
    cfg: EmConfig = EmConfig(),
    folds=None,
    threads: int = 1,
) -> float:
    """Cross-validated log likelihood at scale balance c.

    Sum over folds of the test-set log likelihood of the constrained fit on
    the training set, with the target variance recomputed on each training
    set. Folds whose fit fails are skipped; the value is NaN (invalid) when
    fewer than 80% of the folds succeed.
    """
    if not 0.0 < c <= 1.0:
        raise ValueError(f"c must lie in (0, 1], got {c}")
    if folds is None:
        folds = cv_folds(data.n, cv, g, data.n_cols)
    outs = parallel_map(lambda fold: _fit_fold(data, g, c, fold, cfg), folds, threads)
    values = [v for v, _ in outs if v is not None]
    if len(values) < MIN_FOLD_SUCCESS * len(folds):
        return float("nan")
    return float(sum(values))


def _argmax_prefer_last(values) -> int:
    """Index of the maximum, ties resolved toward the last occurrence."""
    best = None
    for i, v in enumerate(values):
        if math.isnan(v):
            continue
        if best is None or v >= values[best]:
            best = i
    if best is None:
        raise RuntimeError("criterion is invalid on the whole grid")
    return best


def tune_c_cv(
    data: Dataset,
    g: int,
    grid: CGrid | None = None,
    cv: CvConfig = CvConfig(),
    cfg: EmConfig = EmConfig(),
    threads: int = 1,
    keep_fits: bool = False,
) -> TuningResult:
    """Pick c maximizing the cross-validated log likelihood (ConC).

    The same fold splits, fold targets and start seeds are reused for every
    grid value (common random numbers), then the final model is refitted on
    the full dataset at the chosen c with the full-data target variance.
    """
    if grid is None:
        grid = CGrid.default()
    folds = cv_folds(data.n, cv, g, data.n_cols)
    targets = parallel_map(lambda fold: _fold_target(data, g, fold, cfg), folds, threads)

    curve = []
    kept = {}
    for c in grid.values:
        outs = parallel_map(
            lambda mf, c=c: _fit_fold(data, g, c, mf[1], cfg, targets[mf[0]]),
            enumerate(folds),
            threads,
        )
        values = [v for v, _ in outs if v is not None]
        value = float(sum(values)) if len(values) >= MIN_FOLD_SUCCESS * len(folds) else float("nan")
        curve.append((float(c), value))
        if keep_fits:
            kept[float(c)] = [ms for _, ms in outs]

    best = _argmax_prefer_last([v for _, v in curve])
    chosen_c = float(grid.values[best])
    full_target = target_variance(data, g, cfg, threads=threads)
    final = multi_start_fit(data, g, VarianceMode.constrained(chosen_c, full_target), cfg, threads=threads)
    diagnostics = {
        "folds": [(train.tolist(), test.tolist()) for train, test in folds],
        "fold_targets": [float(t) for t in targets],
        "full_target": full_target,
        "n_invalid": sum(math.isnan(v) for _, v in curve),
    }
    if keep_fits:
        diagnostics["fold_fits"] = kept
        diagnostics["final_multistart"] = final
    return TuningResult(chosen_c, curve, final.best, "conc", diagnostics)


def k_deleted_loglik(terms, k: int) -> float:
    """Sum of the terms minus its k largest entries.

    The subtraction runs sequentially in descending term order (ties by
    observation index), so the recurrence l_{-(k+1)} = l_{-k} - (k+1)-th
    largest term holds exactly in floating point.
    """
    terms = np.asarray(terms, dtype=float)
    n = terms.shape[0]
    if not 0 <= k < n:
        raise ValueError(f"k must lie in [0, n); got k={k}, n={n}")
    total = float(terms.sum())
    order = np.argsort(-terms, kind="stable")
    for idx in order[:k]:
        total -= float(terms[idx])
    return total


def select_root_kdeleted(roots: list[FitResult], data: Dataset, k: int) -> FitResult:
    """Root with the highest k-deleted log likelihood.

    Ties go to the higher full log likelihood, then to the lower root index.
    """
    if not roots:
        raise ValueError("no roots to select from")
    best = None
    best_key = None
    for root in roots:
        key = (k_deleted_loglik(individual_log_terms(data, root.params), k), root.loglik)
        if best is None or key > best_key:
            best, best_key = root, key
    return best


def tune_c_kdeleted(
    data: Dataset,
    g: int,
    grid: CGrid | None = None,
    k: int | None = None,
    cfg: EmConfig = EmConfig(),
    target: float | None = None,
    threads: int = 1,
    keep_fits: bool = False,
) -> TuningResult:
    """Pick c maximizing the k-deleted log likelihood (ConK).

    The full-data target variance is computed once; each grid value gets a
    constrained multi-start fit (same start seeds across the grid) and is
    scored by the k-deleted log likelihood of its best solution. ``k``
    defaults to n/5. Pass ``target`` to skip the homoscedastic prefit.
    """
    if grid is None:
        grid = CGrid.default()
    if k is None:
        k = default_k(data.n, data.n_cols, g)
    if not 0 <= k < data.n:
        raise ValueError(f"k must lie in [0, n); got k={k}, n={data.n}")
    if target is None:
        target = target_variance(data, g, cfg, threads=threads)

    def fit_at(c: float):
        return multi_start_fit(data, g, VarianceMode.constrained(c, target), cfg)

    runs = parallel_map(fit_at, grid.values, threads)
    curve = []
    for c, ms in zip(grid.values, runs):
        if ms.best.failed:
            value = float("nan")
        else:
            value = k_deleted_loglik(individual_log_terms(data, ms.best.params), k)
        curve.append((float(c), value))
    best = _argmax_prefer_last([v for _, v in curve])
    diagnostics = {"k": int(k), "target": float(target)}
    if keep_fits:
        diagnostics["multistarts"] = list(runs)
    return TuningResult(float(grid.values[best]), curve, runs[best].best, f"conk(k={int(k)})", diagnostics)
