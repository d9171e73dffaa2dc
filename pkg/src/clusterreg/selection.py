"""Selecting the number of components by BIC variants.

Three criteria share the -2 loglik + eta log(n) form and differ in the
complexity count eta and in which solution the likelihood is evaluated at:
the standard BIC at an unconstrained fit, the same count at the constrained
solution, and the complexity-corrected variant whose scale count is the
fraction (1 - c) * G of free variances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .data import Dataset
from .em import CONSTRAINED as CONSTRAINED_MODE
from .em import EmConfig, FitResult
from .methods import MethodFit, MethodSpec, fit_method
from .seeds import NS_GRANGE, child_seed
from .tuning import CGrid, CvConfig
from ._parallel import parallel_map

__all__ = [
    "STANDARD",
    "CONSTRAINED",
    "MODIFIED",
    "PER_GROUP",
    "LITERAL",
    "count_free_params",
    "bic",
    "GCandidate",
    "SelectionResult",
    "select_num_components",
]

# BIC variants
STANDARD = "standard"
CONSTRAINED = "constrained"
MODIFIED = "modified"
_VARIANTS = (STANDARD, CONSTRAINED, MODIFIED)

# Coefficient-count conventions: per-group counts G*P regression
# coefficients; the literal convention counts the P coefficients once.
PER_GROUP = "pergroup"
LITERAL = "literal"


def count_free_params(g: int, p: int, variant: str, c: float | None = None, coef_count: str = PER_GROUP) -> float:
    """Complexity count eta: coefficients + scales + free mixing weights.

    Standard and constrained variants count G scales; the modified variant
    counts (1 - c) * G, so the result can be fractional.
    """
    if variant not in _VARIANTS:
        raise ValueError(f"unknown BIC variant {variant!r}")
    if coef_count == PER_GROUP:
        coef = g * p
    elif coef_count == LITERAL:
        coef = p
    else:
        raise ValueError(f"unknown coefficient count convention {coef_count!r}")
    if variant == MODIFIED:
        if c is None or not 0.0 < c <= 1.0:
            raise ValueError(f"modified BIC needs a scale balance c in (0, 1], got {c}")
        scales = (1.0 - c) * g
    else:
        if c is not None:
            raise ValueError(f"c only applies to the modified variant, not {variant!r}")
        scales = g
    return float(coef + scales + (g - 1))


def bic(fit: FitResult, data: Dataset, variant: str = STANDARD, coef_count: str = PER_GROUP) -> float:
    """-2 loglik + eta log(n) for the given variant.

    The constrained and modified variants require a constrained fit (the
    modified one reads c from the fit's variance mode); the standard variant
    applies to any fit, degenerate ones included, where it simply inherits
    the inflated likelihood.
    """
    if variant not in _VARIANTS:
        raise ValueError(f"unknown BIC variant {variant!r}")
    c = None
    if variant in (CONSTRAINED, MODIFIED):
        if fit.mode.kind != CONSTRAINED_MODE:
            raise ValueError(f"{variant} BIC requires a constrained fit, got mode {fit.mode.kind!r}")
        if variant == MODIFIED:
            c = fit.mode.c
    g = fit.params.n_components
    p = fit.params.n_cols
    if p != data.n_cols:
        raise ValueError(f"fit has {p} design columns but dataset has {data.n_cols}")
    eta = count_free_params(g, p, variant, c, coef_count)
    return -2.0 * fit.loglik + eta * math.log(data.n)


@dataclass(frozen=True)
class GCandidate:
    g: int
    fit: FitResult | None
    bic_values: dict
    c: float | None = None
    error: str | None = None
    method_fit: MethodFit | None = None


@dataclass(frozen=True)
class SelectionResult:
    candidates: list[GCandidate]
    chosen_g: int
    method: str
    variant: str
    coef_count: str

    @property
    def chosen(self) -> GCandidate:
        return next(cand for cand in self.candidates if cand.g == self.chosen_g)


def _criterion_key(spec: MethodSpec, variant: str) -> str:
    if not spec.constrained:
        return STANDARD
    return MODIFIED if variant == MODIFIED else CONSTRAINED


def select_num_components(
    data: Dataset,
    g_values,
    spec: MethodSpec,
    cfg: EmConfig = EmConfig(),
    grid: CGrid | None = None,
    cv: CvConfig = CvConfig(),
    variant: str | None = None,
    coef_count: str = PER_GROUP,
    threads: int = 1,
) -> SelectionResult:
    """Fit each candidate G and pick the one minimizing the BIC criterion.

    Unconstrained methods use the standard BIC; constrained methods record
    both the constrained and the modified value and select on ``variant``
    (modified by default). Ties go to the smaller G. Seeds are derived per
    G, so candidates are independent and the whole scan is deterministic.
    """
    g_values = sorted(set(int(g) for g in g_values))
    if not g_values or g_values[0] < 1:
        raise ValueError(f"invalid G range {g_values}")
    if variant is None:
        variant = MODIFIED if spec.constrained else STANDARD
    key = _criterion_key(spec, variant)

    def candidate(g: int) -> GCandidate:
        cfg_g = replace(cfg, seed=child_seed(cfg.seed, NS_GRANGE, g))
        cv_g = replace(cv, seed=child_seed(cv.seed, NS_GRANGE, g))
        try:
            mf = fit_method(data, g, spec, cfg_g, grid, cv_g)
            if spec.constrained:
                values = {
                    CONSTRAINED: bic(mf.fit, data, CONSTRAINED, coef_count),
                    MODIFIED: bic(mf.fit, data, MODIFIED, coef_count),
                }
            else:
                values = {STANDARD: bic(mf.fit, data, STANDARD, coef_count)}
            return GCandidate(g, mf.fit, values, c=mf.c, method_fit=mf)
        except Exception as exc:  # noqa: BLE001 - per-G failures must not abort the scan
            return GCandidate(g, None, {}, error=f"{type(exc).__name__}: {exc}")

    candidates = parallel_map(candidate, g_values, threads)
    usable = [cand for cand in candidates if cand.error is None]
    if not usable:
        raise RuntimeError(
            "every candidate G failed: " + "; ".join(f"G={c.g}: {c.error}" for c in candidates)
        )
    chosen = usable[0]
    for cand in usable[1:]:
        if cand.bic_values[key] < chosen.bic_values[key]:
            chosen = cand
    return SelectionResult(candidates, chosen.g, spec.label, variant, coef_count)
