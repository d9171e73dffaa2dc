"""Estimator specifications shared by selection, the study harness and the CLI.

The four estimators: unconstrained homoscedastic (HomN) and heteroscedastic
(HetN) maximum likelihood, and the constrained fits with c tuned by
cross-validation (ConC) or by the k-deleted shortcut (ConK).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .data import Dataset
from .em import EmConfig, FitResult, MultiStartResult, VarianceMode, multi_start_fit
from .tuning import CGrid, CvConfig, TuningResult, default_k, tune_c_cv, tune_c_kdeleted

__all__ = ["MethodSpec", "MethodFit", "fit_method"]

KINDS = ("hom", "het", "conc", "conk")


@dataclass(frozen=True)
class MethodSpec:
    kind: str
    k_choice: str | int = "n5"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown method {self.kind!r}; expected one of {KINDS}")

    @property
    def label(self) -> str:
        return {
            "hom": "HomN",
            "het": "HetN",
            "conc": "ConC",
            "conk": f"ConK[{self.k_choice}]",
        }[self.kind]

    @property
    def constrained(self) -> bool:
        return self.kind in ("conc", "conk")


@dataclass(frozen=True)
class MethodFit:
    fit: FitResult
    c: float | None = None
    tuning: TuningResult | None = None
    multistart: MultiStartResult | None = None
    diagnostics: dict = field(default_factory=dict)


def fit_method(
    data: Dataset,
    g: int,
    spec: MethodSpec,
    cfg: EmConfig = EmConfig(),
    grid: CGrid | None = None,
    cv: CvConfig = CvConfig(),
    threads: int = 1,
) -> MethodFit:
    """Fit one estimator at a fixed number of components."""
    if spec.kind == "hom":
        ms = multi_start_fit(data, g, VarianceMode.homoscedastic(), cfg, threads=threads)
        return MethodFit(ms.best, multistart=ms)
    if spec.kind == "het":
        ms = multi_start_fit(data, g, VarianceMode.heteroscedastic(), cfg, threads=threads)
        return MethodFit(ms.best, multistart=ms)
    if spec.kind == "conc":
        tr = tune_c_cv(data, g, grid, cv, cfg, threads=threads)
    else:
        k = default_k(data.n, data.n_cols, g, spec.k_choice)
        tr = tune_c_kdeleted(data, g, grid, k, cfg, threads=threads)
    return MethodFit(tr.fit_at_c, c=tr.chosen_c, tuning=tr)
