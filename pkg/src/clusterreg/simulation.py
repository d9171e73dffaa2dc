"""Synthetic data generation and the Monte Carlo study harness.

Data come from a clusterwise linear regression with three standard-normal
regressors plus intercept: per replication the slopes are drawn from
U(-1.5, 1.5), the component variances from Inv-Gamma(shape 3, scale 1), and
the intercepts are fixed by the scenario. The harness fits the competing
estimators on each replication, either at the true number of components
(fixed mode) or selecting it by BIC (select mode), and writes
per-replication plus aggregate CSVs.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field

import numpy as np

from ._parallel import parallel_map
from .data import Dataset, MixtureParams
from .em import EmConfig
from .metrics import adjusted_rand, param_mse
from .methods import MethodSpec, fit_method
from .model import map_partition
from .seeds import NS_REP, child_seed, rng_from
from .selection import MODIFIED, PER_GROUP, select_num_components
from .tuning import CGrid, CvConfig

__all__ = [
    "SimDesign",
    "SimResult",
    "SCENARIOS",
    "INTERCEPTS",
    "make_design",
    "list_scenarios",
    "gen_dataset",
    "run_study",
    "summarize",
]

SCENARIOS = {
    "g2-even": (0.5, 0.5),
    "g2-uneven": (0.2, 0.8),
    "g3-a": (0.2, 0.4, 0.4),
    "g3-b": (0.2, 0.3, 0.5),
    "g4-even": (0.25, 0.25, 0.25, 0.25),
    "g4-uneven": (0.1, 0.2, 0.3, 0.4),
}

INTERCEPTS = {2: (4.0, 9.0), 3: (4.0, 9.0, 16.0), 4: (4.0, 9.0, 16.0, 25.0)}

SAMPLE_SIZES = (100, 200)

REPLICATION_COLUMNS = [
    "scenario", "rep", "method", "mse_beta", "mse_sigma2", "adj_rand", "time_s", "c", "chosen_g",
]
AGGREGATE_COLUMNS = [
    "scenario", "method", "replications", "mse_beta", "mse_sigma2", "adj_rand", "time_s", "c",
    "prop_correct_g",
]


@dataclass(frozen=True)
class SimDesign:
    """One simulation scenario: sample size, mixing proportions, intercepts."""

    n: int
    proportions: tuple
    intercepts: tuple
    replications: int = 250
    n_starts: int = 10
    seed: int = 0
    n_regressors: int = 3
    coef_low: float = -1.5
    coef_high: float = 1.5
    var_shape: float = 3.0
    var_scale: float = 1.0
    scenario: str = ""

    def __post_init__(self):
        props = tuple(float(p) for p in self.proportions)
        if any(p <= 0 for p in props) or abs(sum(props) - 1.0) > 1e-9:
            raise ValueError(f"proportions must be a simplex vector, got {props}")
        if len(self.intercepts) != len(props):
            raise ValueError("one intercept per component required")
        if self.n < 10 * len(props):
            raise ValueError(f"n={self.n} too small for {len(props)} components (need >= 10 per component)")
        object.__setattr__(self, "proportions", props)
        object.__setattr__(self, "intercepts", tuple(float(b) for b in self.intercepts))
        if not self.scenario:
            object.__setattr__(self, "scenario", f"g{len(props)}-n{self.n}")

    @property
    def g_true(self) -> int:
        return len(self.proportions)


def make_design(name: str, n: int, replications: int = 50, n_starts: int = 10, seed: int = 0) -> SimDesign:
    """Named scenario from the study grid (see SCENARIOS) at sample size n."""
    if name not in SCENARIOS:
        raise ValueError(f"unknown scenario {name!r}; available: {sorted(SCENARIOS)}")
    props = SCENARIOS[name]
    return SimDesign(
        n=n,
        proportions=props,
        intercepts=INTERCEPTS[len(props)],
        replications=replications,
        n_starts=n_starts,
        seed=seed,
        scenario=f"{name}-n{n}",
    )


def list_scenarios() -> list[dict]:
    out = []
    for name, props in SCENARIOS.items():
        for n in SAMPLE_SIZES:
            out.append(
                {
                    "scenario": f"{name}-n{n}",
                    "name": name,
                    "n": n,
                    "proportions": props,
                    "intercepts": INTERCEPTS[len(props)],
                }
            )
    return out


def gen_dataset(design: SimDesign, rep_index: int) -> tuple[Dataset, MixtureParams, np.ndarray]:
    """One synthetic replication; bitwise reproducible in (seed, rep_index)."""
    rng = rng_from(design.seed, NS_REP, rep_index)
    g = design.g_true
    j = design.n_regressors
    slopes = rng.uniform(design.coef_low, design.coef_high, size=(g, j))
    # Inv-Gamma(shape, scale) sampled as scale / Gamma(shape, 1)
    variances = design.var_scale / rng.gamma(design.var_shape, 1.0, size=g)
    labels = rng.choice(g, size=design.n, p=design.proportions)
    regressors = rng.standard_normal((design.n, j))
    noise = rng.standard_normal(design.n)

    coefficients = np.column_stack([np.asarray(design.intercepts), slopes])
    X = np.column_stack([np.ones(design.n), regressors])
    y = np.einsum("ij,ij->i", X, coefficients[labels]) + noise * np.sqrt(variances[labels])
    params = MixtureParams(np.asarray(design.proportions), coefficients, variances)
    return Dataset(y, X), params, labels


@dataclass
class SimResult:
    """Per-replication records plus aggregation helpers."""

    records: list[dict] = field(default_factory=list)

    def aggregate(self) -> list[dict]:
        groups: dict[tuple, list[dict]] = {}
        for rec in self.records:
            groups.setdefault((rec["scenario"], rec["method"]), []).append(rec)

        def mean_of(recs, key):
            vals = [r[key] for r in recs if r[key] is not None]
            return sum(vals) / len(vals) if vals else None

        rows = []
        for (scenario, method), recs in groups.items():
            correct = [r for r in recs if r["chosen_g"] is not None]
            rows.append(
                {
                    "scenario": scenario,
                    "method": method,
                    "replications": len(recs),
                    "mse_beta": mean_of(recs, "mse_beta"),
                    "mse_sigma2": mean_of(recs, "mse_sigma2"),
                    "adj_rand": mean_of(recs, "adj_rand"),
                    "time_s": mean_of(recs, "time_s"),
                    "c": mean_of(recs, "c"),
                    "prop_correct_g": (
                        sum(r["chosen_g"] == r["g_true"] for r in correct) / len(correct)
                        if correct
                        else None
                    ),
                }
            )
        return rows

    def g_histogram(self) -> dict[tuple, dict[int, int]]:
        """Counts of chosen G per (scenario, method); select mode only."""
        hist: dict[tuple, dict[int, int]] = {}
        for rec in self.records:
            if rec["chosen_g"] is None:
                continue
            key = (rec["scenario"], rec["method"])
            hist.setdefault(key, {})
            hist[key][rec["chosen_g"]] = hist[key].get(rec["chosen_g"], 0) + 1
        return hist


def _fit_one(data, g, spec, cfg, grid, cv, variant, coef_count, select_g):
    """Fit one method on one replication; returns (fit, c, chosen_g)."""
    if not select_g:
        mf = fit_method(data, g, spec, cfg, grid, cv)
        return mf.fit, mf.c, None
    sel = select_num_components(
        data, range(1, g + 3), spec, cfg, grid, cv, variant=variant, coef_count=coef_count
    )
    cand = sel.chosen
    return cand.fit, cand.c, sel.chosen_g


def run_study(
    designs,
    methods,
    mode: str = "fixed",
    out_dir=None,
    grid: CGrid | None = None,
    variant: str = MODIFIED,
    coef_count: str = PER_GROUP,
    threads: int = 1,
    progress=None,
) -> SimResult:
    """Run the Monte Carlo comparison and optionally write the two CSVs.

    ``mode`` is "fixed" (fit at the true G, record parameter MSEs, Adj-Rand,
    time and chosen c) or "select" (let each method pick G between 1 and
    G* + 2 by BIC and record the choice). Replications run on derived seed
    streams, so records are identical for any ``threads``. Failures are
    recorded, never raised.
    """
    if mode not in ("fixed", "select"):
        raise ValueError(f"mode must be 'fixed' or 'select', got {mode!r}")
    select_g = mode == "select"
    specs = [m if isinstance(m, MethodSpec) else MethodSpec(m) for m in methods]

    def run_rep(task):
        design, rep = task
        data, true_params, true_labels = gen_dataset(design, rep)
        recs = []
        for idx, spec in enumerate(specs):
            cfg = EmConfig(n_starts=design.n_starts, seed=child_seed(design.seed, NS_REP, rep, idx))
            cv = CvConfig(seed=child_seed(design.seed, NS_REP, rep, idx))
            rec = {
                "scenario": design.scenario,
                "rep": rep,
                "method": spec.label,
                "mse_beta": None,
                "mse_sigma2": None,
                "adj_rand": None,
                "time_s": None,
                "c": None,
                "chosen_g": None,
                "g_true": design.g_true,
            }
            start = time.perf_counter()
            try:
                fit, c, chosen_g = _fit_one(
                    data, design.g_true, spec, cfg, grid, cv, variant, coef_count, select_g
                )
                rec["time_s"] = time.perf_counter() - start
                rec["c"] = c
                rec["chosen_g"] = chosen_g
                rec["adj_rand"] = adjusted_rand(true_labels, map_partition(fit.posteriors))
                if fit.params.n_components == design.g_true:
                    mse_beta, mse_sigma2 = param_mse(true_params, fit.params)
                    rec["mse_beta"] = mse_beta
                    rec["mse_sigma2"] = mse_sigma2
            except Exception as exc:  # noqa: BLE001 - a failed replication must not kill the study
                rec["error"] = f"{type(exc).__name__}: {exc}"
            recs.append(rec)
        if progress is not None:
            progress(design.scenario, rep)
        return recs

    tasks = [(design, rep) for design in designs for rep in range(design.replications)]
    result = SimResult([rec for recs in parallel_map(run_rep, tasks, threads) for rec in recs])
    if out_dir is not None:
        write_csvs(result, out_dir)
    return result


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csvs(result: SimResult, out_dir) -> tuple[str, str]:
    import os

    os.makedirs(out_dir, exist_ok=True)
    rep_path = os.path.join(out_dir, "replications.csv")
    agg_path = os.path.join(out_dir, "aggregate.csv")
    with open(rep_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPLICATION_COLUMNS)
        for rec in result.records:
            writer.writerow([_cell(rec[col]) for col in REPLICATION_COLUMNS])
    with open(agg_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(AGGREGATE_COLUMNS)
        for row in result.aggregate():
            writer.writerow([_cell(row[col]) for col in AGGREGATE_COLUMNS])
    return rep_path, agg_path


def summarize(result: SimResult) -> str:
    """Plain-text tables of the aggregates, plus chosen-G histograms."""
    lines = []
    rows = result.aggregate()
    scenarios = sorted({row["scenario"] for row in rows})
    for scenario in scenarios:
        lines.append(f"scenario {scenario}")
        header = f"  {'method':<14}{'mse_beta':>12}{'mse_sigma2':>12}{'adj_rand':>10}{'time_s':>10}{'c':>8}{'correct_G':>11}"
        lines.append(header)
        for row in rows:
            if row["scenario"] != scenario:
                continue

            def fmt(v, width, digits=4):
                return f"{v:>{width}.{digits}f}" if v is not None else " " * (width - 1) + "-"

            lines.append(
                f"  {row['method']:<14}"
                + fmt(row["mse_beta"], 12)
                + fmt(row["mse_sigma2"], 12)
                + fmt(row["adj_rand"], 10)
                + fmt(row["time_s"], 10)
                + fmt(row["c"], 8, 3)
                + fmt(row["prop_correct_g"], 11, 3)
            )
    hist = result.g_histogram()
    if hist:
        lines.append("")
        lines.append("chosen-G histogram")
        for (scenario, method), counts in sorted(hist.items()):
            cells = " ".join(f"G={g}:{counts[g]}" for g in sorted(counts))
            lines.append(f"  {scenario} {method}: {cells}")
    return "\n".join(lines) + "\n"
