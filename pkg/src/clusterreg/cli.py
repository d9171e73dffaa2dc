"""Command-line front end.

Subcommands: ``fit`` (estimate one model, or evaluate stored parameters via
--params-in), ``tune`` (scale-balance selection curve), ``select`` (number
of components by BIC) and ``simulate`` (the Monte Carlo study harness).
Results go to stdout or --out as JSON/CSV with stable key order; all
diagnostics (timings included) go to stderr, so outputs for a fixed seed
are byte-identical across runs and thread counts.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time

import numpy as np

from .data import Dataset, MixtureParams
from .em import EmConfig, VarianceMode, multi_start_fit
from .methods import MethodSpec
from .model import individual_log_terms, log_likelihood, map_partition
from .selection import LITERAL, MODIFIED, PER_GROUP, STANDARD, CONSTRAINED, select_num_components
from .simulation import list_scenarios, make_design, run_study, summarize
from .tuning import CGrid, CvConfig, default_k, tune_c_cv, tune_c_kdeleted

DEFAULT_SEED = 0

_BIC_FLAGS = {"standard": STANDARD, "constrained": CONSTRAINED, "modified": MODIFIED}


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def read_csv_dataset(path: str, response: str, add_intercept: bool = True):
    """Load a CSV with a header row; every fully numeric non-response column
    becomes a regressor, others are dropped (reported on stderr)."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    body = [row for row in rows[1:] if any(cell.strip() for cell in row)]
    if not body:
        raise ValueError(f"{path}: no data rows")
    if response not in header:
        raise ValueError(f"{path}: no column named {response!r}; columns: {header}")

    def column(idx):
        vals = []
        for row in body:
            if idx >= len(row):
                return None
            try:
                vals.append(float(row[idx]))
            except ValueError:
                return None
        return np.asarray(vals)

    resp_idx = header.index(response)
    y = column(resp_idx)
    if y is None:
        raise ValueError(f"{path}: response column {response!r} is not fully numeric")
    cols, names, dropped = [], [], []
    for idx, name in enumerate(header):
        if idx == resp_idx:
            continue
        vals = column(idx)
        if vals is None:
            dropped.append(name)
        else:
            cols.append(vals)
            names.append(name)
    if dropped:
        _log(f"dropped non-numeric column(s): {', '.join(dropped)}")
    if add_intercept:
        design = np.column_stack([np.ones(len(y))] + cols) if cols else np.ones((len(y), 1))
    else:
        if not cols:
            raise ValueError(f"{path}: no numeric regressor columns and --no-intercept given")
        design = np.column_stack(cols)
    return Dataset(y, design, has_intercept=add_intercept), names


def _parse_grid(text: str | None) -> CGrid | None:
    if text is None:
        return None
    return CGrid.of([float(tok) for tok in text.split(",") if tok.strip()])


def _parse_g_range(text: str) -> range:
    lo, _, hi = text.partition("..")
    if not hi:
        raise argparse.ArgumentTypeError(f"expected A..B, got {text!r}")
    return range(int(lo), int(hi) + 1)


def _parse_k(text: str):
    try:
        return int(text)
    except ValueError:
        return text


def _em_config(args, n_starts_default: int = 10) -> EmConfig:
    return EmConfig(n_starts=getattr(args, "starts", None) or n_starts_default, seed=args.seed)


def _cv_config(args) -> CvConfig:
    return CvConfig(m_partitions=args.cv_m, test_size=args.cv_test, seed=args.seed)


def _fit_payload(fit, labels=True, posteriors=False) -> dict:
    payload = {
        "weights": [float(w) for w in fit.params.weights],
        "coefficients": [[float(b) for b in row] for row in fit.params.coefficients],
        "variances": [float(v) for v in fit.params.variances],
        "loglik": float(fit.loglik),
        "n_iter": int(fit.n_iter),
        "converged": bool(fit.converged),
        "degenerate": bool(fit.degenerate),
    }
    if fit.mode.kind == "constrained":
        payload["c"] = float(fit.mode.c)
        payload["target"] = float(fit.mode.target)
    if labels:
        payload["labels"] = [int(v) for v in map_partition(fit.posteriors)]
    if posteriors:
        payload["posteriors"] = [[float(z) for z in row] for row in fit.posteriors.z]
    return payload


def _params_from_json(path: str) -> MixtureParams:
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    return MixtureParams(
        np.asarray(obj["weights"], dtype=float),
        np.asarray(obj["coefficients"], dtype=float),
        np.asarray(obj["variances"], dtype=float),
    )


def cmd_fit(args) -> dict:
    data, regressors = read_csv_dataset(args.input, args.response, not args.no_intercept)
    base = {"response": args.response, "regressors": regressors, "n": data.n}

    if args.params_in:
        from .em import e_step

        params = _params_from_json(args.params_in)
        terms = individual_log_terms(data, params)
        post = e_step(data, params)
        payload = {
            "method": "eval",
            "g": params.n_components,
            **base,
            "loglik": float(terms.sum()),
            "labels": [int(v) for v in map_partition(post)],
        }
        if args.posteriors:
            payload["posteriors"] = [[float(z) for z in row] for row in post.z]
        return payload

    if args.g is None:
        raise ValueError("--g is required when fitting")
    spec = MethodSpec(args.method, args.k)
    cfg = _em_config(args)
    started = time.perf_counter()
    if spec.kind == "hom":
        fit = multi_start_fit(data, args.g, VarianceMode.homoscedastic(), cfg, threads=args.threads).best
        extra = {}
    elif spec.kind == "het":
        fit = multi_start_fit(data, args.g, VarianceMode.heteroscedastic(), cfg, threads=args.threads).best
        extra = {}
    elif spec.kind == "conc":
        tr = tune_c_cv(data, args.g, _parse_grid(args.grid), _cv_config(args), cfg, threads=args.threads)
        fit, extra = tr.fit_at_c, {"chosen_c": tr.chosen_c}
    else:
        k = default_k(data.n, data.n_cols, args.g, args.k)
        tr = tune_c_kdeleted(data, args.g, _parse_grid(args.grid), k, cfg, threads=args.threads)
        fit, extra = tr.fit_at_c, {"chosen_c": tr.chosen_c, "k": k}
    _log(f"fit completed in {time.perf_counter() - started:.3f}s")
    return {"method": args.method, "g": args.g, **base, **extra, **_fit_payload(fit, posteriors=args.posteriors)}


def cmd_tune(args) -> dict:
    data, _ = read_csv_dataset(args.input, args.response, not args.no_intercept)
    cfg = _em_config(args)
    grid = _parse_grid(args.grid)
    started = time.perf_counter()
    if args.method == "conc":
        tr = tune_c_cv(data, args.g, grid, _cv_config(args), cfg, threads=args.threads)
        extra = {}
    elif args.method == "conk":
        k = default_k(data.n, data.n_cols, args.g, args.k)
        tr = tune_c_kdeleted(data, args.g, grid, k, cfg, threads=args.threads)
        extra = {"k": k}
    else:
        raise ValueError(f"tune applies to the constrained methods, not {args.method!r}")
    _log(f"tuning completed in {time.perf_counter() - started:.3f}s")
    return {
        "method": args.method,
        "g": args.g,
        **extra,
        "chosen_c": float(tr.chosen_c),
        "criterion_curve": [[float(c), float(v)] for c, v in tr.criterion_curve],
        "fit": _fit_payload(tr.fit_at_c, labels=False),
    }


def cmd_select(args) -> dict:
    data, _ = read_csv_dataset(args.input, args.response, not args.no_intercept)
    spec = MethodSpec(args.method, args.k)
    variant = _BIC_FLAGS[args.bic] if args.bic else None
    started = time.perf_counter()
    sel = select_num_components(
        data,
        args.g_range,
        spec,
        _em_config(args),
        _parse_grid(args.grid),
        _cv_config(args),
        variant=variant,
        coef_count=args.bic_coef_count,
        threads=args.threads,
    )
    _log(f"selection completed in {time.perf_counter() - started:.3f}s")
    candidates = []
    for cand in sel.candidates:
        entry = {"g": cand.g}
        if cand.error is not None:
            entry["error"] = cand.error
        else:
            entry["loglik"] = float(cand.fit.loglik)
            if cand.c is not None:
                entry["c"] = float(cand.c)
            entry["bic"] = {key: float(v) for key, v in sorted(cand.bic_values.items())}
        candidates.append(entry)
    return {
        "method": args.method,
        "variant": sel.variant,
        "coef_count": sel.coef_count,
        "g_range": [args.g_range[0], args.g_range[-1]],
        "chosen_g": sel.chosen_g,
        "candidates": candidates,
    }


def cmd_simulate(args) -> None:
    if args.list_scenarios:
        for entry in list_scenarios():
            props = ",".join(str(p) for p in entry["proportions"])
            print(f"{entry['scenario']}  proportions=({props})  intercepts={entry['intercepts']}")
        return None
    if not args.scenario:
        raise ValueError("--scenario is required (or use --list-scenarios)")
    design = make_design(
        args.scenario, args.n, replications=args.reps, n_starts=args.starts or 10, seed=args.seed
    )
    specs = [MethodSpec(m.strip(), args.k) for m in args.methods.split(",") if m.strip()]
    result = run_study(
        [design],
        specs,
        mode=args.mode,
        out_dir=args.out or ".",
        grid=_parse_grid(args.grid),
        variant=_BIC_FLAGS[args.bic] if args.bic else MODIFIED,
        coef_count=args.bic_coef_count,
        threads=args.threads,
    )
    _log(summarize(result))
    _log(f"wrote replications.csv and aggregate.csv under {args.out or '.'}")
    return None


def _add_common(p, with_input=True):
    if with_input:
        p.add_argument("input", help="CSV file with a header row")
        p.add_argument("--response", required=True, help="name of the response column")
        p.add_argument("--no-intercept", action="store_true", help="do not prepend an intercept column")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--starts", type=int, default=None, help="random starts per fit (default 10)")
    p.add_argument("--threads", type=int, default=1, help="worker threads; never changes results")
    p.add_argument("--out", default=None, help="write output here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clusterreg",
        description="Clusterwise linear regression by constrained maximum likelihood",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="estimate one model")
    _add_common(p_fit)
    p_fit.add_argument("--method", choices=["hom", "het", "conc", "conk"], default="conc")
    p_fit.add_argument("--g", type=int, default=None, help="number of components (required unless --params-in)")
    p_fit.add_argument("--k", type=_parse_k, default="n5", help="k for conk: 1,2,jg,n10,n5,n2,n125,n111 or an integer")
    p_fit.add_argument("--grid", default=None, help="comma-separated c grid (must include 1.0)")
    p_fit.add_argument("--cv-m", type=int, default=None, help="number of CV partitions (default n/5)")
    p_fit.add_argument("--cv-test", type=int, default=None, help="CV test-set size (default n/10)")
    p_fit.add_argument("--posteriors", action="store_true", help="include the posterior matrix in the output")
    p_fit.add_argument("--params-in", default=None, help="evaluate stored parameters instead of fitting")
    p_fit.set_defaults(func=cmd_fit)

    p_tune = sub.add_parser("tune", help="scale-balance (c) selection curve")
    _add_common(p_tune)
    p_tune.add_argument("--method", choices=["conc", "conk"], default="conc")
    p_tune.add_argument("--g", type=int, required=True)
    p_tune.add_argument("--k", type=_parse_k, default="n5")
    p_tune.add_argument("--grid", default=None)
    p_tune.add_argument("--cv-m", type=int, default=None)
    p_tune.add_argument("--cv-test", type=int, default=None)
    p_tune.set_defaults(func=cmd_tune)

    p_sel = sub.add_parser("select", help="choose the number of components by BIC")
    _add_common(p_sel)
    p_sel.add_argument("--method", choices=["hom", "het", "conc", "conk"], default="conc")
    p_sel.add_argument("--g-range", type=_parse_g_range, default=range(1, 6), help="A..B (default 1..5)")
    p_sel.add_argument("--k", type=_parse_k, default="n5")
    p_sel.add_argument("--grid", default=None)
    p_sel.add_argument("--cv-m", type=int, default=None)
    p_sel.add_argument("--cv-test", type=int, default=None)
    p_sel.add_argument("--bic", choices=sorted(_BIC_FLAGS), default=None, help="selection criterion (default: modified for constrained methods)")
    p_sel.add_argument("--bic-coef-count", choices=[PER_GROUP, LITERAL], default=PER_GROUP)
    p_sel.set_defaults(func=cmd_select)

    p_sim = sub.add_parser("simulate", help="run the Monte Carlo study")
    _add_common(p_sim, with_input=False)
    p_sim.add_argument("--scenario", default=None, help="scenario name; see --list-scenarios")
    p_sim.add_argument("--n", type=int, default=100, choices=[100, 200])
    p_sim.add_argument("--reps", type=int, default=50, help="replications (paper setting: 250)")
    p_sim.add_argument("--methods", default="hom,het,conc,conk")
    p_sim.add_argument("--mode", choices=["fixed", "select"], default="fixed")
    p_sim.add_argument("--k", type=_parse_k, default="n5")
    p_sim.add_argument("--grid", default=None)
    p_sim.add_argument("--bic", choices=sorted(_BIC_FLAGS), default=None)
    p_sim.add_argument("--bic-coef-count", choices=[PER_GROUP, LITERAL], default=PER_GROUP)
    p_sim.add_argument("--list-scenarios", action="store_true")
    p_sim.set_defaults(func=cmd_simulate)
    return parser


def _emit(payload, out_path) -> None:
    text = json.dumps(payload, indent=2) + "\n"
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        payload = args.func(args)
    except (ValueError, OSError, RuntimeError, KeyError) as exc:
        _log(f"error: {exc}")
        return 1
    if payload is not None:
        _emit(payload, args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
