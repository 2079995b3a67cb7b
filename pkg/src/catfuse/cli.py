"""Command line front end: fit, path, cv, simulate.

All outputs are self-describing (resolved config, schema_version, package
version embedded) and byte-identical across reruns with the same inputs.
Files are written atomically: temp file in the target directory, then
os.replace. Errors print one JSON object to stderr and exit 1.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Dict, List, Optional

import numpy as np

from . import __version__
from .coding import build_augmented
from .datamodel import Dataset, ingest_csv, load_schema
from .errors import CatfuseError
from .selection import (
    CvConfig,
    build_weights,
    intercept_for,
    kfold_cv,
)
from .simlab import SimReport, run_study
from .solver import PathResult, path
from .structure import degrees_of_freedom, extract_clusters, refit

SCHEMA_VERSION = 1


# ---------------------------------------------------------------------------
# output plumbing
# ---------------------------------------------------------------------------

def _atomic_write(path_out: str, text: str) -> None:
    tmp = path_out + ".tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path_out)


def _json_text(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _fmt(x: float) -> str:
    return repr(float(x))


def _config_dict(args: argparse.Namespace, keys: List[str]) -> Dict:
    cfg = {"command": args.command, "schema_version": SCHEMA_VERSION, "version": __version__}
    for k in keys:
        cfg[k] = getattr(args, k)
    return cfg


def _resolve_s_ratio(raw: str) -> float:
    """A number, or a path to a cv chosen.json file."""
    try:
        return float(raw)
    except ValueError:
        with open(raw, encoding="utf-8") as fh:
            return float(json.load(fh)["chosen_s_ratio"])


def _load_dataset(args: argparse.Namespace) -> Dataset:
    schemas = load_schema(args.schema)
    return ingest_csv(args.data, schemas, response_column=args.response)


def _full_path(ds: Dataset, args: argparse.Namespace) -> PathResult:
    ws = build_weights(ds, args.adaptive, args.frequency, args.spatial_h)
    return path(build_augmented(ds, ws, args.gamma), args.grid)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

_FIT_KEYS = ["data", "schema", "response", "adaptive", "frequency", "spatial_h",
             "gamma", "grid", "s_ratio", "refit"]


def cmd_fit(args: argparse.Namespace) -> int:
    cfg = _config_dict(args, _FIT_KEYS)
    ds = _load_dataset(args)
    s_req = _resolve_s_ratio(args.s_ratio)
    pr = _full_path(ds, args)
    sol = pr.solution_at(s_req)
    part = extract_clusters(sol.beta, ds.schemas)
    beta = sol.beta
    if args.refit:
        rr = refit(ds, part)
        beta, part = rr.beta, rr.partition
        intercept = rr.intercept
    else:
        intercept = intercept_for(beta, ds)
    df = degrees_of_freedom(part)

    os.makedirs(args.out, exist_ok=True)
    coeff = {
        "schema_version": SCHEMA_VERSION,
        "version": __version__,
        "config": cfg,
        "intercept": float(intercept),
        "coefficients": {n: [float(v) for v in beta[n]] for n in (s.name for s in ds.schemas)},
        "levels": {s.name: list(s.levels) for s in ds.schemas},
        "s_ratio_requested": s_req,
        "s_ratio_used": float(sol.s_ratio),
        "lambda": float(sol.lam),
        "df": df,
        "delta": float(sol.precision.delta),
        "bound": float(sol.precision.bound),
    }
    _atomic_write(os.path.join(args.out, "coefficients.json"), _json_text(coeff))
    part_doc = {
        "schema_version": SCHEMA_VERSION,
        "version": __version__,
        "config": cfg,
        "df": df,
        "partition": part.to_json(),
    }
    _atomic_write(os.path.join(args.out, "partition.json"), _json_text(part_doc))

    lines = [
        f"catfuse fit v{__version__}",
        "config: " + json.dumps(cfg, sort_keys=True),
        f"n={ds.n} factors={len(ds.schemas)} q={pr.solutions[0].theta.size}",
        f"lambda_max={_fmt(pr.lambda_max)}",
        f"s_ratio requested={_fmt(s_req)} used={_fmt(sol.s_ratio)} lambda={_fmt(sol.lam)}",
        f"delta={_fmt(sol.precision.delta)} bound={_fmt(sol.precision.bound)} "
        f"satisfied={sol.precision.satisfied}",
        f"df={df}",
    ]
    for fp in part.factors:
        lines.append(
            f"{fp.name}: clusters={[list(c) for c in fp.clusters]} "
            f"coefficients={[float(c) for c in fp.coefficients]}"
        )
    _atomic_write(os.path.join(args.out, "fit.log"), "\n".join(lines) + "\n")
    return 0


_PATH_KEYS = ["data", "schema", "response", "adaptive", "frequency", "spatial_h",
              "gamma", "grid"]


def cmd_path(args: argparse.Namespace) -> int:
    cfg = _config_dict(args, _PATH_KEYS)
    ds = _load_dataset(args)
    pr = _full_path(ds, args)

    cols = []
    for sch in ds.schemas:
        cols.extend(f"{sch.name}:{lvl}" for lvl in sch.levels[1:])
    header = ["s_ratio", "lambda"] + cols + ["df", "delta", "bound"]
    rows = [f"# config: {json.dumps(cfg, sort_keys=True)}", ",".join(header)]
    # rows run from the unpenalized end (s_ratio 1, the OLS fit) down to 0
    for sol in reversed(pr.solutions):
        df = degrees_of_freedom(extract_clusters(sol.beta, ds.schemas))
        cells = [_fmt(sol.s_ratio), _fmt(sol.lam)]
        for sch in ds.schemas:
            cells.extend(_fmt(v) for v in sol.beta[sch.name][1:])
        cells.append(str(df))
        cells.append(_fmt(sol.precision.delta))
        cells.append(_fmt(sol.precision.bound))
        rows.append(",".join(cells))
    os.makedirs(args.out, exist_ok=True)
    _atomic_write(os.path.join(args.out, "path.csv"), "\n".join(rows) + "\n")
    return 0


_CV_KEYS = ["data", "schema", "response", "adaptive", "frequency", "spatial_h",
            "gamma", "grid", "k_folds", "seed", "refit"]


def cmd_cv(args: argparse.Namespace) -> int:
    cfg = _config_dict(args, _CV_KEYS)
    ds = _load_dataset(args)
    curve = kfold_cv(ds, CvConfig(
        k_folds=args.k_folds,
        grid_size=args.grid,
        seed=args.seed,
        adaptive=args.adaptive,
        use_frequency=args.frequency,
        refit_inside=args.refit,
        gamma=args.gamma,
        spatial_h=args.spatial_h,
    ))
    header = ["s_ratio", "mean_score"] + [f"fold_{k + 1}" for k in range(args.k_folds)]
    rows = [f"# config: {json.dumps(cfg, sort_keys=True)}", ",".join(header)]
    for g, s in enumerate(curve.s_grid):
        cells = [_fmt(s), _fmt(curve.mean_score[g])]
        cells.extend(_fmt(v) for v in curve.fold_scores[g])
        rows.append(",".join(cells))
    os.makedirs(args.out, exist_ok=True)
    _atomic_write(os.path.join(args.out, "cv.csv"), "\n".join(rows) + "\n")
    chosen = {
        "schema_version": SCHEMA_VERSION,
        "version": __version__,
        "config": cfg,
        "chosen_s_ratio": float(curve.chosen_s_ratio),
        "mean_score_at_chosen": float(np.min(curve.mean_score)),
        "k_folds": curve.k_folds,
        "seed": curve.seed,
    }
    _atomic_write(os.path.join(args.out, "chosen.json"), _json_text(chosen))
    return 0


_SIM_KEYS = ["scenario", "replicates", "variants", "k_folds", "grid", "gamma", "seed"]


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _config_dict(args, _SIM_KEYS)
    report = run_study(
        args.scenario,
        args.variants,
        replicates=args.replicates,
        seed=args.seed,
        k_folds=args.k_folds,
        grid_size=args.grid,
        gamma=args.gamma,
    )
    header = ["replicate", "variant"] + list(SimReport.METRICS)
    rows = [f"# config: {json.dumps(cfg, sort_keys=True)}", ",".join(header)]
    for rec in report.records:
        cells = [str(rec.replicate), rec.variant]
        for m in SimReport.METRICS:
            v = getattr(rec, m)
            cells.append(str(v) if isinstance(v, int) else _fmt(v))
        rows.append(",".join(cells))
    os.makedirs(args.out, exist_ok=True)
    _atomic_write(os.path.join(args.out, "simreport.csv"), "\n".join(rows) + "\n")
    summary = {
        "schema_version": SCHEMA_VERSION,
        "version": __version__,
        "config": cfg,
        "scenario": report.scenario,
        "replicates": args.replicates,
        "summary": report.summary(),
    }
    _atomic_write(os.path.join(args.out, "summary.json"), _json_text(summary))
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _add_data_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True, help="CSV with response and factor columns")
    p.add_argument("--schema", required=True, help="JSON factor schema file")
    p.add_argument("--response", default="y", help="response column name (default y)")


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--adaptive", action="store_true",
                   help="scale weights by inverse OLS differences")
    p.add_argument("--frequency", action="store_true",
                   help="include class-frequency terms in the weights")
    p.add_argument("--spatial-h", type=float, default=None, dest="spatial_h",
                   help="kernel bandwidth for factors with spatial coordinates")
    p.add_argument("--gamma", type=float, default=1e10,
                   help="restriction penalty (default 1e10, i.e. sqrt(gamma)=1e5)")
    p.add_argument("--grid", type=int, default=100, help="grid points (default 100)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="catfuse",
        description="Fusion and selection for categorical predictors "
                    "by difference-penalized least squares.",
    )
    ap.add_argument("--version", action="version", version=f"catfuse {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="single fit at a given s/s_max")
    _add_data_flags(p)
    _add_model_flags(p)
    p.add_argument("--s-ratio", required=True, dest="s_ratio",
                   help="target s/s_max in [0,1], or path to a cv chosen.json")
    p.add_argument("--refit", action="store_true",
                   help="refit cluster means by OLS after structure discovery")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("path", help="export the whole coefficient path as CSV")
    _add_data_flags(p)
    _add_model_flags(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_path)

    p = sub.add_parser("cv", help="K-fold cross-validation over the s/s_max grid")
    _add_data_flags(p)
    _add_model_flags(p)
    p.add_argument("--k-folds", type=int, default=5, dest="k_folds")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--refit", action="store_true",
                   help="score refitted cluster means instead of penalized fits")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("simulate", help="run a simulation study")
    p.add_argument("--scenario", required=True, help="S1, S2 or S3")
    p.add_argument("--replicates", type=int, default=100)
    p.add_argument("--variants", nargs="+",
                   default=["ols", "stdrd", "stdrd+rf", "adapt", "adapt+rf"],
                   help="estimator labels: ols, stdrd, adapt, with +rf / -nf suffixes")
    p.add_argument("--k-folds", type=int, default=5, dest="k_folds")
    p.add_argument("--grid", type=int, default=100)
    p.add_argument("--gamma", type=float, default=1e10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CatfuseError as e:
        print(json.dumps(e.as_dict(), sort_keys=True), file=sys.stderr)
        return 1
    except (ValueError, OSError) as e:
        print(json.dumps({"error": type(e).__name__, "message": str(e)},
                         sort_keys=True), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
