"""Simulation scenarios, evaluation metrics, and study harness.

Three built-in scenarios:

S1  one nominal factor with 9 levels, 20 observations per level, class
    means (with intercept 1) stepping 0/2/4 in triples, noise sd 2.
S2  eight factors — nominal 8, nominal 8 (noise), nominal 4, nominal 4
    (noise), ordinal 8, ordinal 8 (noise), ordinal 4, ordinal 4 (noise) —
    40 dummy coefficients, n_train 500, n_test 1000, noise sd 1.
S3  S2 plus 4 nominal and 4 ordinal pure-noise factors with 6 uniform
    levels each.

Metrics follow the usual fusion-study conventions: coefficient MSE over
dummy coefficients, test-set MSEP, selection FPR/FNR over whole factors,
clustering FPR/FNR over coefficient differences within relevant factors.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .datamodel import Dataset, FactorSchema
from .errors import ShapeMismatch
from .coding import build_augmented
from .selection import (
    build_weights,
    compute_fold_paths,
    intercept_for,
    predicted_effects,
    score_folds,
)
from .solver import path
from .structure import (
    DEFAULT_CLUSTER_TOL,
    ClusterPartition,
    degrees_of_freedom,
    extract_clusters,
    refit,
)
from .weights import ols_coefficients

PROBS_8 = (0.1, 0.1, 0.2, 0.05, 0.2, 0.1, 0.2, 0.05)
PROBS_4 = (0.1, 0.4, 0.2, 0.3)
S1_EFFECTS = (0.0, 0.0, 0.0, 3.0, 3.0, 3.0, 6.0, 6.0, 6.0)


@dataclass(frozen=True)
class Scenario:
    name: str
    schemas: Tuple[FactorSchema, ...]
    beta_star: Dict[str, np.ndarray]     # full per-level vectors, ref entry 0
    alpha: float
    noise_sd: float
    probs: Tuple[Optional[Tuple[float, ...]], ...]   # None = balanced block design
    n_train: int
    n_test: int
    seed: int


def _levels(k1: int) -> Tuple[str, ...]:
    return tuple(str(i) for i in range(k1))


def make_scenario(name: str, seed: int = 0) -> Scenario:
    """Built-in scenario factory; names S1, S2, S3."""
    if name == "S1":
        sch = (FactorSchema("g", "nominal", _levels(9)),)
        return Scenario(
            name="S1",
            schemas=sch,
            beta_star={"g": np.array(S1_EFFECTS)},
            alpha=1.0,
            noise_sd=2.0,
            probs=(None,),
            n_train=180,
            n_test=180,
            seed=seed,
        )
    if name in ("S2", "S3"):
        specs = [
            ("nom8", "nominal", 8, PROBS_8, (0, 0, 1, 1, 1, 1, -2, -2)),
            ("nom8n", "nominal", 8, PROBS_8, None),
            ("nom4", "nominal", 4, PROBS_4, (0, 0, 2, 2)),
            ("nom4n", "nominal", 4, PROBS_4, None),
            ("ord8", "ordinal", 8, PROBS_8, (0, 0, 1, 1, 2, 2, 4, 4)),
            ("ord8n", "ordinal", 8, PROBS_8, None),
            ("ord4", "ordinal", 4, PROBS_4, (0, 0, -2, -2)),
            ("ord4n", "ordinal", 4, PROBS_4, None),
        ]
        if name == "S3":
            uniform6 = tuple([1.0 / 6] * 6)
            for i in range(1, 5):
                specs.append((f"xnom{i}", "nominal", 6, uniform6, None))
            for i in range(1, 5):
                specs.append((f"xord{i}", "ordinal", 6, uniform6, None))
        schemas = []
        beta_star = {}
        probs = []
        for fname, scale, k1, p, truth in specs:
            schemas.append(FactorSchema(fname, scale, _levels(k1)))
            beta_star[fname] = np.array(truth, dtype=float) if truth is not None else np.zeros(k1)
            probs.append(tuple(p))
        return Scenario(
            name=name,
            schemas=tuple(schemas),
            beta_star=beta_star,
            alpha=1.0,
            noise_sd=1.0,
            probs=tuple(probs),
            n_train=500,
            n_test=1000,
            seed=seed,
        )
    raise ValueError(f"unknown scenario {name!r}; expected S1, S2 or S3")


@dataclass(frozen=True)
class GeneratedData:
    train: Dataset
    test: Dataset
    beta_star: Dict[str, np.ndarray]
    true_partition: ClusterPartition


def _draw_codes(rng, scenario: Scenario, n: int) -> np.ndarray:
    cols = []
    for sch, p in zip(scenario.schemas, scenario.probs):
        if p is None:
            # balanced block design: equal counts per level, schema order
            reps = n // len(sch.levels)
            if reps * len(sch.levels) != n:
                raise ValueError("balanced design needs n divisible by level count")
            cols.append(np.repeat(np.arange(len(sch.levels)), reps))
        else:
            cols.append(rng.choice(len(sch.levels), size=n, p=np.array(p)))
    return np.column_stack(cols)


def generate(scenario: Scenario) -> GeneratedData:
    """Draw train and test sets; deterministic for a given scenario seed."""
    rng = np.random.default_rng(scenario.seed)
    out = []
    for n in (scenario.n_train, scenario.n_test):
        codes = _draw_codes(rng, scenario, n)
        mean = scenario.alpha + sum(
            scenario.beta_star[sch.name][codes[:, l]]
            for l, sch in enumerate(scenario.schemas)
        )
        y = mean + rng.normal(0.0, scenario.noise_sd, n)
        out.append(Dataset(y, codes, scenario.schemas))
    true_partition = extract_clusters(scenario.beta_star, scenario.schemas, tol=0.0)
    return GeneratedData(
        train=out[0], test=out[1], beta_star=scenario.beta_star, true_partition=true_partition
    )


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EvalMetrics:
    coef_mse: float
    selection_fpr: float
    selection_fnr: float
    clustering_fpr: float
    clustering_fnr: float


def _difference_pairs(sch: FactorSchema) -> List[Tuple[int, int]]:
    k1 = len(sch.levels)
    if sch.penalty_scale == "nominal":
        return [(i, j) for j in range(k1) for i in range(j + 1, k1)]
    return [(i, i - 1) for i in range(1, k1)]


def evaluate(
    beta_hat: Dict[str, np.ndarray],
    truth: Dict[str, np.ndarray],
    schemas: Sequence[FactorSchema],
    tol: float = DEFAULT_CLUSTER_TOL,
) -> EvalMetrics:
    """Score an estimate against the truth.

    "Nonzero" means outside the structure tolerance tol·max(1, max|β̂|), so
    penalized and refitted estimates are judged by the same rule. Selection
    rates are over whole factors; clustering rates over differences within
    relevant (non-noise) factors — all pairs for nominal factors, adjacent
    pairs for ordinal ones.
    """
    sq_err = []
    scale = 1.0
    for sch in schemas:
        bh = np.asarray(beta_hat[sch.name], dtype=float)
        bt = np.asarray(truth[sch.name], dtype=float)
        if bh.shape != bt.shape or bh.shape != (len(sch.levels),):
            raise ShapeMismatch(
                f"factor {sch.name!r}: estimate {bh.shape} vs truth {bt.shape}"
            )
        scale = max(scale, float(np.max(np.abs(bh))))
        sq_err.extend(((bh - bt)[1:] ** 2).tolist())
    thr = tol * scale

    sel_fp = sel_fn = n_noise = n_rel = 0
    clu_fp = clu_fn = n_zero_diff = n_nonzero_diff = 0
    for sch in schemas:
        bh = np.asarray(beta_hat[sch.name], dtype=float)
        bt = np.asarray(truth[sch.name], dtype=float)
        relevant = bool(np.any(bt != 0.0))
        selected = bool(np.any(np.abs(bh[1:]) > thr))
        if relevant:
            n_rel += 1
            if not selected:
                sel_fn += 1
            for (i, j) in _difference_pairs(sch):
                true_zero = bt[i] == bt[j]
                est_zero = abs(bh[i] - bh[j]) <= thr
                if true_zero:
                    n_zero_diff += 1
                    if not est_zero:
                        clu_fp += 1
                else:
                    n_nonzero_diff += 1
                    if est_zero:
                        clu_fn += 1
        else:
            n_noise += 1
            if selected:
                sel_fp += 1
    return EvalMetrics(
        coef_mse=float(np.mean(sq_err)),
        selection_fpr=sel_fp / n_noise if n_noise else 0.0,
        selection_fnr=sel_fn / n_rel if n_rel else 0.0,
        clustering_fpr=clu_fp / n_zero_diff if n_zero_diff else 0.0,
        clustering_fnr=clu_fn / n_nonzero_diff if n_nonzero_diff else 0.0,
    )


# ---------------------------------------------------------------------------
# study harness
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VariantConfig:
    label: str
    ols_only: bool = False
    adaptive: bool = False
    use_frequency: bool = True
    refit_after: bool = False


def parse_variant(label: str) -> VariantConfig:
    """Labels: "ols", or "stdrd"/"adapt" with optional "+rf" (refit after
    structure discovery) and "-nf" (drop class-frequency weight terms)."""
    if label == "ols":
        return VariantConfig(label=label, ols_only=True)
    base = label
    rf = "+rf" in base
    base = base.replace("+rf", "")
    nf = "-nf" in base
    base = base.replace("-nf", "")
    if base == "stdrd":
        adaptive = False
    elif base == "adapt":
        adaptive = True
    else:
        raise ValueError(f"unknown variant label {label!r}")
    return VariantConfig(
        label=label,
        adaptive=adaptive,
        use_frequency=not nf,
        refit_after=rf,
    )


@dataclass(frozen=True)
class ReplicateRecord:
    replicate: int
    variant: str
    coef_mse: float
    msep: float
    selection_fpr: float
    selection_fnr: float
    clustering_fpr: float
    clustering_fnr: float
    chosen_s_ratio: float
    df: int


@dataclass(frozen=True)
class SimReport:
    scenario: str
    records: Tuple[ReplicateRecord, ...]
    seed: int

    METRICS = (
        "coef_mse",
        "msep",
        "selection_fpr",
        "selection_fnr",
        "clustering_fpr",
        "clustering_fnr",
        "chosen_s_ratio",
        "df",
    )

    def summary(self) -> Dict[str, Dict[str, Dict[str, float]]]:
        """Per variant: median and mean of every metric, replicate-ordered."""
        out: Dict[str, Dict[str, Dict[str, float]]] = {}
        labels = []
        for rec in self.records:
            if rec.variant not in labels:
                labels.append(rec.variant)
        for label in labels:
            rows = [r for r in self.records if r.variant == label]
            stats = {}
            for m in self.METRICS:
                vals = np.array([getattr(r, m) for r in rows], dtype=float)
                stats[m] = {
                    "median": float(np.median(vals)),
                    "mean": float(np.mean(vals)),
                }
            out[label] = stats
        return out


def _fit_variant_on_full(
    data: GeneratedData,
    vc: VariantConfig,
    chosen_s: float,
    gamma: float,
    grid_size: int,
    cluster_tol: float,
):
    """Final fit at the CV-chosen penalty; returns (beta, partition, df)."""
    ws = build_weights(data.train, vc.adaptive, vc.use_frequency)
    pr = path(build_augmented(data.train, ws, gamma), grid_size)
    sol = pr.solution_at(chosen_s)
    part = extract_clusters(sol.beta, data.train.schemas, cluster_tol)
    beta = sol.beta
    if vc.refit_after:
        rf = refit(data.train, part)
        beta, part = rf.beta, rf.partition
    return beta, part, degrees_of_freedom(part), pr


def run_study(
    scenario_name: str,
    variants: Sequence[str],
    replicates: int,
    seed: int = 0,
    k_folds: int = 5,
    grid_size: int = 100,
    gamma: float = 1e10,
    cluster_tol: float = DEFAULT_CLUSTER_TOL,
    progress: bool = False,
) -> SimReport:
    """CV-tuned fits of every variant on shared per-replicate data.

    Replicate r uses scenario seed (seed + r); variants within a replicate
    see identical train/test draws, enabling paired comparisons. Variants
    sharing a weight configuration share fold paths (refit changes only the
    scoring), which roughly halves the cost of refit/no-refit contrasts.
    """
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    vcs = [parse_variant(v) for v in variants]
    records: List[ReplicateRecord] = []
    for rep in range(replicates):
        data = generate(make_scenario(scenario_name, seed=seed + rep))
        train, test = data.train, data.test
        fold_cache: Dict[Tuple[bool, bool], list] = {}
        for vc in vcs:
            if vc.ols_only:
                beta = ols_coefficients(train)
                part = extract_clusters(beta, train.schemas, cluster_tol)
                df = degrees_of_freedom(part)
                chosen_s = 1.0
            else:
                key = (vc.adaptive, vc.use_frequency)
                if key not in fold_cache:
                    fold_cache[key] = compute_fold_paths(
                        train, k_folds, seed + rep, vc.adaptive,
                        vc.use_frequency, gamma, grid_size,
                    )
                s_grid, scores = score_folds(
                    fold_cache[key], grid_size, vc.refit_after, cluster_tol
                )
                chosen_s = float(s_grid[int(np.argmin(scores.mean(axis=1)))])
                beta, part, df, _ = _fit_variant_on_full(
                    data, vc, chosen_s, gamma, grid_size, cluster_tol
                )
            m = evaluate(beta, data.beta_star, train.schemas, cluster_tol)
            alpha = intercept_for(beta, train)
            pred = alpha + predicted_effects(beta, test)
            msep = float(np.mean((test.y - pred) ** 2))
            records.append(
                ReplicateRecord(
                    replicate=rep,
                    variant=vc.label,
                    coef_mse=m.coef_mse,
                    msep=msep,
                    selection_fpr=m.selection_fpr,
                    selection_fnr=m.selection_fnr,
                    clustering_fpr=m.clustering_fpr,
                    clustering_fnr=m.clustering_fnr,
                    chosen_s_ratio=chosen_s,
                    df=df,
                )
            )
        if progress and (rep + 1) % 10 == 0:
            print(f"  replicate {rep + 1}/{replicates} done")
    return SimReport(scenario=scenario_name, records=tuple(records), seed=seed)
