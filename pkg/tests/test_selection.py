from __future__ import annotations

import numpy as np
import pytest

from catfuse.coding import build_augmented
from catfuse.datamodel import Dataset, FactorSchema
from catfuse.errors import FoldRankDeficient
from catfuse.selection import (
    CvConfig,
    build_weights,
    compute_fold_paths,
    fold_assignment,
    information_criterion,
    intercept_for,
    kfold_cv,
    predicted_effects,
    score_folds,
)
from catfuse.solver import path
from catfuse.structure import DEFAULT_CLUSTER_TOL, degrees_of_freedom, extract_clusters

from conftest import toy_mixed_ds


def test_fold_assignment_partitions():
    folds = fold_assignment(23, 5, seed=3)
    assert len(folds) == 5
    sizes = sorted(len(f) for f in folds)
    assert max(sizes) - min(sizes) <= 1
    joined = np.sort(np.concatenate(folds))
    assert np.array_equal(joined, np.arange(23))
    for f in folds:
        assert np.all(np.diff(f) > 0)


def test_fold_assignment_deterministic():
    a = fold_assignment(40, 4, seed=9)
    b = fold_assignment(40, 4, seed=9)
    c = fold_assignment(40, 4, seed=10)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    assert any(not np.array_equal(x, y) for x, y in zip(a, c))


def test_fold_assignment_validation():
    with pytest.raises(ValueError):
        fold_assignment(10, 1, seed=0)
    with pytest.raises(ValueError):
        fold_assignment(5, 3, seed=0)


def test_predicted_effects_and_intercept():
    ds = toy_mixed_ds(seed=20)
    beta = {"a": np.array([0.0, 1.0, 1.0, -2.0]),
            "b": np.array([0.0, 2.0, 2.0]),
            "c": np.array([0.0, 0.5])}
    eff = predicted_effects(beta, ds)
    i = 5
    expect = beta["a"][ds.codes[i, 0]] + beta["b"][ds.codes[i, 1]] + beta["c"][ds.codes[i, 2]]
    assert eff[i] == pytest.approx(expect)
    alpha = intercept_for(beta, ds)
    assert alpha == pytest.approx(float(ds.y.mean() - eff.mean()))


def test_kfold_cv_shapes_and_chosen_rule():
    ds = toy_mixed_ds(seed=21, n=150)
    cfg = CvConfig(k_folds=5, grid_size=40, seed=2, adaptive=True,
                   use_frequency=True, refit_inside=False)
    curve = kfold_cv(ds, cfg)
    assert curve.s_grid.shape == (40,)
    assert curve.fold_scores.shape == (40, 5)
    assert np.allclose(curve.mean_score, curve.fold_scores.mean(axis=1))
    first_min = int(np.argmin(curve.mean_score))
    assert curve.chosen_s_ratio == curve.s_grid[first_min]
    assert curve.s_grid[0] == 0.0 and curve.s_grid[-1] == 1.0


def test_cv_flat_scores_choose_smallest_s():
    # constant response: every fit predicts the fold-train mean, so the
    # curve is flat and the tie resolves to the first (smallest) s
    schemas = (FactorSchema("g", "nominal", ("a", "b", "c")),)
    rng = np.random.default_rng(0)
    codes = rng.integers(0, 3, 60)[:, None]
    ds = Dataset(np.full(60, 5.0), codes, schemas)
    curve = kfold_cv(ds, CvConfig(k_folds=4, grid_size=20, seed=1))
    assert curve.chosen_s_ratio == 0.0


def test_cv_refit_scoring_differs():
    ds = toy_mixed_ds(seed=22, n=180)
    fits = compute_fold_paths(ds, 4, 5, True, True, 1e10, 30)
    s_grid, plain = score_folds(fits, 30, refit_inside=False)
    _, refitted = score_folds(fits, 30, refit_inside=True)
    assert plain.shape == refitted.shape == (30, 4)
    assert not np.allclose(plain, refitted)
    # at the unpenalized end both scorers see the saturated model
    assert np.allclose(plain[-1], refitted[-1], atol=1e-6)


def test_fold_rank_deficiency_reports_fold():
    schemas = (FactorSchema("g", "nominal", ("a", "b", "c")),)
    codes = np.array([2] + [0, 1] * 10)[:, None]   # level c observed once
    rng = np.random.default_rng(3)
    ds = Dataset(rng.normal(size=21), codes, schemas)
    # the fold holding the single level-c row trains without it; frequency
    # weights are undefined there
    with pytest.raises(FoldRankDeficient) as ei:
        compute_fold_paths(ds, 3, 0, False, True, 1e10, 10)
    assert 0 <= ei.value.fold < 3
    # adaptive weights fail the same way through the training OLS
    with pytest.raises(FoldRankDeficient):
        compute_fold_paths(ds, 3, 0, True, False, 1e10, 10)


def test_information_criterion_recomputation():
    ds = toy_mixed_ds(seed=23)
    ws = build_weights(ds, adaptive=False, use_frequency=True)
    pr = path(build_augmented(ds, ws), 25)
    aic = information_criterion(ds, pr, "AIC")
    bic = information_criterion(ds, pr, "BIC")
    assert aic.shape == bic.shape == (25,)
    # recompute one point by hand
    g = 12
    sol = pr.solutions[g]
    alpha = intercept_for(sol.beta, ds)
    rss = float(np.sum((ds.y - alpha - predicted_effects(sol.beta, ds)) ** 2))
    df = degrees_of_freedom(extract_clusters(sol.beta, ds.schemas, DEFAULT_CLUSTER_TOL))
    assert aic[g] == pytest.approx(ds.n * np.log(rss / ds.n) + 2 * df)
    assert bic[g] == pytest.approx(ds.n * np.log(rss / ds.n) + np.log(ds.n) * df)
    with pytest.raises(ValueError):
        information_criterion(ds, pr, "DIC")


def test_bic_penalizes_harder_than_aic():
    ds = toy_mixed_ds(seed=24)
    ws = build_weights(ds, adaptive=False, use_frequency=False)
    pr = path(build_augmented(ds, ws), 20)
    aic = information_criterion(ds, pr, "AIC")
    bic = information_criterion(ds, pr, "BIC")
    dfs = np.array([
        degrees_of_freedom(extract_clusters(s.beta, ds.schemas)) for s in pr.solutions
    ])
    assert np.allclose(bic - aic, (np.log(ds.n) - 2.0) * dfs)
