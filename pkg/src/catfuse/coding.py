"""Design matrices and parameter transforms.

Dummy and split coding, the first-difference transform U and its inverse,
the pairwise-difference parameterization θ with its restriction matrix A,
and assembly of the augmented least-squares problem whose plain L1 solution
approximates the difference-penalized fit.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .datamodel import Dataset, FactorSchema
from .errors import DegenerateFactor, NonPositiveGamma, NonPositiveWeight, NotOrdinal

DEFAULT_SQRT_GAMMA = 1e5


# ---------------------------------------------------------------------------
# layout of the theta vector
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FactorBlock:
    """One factor's slice of the global θ vector."""

    name: str
    kind: str              # 'nominal' (includes binary) or 'ordinal'
    k: int                 # non-reference level count
    offset: int            # start column in θ
    pairs: Tuple[Tuple[int, int], ...]  # (i, j) differences; ordinal: (i, i-1)

    @property
    def length(self) -> int:
        return len(self.pairs)

    @property
    def slice(self) -> slice:
        return slice(self.offset, self.offset + self.length)


@dataclass(frozen=True)
class ThetaLayout:
    """Ordered factor blocks plus global sizes.

    Nominal blocks carry all pairs (i, j), i > j >= 0, in the order
    (1,0),(2,0),...,(k,0),(2,1),...,(k,k-1); block length (k+1)k/2.
    Ordinal blocks carry the adjacent differences δ_i, length k.
    """

    blocks: Tuple[FactorBlock, ...]

    @property
    def q(self) -> int:
        return sum(b.length for b in self.blocks)

    @property
    def r(self) -> int:
        """Restriction row count: (k-1)k/2 per nominal factor with k >= 2."""
        return sum((b.k - 1) * b.k // 2 for b in self.blocks
                   if b.kind == "nominal" and b.k >= 2)

    def block(self, name: str) -> FactorBlock:
        for b in self.blocks:
            if b.name == name:
                return b
        raise KeyError(name)


def nominal_pairs(k: int) -> List[Tuple[int, int]]:
    return [(i, j) for j in range(k) for i in range(j + 1, k + 1)]


def theta_layout(schemas: Sequence[FactorSchema]) -> ThetaLayout:
    blocks = []
    offset = 0
    for sch in schemas:
        if sch.penalty_scale == "nominal":
            pairs = tuple(nominal_pairs(sch.k))
            kind = "nominal"
        else:
            pairs = tuple((i, i - 1) for i in range(1, sch.k + 1))
            kind = "ordinal"
        blocks.append(FactorBlock(sch.name, kind, sch.k, offset, pairs))
        offset += len(pairs)
    return ThetaLayout(tuple(blocks))


# ---------------------------------------------------------------------------
# dummy / split coding
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DesignBundle:
    """Centered coded design with bookkeeping to undo the centering.

    X is the centered matrix actually used for fitting; the raw design is
    X + column_means.
    """

    X: np.ndarray
    column_map: Tuple[Tuple[str, Tuple[str, int]], ...]
    y_centered: np.ndarray
    y_mean: float
    column_means: np.ndarray

    @property
    def p(self) -> int:
        return self.X.shape[1]


def _raw_dummy_columns(ds: Dataset, l: int) -> np.ndarray:
    sch = ds.schemas[l]
    cols = np.zeros((ds.n, sch.k))
    for i in range(1, sch.k + 1):
        cols[:, i - 1] = ds.codes[:, l] == i
    return cols


def dummy_design(ds: Dataset) -> DesignBundle:
    """0/1 coding, one column per non-reference level, centered columns.

    The intercept is carried by the centering of y and X and is never
    penalized.
    """
    blocks = []
    cmap = []
    for l, sch in enumerate(ds.schemas):
        if sch.k < 1:
            raise DegenerateFactor(sch.name, sch.k + 1)
        blocks.append(_raw_dummy_columns(ds, l))
        cmap.extend((sch.name, ("dummy", i)) for i in range(1, sch.k + 1))
    X = np.hstack(blocks) if blocks else np.zeros((ds.n, 0))
    means = X.mean(axis=0)
    return DesignBundle(
        X=X - means,
        column_map=tuple(cmap),
        y_centered=ds.y - ds.y.mean(),
        y_mean=float(ds.y.mean()),
        column_means=means,
    )


def split_design(ds: Dataset, factor: str) -> Tuple[np.ndarray, Tuple[Tuple[str, Tuple[str, int]], ...]]:
    """Threshold coding for an ordinal factor: column i indicates level >= i.

    Returns raw (uncentered) columns and their column map entries.
    """
    l = ds.factor_index(factor)
    sch = ds.schemas[l]
    if sch.scale != "ordinal":
        raise NotOrdinal(factor, sch.scale)
    cols = np.zeros((ds.n, sch.k))
    for i in range(1, sch.k + 1):
        cols[:, i - 1] = ds.codes[:, l] >= i
    cmap = tuple((sch.name, ("split", i)) for i in range(1, sch.k + 1))
    return cols, cmap


def u_transform(beta: np.ndarray) -> np.ndarray:
    """First differences δ_i = β_i − β_{i−1} with β_0 = 0."""
    beta = np.asarray(beta, dtype=float)
    return np.diff(beta, prepend=0.0)


def u_back_transform(delta: np.ndarray) -> np.ndarray:
    """Cumulative sums: β_i = Σ_{s<=i} δ_s."""
    return np.cumsum(np.asarray(delta, dtype=float))


# ---------------------------------------------------------------------------
# augmented problem
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AugmentedProblem:
    """All pieces of the stacked L1 problem on (ỹ, Z̃).

    Z_data holds the centered data rows, already rescaled per-column by 1/w
    so the solver applies a unit-weight penalty to θ̃ = Wθ. A_scaled holds
    the restriction rows under the same column rescaling, without the √γ
    factor; A_raw keeps the ±1 pattern for precision diagnostics.
    """

    Z_data: np.ndarray
    A_scaled: np.ndarray
    A_raw: np.ndarray
    y_centered: np.ndarray
    y_mean: float
    gamma: float
    layout: ThetaLayout
    weight_values: np.ndarray
    column_means: np.ndarray

    @property
    def sqrt_gamma(self) -> float:
        return float(np.sqrt(self.gamma))

    @property
    def q(self) -> int:
        return self.Z_data.shape[1]

    @property
    def r(self) -> int:
        return self.A_raw.shape[0]

    @property
    def Z_tilde(self) -> np.ndarray:
        return np.vstack([self.Z_data, self.sqrt_gamma * self.A_scaled])

    @property
    def y_tilde(self) -> np.ndarray:
        return np.concatenate([self.y_centered, np.zeros(self.r)])

    @property
    def A(self) -> np.ndarray:
        return self.A_scaled


def restriction_rows(layout: ThetaLayout) -> np.ndarray:
    """Rows encoding θ_{i0} − θ_{j0} − θ_{ij} = 0 for every nominal (i,j), j >= 1."""
    q = layout.q
    rows = []
    for b in layout.blocks:
        if b.kind != "nominal" or b.k < 2:
            continue
        col_of = {pair: b.offset + c for c, pair in enumerate(b.pairs)}
        for (i, j) in b.pairs:
            if j == 0:
                continue
            row = np.zeros(q)
            row[col_of[(i, 0)]] = 1.0
            row[col_of[(j, 0)]] = -1.0
            row[col_of[(i, j)]] = -1.0
            rows.append(row)
    if not rows:
        return np.zeros((0, q))
    return np.array(rows)


def build_augmented(ds: Dataset, weights, gamma: float = DEFAULT_SQRT_GAMMA ** 2) -> AugmentedProblem:
    """Assemble the augmented problem for the full factor set.

    Nominal blocks contribute Z = (X | 0) plus restriction rows; ordinal
    blocks contribute centered split-coded columns and no restrictions.
    `weights` is a WeightSet aligned with theta_layout(ds.schemas).
    """
    if not (gamma > 0) or not np.isfinite(gamma):
        raise NonPositiveGamma(f"gamma must be positive and finite, got {gamma}")
    w = np.asarray(weights.values, dtype=float)
    layout = theta_layout(ds.schemas)
    if w.shape != (layout.q,):
        raise NonPositiveWeight(
            f"weight vector has shape {w.shape}, layout expects ({layout.q},)"
        )
    if np.any(~np.isfinite(w)) or np.any(w <= 0):
        raise NonPositiveWeight("all penalty weights must be finite and > 0")

    n = ds.n
    Z = np.zeros((n, layout.q))
    for l, (sch, b) in enumerate(zip(ds.schemas, layout.blocks)):
        if b.kind == "nominal":
            Z[:, b.offset:b.offset + b.k] = _raw_dummy_columns(ds, l)
            # remaining block columns stay zero: Z = (X | 0)
        else:
            Z[:, b.slice] = split_design(ds, sch.name)[0]
    means = Z.mean(axis=0)
    Zc = Z - means
    A_raw = restriction_rows(layout)
    return AugmentedProblem(
        Z_data=Zc / w,
        A_scaled=A_raw / w,
        A_raw=A_raw,
        y_centered=ds.y - ds.y.mean(),
        y_mean=float(ds.y.mean()),
        gamma=float(gamma),
        layout=layout,
        weight_values=w.copy(),
        column_means=means,
    )


# ---------------------------------------------------------------------------
# helpers shared by tests and structure extraction
# ---------------------------------------------------------------------------

def induced_theta(layout: ThetaLayout, beta: Dict[str, np.ndarray]) -> np.ndarray:
    """θ implied by per-level coefficients: θ_ij = β_i − β_j, ordinal δ = Uβ.

    `beta[name]` is the full per-level vector (length k+1, reference entry 0).
    """
    theta = np.zeros(layout.q)
    for b in layout.blocks:
        bl = np.asarray(beta[b.name], dtype=float)
        if bl.shape != (b.k + 1,):
            raise ValueError(
                f"factor {b.name!r}: expected {b.k + 1} per-level coefficients"
            )
        if b.kind == "nominal":
            for c, (i, j) in enumerate(b.pairs):
                theta[b.offset + c] = bl[i] - bl[j]
        else:
            theta[b.slice] = u_transform(bl[1:])
    return theta
