"""Penalized solvers and regularization paths.

The augmented problem minimizes ||y − Xθ||² + γ||Aθ||² + λΣ|θ_j| (the A
block stacked as √γ·A rows makes this a plain L1 problem on (ỹ, Z̃)). At
γ = 1e10 the quadratic is extremely stiff along restriction directions:
plain cyclic coordinate descent moves O(λ/γ) per sweep there and meets any
per-sweep movement threshold long before reaching the optimum. Solutions
are therefore driven by an active-set method whose inner step solves the
symmetric saddle-point system

    [ 2·Xₛ'Xₛ   Aₛ' ] [θₛ]   [ 2Xₛ'y − λσ ]
    [   Aₛ   −I/(2γ)] [ v ] = [     0      ]

(v = 2γAθₛ), which stays well conditioned for any γ, with Lawson–Hanson
style sign handling. Coordinate-descent sweeps remain as the final polish
and supply the documented convergence criterion (max coefficient change
< 1e−10); KKT conditions are verified at every accepted solution and
NotConverged is raised otherwise, never swallowed.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .coding import AugmentedProblem, ThetaLayout, u_back_transform
from .errors import LayoutMismatch, NotConverged, RankDeficient

CD_TOL = 1e-10
CD_MAX_SWEEPS = 100_000
KKT_TOL = 1e-6
PRECISION_SLACK = 1e-12
DEFAULT_GRID_SIZE = 100
GRID_RATIO = 1e-4   # smallest positive grid λ relative to λ_max

_EPS = np.finfo(float).eps


def soft_threshold(x: float, t: float) -> float:
    if x > t:
        return x - t
    if x < -t:
        return x + t
    return 0.0


# ---------------------------------------------------------------------------
# problem core: data block + restriction block, shared precomputations
# ---------------------------------------------------------------------------

class _Core:
    """One quadratic ||y − Xθ||² + γ||Aθ||² with cached Gram pieces."""

    def __init__(self, X: np.ndarray, A: np.ndarray, y: np.ndarray, gamma: float):
        self.X = X
        self.A = A
        self.y = y
        self.gamma = float(gamma)
        self.n, self.q = X.shape
        self.r = A.shape[0]
        self.XtX = X.T @ X
        self.Xty = X.T @ y
        if self.r:
            self.B = np.vstack([X, np.sqrt(self.gamma) * A])
            self.y_til = np.concatenate([y, np.zeros(self.r)])
        else:
            self.B = X
            self.y_til = y
        self.norm_cols = np.einsum("ij,ij->j", self.B, self.B)
        self._absB = np.abs(self.B)
        self._abs_y = np.abs(self.y_til)

    def grad(self, theta: np.ndarray) -> np.ndarray:
        g = 2.0 * (self.XtX @ theta - self.Xty)
        if self.r:
            g += (2.0 * self.gamma) * (self.A.T @ (self.A @ theta))
        return g

    def kkt_floor(self, theta: np.ndarray) -> np.ndarray:
        # Rounding-error bound for the gradient evaluation; at γ ~ 1e10 the
        # float64 quantization of θ alone moves augmented-column gradients
        # by ~γ·ulp, far beyond the generic tolerance.
        return 8.0 * _EPS * (self._absB.T @ (self._absB @ np.abs(theta) + self._abs_y))

    def objective(self, theta: np.ndarray, lam: float) -> float:
        res = self.y - self.X @ theta
        val = float(res @ res) + lam * float(np.abs(theta).sum())
        if self.r:
            a = self.A @ theta
            val += self.gamma * float(a @ a)
        return val

    # -- subspace solve ----------------------------------------------------

    def subspace_solve(self, S: np.ndarray, rhs_head: np.ndarray) -> np.ndarray:
        """Solve the fixed-sign stationarity system on columns S.

        rhs_head = 2Xₛ'y − λσ. Uses one iterative-refinement step; raises
        RankDeficient when the system is singular.
        """
        m = len(S)
        if self.r:
            As = self.A[:, S]
            keep = np.flatnonzero(np.any(As != 0.0, axis=1))
            As = As[keep]
        else:
            As = np.zeros((0, m))
        ra = As.shape[0]
        M = np.empty((m + ra, m + ra))
        M[:m, :m] = 2.0 * self.XtX[np.ix_(S, S)]
        M[:m, m:] = As.T
        M[m:, :m] = As
        M[m:, m:] = -np.eye(ra) / (2.0 * self.gamma) if ra else np.zeros((0, 0))
        rhs = np.concatenate([rhs_head, np.zeros(ra)])
        try:
            sol = np.linalg.solve(M, rhs)
            sol += np.linalg.solve(M, rhs - M @ sol)
            rel_res = np.linalg.norm(rhs - M @ sol) / max(np.linalg.norm(rhs), 1.0)
            if not np.isfinite(rel_res) or rel_res > 1e-6:
                raise np.linalg.LinAlgError("large residual")
        except np.linalg.LinAlgError:
            if self.r:
                raise RankDeficient("augmented subspace system is singular")
            sol, _, rank, _ = np.linalg.lstsq(M, rhs, rcond=None)
        if not np.all(np.isfinite(sol)):
            raise RankDeficient("subspace solve produced non-finite values")
        return sol[:m]


# ---------------------------------------------------------------------------
# active-set driver
# ---------------------------------------------------------------------------

_ADD_PER_ROUND = 10
_MAX_ROUNDS = 200
_MAX_INNER = 500


def _active_set_pass(core: _Core, theta: np.ndarray, lam: float) -> int:
    """Add KKT violators and re-solve subspace problems until none remain.

    Mutates theta in place; returns the number of subspace solves. Each
    accepted step decreases the objective (exact subspace minimizer, or a
    line-searched prefix of the move before the first sign crossing).
    """
    q = core.q
    sigma = np.sign(theta)
    n_solves = 0
    for _ in range(_MAX_ROUNDS):
        g = core.grad(theta)
        active = theta != 0.0
        viol = np.abs(g) - lam
        viol[active] = -np.inf
        # only violations beyond a fraction of the final tolerance matter
        tol_add = 0.25 * (KKT_TOL + core.kkt_floor(theta))
        candidates = np.flatnonzero(viol > tol_add)
        if candidates.size:
            order = candidates[np.argsort(viol[candidates])[::-1]][:_ADD_PER_ROUND]
            for j in order:
                active[j] = True
                sigma[j] = -np.sign(g[j])
        elif np.any(active) and n_solves == 0:
            pass        # warm start already sign-feasible: still re-solve once
        elif not candidates.size:
            return n_solves
        if not np.any(active):
            return n_solves
        for _inner in range(_MAX_INNER):
            S = np.flatnonzero(active)
            rhs_head = 2.0 * core.Xty[S] - lam * sigma[S]
            cand_S = core.subspace_solve(S, rhs_head)
            n_solves += 1
            if lam == 0.0:
                theta[:] = 0.0
                theta[S] = cand_S
                break
            flips = cand_S * sigma[S] < 0.0
            if not np.any(flips):
                theta[:] = 0.0
                theta[S] = cand_S
                break
            # walk toward the candidate, stop at the first zero crossing
            d = np.zeros(q)
            d[S] = cand_S - theta[S]
            cross = np.full(q, np.inf)
            for j in S:
                if theta[j] != 0.0 and np.sign(theta[j]) != np.sign(theta[j] + d[j]) and d[j] != 0.0:
                    cross[j] = -theta[j] / d[j]
                elif theta[j] == 0.0 and sigma[j] * d[j] < 0.0:
                    cross[j] = 0.0
            tmin = float(np.min(cross))
            if not np.isfinite(tmin):
                theta[:] = 0.0
                theta[S] = cand_S
                break
            tmin = min(max(tmin, 0.0), 1.0)
            theta += tmin * d
            dropped = cross <= tmin + 1e-15
            theta[dropped] = 0.0
            active[dropped] = False
            if not np.any(active):
                break
        else:
            raise NotConverged("active-set inner loop exceeded iteration cap")
    raise NotConverged("active-set driver exceeded round cap")


def _cd_polish(core: _Core, theta: np.ndarray, lam: float) -> Tuple[int, float]:
    """Cyclic coordinate-descent sweeps until max coefficient change < 1e−10.

    This is the documented convergence criterion; after the active-set pass
    it needs one or two sweeps. Each 1-d update exactly minimizes its
    section, so the objective never increases along sweeps.
    """
    B = core.B
    R = core.y_til - B @ theta
    half = lam / 2.0
    sweeps = 0
    max_delta = np.inf
    while sweeps < CD_MAX_SWEEPS:
        max_delta = 0.0
        for j in range(core.q):
            nc = core.norm_cols[j]
            if nc == 0.0:
                continue
            old = theta[j]
            col = B[:, j]
            tmp = col @ R + nc * old
            new = soft_threshold(tmp, half) / nc
            if new != old:
                R += (old - new) * col
                theta[j] = new
                delta = abs(new - old)
                if delta > max_delta:
                    max_delta = delta
        sweeps += 1
        if max_delta < CD_TOL:
            return sweeps, max_delta
    raise NotConverged(
        f"coordinate descent still moving {max_delta:.3e} after {CD_MAX_SWEEPS} sweeps"
    )


def _kkt_ok(core: _Core, theta: np.ndarray, lam: float) -> bool:
    g = core.grad(theta)
    tol = KKT_TOL + core.kkt_floor(theta)
    active = theta != 0.0
    ok_active = np.all(np.abs(g[active] + lam * np.sign(theta[active])) <= tol[active])
    ok_inactive = np.all(np.abs(g[~active]) <= lam + tol[~active])
    return bool(ok_active and ok_inactive)


def _solve_core(
    core: _Core,
    lam: float,
    warm_start: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, Dict[str, int]]:
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    theta = np.zeros(core.q) if warm_start is None else np.array(warm_start, dtype=float)
    if theta.shape != (core.q,):
        raise LayoutMismatch(f"warm start has shape {theta.shape}, expected ({core.q},)")
    total_solves = 0
    total_sweeps = 0
    if lam == 0.0:
        # every (nonzero) column active, no sign constraints
        S = np.flatnonzero(core.norm_cols > 0.0)
        if S.size:
            cand = core.subspace_solve(S, 2.0 * core.Xty[S])
            theta[:] = 0.0
            theta[S] = cand
            total_solves = 1
        else:
            theta[:] = 0.0
        sweeps, _ = _cd_polish(core, theta, lam)
        total_sweeps += sweeps
        if not _kkt_ok(core, theta, lam):
            raise NotConverged("KKT conditions violated at lambda = 0")
        return theta, {"solves": total_solves, "sweeps": total_sweeps}
    for attempt in range(8):
        total_solves += _active_set_pass(core, theta, lam)
        sweeps, _ = _cd_polish(core, theta, lam)
        total_sweeps += sweeps
        if _kkt_ok(core, theta, lam):
            return theta, {"solves": total_solves, "sweeps": total_sweeps}
    raise NotConverged(f"KKT conditions not met at lambda = {lam:g}")


# ---------------------------------------------------------------------------
# public generic interface
# ---------------------------------------------------------------------------

def solve_lasso(
    design: np.ndarray,
    response: np.ndarray,
    lam: float,
    warm_start: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Minimize (y − Xθ)'(y − Xθ) + λΣ|θ_j| for a generic dense design.

    Note the objective carries no 1/2 or 1/n factor, so the all-zero
    threshold is λ_max = 2·max_j |X_j'y|.
    """
    X = np.asarray(design, dtype=float)
    y = np.asarray(response, dtype=float)
    core = _Core(X, np.zeros((0, X.shape[1])), y, 0.0)
    theta, _ = _solve_core(core, float(lam), warm_start)
    return theta


def ista_oracle(
    design: np.ndarray,
    response: np.ndarray,
    lam: float,
    max_iter: int = 2_000_000,
) -> np.ndarray:
    """Independent proximal-gradient reference solver (verification only).

    Monotone ISTA with backtracking on the step size; stops when the
    objective decrease falls below 1e−14. Deliberately shares no code with
    solve_lasso beyond the soft-threshold scalar.
    """
    X = np.asarray(design, dtype=float)
    y = np.asarray(response, dtype=float)
    lam = float(lam)
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    n, p = X.shape
    XtX = X.T @ X
    Xty = X.T @ y
    theta = np.zeros(p)

    def f_smooth(t):
        r = y - X @ t
        return float(r @ r)

    def objective(t):
        return f_smooth(t) + lam * float(np.abs(t).sum())

    L = 2.0 * float(np.max(np.einsum("ij,ij->j", X, X))) if p else 1.0
    L = max(L, 1e-12)
    obj = objective(theta)
    for _ in range(max_iter):
        g = 2.0 * (XtX @ theta - Xty)
        f0 = f_smooth(theta)
        while True:
            step = theta - g / L
            cand = np.sign(step) * np.maximum(np.abs(step) - lam / L, 0.0)
            diff = cand - theta
            quad = f0 + float(g @ diff) + 0.5 * L * float(diff @ diff)
            if f_smooth(cand) <= quad + 1e-12 * abs(quad):
                break
            L *= 2.0
        theta = cand
        new_obj = objective(theta)
        if obj - new_obj < 1e-14:
            return theta
        obj = new_obj
    raise NotConverged(f"ISTA oracle did not stabilize within {max_iter} iterations")


# ---------------------------------------------------------------------------
# paths on the augmented problem
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PrecisionReport:
    """Restriction violation Δ = (Aθ̂)'(Aθ̂) and its theoretical bound."""

    delta: float
    bound: float

    @property
    def satisfied(self) -> bool:
        return self.delta <= self.bound + PRECISION_SLACK


@dataclass(frozen=True)
class PathSolution:
    lam: float
    s_ratio: float
    theta_scaled: np.ndarray          # solver coordinates θ̃ = Wθ
    theta: np.ndarray                 # original θ coordinates
    beta: Dict[str, np.ndarray]       # per factor, full per-level vector
    precision: PrecisionReport
    solves: int
    sweeps: int


@dataclass(frozen=True)
class PathResult:
    grid: Tuple[Tuple[float, float], ...]     # (lambda, s_ratio) pairs
    solutions: Tuple[PathSolution, ...]
    ols_theta_l1: float
    lambda_max: float
    ols_beta: Dict[str, np.ndarray]
    y_mean: float

    def solution_at(self, s_ratio: float) -> PathSolution:
        """Grid point with nearest s_ratio; ties take the sparser point."""
        ratios = np.array([s for _, s in self.grid])
        return self.solutions[int(np.argmin(np.abs(ratios - s_ratio)))]


def _lambda_max_from_core(core: _Core) -> float:
    # Per-column dots, matching the coordinate sweeps bit for bit: with
    # λ = λ_max every soft-threshold update then lands on exactly 0, so the
    # top of a path is the all-zero vector rather than rounding dust.
    best = 0.0
    for j in range(core.q):
        v = float(np.abs(core.B[:, j] @ core.y_til))
        if v > best:
            best = v
    return 2.0 * best


def lambda_max(problem: AugmentedProblem) -> float:
    """Smallest λ with all-zero solution: 2·max_j |Z̃_j·ỹ| (the restriction
    rows contribute nothing because ỹ is zero there)."""
    return _lambda_max_from_core(
        _Core(problem.Z_data, problem.A_scaled, problem.y_centered, problem.gamma)
    )


def back_transform(
    theta_scaled: np.ndarray,
    layout: ThetaLayout,
    weights,
) -> Dict[str, np.ndarray]:
    """Per-factor per-level coefficients from solver coordinates.

    Undoes the 1/w column rescaling, then reads nominal levels from the
    θ_{i0} entries and accumulates ordinal differences.
    """
    theta_scaled = np.asarray(theta_scaled, dtype=float)
    w = np.asarray(getattr(weights, "values", weights), dtype=float)
    if theta_scaled.shape != (layout.q,) or w.shape != (layout.q,):
        raise LayoutMismatch(
            f"theta has shape {theta_scaled.shape}, weights {w.shape}, "
            f"layout expects ({layout.q},)"
        )
    theta = theta_scaled / w
    out: Dict[str, np.ndarray] = {}
    for b in layout.blocks:
        full = np.zeros(b.k + 1)
        if b.kind == "nominal":
            full[1:] = theta[b.offset:b.offset + b.k]
        else:
            full[1:] = u_back_transform(theta[b.slice])
        out[b.name] = full
    return out


def _grid_lambdas(lam_max: float, grid_size: int) -> np.ndarray:
    if grid_size < 2:
        raise ValueError("grid_size must be >= 2")
    if lam_max <= 0:
        return np.zeros(grid_size)
    if grid_size == 2:
        return np.array([lam_max, 0.0])
    expo = np.linspace(0.0, 1.0, grid_size - 1)
    lams = lam_max * GRID_RATIO ** expo
    return np.concatenate([lams, [0.0]])


def path(problem: AugmentedProblem, grid_size: int = DEFAULT_GRID_SIZE) -> PathResult:
    """Solve along a λ grid from λ_max down to 0 with warm starts.

    s_ratio is the weighted penalty functional Σw|θ̂ differences| divided by
    its value at the unpenalized fit. A PrecisionReport accompanies every
    point; its bound uses the γ = 0 solution at the same λ.
    """
    w = problem.weight_values
    layout = problem.layout
    y = problem.y_centered

    # Unpenalized fit, solved in unit weights (the λ=0 solution does not
    # depend on the weights; capped adaptive weights would wreck the
    # conditioning of a weighted solve).
    unit_core = _Core(problem.Z_data * w, problem.A_raw, y, problem.gamma)
    theta_ls, ls_diag = _solve_core(unit_core, 0.0)
    theta_ls_scaled = theta_ls * w
    ols_l1 = float(np.abs(theta_ls_scaled).sum())
    ols_beta = back_transform(theta_ls_scaled, layout, w)

    core = _Core(problem.Z_data, problem.A_scaled, y, problem.gamma)
    plain_core = _Core(problem.Z_data, np.zeros((0, problem.q)), y, 0.0)

    lam_max = _lambda_max_from_core(core)
    lams = _grid_lambdas(lam_max, grid_size)

    solutions: List[PathSolution] = []
    grid: List[Tuple[float, float]] = []
    theta = np.zeros(problem.q)
    theta_plain = np.zeros(problem.q)
    for lam in lams:
        if lam == 0.0:
            theta = theta_ls_scaled.copy()
            diag = dict(ls_diag)
        else:
            theta, diag = _solve_core(core, lam, warm_start=theta)
        theta_orig = theta / w
        beta = back_transform(theta, layout, w)
        a_viol = problem.A_raw @ theta_orig
        delta = float(a_viol @ a_viol)
        if lam == 0.0:
            bound = 0.0
        else:
            theta_plain, _ = _solve_core(plain_core, lam, warm_start=theta_plain)
            bound = lam * (ols_l1 - float(np.abs(theta_plain).sum())) / problem.gamma
        s_ratio = float(np.abs(theta).sum() / ols_l1) if ols_l1 > 0 else 0.0
        report = PrecisionReport(delta=delta, bound=bound)
        solutions.append(
            PathSolution(
                lam=float(lam),
                s_ratio=s_ratio,
                theta_scaled=theta.copy(),
                theta=theta_orig,
                beta=beta,
                precision=report,
                solves=diag["solves"],
                sweeps=diag["sweeps"],
            )
        )
        grid.append((float(lam), s_ratio))
    return PathResult(
        grid=tuple(grid),
        solutions=tuple(solutions),
        ols_theta_l1=ols_l1,
        lambda_max=lam_max,
        ols_beta=ols_beta,
        y_mean=problem.y_mean,
    )
