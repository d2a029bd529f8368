"""Strictly convex flux QP: weighted linear objective plus squared-flux ridge.

Solves min theta.v[objective] + lam * ||v||^2 subject to S v = 0 and box
bounds on v.  A primal active-set method starts from a feasible vertex (found
by a zero-objective simplex solve) and alternates equality-constrained
subproblem solves with bound add/drop steps; the ridge term makes every
subproblem strictly convex, so each solve is a plain dense linear system.
"""
from __future__ import annotations

import time

import numpy as np
from scipy.optimize import lsq_linear

from .simplex import solve_lp
from .types import (
    STATUS_INFEASIBLE,
    STATUS_OPTIMAL,
    FbaProblem,
    FopSolution,
    LinearProgramSpec,
)

_TOL = 1e-9


def _subproblem(s_free: np.ndarray, c_free: np.ndarray, rhs: np.ndarray, lam: float):
    """Minimize c.x + lam x.x subject to s_free x = rhs; returns (x, mu).

    The stationarity system is eliminated to normal equations in the equality
    multipliers; lstsq absorbs any redundant stoichiometry rows.
    """
    gram = s_free @ s_free.T
    target = -(2.0 * lam * rhs + s_free @ c_free)
    mu = np.linalg.lstsq(gram, target, rcond=None)[0]
    x = -(c_free + s_free.T @ mu) / (2.0 * lam)
    return x, mu


def solve_fba(
    problem: FbaProblem,
    bounds: tuple[np.ndarray, np.ndarray] | None,
    theta: np.ndarray,
) -> FopSolution:
    """Globally solve the flux QP under optional per-context bound overrides.

    ``theta`` is the full weight vector over ``problem.objective_set`` (one
    weight per objective reaction, already reconstructed if the search ran
    over a simplex-coupled reduction).
    """
    t0 = time.perf_counter()
    n = len(problem.reactions)
    labels = {"v": list(problem.reactions)}
    lo = problem.lower if bounds is None else np.asarray(bounds[0], dtype=float)
    hi = problem.upper if bounds is None else np.asarray(bounds[1], dtype=float)
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (len(problem.objective_set),):
        raise ValueError("theta must carry one weight per objective reaction")

    c = np.zeros(n)
    for idx, w in zip(problem.objective_indices, theta):
        c[idx] = w
    s = problem.stoich
    lam = problem.regularization

    start = solve_lp(
        LinearProgramSpec(
            c=np.zeros(n), a_eq=s, b_eq=np.zeros(s.shape[0]), lower=lo, upper=hi
        )
    )
    if start.status != STATUS_OPTIMAL:
        return FopSolution(
            STATUS_INFEASIBLE, float("nan"), np.full(n, np.nan), labels,
            solve_time_s=time.perf_counter() - t0,
        )

    v = np.clip(start.decision, lo, hi)
    scale = max(1.0, float(np.abs(v).max()))
    at_lower = np.abs(v - lo) <= 1e-9 * scale
    at_upper = np.abs(v - hi) <= 1e-9 * scale

    for _ in range(50 * (n + s.shape[0]) + 100):
        fixed = at_lower | at_upper
        free = np.flatnonzero(~fixed)
        if free.size:
            rhs = -s[:, fixed] @ v[fixed]
            target, mu = _subproblem(s[:, free], c[free], rhs, lam)
            d = target - v[free]
        else:
            d = np.zeros(0)
            mu = np.linalg.lstsq(s.T, -(c + 2.0 * lam * v), rcond=None)[0]

        if free.size and np.max(np.abs(d)) > 1e-11 * scale:
            alpha = 1.0
            blocker = -1
            blocker_side = False  # True = upper
            for pos, j in enumerate(free):
                if d[pos] > _TOL:
                    a = (hi[j] - v[j]) / d[pos]
                    side = True
                elif d[pos] < -_TOL:
                    a = (lo[j] - v[j]) / d[pos]
                    side = False
                else:
                    continue
                if a < alpha - 1e-12:
                    alpha, blocker, blocker_side = a, j, side
            v[free] += max(alpha, 0.0) * d
            if blocker >= 0:
                if blocker_side:
                    at_upper[blocker] = True
                    v[blocker] = hi[blocker]
                else:
                    at_lower[blocker] = True
                    v[blocker] = lo[blocker]
                continue

        # Subproblem optimum reached: check bound multiplier signs.
        eta = c + 2.0 * lam * v + s.T @ mu
        drop = -1
        for j in range(n):
            if at_lower[j] and not at_upper[j] and eta[j] < -1e-8:
                drop = j
                break
            if at_upper[j] and not at_lower[j] and eta[j] > 1e-8:
                drop = j
                break
        if drop < 0:
            v = np.clip(v, lo, hi)
            obj = float(c @ v + lam * (v @ v))
            return FopSolution(
                STATUS_OPTIMAL, obj, v, labels,
                solve_time_s=time.perf_counter() - t0,
            )
        at_lower[drop] = False
        at_upper[drop] = False

    raise RuntimeError("active-set iteration limit exceeded in flux QP")


def kkt_residuals(
    problem: FbaProblem,
    bounds: tuple[np.ndarray, np.ndarray] | None,
    theta: np.ndarray,
    v: np.ndarray,
) -> dict[str, float]:
    """Scaled KKT residuals of a candidate solution (diagnostic helper).

    Returns primal feasibility, stationarity on the free variables, and
    bound-multiplier sign violation, each normalized by max(1, |v|_inf).
    Redundant stoichiometry rows make the equality multipliers non-unique,
    so the fit searches over sign-feasible multipliers (bounded-variable
    least squares) instead of taking the minimum-norm solution; a reported
    violation then means no certifying multiplier exists at all.
    """
    lo = problem.lower if bounds is None else np.asarray(bounds[0], dtype=float)
    hi = problem.upper if bounds is None else np.asarray(bounds[1], dtype=float)
    n = len(problem.reactions)
    c = np.zeros(n)
    for idx, w in zip(problem.objective_indices, np.asarray(theta, dtype=float)):
        c[idx] = w
    s = problem.stoich
    m = s.shape[0]
    scale = max(1.0, float(np.abs(v).max()))

    primal = max(
        float(np.abs(s @ v).max() if s.size else 0.0),
        float(np.maximum(lo - v, 0.0).max()),
        float(np.maximum(v - hi, 0.0).max()),
    )
    g = c + 2.0 * problem.regularization * v
    at_lower = np.abs(v - lo) <= 1e-7 * scale
    at_upper = np.abs(v - hi) <= 1e-7 * scale
    free = ~(at_lower | at_upper)
    pinned = at_lower & at_upper  # fixed variables carry no sign condition
    lo_only = at_lower & ~at_upper
    hi_only = at_upper & ~at_lower

    # Stack the stationarity conditions as rows of a least-squares problem in
    # [mu, eta_bound]: free rows demand g_j + (S^T mu)_j = 0, bound rows
    # introduce an explicit sign-constrained multiplier eta_j.
    bound_idx = np.concatenate([np.where(lo_only)[0], np.where(hi_only)[0]]).astype(int)
    rows = [j for j in range(n) if free[j] or not pinned[j]]
    n_eta = bound_idx.size
    a = np.zeros((len(rows), m + n_eta))
    b = np.zeros(len(rows))
    eta_col = {int(j): m + k for k, j in enumerate(bound_idx)}
    for r, j in enumerate(rows):
        a[r, :m] = s[:, j]
        b[r] = -g[j]
        if j in eta_col:
            a[r, eta_col[j]] = -1.0
    lb = np.full(m + n_eta, -np.inf)
    ub = np.full(m + n_eta, np.inf)
    for j in np.where(lo_only)[0]:
        lb[eta_col[int(j)]] = 0.0
    for j in np.where(hi_only)[0]:
        ub[eta_col[int(j)]] = 0.0
    if a.size:
        fitted = lsq_linear(a, b, bounds=(lb, ub), method="bvls", tol=1e-14)
        mu = fitted.x[:m]
    else:
        mu = np.zeros(m)
    eta = g + s.T @ mu
    stationarity = float(np.abs(eta[free]).max()) if free.any() else 0.0
    sign_violation = 0.0
    for j in np.where(lo_only)[0]:
        sign_violation = max(sign_violation, -float(eta[j]))
    for j in np.where(hi_only)[0]:
        sign_violation = max(sign_violation, float(eta[j]))
    return {
        "primal": primal / scale,
        "stationarity": stationarity / scale,
        "bound_sign": sign_violation / scale,
    }
