"""Dense two-phase simplex for small equality-form LPs with variable bounds.

Bounded variables are rewritten into standard form (nonnegative variables,
equality rows) before pivoting; Bland's rule picks entering and leaving
variables, which rules out cycling on degenerate instances.  Problem sizes
here are tiny (tens of variables), so a dense tableau is the simplest thing
that is obviously correct.
"""
from __future__ import annotations

import numpy as np

from .types import (
    STATUS_INFEASIBLE,
    STATUS_OPTIMAL,
    STATUS_UNBOUNDED,
    FopSolution,
    LinearProgramSpec,
)

_PIVOT_TOL = 1e-9
_FEAS_TOL = 1e-8
_CERT_TOL = 1e-7
_MAX_PIVOTS = 20000


class _Unbounded(Exception):
    pass


def _pivot(tableau: np.ndarray, basis: np.ndarray, row: int, col: int) -> None:
    tableau[row] /= tableau[row, col]
    factors = tableau[:, col].copy()
    factors[row] = 0.0
    tableau -= np.outer(factors, tableau[row])
    basis[row] = col


def _bland_iterate(tableau: np.ndarray, basis: np.ndarray, ncols: int) -> None:
    """Run simplex pivots until the (last-row) reduced costs are nonnegative.

    ``ncols`` limits the entering candidates to the leading columns so that
    phase 2 never re-enters an artificial variable.
    """
    for _ in range(_MAX_PIVOTS):
        rc = tableau[-1, :ncols]
        entering = np.flatnonzero(rc < -_PIVOT_TOL)
        if entering.size == 0:
            return
        col = int(entering[0])
        body = tableau[:-1, col]
        rows = np.flatnonzero(body > _PIVOT_TOL)
        if rows.size == 0:
            raise _Unbounded
        ratios = tableau[:-1, -1][rows] / body[rows]
        best = ratios.min()
        ties = rows[ratios <= best + 1e-12 * max(1.0, abs(best))]
        row = int(ties[np.argmin(basis[ties])])
        _pivot(tableau, basis, row, col)
    raise RuntimeError("simplex pivot limit exceeded")


def _standard_form(lp: LinearProgramSpec):
    """Rewrite bounded variables as nonnegative ones.

    Returns (columns, c_std, a_std, b_std, recover) where ``recover`` maps a
    standard-form solution vector back to original variables.
    """
    n = lp.c.size
    m = lp.a_eq.shape[0]
    col_a: list[np.ndarray] = []
    col_c: list[float] = []
    # Each entry: (kind, original index) with kinds shift/neg-shift/pos/neg part.
    mapping: list[tuple[str, int]] = []
    shift = np.zeros(n)
    extra_rows: list[tuple[int, float]] = []  # (std column, range rhs)

    for j in range(n):
        lo, hi = lp.lower[j], lp.upper[j]
        a_col = lp.a_eq[:, j]
        if np.isfinite(lo):
            shift[j] = lo
            mapping.append(("shift", j))
            col_a.append(a_col)
            col_c.append(lp.c[j])
            if np.isfinite(hi):
                extra_rows.append((len(mapping) - 1, hi - lo))
        elif np.isfinite(hi):
            shift[j] = hi
            mapping.append(("mirror", j))
            col_a.append(-a_col)
            col_c.append(-lp.c[j])
        else:
            mapping.append(("pos", j))
            col_a.append(a_col)
            col_c.append(lp.c[j])
            mapping.append(("neg", j))
            col_a.append(-a_col)
            col_c.append(-lp.c[j])

    n_std = len(mapping) + len(extra_rows)
    a_std = np.zeros((m + len(extra_rows), n_std))
    a_std[:m, : len(mapping)] = np.column_stack(col_a) if col_a else np.zeros((m, 0))
    b_std = np.concatenate([lp.b_eq - lp.a_eq @ shift, np.zeros(len(extra_rows))])
    c_std = np.concatenate([np.asarray(col_c), np.zeros(len(extra_rows))])
    for i, (col, rhs) in enumerate(extra_rows):
        a_std[m + i, col] = 1.0
        a_std[m + i, len(mapping) + i] = 1.0
        b_std[m + i] = rhs

    def recover(x_std: np.ndarray) -> np.ndarray:
        x = shift.copy()
        for idx, (kind, j) in enumerate(mapping):
            if kind in ("shift", "pos"):
                x[j] += x_std[idx]
            elif kind == "mirror":
                x[j] -= x_std[idx]
            else:
                x[j] -= x_std[idx]
        return x

    return c_std, a_std, b_std, recover


def solve_lp(lp: LinearProgramSpec) -> FopSolution:
    """Solve min c.x, a_eq.x = b_eq, lower <= x <= upper to a global optimum."""
    labels = {"x": [str(j) for j in range(lp.c.size)]}
    if np.any(lp.lower > lp.upper):
        return FopSolution(STATUS_INFEASIBLE, float("nan"),
                           np.full(lp.c.size, np.nan), labels)

    c_std, a_std, b_std, recover = _standard_form(lp)
    m, n_std = a_std.shape

    neg = b_std < 0.0
    a_std[neg] *= -1.0
    b_std[neg] *= -1.0

    # Phase 1: artificial basis, minimize total infeasibility.
    tableau = np.zeros((m + 1, n_std + m + 1))
    tableau[:m, :n_std] = a_std
    tableau[:m, n_std : n_std + m] = np.eye(m)
    tableau[:m, -1] = b_std
    tableau[-1, :n_std] = -a_std.sum(axis=0)
    tableau[-1, -1] = -b_std.sum()
    basis = np.arange(n_std, n_std + m)

    try:
        _bland_iterate(tableau, basis, n_std + m)
    except _Unbounded:  # pragma: no cover - phase 1 objective is bounded below
        raise RuntimeError("phase 1 reported unbounded")
    if -tableau[-1, -1] > _FEAS_TOL * max(1.0, float(np.abs(b_std).max(initial=0.0))):
        return FopSolution(STATUS_INFEASIBLE, float("nan"),
                           np.full(lp.c.size, np.nan), labels)

    # Drive leftover artificials out of the basis or drop redundant rows.
    # Pivot on the largest entry so a roundoff-sized artificial value cannot
    # be amplified into a visible bound violation by a near-zero pivot.
    keep = np.ones(m, dtype=bool)
    for r in range(m):
        if basis[r] >= n_std:
            body = np.abs(tableau[r, :n_std])
            candidates = np.flatnonzero(body > _PIVOT_TOL)
            if candidates.size:
                col = int(candidates[np.argmax(body[candidates])])
                _pivot(tableau, basis, r, col)
            else:
                keep[r] = False
    rows = np.flatnonzero(keep)
    tableau = np.vstack([tableau[rows, : n_std + m + 1], tableau[-1:]])
    basis = basis[rows]
    tableau = np.delete(tableau, np.s_[n_std : n_std + m], axis=1)

    # Phase 2: rebuild the reduced-cost row for the true objective.
    tableau[-1, :] = 0.0
    tableau[-1, :n_std] = c_std
    for r, b in enumerate(basis):
        tableau[-1, :] -= c_std[b] * tableau[r, :]
    try:
        _bland_iterate(tableau, basis, n_std)
    except _Unbounded:
        return FopSolution(STATUS_UNBOUNDED, float("-inf"),
                           np.full(lp.c.size, np.nan), labels)

    x_std = np.zeros(n_std)
    x_std[basis] = tableau[:-1, -1]
    x = recover(x_std)

    # Certify before reporting: an LP whose infeasibility is just under the
    # phase 1 tolerance can slip through with an artificial still carrying
    # value, and phase 2 then returns a point outside the bounds.  A genuine
    # optimum sits at machine precision, so anything past _CERT_TOL means the
    # instance was infeasible all along.
    scale = max(1.0, float(np.abs(lp.b_eq).max(initial=0.0)),
                float(np.abs(x).max(initial=0.0)))
    residual = float(np.abs(lp.a_eq @ x - lp.b_eq).max(initial=0.0))
    bound_gap = float(np.maximum(lp.lower - x, x - lp.upper).max(initial=0.0))
    if max(residual, bound_gap) > _CERT_TOL * scale:
        return FopSolution(STATUS_INFEASIBLE, float("nan"),
                           np.full(lp.c.size, np.nan), labels)
    return FopSolution(STATUS_OPTIMAL, float(lp.c @ x), x, labels)
