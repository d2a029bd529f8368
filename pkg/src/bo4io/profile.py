"""Profile-likelihood bounds and confidence intervals from the surrogate.

For one parameter of interest, the profile bounds at a grid value are the
minimum over the remaining coordinates of the posterior mean shifted down
(LCB) or up (UCB) by sqrt(rho) posterior deviations.  Thresholding the LCB
profile at (best evaluated loss + chi-square offset) gives an outer
approximation of the confidence set; thresholding the UCB profile at the
global LCB minimum plus the same offset gives an inner approximation.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammainc, ndtri

from .acquisition import AcquisitionConfig, minimize_acquisition, sobol_points
from .domain import ParameterDomain, project_sum_capped
from .gp import GPModel, posterior

CLASS_STRUCTURAL = "structurally-identifiable"
CLASS_PRACTICAL = "practically-non-identifiable"
CLASS_RANGE = "non-identifiable-within-range"

_FLAT_FRACTION = 1e-3
_SLICE_SCATTER_PER_DIM = 256
_SLICE_RESTARTS = 8
_SLICE_STEPS = 30


@dataclass(frozen=True)
class ProfileConfig:
    """Grid and confidence settings for one profiled parameter."""

    k: int
    lb: float
    ub: float
    step: float
    rho: float = 3.84
    alpha: float = 0.05
    df: int = 1

    def __post_init__(self) -> None:
        if not self.lb < self.ub:
            raise ValueError("profile range must have lb < ub")
        if self.step <= 0.0 or self.rho <= 0.0:
            raise ValueError("step and rho must be positive")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.df < 1:
            raise ValueError("df must be a positive integer")


@dataclass(frozen=True)
class ProfileResult:
    k: int
    grid: np.ndarray
    pl_lcb: np.ndarray
    pl_ucb: np.ndarray
    oa_ci: tuple[tuple[float, float], ...]
    ia_ci: tuple[tuple[float, float], ...]
    classification: str
    l_star: float
    l_lcb_star: float
    delta: float
    rho: float
    alpha: float
    df: int


def chi2_quantile(alpha: float, df: int = 1) -> float:
    """(1 - alpha) quantile of the chi-square distribution.

    One degree of freedom goes through the inverse normal CDF; higher
    degrees bisect the regularized incomplete gamma.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    if df < 1:
        raise ValueError("df must be a positive integer")
    if df == 1:
        return float(ndtri(1.0 - alpha / 2.0) ** 2)
    target = 1.0 - alpha
    lo, hi = 0.0, float(max(4 * df, 8))
    while gammainc(df / 2.0, hi / 2.0) < target:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if gammainc(df / 2.0, mid / 2.0) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# Slice optimization
# ---------------------------------------------------------------------------


def _surface(model: GPModel, points: np.ndarray, rho: float, sign: float) -> np.ndarray:
    mean, var = posterior(model, np.atleast_2d(points))
    return mean + sign * np.sqrt(rho) * np.sqrt(var)


def _minimize_slice(fn, lower, upper, cap, seed):
    """Scatter plus projected FD descents over a box with optional sum cap."""
    dim = lower.size
    width = upper - lower
    box = ParameterDomain(lower, upper)
    pts = sobol_points(box, _SLICE_SCATTER_PER_DIM * dim, seed)
    if cap is not None:
        pts = np.array([project_sum_capped(lower, upper, cap, p) for p in pts])
    vals = fn(pts)
    order = np.argsort(vals, kind="stable")
    best_pt, best_val = pts[order[0]].copy(), float(vals[order[0]])

    h = 1e-6 * width
    for idx in order[:_SLICE_RESTARTS]:
        x = pts[idx].copy()
        val = float(fn(x[None, :])[0])
        step = 0.25
        for _ in range(_SLICE_STEPS):
            probes = np.repeat(x[None, :], 2 * dim, axis=0)
            for i in range(dim):
                probes[2 * i, i] += h[i]
                probes[2 * i + 1, i] -= h[i]
            pv = fn(probes)
            grad = (pv[0::2] - pv[1::2]) / (2.0 * h)
            gnorm = float(np.linalg.norm(grad))
            if not np.isfinite(gnorm) or gnorm < 1e-12:
                break
            direction = -grad / gnorm
            scale = float(width.max())
            accepted = False
            s = step * scale
            for _ in range(20):
                trial = np.clip(x + s * direction, lower, upper)
                if cap is not None:
                    trial = project_sum_capped(lower, upper, cap, trial)
                if np.max(np.abs(trial - x)) < 1e-14:
                    break
                tval = float(fn(trial[None, :])[0])
                if tval < val - 1e-12 * max(1.0, abs(val)):
                    x, val = trial, tval
                    accepted = True
                    step = min(step * 2.0, 1.0)
                    break
                s *= 0.5
            if not accepted:
                break
        if val < best_val:
            best_pt, best_val = x, val
    return best_val


def _profile_value(model, domain, k, value, rho, sign, seed=0) -> float:
    """min over the remaining coordinates of mean + sign*sqrt(rho)*std."""
    if domain.dim == 1:
        return float(_surface(model, np.array([[value]]), rho, sign)[0])
    keep = [i for i in range(domain.dim) if i != k]
    lower, upper = domain.lower[keep], domain.upper[keep]
    cap = (1.0 - value) if domain.simplex_coupled else None

    def fn(slice_pts: np.ndarray) -> np.ndarray:
        full = np.empty((slice_pts.shape[0], domain.dim))
        full[:, keep] = slice_pts
        full[:, k] = value
        return _surface(model, full, rho, sign)

    return _minimize_slice(fn, lower, upper, cap, seed)


# ---------------------------------------------------------------------------
# Interval assembly
# ---------------------------------------------------------------------------


def _refine_crossing(eval_fn, lo, hi, below_at_lo, threshold, tol):
    """Bisect a grid cell with a sign change down to width tol."""
    for _ in range(200):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if (eval_fn(mid) <= threshold) == below_at_lo:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _intervals(grid, values, threshold, eval_fn, tol):
    """Maximal closed intervals where values fall at or below threshold."""
    below = values <= threshold
    out: list[tuple[float, float]] = []
    i = 0
    n = grid.size
    while i < n:
        if not below[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and below[j + 1]:
            j += 1
        left = grid[i] if i == 0 else _refine_crossing(
            eval_fn, grid[i - 1], grid[i], False, threshold, tol)
        right = grid[j] if j == n - 1 else _refine_crossing(
            eval_fn, grid[j], grid[j + 1], True, threshold, tol)
        out.append((float(left), float(right)))
        i = j + 1
    return tuple(out)


def _classify(pl_lcb, oa_ci, lb, ub, delta, tol) -> str:
    spread = float(pl_lcb.max() - pl_lcb.min())
    if spread <= _FLAT_FRACTION * delta:
        return CLASS_RANGE
    if len(oa_ci) == 1:
        lo, hi = oa_ci[0]
        if lo > lb + tol and hi < ub - tol:
            return CLASS_STRUCTURAL
    return CLASS_PRACTICAL


def profile_parameter(
    model: GPModel,
    domain: ParameterDomain,
    cfg: ProfileConfig,
    l_star: float,
    incumbent_k: float | None = None,
) -> ProfileResult:
    """Profile one parameter over its range and assemble both interval sets.

    ``l_star`` is the best evaluated loss; ``incumbent_k`` (the incumbent's
    k-th coordinate) is inserted into the grid so the reported intervals
    always get the chance to cover it.
    """
    if not 0 <= cfg.k < domain.dim:
        raise ValueError("parameter index out of range")
    n = int(np.floor((cfg.ub - cfg.lb) / cfg.step)) + 1
    grid = cfg.lb + cfg.step * np.arange(n)
    if grid[-1] < cfg.ub - 1e-12 * max(1.0, abs(cfg.ub)):
        grid = np.append(grid, cfg.ub)
    if incumbent_k is not None and cfg.lb <= incumbent_k <= cfg.ub:
        grid = np.unique(np.append(grid, incumbent_k))

    pl_lcb = np.array([
        _profile_value(model, domain, cfg.k, v, cfg.rho, -1.0) for v in grid
    ])
    pl_ucb = np.array([
        _profile_value(model, domain, cfg.k, v, cfg.rho, +1.0) for v in grid
    ])

    delta = chi2_quantile(cfg.alpha, cfg.df)
    acq = AcquisitionConfig(beta=cfg.rho, seed=0)
    lcb_min_point = minimize_acquisition(model, domain, acq)
    mean, var = posterior(model, lcb_min_point)
    lcb_min = float(mean - np.sqrt(cfg.rho) * np.sqrt(var))
    # The global LCB minimum is meant to lower-bound the best evaluated
    # loss; clamp in case the fitted surrogate smooths over the incumbent.
    l_lcb_star = min(lcb_min, float(l_star))

    tol = cfg.step / 100.0

    def eval_lcb(v: float) -> float:
        return _profile_value(model, domain, cfg.k, v, cfg.rho, -1.0)

    def eval_ucb(v: float) -> float:
        return _profile_value(model, domain, cfg.k, v, cfg.rho, +1.0)

    oa = _intervals(grid, pl_lcb, l_star + delta, eval_lcb, tol)
    ia = _intervals(grid, pl_ucb, l_lcb_star + delta, eval_ucb, tol)
    classification = _classify(pl_lcb, oa, cfg.lb, cfg.ub, delta, tol)
    return ProfileResult(
        k=cfg.k, grid=grid, pl_lcb=pl_lcb, pl_ucb=pl_ucb,
        oa_ci=oa, ia_ci=ia, classification=classification,
        l_star=float(l_star), l_lcb_star=l_lcb_star, delta=delta,
        rho=cfg.rho, alpha=cfg.alpha, df=cfg.df,
    )


def total_width(intervals: tuple[tuple[float, float], ...]) -> float:
    return float(sum(hi - lo for (lo, hi) in intervals))


# ---------------------------------------------------------------------------
# Profile result files
# ---------------------------------------------------------------------------

PROFILE_HEADER = "bo4io-profile v1"


def write_profile(path, result: ProfileResult) -> None:
    lines = [
        PROFILE_HEADER,
        f"parameter {result.k}",
        f"rho {result.rho!r}",
        f"alpha {result.alpha!r}",
        f"df {result.df}",
        f"delta {result.delta!r}",
        f"l_star {result.l_star!r}",
        f"l_lcb_star {result.l_lcb_star!r}",
        "columns theta pl_lcb pl_ucb in_oa in_ia",
    ]
    oa_thr = result.l_star + result.delta
    ia_thr = result.l_lcb_star + result.delta
    for theta, lo, up in zip(result.grid, result.pl_lcb, result.pl_ucb):
        lines.append(
            f"row {float(theta)!r} {float(lo)!r} {float(up)!r} "
            f"{int(lo <= oa_thr)} {int(up <= ia_thr)}"
        )
    for lo, hi in result.oa_ci:
        lines.append(f"oa_interval {lo!r} {hi!r}")
    for lo, hi in result.ia_ci:
        lines.append(f"ia_interval {lo!r} {hi!r}")
    lines.append(f"classification {result.classification}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_profile(path) -> dict:
    """Parse a profile file into a plain dict (used by the report command)."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != PROFILE_HEADER:
        raise ValueError(f"unrecognized profile header in {path}")
    out: dict = {"rows": [], "oa_ci": [], "ia_ci": []}
    for ln in lines[1:]:
        parts = ln.split()
        key = parts[0]
        if key == "row":
            out["rows"].append(tuple(float(v) for v in parts[1:4])
                               + (bool(int(parts[4])), bool(int(parts[5]))))
        elif key == "oa_interval":
            out["oa_ci"].append((float(parts[1]), float(parts[2])))
        elif key == "ia_interval":
            out["ia_ci"].append((float(parts[1]), float(parts[2])))
        elif key == "classification":
            out["classification"] = parts[1]
        elif key == "columns":
            continue
        elif key in ("parameter", "df"):
            out[key] = int(parts[1])
        else:
            out[key] = float(parts[1])
    return out
