"""Lower-confidence-bound acquisition and its global minimizer.

The next query point is the minimizer of mu(theta) - sqrt(beta) * sigma(theta)
over the search domain, located by a quasi-random scatter (Sobol points mapped
into the domain) followed by projected local descents from the best scatter
candidates.  Everything is deterministic for a fixed (model, domain, config).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

from .domain import ParameterDomain, project
from .gp import GPModel, posterior


@dataclass(frozen=True)
class AcquisitionConfig:
    beta: float = 4.0
    scatter_per_dim: int = 512
    restarts: int = 8
    local_steps: int = 40
    seed: int = 0


def lcb(model: GPModel, point: np.ndarray, beta: float = 4.0) -> float:
    """mu - sqrt(beta) * sigma at a single point (beta=0 gives the mean)."""
    mean, var = posterior(model, np.asarray(point, dtype=float))
    return float(mean - np.sqrt(beta) * np.sqrt(var))


def lcb_batch(model: GPModel, points: np.ndarray, beta: float) -> np.ndarray:
    mean, var = posterior(model, np.atleast_2d(points))
    return mean - np.sqrt(beta) * np.sqrt(var)


def sobol_points(domain: ParameterDomain, count: int, seed: int) -> np.ndarray:
    """Low-discrepancy points mapped into the domain (projected if coupled)."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        sampler = qmc.Sobol(d=domain.dim, scramble=True, seed=seed)
        unit = sampler.random(count)
    pts = domain.lower + unit * domain.width
    if domain.simplex_coupled:
        pts = np.array([project(domain, p) for p in pts])
    return pts


def _descend(
    model: GPModel,
    domain: ParameterDomain,
    start: np.ndarray,
    beta: float,
    max_steps: int,
) -> tuple[np.ndarray, float]:
    """Projected gradient descent on the LCB with finite-difference gradients."""
    h = 1e-6 * domain.width
    theta = start.copy()
    val = lcb(model, theta, beta)
    step = 0.25
    for _ in range(max_steps):
        probes = np.repeat(theta[None, :], 2 * domain.dim, axis=0)
        for i in range(domain.dim):
            probes[2 * i, i] += h[i]
            probes[2 * i + 1, i] -= h[i]
        vals = lcb_batch(model, probes, beta)
        grad = (vals[0::2] - vals[1::2]) / (2.0 * h)
        gnorm = float(np.linalg.norm(grad))
        if not np.isfinite(gnorm) or gnorm < 1e-12:
            break
        direction = -grad / gnorm
        scale = float(np.max(domain.width))
        accepted = False
        s = step * scale
        for _ in range(20):
            trial = project(domain, theta + s * direction)
            if np.max(np.abs(trial - theta)) < 1e-14:
                break
            tval = lcb(model, trial, beta)
            if tval < val - 1e-12 * max(1.0, abs(val)):
                theta, val = trial, tval
                accepted = True
                step = min(step * 2.0, 1.0)
                break
            s *= 0.5
        if not accepted:
            break
    return theta, val


def minimize_acquisition(
    model: GPModel,
    domain: ParameterDomain,
    cfg: AcquisitionConfig,
    with_scatter: bool = False,
):
    """Minimize the LCB over the domain.

    Returns the winning point, or (point, scatter_points_sorted_by_value) when
    ``with_scatter`` is set (used by the outer loop's duplicate-query guard).
    The winner's LCB never exceeds the best scatter candidate's, and ties
    resolve to the lowest candidate index.
    """
    scatter = sobol_points(domain, cfg.scatter_per_dim * domain.dim, cfg.seed)
    values = lcb_batch(model, scatter, cfg.beta)
    order = np.argsort(values, kind="stable")

    best_point = scatter[order[0]].copy()
    best_val = float(values[order[0]])
    for idx in order[: cfg.restarts]:
        point, val = _descend(model, domain, scatter[idx], cfg.beta, cfg.local_steps)
        if val < best_val:
            best_point, best_val = point, val

    if with_scatter:
        return best_point, scatter[order]
    return best_point
