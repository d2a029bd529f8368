"""Search domains for the unknown forward-problem parameters.

A domain is a box, optionally coupled to a simplex: when ``simplex_coupled``
is set, the d free coordinates carry an implicit (d+1)-th coordinate equal to
``1 - sum(theta)``, and all d+1 coordinates must stay inside [0, 1].
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ParameterDomain:
    """Box-bounded (optionally simplex-coupled) parameter search space.

    Parameters
    ----------
    lower, upper : array-like, shape (d,)
        Componentwise bounds with lower < upper.
    simplex_coupled : bool
        If True, feasibility additionally requires sum(theta) <= 1 so that
        the implicit last weight 1 - sum(theta) stays nonnegative.
    """

    lower: np.ndarray
    upper: np.ndarray
    simplex_coupled: bool = False

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("bounds must be 1-D arrays of equal length")
        if not np.all(lo < hi):
            raise ValueError("domain requires lower < upper componentwise")
        if self.simplex_coupled and (np.any(lo < 0.0) or np.any(hi > 1.0)):
            raise ValueError("simplex coupling requires the box inside [0, 1]")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    def contains(self, point: np.ndarray, tol: float = 1e-9) -> bool:
        p = np.asarray(point, dtype=float)
        if p.shape != self.lower.shape:
            return False
        if np.any(p < self.lower - tol) or np.any(p > self.upper + tol):
            return False
        if self.simplex_coupled and p.sum() > 1.0 + tol:
            return False
        return True

    def reconstruct(self, point: np.ndarray) -> np.ndarray:
        """Full parameter vector: appends the implicit last weight when coupled."""
        p = np.asarray(point, dtype=float)
        if not self.simplex_coupled:
            return p.copy()
        return np.append(p, 1.0 - p.sum())


def project(domain: ParameterDomain, point: np.ndarray) -> np.ndarray:
    """Euclidean projection of ``point`` onto the feasible set of ``domain``.

    For a plain box this is a componentwise clip.  With simplex coupling the
    feasible set is box ∩ {sum(theta) <= 1}; by the KKT conditions of the
    projection problem the solution is clip(point - lam, lower, upper) for the
    smallest lam >= 0 making the sum constraint hold, found by bisection on
    the monotone map lam -> sum(clip(point - lam)).
    """
    p = np.asarray(point, dtype=float)
    if p.shape != domain.lower.shape:
        raise ValueError("point dimension does not match domain")
    clipped = np.clip(p, domain.lower, domain.upper)
    if not domain.simplex_coupled or clipped.sum() <= 1.0 + 1e-15:
        return clipped

    def total(lam: float) -> float:
        return float(np.clip(p - lam, domain.lower, domain.upper).sum())

    lo, hi = 0.0, 1.0
    while total(hi) > 1.0:
        hi *= 2.0
        if hi > 1e12:
            raise RuntimeError("projection bisection failed to bracket")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if total(mid) > 1.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15 * max(1.0, hi):
            break
    return np.clip(p - hi, domain.lower, domain.upper)


def project_sum_capped(
    lower: np.ndarray, upper: np.ndarray, cap: float | None, point: np.ndarray
) -> np.ndarray:
    """Projection onto {lower <= x <= upper, sum(x) <= cap} for arbitrary cap.

    Used by profile sweeps that fix one coordinate of a simplex-coupled domain
    and must keep the remaining coordinates inside the reduced budget.
    """
    p = np.asarray(point, dtype=float)
    clipped = np.clip(p, lower, upper)
    if cap is None or clipped.sum() <= cap + 1e-15:
        return clipped
    if lower.sum() > cap + 1e-12:
        # No feasible point with this budget; return the least-sum corner.
        return np.asarray(lower, dtype=float).copy()
    lo, hi = 0.0, 1.0
    while np.clip(p - hi, lower, upper).sum() > cap:
        hi *= 2.0
        if hi > 1e12:
            raise RuntimeError("projection bisection failed to bracket")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if np.clip(p - mid, lower, upper).sum() > cap:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15 * max(1.0, hi):
            break
    return np.clip(p - hi, lower, upper)
