"""Shared containers for forward optimization problems and their solutions."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

STATUS_OPTIMAL = "optimal"
STATUS_INFEASIBLE = "infeasible"
STATUS_UNBOUNDED = "unbounded"
STATUS_GRID_OPTIMAL = "grid-optimal-within-tolerance"


@dataclass(frozen=True)
class FopSolution:
    """Outcome of one forward solve.

    ``decision`` is a flat vector; ``index_map`` names its components, one
    ordered label list per variable family, laid out consecutively in the
    family order of the dict.  ``gap`` carries the certified optimality bound
    for grid-based statuses.
    """

    status: str
    objective: float
    decision: np.ndarray
    index_map: dict[str, list[str]]
    solve_time_s: float = 0.0
    gap: float | None = None

    def family_values(self, family: str) -> np.ndarray:
        off = 0
        for fam, labels in self.index_map.items():
            if fam == family:
                return self.decision[off : off + len(labels)]
            off += len(labels)
        raise KeyError(f"unknown variable family {family!r}")

    def component(self, family: str, label: str) -> float:
        vals = self.family_values(family)
        return float(vals[self.index_map[family].index(label)])

    @property
    def ok(self) -> bool:
        return self.status in (STATUS_OPTIMAL, STATUS_GRID_OPTIMAL)


def infeasible_solution(index_map: dict[str, list[str]] | None = None) -> FopSolution:
    im = index_map or {}
    size = sum(len(v) for v in im.values())
    return FopSolution(STATUS_INFEASIBLE, float("nan"), np.full(size, np.nan), im)


@dataclass(frozen=True)
class LinearProgramSpec:
    """min c.x subject to a_eq.x = b_eq and lower <= x <= upper.

    Bounds may be +-inf componentwise; inequality rows are expected to have
    been converted by the caller via explicit slack variables.
    """

    c: np.ndarray
    a_eq: np.ndarray
    b_eq: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        a = np.atleast_2d(np.asarray(self.a_eq, dtype=float))
        b = np.asarray(self.b_eq, dtype=float)
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if a.shape != (b.size, c.size):
            raise ValueError("a_eq shape must be (len(b_eq), len(c))")
        if lo.shape != c.shape or hi.shape != c.shape:
            raise ValueError("bounds must match the variable count")
        if np.any(lo > hi):
            raise ValueError("lower bound exceeds upper bound")
        for name, arr in (("c", c), ("a_eq", a), ("b_eq", b)):
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)


@dataclass(frozen=True)
class FbaProblem:
    """Constraint-based metabolic network with a weighted-sum QP objective.

    The forward solve minimizes theta.v over the objective reactions plus
    ``regularization`` times the squared flux norm, subject to steady-state
    mass balance and flux bounds.  ``bound_signs`` records per-reaction sign
    conventions used when contextual bounds are generated (-1 flips a drawn
    [lo, hi] into [-hi, -lo]).
    """

    name: str
    metabolites: list[str]
    reactions: list[str]
    stoich: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    objective_set: list[str]
    regularization: float
    bound_signs: np.ndarray | None = None

    def __post_init__(self):
        s = np.atleast_2d(np.asarray(self.stoich, dtype=float))
        if s.shape != (len(self.metabolites), len(self.reactions)):
            raise ValueError("stoich shape must be (metabolites, reactions)")
        if self.regularization <= 0.0:
            raise ValueError("regularization must be positive")
        missing = [r for r in self.objective_set if r not in self.reactions]
        if missing:
            raise ValueError(f"objective reactions not in network: {missing}")
        object.__setattr__(self, "stoich", s)
        object.__setattr__(self, "lower", np.asarray(self.lower, dtype=float))
        object.__setattr__(self, "upper", np.asarray(self.upper, dtype=float))
        signs = self.bound_signs
        if signs is None:
            signs = np.ones(len(self.reactions))
        object.__setattr__(self, "bound_signs", np.asarray(signs, dtype=float))

    @property
    def objective_indices(self) -> list[int]:
        return [self.reactions.index(r) for r in self.objective_set]


@dataclass(frozen=True)
class PoolingNetwork:
    """Standard pooling network: feeds -> pools -> products plus direct arcs.

    Qualities ``quality[s, k]`` are feed concentrations; products cap blended
    concentration at ``quality_cap[j, k]``.  ``demand_cap`` holds the nominal
    per-product demand ceilings (the inverse-optimization unknowns).
    """

    name: str
    feeds: list[str]
    pools: list[str]
    products: list[str]
    qualities: list[str]
    arcs_f: list[tuple[str, str]]
    arcs_y: list[tuple[str, str]]
    arcs_z: list[tuple[str, str]]
    quality: np.ndarray
    cost: np.ndarray
    revenue_y: np.ndarray
    revenue_z: np.ndarray
    availability: np.ndarray
    quality_cap: np.ndarray
    demand_cap: np.ndarray

    def __post_init__(self):
        checks = [
            (self.quality, (len(self.feeds), len(self.qualities))),
            (self.cost, (len(self.feeds),)),
            (self.revenue_y, (len(self.arcs_y),)),
            (self.revenue_z, (len(self.arcs_z),)),
            (self.availability, (len(self.feeds),)),
            (self.quality_cap, (len(self.products), len(self.qualities))),
            (self.demand_cap, (len(self.products),)),
        ]
        for arr, shape in checks:
            if np.asarray(arr).shape != shape:
                raise ValueError("pooling network array shapes inconsistent")
        for attr in ("quality", "cost", "revenue_y", "revenue_z",
                     "availability", "quality_cap", "demand_cap"):
            object.__setattr__(self, attr, np.asarray(getattr(self, attr), dtype=float))

    def pool_inlets(self, pool: str) -> list[str]:
        return [s for (s, l) in self.arcs_f if l == pool]


@dataclass(frozen=True)
class GenPoolingNetwork:
    """Generalized pooling network with install binaries and hard demands.

    Feeds and pools carry install costs and binary on/off decisions; flows on
    installed arcs pay per-unit arc costs; product demand is met exactly and
    blended concentrations obey per-product, per-quality limits
    ``quality_req[j, k]`` (the inverse-optimization unknowns).
    """

    name: str
    feeds: list[str]
    pools: list[str]
    products: list[str]
    qualities: list[str]
    arcs_f: list[tuple[str, str]]
    arcs_y: list[tuple[str, str]]
    arcs_z: list[tuple[str, str]]
    quality: np.ndarray
    cost: np.ndarray
    arc_cost: np.ndarray
    revenue_y: np.ndarray
    revenue_z: np.ndarray
    availability: np.ndarray
    install_cost_feed: np.ndarray
    install_cost_pool: np.ndarray
    pool_capacity: np.ndarray
    demand: np.ndarray
    quality_req: np.ndarray

    def __post_init__(self):
        for attr in ("quality", "cost", "arc_cost", "revenue_y", "revenue_z",
                     "availability", "install_cost_feed", "install_cost_pool",
                     "pool_capacity", "demand", "quality_req"):
            object.__setattr__(self, attr, np.asarray(getattr(self, attr), dtype=float))
        if self.arc_cost.shape != (len(self.arcs_f),):
            raise ValueError("arc_cost must align with arcs_f")
        if self.quality_req.shape != (len(self.products), len(self.qualities)):
            raise ValueError("quality_req shape inconsistent")

    def pool_inlets(self, pool: str) -> list[str]:
        return [s for (s, l) in self.arcs_f if l == pool]


def arc_label(arc: tuple[str, str]) -> str:
    return f"{arc[0]}->{arc[1]}"
