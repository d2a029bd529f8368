"""Bundled benchmark problem instances.

haverly1 is the classic three-feed single-pool blending network; the two-pool
synthetic net exercises multi-axis quality grids; the tiny generalized net
keeps the binary enumeration small; the toy metabolic network is a
ten-metabolite circulant so that randomly drawn positive flux bounds stay
feasible with workable probability (every node has three alternative in and
out routes).
"""
from __future__ import annotations

import numpy as np

from .types import FbaProblem, GenPoolingNetwork, PoolingNetwork


def haverly1() -> PoolingNetwork:
    """Three feeds, one pool, two products, one (sulfur) quality.

    The objective charges feed cost only on feed-to-pool flows, so direct-arc
    revenues are encoded net of the feed cost (9 - 10 and 15 - 10 for feed C).
    Nominal demands (100, 200) then give the known optimal profit of 400,
    i.e. a minimized objective of -400.
    """
    return PoolingNetwork(
        name="haverly1",
        feeds=["A", "B", "C"],
        pools=["P"],
        products=["X", "Y"],
        qualities=["sulfur"],
        arcs_f=[("A", "P"), ("B", "P")],
        arcs_y=[("P", "X"), ("P", "Y")],
        arcs_z=[("C", "X"), ("C", "Y")],
        quality=np.array([[3.0], [1.0], [2.0]]),
        cost=np.array([6.0, 16.0, 10.0]),
        revenue_y=np.array([9.0, 15.0]),
        revenue_z=np.array([-1.0, 5.0]),
        availability=np.array([500.0, 500.0, 500.0]),
        quality_cap=np.array([[2.5], [1.5]]),
        demand_cap=np.array([100.0, 200.0]),
    )


def two_pool_synthetic() -> PoolingNetwork:
    """Unit-scale network with two pools sharing a feed (two grid axes).

    As in ``haverly1``, the direct-arc revenue is net of the feed cost
    (9 - 6 for feed A).
    """
    return PoolingNetwork(
        name="twopool",
        feeds=["A", "B", "C"],
        pools=["P1", "P2"],
        products=["X", "Y"],
        qualities=["imp"],
        arcs_f=[("A", "P1"), ("B", "P1"), ("B", "P2"), ("C", "P2")],
        arcs_y=[("P1", "X"), ("P1", "Y"), ("P2", "X"), ("P2", "Y")],
        arcs_z=[("A", "X")],
        quality=np.array([[3.0], [1.0], [2.0]]),
        cost=np.array([6.0, 16.0, 10.0]),
        revenue_y=np.array([9.0, 15.0, 9.0, 15.0]),
        revenue_z=np.array([3.0]),
        availability=np.array([1.0, 1.0, 1.0]),
        quality_cap=np.array([[2.5], [1.5]]),
        demand_cap=np.array([0.8, 0.9]),
    )


def tiny_genpooling() -> GenPoolingNetwork:
    """Two feeds, one pool, two products, two qualities (8 install patterns)."""
    return GenPoolingNetwork(
        name="tinygen",
        feeds=["F1", "F2"],
        pools=["P1"],
        products=["G1", "G2"],
        qualities=["q1", "q2"],
        arcs_f=[("F1", "P1"), ("F2", "P1")],
        arcs_y=[("P1", "G1"), ("P1", "G2")],
        arcs_z=[("F2", "G2")],
        quality=np.array([[0.10, 0.60], [0.50, 0.20]]),
        cost=np.array([2.0, 1.0]),
        arc_cost=np.array([0.10, 0.10]),
        revenue_y=np.array([5.0, 4.0]),
        revenue_z=np.array([3.5]),
        availability=np.array([2.0, 2.0]),
        install_cost_feed=np.array([0.30, 0.20]),
        install_cost_pool=np.array([0.40]),
        pool_capacity=np.array([3.0]),
        demand=np.array([0.8, 0.9]),
        quality_req=np.array([[0.40, 0.60], [0.35, 0.65]]),
    )


def toy_metabolic10(regularization: float = 0.05) -> FbaProblem:
    """Ten-metabolite circulant exchange network with 30 conversion reactions.

    Node i feeds nodes i+1, i+2, and i+4 (mod 10), so mass can circulate along
    many alternative routes; the four objective reactions sit on competing
    out-routes, which makes the optimal flux pattern responsive to the
    objective weights.
    """
    mets = [f"M{i:02d}" for i in range(1, 11)]
    reactions: list[str] = []
    cols: list[np.ndarray] = []
    for i in range(10):
        for step in (1, 2, 4):
            j = (i + step) % 10
            reactions.append(f"R{i + 1:02d}_{j + 1:02d}")
            col = np.zeros(10)
            col[i] = -1.0
            col[j] = 1.0
            cols.append(col)
    stoich = np.column_stack(cols)
    n = len(reactions)
    return FbaProblem(
        name="toy10",
        metabolites=mets,
        reactions=reactions,
        stoich=stoich,
        lower=np.full(n, 10.0),
        upper=np.full(n, 100.0),
        objective_set=["R01_02", "R01_03", "R01_05", "R02_03"],
        regularization=regularization,
    )


BUNDLED_FBA = {"toy10": toy_metabolic10}
BUNDLED_POOLING = {"haverly1": haverly1, "twopool": two_pool_synthetic}
BUNDLED_GENPOOLING = {"tinygen": tiny_genpooling}
