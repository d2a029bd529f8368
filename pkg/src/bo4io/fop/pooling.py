"""Global solvers for standard and generalized pooling problems.

Fixing the pool quality levels p turns both problems into LPs, so the solver
sweeps a regular grid over each pool-quality coordinate (its range is the
convex hull of the inlet feed concentrations), solves one LP per grid cell,
and refines around the best cell with a golden-section pass per axis.  The
generalized variant additionally enumerates the binary install patterns.

The returned status is grid-based rather than exactly optimal; ``gap`` holds
a Lipschitz-style certificate computed from LP value differences between
adjacent grid cells, so reported_objective <= global_optimum + gap.
"""
from __future__ import annotations

import itertools
import time

import numpy as np

from .simplex import solve_lp
from .types import (
    STATUS_GRID_OPTIMAL,
    STATUS_INFEASIBLE,
    STATUS_OPTIMAL,
    FopSolution,
    GenPoolingNetwork,
    LinearProgramSpec,
    PoolingNetwork,
    arc_label,
)

_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0
MAX_GRID_AXES = 3
MAX_BINARIES = 10


class _FixedQualityLP:
    """LP template for a pooling network with the quality levels held fixed.

    Rebuilding the full matrix per grid point would dominate the runtime, so
    the p-dependent coefficients are patched in place between solves.
    """

    def __init__(
        self,
        feeds: list[str],
        pools: list[str],
        products: list[str],
        qualities: list[str],
        arcs_f: list[tuple[str, str]],
        arcs_y: list[tuple[str, str]],
        arcs_z: list[tuple[str, str]],
        conc: np.ndarray,
        f_cost: np.ndarray,
        rev_y: np.ndarray,
        rev_z: np.ndarray,
        availability: np.ndarray,
        quality_cap: np.ndarray,
        demand: np.ndarray,
        demand_is_equality: bool,
        pool_capacity: np.ndarray | None = None,
        feed_flow_cap: np.ndarray | None = None,
    ):
        ns, nl, nj, nk = len(feeds), len(pools), len(products), len(qualities)
        nf, ny, nz = len(arcs_f), len(arcs_y), len(arcs_z)
        self.nf, self.ny, self.nz, self.nk = nf, ny, nz, nk
        self.pools, self.qualities = pools, qualities

        rows = ns + nl + nl * nk + nj * nk + nj
        if pool_capacity is not None:
            rows += nl
        if feed_flow_cap is not None:
            rows += ns
        slacks = ns + nj * nk + (0 if demand_is_equality else nj)
        if pool_capacity is not None:
            slacks += nl
        if feed_flow_cap is not None:
            slacks += ns
        ncols = nf + ny + nz + slacks

        a = np.zeros((rows, ncols))
        b = np.zeros(rows)
        c = np.zeros(ncols)
        c[:nf] = f_cost
        c[nf : nf + ny] = -rev_y
        c[nf + ny : nf + ny + nz] = -rev_z

        fi = {arc: i for i, arc in enumerate(arcs_f)}
        yi = {arc: nf + i for i, arc in enumerate(arcs_y)}
        zi = {arc: nf + ny + i for i, arc in enumerate(arcs_z)}
        slack = nf + ny + nz
        row = 0

        for si, s in enumerate(feeds):
            for arc, col in fi.items():
                if arc[0] == s:
                    a[row, col] = 1.0
            for arc, col in zi.items():
                if arc[0] == s:
                    a[row, col] = 1.0
            a[row, slack] = 1.0
            slack += 1
            b[row] = availability[si]
            row += 1

        for l in pools:
            for arc, col in fi.items():
                if arc[1] == l:
                    a[row, col] = 1.0
            for arc, col in yi.items():
                if arc[0] == l:
                    a[row, col] = -1.0
            row += 1

        # Quality balance rows: the y coefficients (-p_lk) get patched later.
        self._balance_rows = {}
        for li, l in enumerate(pools):
            ycols = [col for arc, col in yi.items() if arc[0] == l]
            for ki in range(nk):
                for (s, l2), col in fi.items():
                    if l2 == l:
                        a[row, col] = conc[feeds.index(s), ki]
                self._balance_rows[(li, ki)] = (row, ycols)
                row += 1

        # Product quality rows: the y coefficients (p_lk - cap_jk) get patched.
        self._cap_rows = {}
        for ji, j in enumerate(products):
            for ki in range(nk):
                ycells = [
                    (pools.index(arc[0]), col)
                    for arc, col in yi.items()
                    if arc[1] == j
                ]
                for (s, j2), col in zi.items():
                    if j2 == j:
                        a[row, col] = conc[feeds.index(s), ki] - quality_cap[ji, ki]
                a[row, slack] = 1.0
                slack += 1
                self._cap_rows[(ji, ki)] = (row, ycells, quality_cap[ji, ki])
                row += 1

        for ji, j in enumerate(products):
            for arc, col in yi.items():
                if arc[1] == j:
                    a[row, col] = 1.0
            for arc, col in zi.items():
                if arc[1] == j:
                    a[row, col] = 1.0
            if not demand_is_equality:
                a[row, slack] = 1.0
                slack += 1
            b[row] = demand[ji]
            row += 1

        if pool_capacity is not None:
            for li, l in enumerate(pools):
                for arc, col in yi.items():
                    if arc[0] == l:
                        a[row, col] = 1.0
                a[row, slack] = 1.0
                slack += 1
                b[row] = pool_capacity[li]
                row += 1

        if feed_flow_cap is not None:
            for si, s in enumerate(feeds):
                for arc, col in fi.items():
                    if arc[0] == s:
                        a[row, col] = 1.0
                a[row, slack] = 1.0
                slack += 1
                b[row] = feed_flow_cap[si]
                row += 1

        self._a, self._b, self._c = a, b, c
        self._lower = np.zeros(ncols)
        self._upper = np.full(ncols, np.inf)

    def solve(self, p: np.ndarray) -> tuple[bool, float, np.ndarray]:
        """Solve at quality matrix p (|L| x |K|); returns (feasible, value, flows)."""
        for (li, ki), (row, ycols) in self._balance_rows.items():
            self._a[row, ycols] = -p[li, ki]
        for (ji, ki), (row, ycells, cap) in self._cap_rows.items():
            for li, col in ycells:
                self._a[row, col] = p[li, ki] - cap
        sol = solve_lp(
            LinearProgramSpec(self._c, self._a, self._b, self._lower, self._upper)
        )
        if sol.status != STATUS_OPTIMAL:
            return False, np.inf, np.zeros(0)
        return True, sol.objective, sol.decision[: self.nf + self.ny + self.nz]


def _quality_axes(
    feeds: list[str],
    pools: list[str],
    qualities: list[str],
    arcs_f: list[tuple[str, str]],
    conc: np.ndarray,
    active_pools: list[int] | None = None,
) -> list[tuple[int, int, float, float]]:
    """One grid axis (pool idx, quality idx, lo, hi) per active pool-quality pair."""
    axes = []
    active = range(len(pools)) if active_pools is None else active_pools
    for li in active:
        inlets = [feeds.index(s) for (s, l) in arcs_f if l == pools[li]]
        for ki in range(len(qualities)):
            if inlets:
                vals = conc[inlets, ki]
                axes.append((li, ki, float(vals.min()), float(vals.max())))
            else:
                axes.append((li, ki, 0.0, 0.0))
    return axes


def _grid_search(
    lp: _FixedQualityLP,
    axes: list[tuple[int, int, float, float]],
    nl: int,
    nk: int,
    divisions: int,
    refine: bool,
):
    """Exhaustive grid plus one golden-section pass; returns incumbent and gap."""
    points = []
    for (_, _, lo, hi) in axes:
        if hi - lo < 1e-15:
            points.append(np.array([lo]))
        else:
            points.append(np.linspace(lo, hi, divisions + 1))
    shape = tuple(len(pts) for pts in points)
    values = np.full(shape, np.inf)

    p = np.zeros((nl, nk))
    best_val, best_idx, best_flows = np.inf, None, None
    for idx in itertools.product(*(range(n) for n in shape)):
        for a, (li, ki, _, _) in enumerate(axes):
            p[li, ki] = points[a][idx[a]]
        ok, val, flows = lp.solve(p)
        values[idx] = val if ok else np.inf
        if ok and val < best_val:
            best_val, best_idx, best_flows = val, idx, flows
    if best_idx is None:
        return None

    # Lipschitz-style certificate from adjacent-cell differences.
    gap = 0.0
    for a in range(len(axes)):
        if shape[a] < 2:
            continue
        with np.errstate(invalid="ignore"):
            diffs = np.abs(np.diff(values, axis=a))
        finite = diffs[np.isfinite(diffs)]
        if finite.size:
            gap += 0.5 * float(finite.max())

    best_p = np.zeros((nl, nk))
    for a, (li, ki, _, _) in enumerate(axes):
        best_p[li, ki] = points[a][best_idx[a]]

    if refine:
        for a, (li, ki, lo, hi) in enumerate(axes):
            if shape[a] < 2:
                continue
            delta = points[a][1] - points[a][0]
            left = max(lo, best_p[li, ki] - delta)
            right = min(hi, best_p[li, ki] + delta)

            def val_at(x: float) -> tuple[float, np.ndarray]:
                trial = best_p.copy()
                trial[li, ki] = x
                ok, v, flows = lp.solve(trial)
                return (v if ok else np.inf), flows

            x1 = right - _GOLDEN * (right - left)
            x2 = left + _GOLDEN * (right - left)
            f1, w1 = val_at(x1)
            f2, w2 = val_at(x2)
            for _ in range(20):
                if f1 <= f2:
                    right, x2, f2, w2 = x2, x1, f1, w1
                    x1 = right - _GOLDEN * (right - left)
                    f1, w1 = val_at(x1)
                else:
                    left, x1, f1, w1 = x1, x2, f2, w2
                    x2 = left + _GOLDEN * (right - left)
                    f2, w2 = val_at(x2)
            for x, fv, fw in ((x1, f1, w1), (x2, f2, w2)):
                if fv < best_val:
                    best_val = fv
                    best_p[li, ki] = x
                    best_flows = fw

    return best_val, best_p, best_flows, gap


def _resolve(base: np.ndarray, override) -> np.ndarray:
    return base if override is None else np.asarray(override, dtype=float)


def solve_pooling(
    net: PoolingNetwork,
    u: dict | None = None,
    theta: np.ndarray | None = None,
    grid_divisions: int = 200,
    refine: bool = True,
) -> FopSolution:
    """Grid-certified global solve of the standard pooling problem.

    ``u`` may override availability / cost / revenue_y / revenue_z; ``theta``
    overrides the per-product demand caps (the inverse-optimization unknowns).
    """
    t0 = time.perf_counter()
    u = u or {}
    avail = _resolve(net.availability, u.get("availability"))
    cost = _resolve(net.cost, u.get("cost"))
    rev_y = _resolve(net.revenue_y, u.get("revenue_y"))
    rev_z = _resolve(net.revenue_z, u.get("revenue_z"))
    caps = _resolve(net.quality_cap, u.get("quality_cap"))
    demand = _resolve(net.demand_cap, theta)
    if np.any(demand < 0.0):
        raise ValueError("demand caps must be nonnegative")

    axes = _quality_axes(net.feeds, net.pools, net.qualities, net.arcs_f, net.quality)
    live_axes = sum(1 for (_, _, lo, hi) in axes if hi - lo > 1e-15)
    if live_axes > MAX_GRID_AXES:
        raise ValueError(
            f"{live_axes} pool-quality grid axes exceed the supported {MAX_GRID_AXES}; "
            "use an external oracle for this network"
        )

    f_cost = np.array([cost[net.feeds.index(s)] for (s, _) in net.arcs_f])
    lp = _FixedQualityLP(
        net.feeds, net.pools, net.products, net.qualities,
        net.arcs_f, net.arcs_y, net.arcs_z,
        net.quality, f_cost, rev_y, rev_z, avail, caps, demand,
        demand_is_equality=False,
    )
    index_map = {
        "f": [arc_label(a) for a in net.arcs_f],
        "y": [arc_label(a) for a in net.arcs_y],
        "z": [arc_label(a) for a in net.arcs_z],
        "p": [f"{l}:{k}" for l in net.pools for k in net.qualities],
    }
    result = _grid_search(lp, axes, len(net.pools), len(net.qualities),
                          grid_divisions, refine)
    if result is None:
        sol = FopSolution(
            STATUS_INFEASIBLE, float("nan"),
            np.full(sum(len(v) for v in index_map.values()), np.nan), index_map,
            solve_time_s=time.perf_counter() - t0,
        )
        return sol
    best_val, best_p, best_flows, gap = result
    decision = np.concatenate([best_flows, best_p.ravel()])
    return FopSolution(
        STATUS_GRID_OPTIMAL, float(best_val), decision, index_map,
        solve_time_s=time.perf_counter() - t0, gap=gap,
    )


def solve_genpooling(
    net: GenPoolingNetwork,
    u: dict | None = None,
    theta: np.ndarray | None = None,
    grid_divisions: int = 200,
    refine: bool = True,
) -> FopSolution:
    """Generalized pooling solve: binary enumeration over install patterns.

    ``theta`` overrides the quality requirement matrix (|J| x |K|); ``u`` may
    override availability / cost / revenue_y / revenue_z / demand.  Each
    pattern fixes the binaries, leaving a grid-certified pooling solve over
    the active pools; patterns are enumerated exhaustively.
    """
    t0 = time.perf_counter()
    ns, nl = len(net.feeds), len(net.pools)
    if ns + nl > MAX_BINARIES:
        raise ValueError(
            f"{ns + nl} install binaries exceed the supported {MAX_BINARIES}; "
            "use an external oracle for this network"
        )
    u = u or {}
    avail = _resolve(net.availability, u.get("availability"))
    cost = _resolve(net.cost, u.get("cost"))
    rev_y = _resolve(net.revenue_y, u.get("revenue_y"))
    rev_z = _resolve(net.revenue_z, u.get("revenue_z"))
    demand = _resolve(net.demand, u.get("demand"))
    req = net.quality_req if theta is None else np.asarray(theta, dtype=float)
    if req.shape != (len(net.products), len(net.qualities)):
        raise ValueError("theta must be a (products x qualities) requirement matrix")

    f_cost = np.array(
        [cost[net.feeds.index(s)] for (s, _) in net.arcs_f]
    ) + net.arc_cost

    index_map = {
        "f": [arc_label(a) for a in net.arcs_f],
        "y": [arc_label(a) for a in net.arcs_y],
        "z": [arc_label(a) for a in net.arcs_z],
        "p": [f"{l}:{k}" for l in net.pools for k in net.qualities],
        "gamma_init": list(net.feeds),
        "gamma_pool": list(net.pools),
    }
    total_demand = float(demand.sum())

    best = None
    for bits in itertools.product((0, 1), repeat=ns + nl):
        g_init = np.array(bits[:ns], dtype=float)
        g_pool = np.array(bits[ns:], dtype=float)
        if float(avail @ g_init) < total_demand - 1e-12:
            continue
        install = float(net.install_cost_feed @ g_init + net.install_cost_pool @ g_pool)
        active = [li for li in range(nl) if g_pool[li] > 0.5]
        axes = _quality_axes(net.feeds, net.pools, net.qualities, net.arcs_f,
                             net.quality, active_pools=active)
        live = sum(1 for (_, _, lo, hi) in axes if hi - lo > 1e-15)
        if live > MAX_GRID_AXES:
            raise ValueError(
                f"{live} pool-quality grid axes exceed the supported {MAX_GRID_AXES}"
            )
        lp = _FixedQualityLP(
            net.feeds, net.pools, net.products, net.qualities,
            net.arcs_f, net.arcs_y, net.arcs_z,
            net.quality, f_cost, rev_y, rev_z, avail * g_init, req, demand,
            demand_is_equality=True,
            pool_capacity=net.pool_capacity * g_pool,
            feed_flow_cap=avail * g_init,
        )
        result = _grid_search(lp, axes, nl, len(net.qualities), grid_divisions, refine)
        if result is None:
            continue
        val, p_active, flows, gap = result
        total = val + install
        if best is None or total < best[0]:
            # Inactive pools keep the low end of their quality range.
            p_full = np.zeros((nl, len(net.qualities)))
            for (li, ki, lo, _hi) in _quality_axes(
                net.feeds, net.pools, net.qualities, net.arcs_f, net.quality
            ):
                p_full[li, ki] = lo
            for li in active:
                p_full[li] = p_active[li]
            best = (total, p_full, flows, gap, g_init, g_pool)

    if best is None:
        return FopSolution(
            STATUS_INFEASIBLE, float("nan"),
            np.full(sum(len(v) for v in index_map.values()), np.nan), index_map,
            solve_time_s=time.perf_counter() - t0,
        )
    total, p_full, flows, gap, g_init, g_pool = best
    decision = np.concatenate([flows, p_full.ravel(), g_init, g_pool])
    return FopSolution(
        STATUS_GRID_OPTIMAL, float(total), decision, index_map,
        solve_time_s=time.perf_counter() - t0, gap=gap,
    )


# ---------------------------------------------------------------------------
# Feasibility diagnostics
# ---------------------------------------------------------------------------


def pooling_residuals(
    net: PoolingNetwork,
    sol: FopSolution,
    u: dict | None = None,
    theta: np.ndarray | None = None,
) -> float:
    """Largest constraint violation of a pooling solution (scaled by flow size)."""
    u = u or {}
    avail = _resolve(net.availability, u.get("availability"))
    caps = _resolve(net.quality_cap, u.get("quality_cap"))
    demand = _resolve(net.demand_cap, theta)
    f = sol.family_values("f")
    y = sol.family_values("y")
    z = sol.family_values("z")
    p = sol.family_values("p").reshape(len(net.pools), len(net.qualities))
    scale = max(1.0, float(np.max(np.abs(np.concatenate([f, y, z])))))

    worst = max(0.0, float(-min(f.min(initial=0.0), y.min(initial=0.0), z.min(initial=0.0))))
    for si, s in enumerate(net.feeds):
        used = sum(f[i] for i, a in enumerate(net.arcs_f) if a[0] == s)
        used += sum(z[i] for i, a in enumerate(net.arcs_z) if a[0] == s)
        worst = max(worst, used - avail[si])
    for li, l in enumerate(net.pools):
        fin = sum(f[i] for i, a in enumerate(net.arcs_f) if a[1] == l)
        yout = sum(y[i] for i, a in enumerate(net.arcs_y) if a[0] == l)
        worst = max(worst, abs(fin - yout))
        for ki in range(len(net.qualities)):
            qin = sum(
                net.quality[net.feeds.index(a[0]), ki] * f[i]
                for i, a in enumerate(net.arcs_f)
                if a[1] == l
            )
            worst = max(worst, abs(qin - p[li, ki] * yout))
    for ji, j in enumerate(net.products):
        total = sum(y[i] for i, a in enumerate(net.arcs_y) if a[1] == j)
        total += sum(z[i] for i, a in enumerate(net.arcs_z) if a[1] == j)
        worst = max(worst, total - demand[ji])
        for ki in range(len(net.qualities)):
            blended = sum(
                p[net.pools.index(a[0]), ki] * y[i]
                for i, a in enumerate(net.arcs_y)
                if a[1] == j
            )
            blended += sum(
                net.quality[net.feeds.index(a[0]), ki] * z[i]
                for i, a in enumerate(net.arcs_z)
                if a[1] == j
            )
            worst = max(worst, blended - caps[ji, ki] * total)
    return worst / scale
