"""Plain-text serialization of forward-problem instances (bo4io-fop v1).

Line-oriented, whitespace-tokenized, '#' starts a comment.  The first line is
the versioned header.  A document carries one fully resolved instance: any
contextual overrides (bounds, availabilities, prices) are baked in by the
writer, so a reader or an external solver needs no other inputs except the
optional objective weights carried on the ``weights`` line.
"""
from __future__ import annotations

import numpy as np

from .types import FbaProblem, GenPoolingNetwork, PoolingNetwork

HEADER = "bo4io-fop v1"


class FormatError(ValueError):
    """Malformed or unsupported instance document."""


def _fmt(x: float) -> str:
    return repr(float(x))


def write_fop(problem, weights: np.ndarray | None = None) -> str:
    lines = [HEADER]
    if isinstance(problem, FbaProblem):
        lines.append("case fba")
        lines.append(f"name {problem.name}")
        lines.append(f"lambda {_fmt(problem.regularization)}")
        lines.append("metabolites " + " ".join(problem.metabolites))
        for i, r in enumerate(problem.reactions):
            sign = int(problem.bound_signs[i])
            lines.append(
                f"reaction {r} {_fmt(problem.lower[i])} {_fmt(problem.upper[i])} {sign}"
            )
        mets = problem.metabolites
        for j, r in enumerate(problem.reactions):
            for i in np.flatnonzero(problem.stoich[:, j]):
                lines.append(f"stoich {mets[i]} {r} {_fmt(problem.stoich[i, j])}")
        lines.append("objective " + " ".join(problem.objective_set))
    elif isinstance(problem, PoolingNetwork):
        lines.append("case pooling")
        lines.extend(_pooling_common(problem))
        for ji, j in enumerate(problem.products):
            for ki, k in enumerate(problem.qualities):
                lines.append(f"quality_cap {j} {k} {_fmt(problem.quality_cap[ji, ki])}")
        for ji, j in enumerate(problem.products):
            lines.append(f"demand_cap {j} {_fmt(problem.demand_cap[ji])}")
    elif isinstance(problem, GenPoolingNetwork):
        lines.append("case genpooling")
        lines.extend(_pooling_common(problem))
        for i, arc in enumerate(problem.arcs_f):
            lines.append(f"arc_cost {arc[0]} {arc[1]} {_fmt(problem.arc_cost[i])}")
        for si, s in enumerate(problem.feeds):
            lines.append(f"install feed {s} {_fmt(problem.install_cost_feed[si])}")
        for li, l in enumerate(problem.pools):
            lines.append(f"install pool {l} {_fmt(problem.install_cost_pool[li])}")
        for li, l in enumerate(problem.pools):
            lines.append(f"pool_capacity {l} {_fmt(problem.pool_capacity[li])}")
        for ji, j in enumerate(problem.products):
            lines.append(f"demand {j} {_fmt(problem.demand[ji])}")
        for ji, j in enumerate(problem.products):
            for ki, k in enumerate(problem.qualities):
                lines.append(f"quality_req {j} {k} {_fmt(problem.quality_req[ji, ki])}")
    else:
        raise FormatError(f"cannot serialize {type(problem).__name__}")
    if weights is not None:
        lines.append("weights " + " ".join(_fmt(w) for w in np.asarray(weights).ravel()))
    return "\n".join(lines) + "\n"


def _pooling_common(net) -> list[str]:
    lines = [f"name {net.name}"]
    lines.append("feeds " + " ".join(net.feeds))
    lines.append("pools " + " ".join(net.pools))
    lines.append("products " + " ".join(net.products))
    lines.append("qualities " + " ".join(net.qualities))
    for (s, l) in net.arcs_f:
        lines.append(f"arc f {s} {l}")
    for (l, j) in net.arcs_y:
        lines.append(f"arc y {l} {j}")
    for (s, j) in net.arcs_z:
        lines.append(f"arc z {s} {j}")
    for si, s in enumerate(net.feeds):
        for ki, k in enumerate(net.qualities):
            lines.append(f"conc {s} {k} {_fmt(net.quality[si, ki])}")
    for si, s in enumerate(net.feeds):
        lines.append(f"cost {s} {_fmt(net.cost[si])}")
    for i, (l, j) in enumerate(net.arcs_y):
        lines.append(f"revenue y {l} {j} {_fmt(net.revenue_y[i])}")
    for i, (s, j) in enumerate(net.arcs_z):
        lines.append(f"revenue z {s} {j} {_fmt(net.revenue_z[i])}")
    for si, s in enumerate(net.feeds):
        lines.append(f"availability {s} {_fmt(net.availability[si])}")
    return lines


def _tokenize(text: str) -> list[list[str]]:
    rows = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            rows.append(line.split())
    return rows


def read_fop(text: str):
    """Parse a bo4io-fop document; returns (problem, weights-or-None)."""
    rows = _tokenize(text)
    if not rows or " ".join(rows[0]) != HEADER:
        raise FormatError(f"missing or unsupported header (expected {HEADER!r})")
    fields: dict = {
        "arc_f": [], "arc_y": [], "arc_z": [], "stoich": [], "reaction": [],
        "conc": {}, "cost": {}, "revenue_y": {}, "revenue_z": {},
        "availability": {}, "quality_cap": {}, "demand_cap": {},
        "arc_cost": {}, "install_feed": {}, "install_pool": {},
        "pool_capacity": {}, "demand": {}, "quality_req": {},
    }
    weights = None
    case = None
    try:
        for row in rows[1:]:
            key, rest = row[0], row[1:]
            if key == "case":
                case = rest[0]
            elif key in ("name",):
                fields["name"] = rest[0]
            elif key == "lambda":
                fields["lambda"] = float(rest[0])
            elif key in ("metabolites", "feeds", "pools", "products", "qualities",
                         "objective"):
                fields[key] = list(rest)
            elif key == "reaction":
                fields["reaction"].append(
                    (rest[0], float(rest[1]), float(rest[2]), float(rest[3]))
                )
            elif key == "stoich":
                fields["stoich"].append((rest[0], rest[1], float(rest[2])))
            elif key == "arc":
                fields[f"arc_{rest[0]}"].append((rest[1], rest[2]))
            elif key == "conc":
                fields["conc"][(rest[0], rest[1])] = float(rest[2])
            elif key == "revenue":
                fields[f"revenue_{rest[0]}"][(rest[1], rest[2])] = float(rest[3])
            elif key in ("cost", "availability", "demand_cap", "demand",
                         "pool_capacity"):
                fields[key][rest[0]] = float(rest[1])
            elif key in ("quality_cap", "quality_req"):
                fields[key][(rest[0], rest[1])] = float(rest[2])
            elif key == "arc_cost":
                fields["arc_cost"][(rest[0], rest[1])] = float(rest[2])
            elif key == "install":
                fields[f"install_{rest[0]}"][rest[1]] = float(rest[2])
            elif key == "weights":
                weights = np.array([float(v) for v in rest])
            else:
                raise FormatError(f"unknown key {key!r}")
    except (IndexError, ValueError) as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"malformed line near {row!r}") from exc

    if case == "fba":
        return _build_fba(fields), weights
    if case == "pooling":
        return _build_pooling(fields), weights
    if case == "genpooling":
        return _build_genpooling(fields), weights
    raise FormatError(f"unknown or missing case {case!r}")


def _build_fba(f: dict) -> FbaProblem:
    mets = f["metabolites"]
    names = [r[0] for r in f["reaction"]]
    stoich = np.zeros((len(mets), len(names)))
    for met, rxn, coef in f["stoich"]:
        stoich[mets.index(met), names.index(rxn)] = coef
    return FbaProblem(
        name=f.get("name", "unnamed"),
        metabolites=mets,
        reactions=names,
        stoich=stoich,
        lower=np.array([r[1] for r in f["reaction"]]),
        upper=np.array([r[2] for r in f["reaction"]]),
        objective_set=f["objective"],
        regularization=f["lambda"],
        bound_signs=np.array([r[3] for r in f["reaction"]]),
    )


def _pooling_kwargs(f: dict) -> dict:
    feeds, pools = f["feeds"], f["pools"]
    products, qualities = f["products"], f["qualities"]
    return dict(
        name=f.get("name", "unnamed"),
        feeds=feeds,
        pools=pools,
        products=products,
        qualities=qualities,
        arcs_f=f["arc_f"],
        arcs_y=f["arc_y"],
        arcs_z=f["arc_z"],
        quality=np.array([[f["conc"][(s, k)] for k in qualities] for s in feeds]),
        cost=np.array([f["cost"][s] for s in feeds]),
        revenue_y=np.array([f["revenue_y"][arc] for arc in f["arc_y"]]),
        revenue_z=np.array([f["revenue_z"][arc] for arc in f["arc_z"]]),
        availability=np.array([f["availability"][s] for s in feeds]),
    )


def _build_pooling(f: dict) -> PoolingNetwork:
    kw = _pooling_kwargs(f)
    products, qualities = kw["products"], kw["qualities"]
    return PoolingNetwork(
        quality_cap=np.array(
            [[f["quality_cap"][(j, k)] for k in qualities] for j in products]
        ),
        demand_cap=np.array([f["demand_cap"][j] for j in products]),
        **kw,
    )


def _build_genpooling(f: dict) -> GenPoolingNetwork:
    kw = _pooling_kwargs(f)
    products, qualities = kw["products"], kw["qualities"]
    return GenPoolingNetwork(
        arc_cost=np.array([f["arc_cost"][arc] for arc in kw["arcs_f"]]),
        install_cost_feed=np.array([f["install_feed"][s] for s in kw["feeds"]]),
        install_cost_pool=np.array([f["install_pool"][l] for l in kw["pools"]]),
        pool_capacity=np.array([f["pool_capacity"][l] for l in kw["pools"]]),
        demand=np.array([f["demand"][j] for j in products]),
        quality_req=np.array(
            [[f["quality_req"][(j, k)] for k in qualities] for j in products]
        ),
        **kw,
    )
