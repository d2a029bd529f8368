"""Decision-loss evaluation over observation sets.

The inverse problem scores a candidate parameter vector by re-solving the
forward problem once per observation and accumulating weighted squared
residuals between observed and predicted decisions.  Forward solves are
independent, so they can fan out over a process pool; the reduction is a
fixed-order sum so that serial and parallel evaluation agree bit for bit.
"""
from __future__ import annotations

import dataclasses
import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .fop.pooling import solve_genpooling, solve_pooling
from .fop.qp import solve_fba
from .fop.types import FbaProblem, GenPoolingNetwork, PoolingNetwork

DEFAULT_PENALTY_PER_OBS = 1.0e6


# ---------------------------------------------------------------------------
# Observations and forward-problem bindings
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Observation:
    """One (context, observed decision) pair.

    Parameters
    ----------
    u : dict
        Context fields that vary per observation (flux bounds, availabilities,
        demands); keys must match what the binding's solver accepts.
    x : numpy.ndarray
        Observed decision vector over the binding's observed components, in
        the binding's observation space (standardized when the binding
        carries standardization statistics).
    """

    u: dict
    x: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        if self.x.ndim != 1:
            raise ValueError("observed decision must be a flat vector")


@dataclass(frozen=True)
class FbaBinding:
    """Forward binding for the regularized flux-allocation problem.

    The free parameter vector holds all but the last objective weight; the
    last is reconstructed as one minus the sum.  When standardization
    statistics are present, predictions are mapped into the same standardized
    space the observations were recorded in.
    """

    problem: FbaProblem
    norm_mean: np.ndarray | None = None
    norm_scale: np.ndarray | None = None

    def __post_init__(self) -> None:
        n = len(self.problem.reactions)
        for field in ("norm_mean", "norm_scale"):
            val = getattr(self, field)
            if val is not None:
                arr = np.asarray(val, dtype=float)
                if arr.shape != (n,):
                    raise ValueError(f"{field} must have one entry per reaction")
                object.__setattr__(self, field, arr)

    @property
    def observed_size(self) -> int:
        return len(self.problem.reactions)

    def full_parameter(self, theta: np.ndarray) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if theta.shape == (len(self.problem.objective_set),):
            return theta
        return np.append(theta, 1.0 - theta.sum())

    def predict(self, u: dict, theta: np.ndarray) -> np.ndarray | None:
        bounds = (np.asarray(u["lower"], float), np.asarray(u["upper"], float))
        sol = solve_fba(self.problem, bounds, self.full_parameter(theta))
        if not sol.ok:
            return None
        v = sol.decision
        if self.norm_mean is not None:
            v = (v - self.norm_mean) / self.norm_scale
        return v


@dataclass(frozen=True)
class PoolingBinding:
    """Forward binding for the pooling network; demand caps are the unknowns."""

    network: PoolingNetwork
    observed_families: tuple[str, ...] = ("f", "y")
    grid_divisions: int = 200

    @property
    def observed_size(self) -> int:
        sizes = {
            "f": len(self.network.arcs_f),
            "y": len(self.network.arcs_y),
            "z": len(self.network.arcs_z),
        }
        return sum(sizes[fam] for fam in self.observed_families)

    def full_parameter(self, theta: np.ndarray) -> np.ndarray:
        return np.asarray(theta, dtype=float)

    def predict(self, u: dict, theta: np.ndarray) -> np.ndarray | None:
        sol = solve_pooling(
            self.network, u=u, theta=self.full_parameter(theta),
            grid_divisions=self.grid_divisions,
        )
        if not sol.ok:
            return None
        return np.concatenate([sol.family_values(f) for f in self.observed_families])


@dataclass(frozen=True)
class GenPoolingBinding:
    """Forward binding for the generalized pooling network.

    The unknowns are the per-product first-quality requirement limits; the
    second column of the requirement matrix is reconstructed as one minus the
    first (the two limits sum to one per product).
    """

    network: GenPoolingNetwork
    observed_families: tuple[str, ...] = ("f",)
    grid_divisions: int = 200

    def __post_init__(self) -> None:
        if len(self.network.qualities) != 2:
            raise ValueError(
                "the paired-requirement parameterization needs exactly two qualities"
            )

    @property
    def observed_size(self) -> int:
        sizes = {
            "f": len(self.network.arcs_f),
            "y": len(self.network.arcs_y),
            "z": len(self.network.arcs_z),
        }
        return sum(sizes[fam] for fam in self.observed_families)

    def full_parameter(self, theta: np.ndarray) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        nj = len(self.network.products)
        if theta.shape == (nj * 2,):
            return theta
        if theta.shape != (nj,):
            raise ValueError("theta must hold one free requirement per product")
        return np.column_stack([theta, 1.0 - theta]).ravel()

    def predict(self, u: dict, theta: np.ndarray) -> np.ndarray | None:
        req = self.full_parameter(theta).reshape(len(self.network.products), 2)
        sol = solve_genpooling(
            self.network, u=u, theta=req, grid_divisions=self.grid_divisions,
        )
        if not sol.ok:
            return None
        return np.concatenate([sol.family_values(f) for f in self.observed_families])


Binding = FbaBinding | PoolingBinding | GenPoolingBinding


# ---------------------------------------------------------------------------
# Loss configuration and evaluation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LossConfig:
    """How residuals are weighted and forward solves dispatched.

    ``weight`` is the residual weight matrix: ``None`` means identity, a 1-D
    array a diagonal, a 2-D array the full matrix (must be symmetric positive
    definite).  ``penalty`` replaces the loss whenever any forward solve is
    infeasible; ``None`` selects 1e6 times the observation count.
    """

    binding: Binding
    weight: np.ndarray | None = None
    penalty: float | None = None
    workers: int = 1

    def __post_init__(self) -> None:
        if self.weight is not None:
            w = np.asarray(self.weight, dtype=float)
            if w.ndim == 1:
                if np.any(w <= 0.0):
                    raise ValueError("diagonal weights must be positive")
            elif w.ndim == 2:
                if not np.allclose(w, w.T, atol=1e-12):
                    raise ValueError("weight matrix must be symmetric")
                if np.linalg.eigvalsh(w).min() <= 0.0:
                    raise ValueError("weight matrix must be positive definite")
            else:
                raise ValueError("weight must be a vector or a matrix")
            object.__setattr__(self, "weight", w)
        if self.workers < 1:
            raise ValueError("workers must be at least 1")

    def penalty_for(self, n_obs: int) -> float:
        if self.penalty is not None:
            return float(self.penalty)
        return DEFAULT_PENALTY_PER_OBS * n_obs


@dataclass(frozen=True)
class LossEval:
    """Loss value plus the infeasibility flag the search loop records."""

    value: float
    penalized: bool


def _predict_one(task: tuple[Binding, dict, np.ndarray]) -> np.ndarray | None:
    binding, u, theta = task
    return binding.predict(u, theta)


def _predict_all(
    theta: np.ndarray,
    observations: list[Observation],
    cfg: LossConfig,
) -> list[np.ndarray | None]:
    theta = np.asarray(theta, dtype=float)
    tasks = [(cfg.binding, obs.u, theta) for obs in observations]
    if cfg.workers == 1 or len(observations) <= 1:
        return [_predict_one(t) for t in tasks]
    ctx = multiprocessing.get_context("fork")
    with ProcessPoolExecutor(max_workers=cfg.workers, mp_context=ctx) as pool:
        return list(pool.map(_predict_one, tasks))


def _weighted_square(r: np.ndarray, w: np.ndarray | None) -> float:
    if w is None:
        return float(r @ r)
    if w.ndim == 1:
        return float(r @ (w * r))
    return float(r @ w @ r)


def evaluate_loss(
    theta: np.ndarray,
    observations: list[Observation],
    cfg: LossConfig,
) -> LossEval:
    """Sum of per-observation weighted squared decision residuals.

    Any infeasible forward solve turns the whole evaluation into the
    configured penalty (flagged) rather than an exception, so the search
    loop stays alive on parameter vectors that break the forward problem.
    """
    if not observations:
        raise ValueError("need at least one observation")
    predictions = _predict_all(theta, observations, cfg)
    if any(p is None for p in predictions):
        return LossEval(cfg.penalty_for(len(observations)), True)
    total = 0.0
    for obs, pred in zip(observations, predictions):
        if pred.shape != obs.x.shape:
            raise ValueError("prediction and observation shapes disagree")
        total += _weighted_square(obs.x - pred, cfg.weight)
    return LossEval(total, False)


def decision_error(
    theta: np.ndarray,
    observations: list[Observation],
    cfg: LossConfig,
) -> LossEval:
    """Mean squared per-component decision error (reporting metric).

    Unweighted by construction: the average runs over all observed
    components of all observations, in whatever (possibly standardized)
    space the binding records observations in.
    """
    if not observations:
        raise ValueError("need at least one observation")
    predictions = _predict_all(theta, observations, cfg)
    if any(p is None for p in predictions):
        return LossEval(cfg.penalty_for(len(observations)), True)
    total = 0.0
    count = 0
    for obs, pred in zip(observations, predictions):
        r = obs.x - pred
        total += float(r @ r)
        count += r.size
    return LossEval(total / count, False)


def parameter_error(theta_true: np.ndarray, theta_hat: np.ndarray) -> float:
    """Euclidean distance between full reconstructed parameter vectors."""
    a = np.asarray(theta_true, dtype=float)
    b = np.asarray(theta_hat, dtype=float)
    if a.shape != b.shape:
        raise ValueError("parameter vectors must have matching shapes")
    return float(np.linalg.norm(a - b))


# ---------------------------------------------------------------------------
# Observation dataset files
# ---------------------------------------------------------------------------

OBS_HEADER = "bo4io-obs v1"

_CASE_FOR_BINDING = {FbaBinding: "fba", PoolingBinding: "pooling",
                     GenPoolingBinding: "genpooling"}


def _fmt(values: np.ndarray) -> str:
    return " ".join(repr(float(v)) for v in np.asarray(values, float).ravel())


def write_observations(
    path,
    binding: Binding,
    observations: list[Observation],
    sigma: float,
    network_label: str,
) -> None:
    """Serialize an observation set plus what the loss needs to rebuild it.

    Instance-level overrides (drawn prices, costs) are recorded as the
    difference between the binding's network and the bundled nominal one is
    not recoverable otherwise; per-observation context lives in ``u`` lines.
    """
    case = _CASE_FOR_BINDING[type(binding)]
    lines = [OBS_HEADER, f"case {case}", f"network {network_label}"]
    if isinstance(binding, FbaBinding):
        lines.append("observed v")
        lines.append("objective " + " ".join(binding.problem.objective_set))
        if binding.norm_mean is not None:
            lines.append("standardize mean " + _fmt(binding.norm_mean))
            lines.append("standardize scale " + _fmt(binding.norm_scale))
    else:
        lines.append("observed " + " ".join(binding.observed_families))
        net = binding.network
        for field in ("cost", "revenue_y", "revenue_z"):
            lines.append(f"instance {field} " + _fmt(getattr(net, field)))
        lines.append(f"grid_divisions {binding.grid_divisions}")
    lines.append(f"sigma {repr(float(sigma))}")
    for i, obs in enumerate(observations):
        lines.append(f"observation {i}")
        for key in sorted(obs.u):
            lines.append(f"u {key} " + _fmt(obs.u[key]))
        lines.append("x " + _fmt(obs.x))
    lines.append("end")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_observations(path, network_registry: dict) -> tuple[Binding, list[Observation], dict]:
    """Rebuild (binding, observations, meta) from a dataset file.

    ``network_registry`` maps network labels to constructor callables; the
    bundled registries live in :mod:`bo4io.fop.networks`.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or lines[0] != OBS_HEADER:
        raise ValueError(f"unrecognized dataset header in {path}")

    meta: dict = {}
    instance: dict[str, np.ndarray] = {}
    norm_mean = norm_scale = None
    observed: tuple[str, ...] = ()
    objective: list[str] | None = None
    grid_divisions = 200
    observations: list[Observation] = []
    current_u: dict | None = None
    current_x: np.ndarray | None = None

    def flush() -> None:
        nonlocal current_u, current_x
        if current_u is not None:
            if current_x is None:
                raise ValueError("observation block missing its decision line")
            observations.append(Observation(current_u, current_x))
        current_u, current_x = None, None

    for ln in lines[1:]:
        if not ln or ln.startswith("#"):
            continue
        parts = ln.split()
        key = parts[0]
        if key == "case":
            meta["case"] = parts[1]
        elif key == "network":
            meta["network"] = parts[1]
        elif key == "observed":
            observed = tuple(parts[1:])
        elif key == "objective":
            objective = parts[1:]
        elif key == "standardize":
            vec = np.array([float(t) for t in parts[2:]])
            if parts[1] == "mean":
                norm_mean = vec
            else:
                norm_scale = vec
        elif key == "instance":
            instance[parts[1]] = np.array([float(t) for t in parts[2:]])
        elif key == "grid_divisions":
            grid_divisions = int(parts[1])
        elif key == "sigma":
            meta["sigma"] = float(parts[1])
        elif key == "observation":
            flush()
            current_u = {}
        elif key == "u":
            current_u[parts[1]] = np.array([float(t) for t in parts[2:]])
        elif key == "x":
            current_x = np.array([float(t) for t in parts[1:]])
        elif key == "end":
            flush()
        else:
            raise ValueError(f"unrecognized dataset line: {ln!r}")

    if "case" not in meta or "network" not in meta:
        raise ValueError("dataset file missing case or network line")
    net = network_registry[meta["network"]]()
    if instance:
        net = dataclasses.replace(net, **{k: v for k, v in instance.items()})
    if meta["case"] == "fba":
        if objective is not None:
            net = dataclasses.replace(net, objective_set=objective)
        binding: Binding = FbaBinding(net, norm_mean, norm_scale)
    elif meta["case"] == "pooling":
        binding = PoolingBinding(net, observed, grid_divisions)
    elif meta["case"] == "genpooling":
        binding = GenPoolingBinding(net, observed, grid_divisions)
    else:
        raise ValueError(f"unrecognized case {meta['case']!r}")
    return binding, observations, meta
