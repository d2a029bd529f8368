"""Deterministic synthetic dataset generation for the bundled benchmarks.

Every random draw comes from a counter-based stream keyed by
(seed, purpose tag, observation index, attempt), so a redraw of one
infeasible observation never shifts any other draw, and the test split is
reproducible without generating the training split first.
"""
from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass

import numpy as np
import yaml

from .domain import ParameterDomain
from .fop.networks import BUNDLED_FBA, BUNDLED_GENPOOLING, BUNDLED_POOLING
from .loss import (
    Binding,
    FbaBinding,
    GenPoolingBinding,
    Observation,
    PoolingBinding,
    write_observations,
)
from .fop.qp import solve_fba

MAX_REDRAWS = 100

# Stream tags (second component of the RNG spawn key).
_TAG_THETA = 0
_TAG_INSTANCE = 1
_TAG_TRAIN = 2
_TAG_TEST = 3
_TAG_TRAIN_NOISE = 4
_TAG_TEST_NOISE = 5

_DEFAULT_NETWORK = {"fba": "toy10", "pooling": "haverly1", "genpooling": "tinygen"}


@dataclass(frozen=True)
class GenSpec:
    """What to generate: forward-problem case, sizes, noise level, seed."""

    case: str
    d: int
    n_train: int
    n_test: int
    sigma: float
    seed: int
    network: str = ""
    grid_divisions: int = 200

    def __post_init__(self) -> None:
        if self.case not in _DEFAULT_NETWORK:
            raise ValueError(f"unrecognized case {self.case!r}")
        if self.sigma < 0.0:
            raise ValueError("sigma must be nonnegative")
        if self.n_train < 1:
            raise ValueError("need at least one training observation")
        if self.n_test < 0 or self.d < 1:
            raise ValueError("n_test must be >= 0 and d >= 1")
        if not self.network:
            object.__setattr__(self, "network", _DEFAULT_NETWORK[self.case])


@dataclass(frozen=True)
class Dataset:
    """One observation split plus the binding that evaluates it."""

    binding: Binding
    observations: list[Observation]
    sigma: float
    network_label: str


@dataclass(frozen=True)
class GenResult:
    theta_true: np.ndarray
    train: Dataset
    test: Dataset
    manifest: dict


def _stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=key))


# ---------------------------------------------------------------------------
# Flux-allocation datasets
# ---------------------------------------------------------------------------


def _fba_split(problem, theta_full, spec, tag, noise_tag, count):
    """Draw bounds, solve noise-free, standardize across the split, noise."""
    n = len(problem.reactions)
    contexts: list[dict] = []
    fluxes = np.empty((count, n))
    for index in range(count):
        solved = False
        for attempt in range(MAX_REDRAWS):
            rng = _stream(spec.seed, tag, index, attempt)
            draws = rng.uniform(10.0, 100.0, size=(2, n))
            lo, hi = draws.min(axis=0), draws.max(axis=0)
            if problem.bound_signs is not None:
                lo, hi = lo * problem.bound_signs, hi * problem.bound_signs
                lo, hi = np.minimum(lo, hi), np.maximum(lo, hi)
            sol = solve_fba(problem, (lo, hi), theta_full)
            if sol.ok:
                contexts.append({"lower": lo, "upper": hi})
                fluxes[index] = sol.decision
                solved = True
                break
        if not solved:
            raise RuntimeError(
                f"observation {index}: no feasible bounds in {MAX_REDRAWS} redraws"
            )
    mean = fluxes.mean(axis=0)
    scale = fluxes.std(axis=0)
    scale = np.where(scale < 1e-12, 1.0, scale)
    standardized = (fluxes - mean) / scale
    observations = []
    for index in range(count):
        noise = _stream(spec.seed, noise_tag, index).normal(0.0, spec.sigma, size=n)
        observations.append(Observation(contexts[index], standardized[index] + noise))
    binding = FbaBinding(problem, mean, scale)
    return Dataset(binding, observations, spec.sigma, spec.network)


def gen_fba(spec: GenSpec) -> GenResult:
    """Dirichlet ground-truth weights, uniform flux-bound contexts.

    The unknown dimension ``d`` selects the first ``d + 1`` reactions of the
    network's objective set; the ground truth is drawn from a flat Dirichlet
    over those weights so it sums to one exactly.
    """
    problem = BUNDLED_FBA[spec.network]()
    if spec.d + 1 > len(problem.objective_set):
        raise ValueError(
            f"d={spec.d} needs {spec.d + 1} objective reactions; "
            f"network has {len(problem.objective_set)}"
        )
    problem = dataclasses.replace(
        problem, objective_set=problem.objective_set[: spec.d + 1]
    )
    theta_true = _stream(spec.seed, _TAG_THETA).dirichlet(np.ones(spec.d + 1))
    train = _fba_split(problem, theta_true, spec, _TAG_TRAIN, _TAG_TRAIN_NOISE,
                       spec.n_train)
    test = _fba_split(problem, theta_true, spec, _TAG_TEST, _TAG_TEST_NOISE,
                      max(spec.n_test, 1))
    if spec.n_test == 0:
        test = dataclasses.replace(test, observations=[])
    return GenResult(theta_true, train, test, _manifest(spec, theta_true, train))


# ---------------------------------------------------------------------------
# Pooling datasets
# ---------------------------------------------------------------------------


def _pooling_instance(net, spec):
    """Per-instance cost/price draws, uniform between the nominal extremes."""
    rng = _stream(spec.seed, _TAG_INSTANCE)
    cost_lo, cost_hi = float(net.cost.min()), float(net.cost.max())
    prices = np.concatenate([net.revenue_y, net.revenue_z])
    if spec.case == "genpooling":
        price_lo, price_hi = 0.5 * float(prices.min()), 1.5 * float(prices.max())
    else:
        price_lo, price_hi = float(prices.min()), float(prices.max())
    return dataclasses.replace(
        net,
        cost=rng.uniform(cost_lo, cost_hi, size=len(net.feeds)),
        revenue_y=rng.uniform(price_lo, price_hi, size=len(net.arcs_y)),
        revenue_z=rng.uniform(price_lo, price_hi, size=len(net.arcs_z)),
    )


def _pooled_split(binding, theta, spec, tag, noise_tag, count, draw_context):
    observations: list[Observation] = []
    for index in range(count):
        pred = None
        for attempt in range(MAX_REDRAWS):
            rng = _stream(spec.seed, tag, index, attempt)
            u = draw_context(rng)
            pred = binding.predict(u, theta)
            if pred is not None:
                break
        if pred is None:
            raise RuntimeError(
                f"observation {index}: no feasible context in {MAX_REDRAWS} redraws"
            )
        noise = _stream(spec.seed, noise_tag, index).normal(
            0.0, spec.sigma, size=pred.size
        )
        observations.append(Observation(u, pred + noise))
    return Dataset(binding, observations, spec.sigma, spec.network)


def gen_pooling(spec: GenSpec) -> GenResult:
    """Demand caps as unknowns; availabilities vary per observation."""
    net = BUNDLED_POOLING[spec.network]()
    if spec.d != len(net.products):
        raise ValueError(f"d must equal the product count {len(net.products)}")
    instance = _pooling_instance(net, spec)
    theta_true = _stream(spec.seed, _TAG_THETA).uniform(0.5, 1.0, size=spec.d)
    binding = PoolingBinding(instance, ("f", "y"), spec.grid_divisions)
    ns = len(net.feeds)

    def draw_context(rng):
        return {"availability": rng.uniform(0.5, 1.0, size=ns)}

    train = _pooled_split(binding, theta_true, spec, _TAG_TRAIN, _TAG_TRAIN_NOISE,
                          spec.n_train, draw_context)
    test = _pooled_split(binding, theta_true, spec, _TAG_TEST, _TAG_TEST_NOISE,
                         max(spec.n_test, 1), draw_context)
    if spec.n_test == 0:
        test = dataclasses.replace(test, observations=[])
    return GenResult(theta_true, train, test, _manifest(spec, theta_true, train))


def gen_genpooling(spec: GenSpec) -> GenResult:
    """Paired quality limits as unknowns; availability and demand vary."""
    net = BUNDLED_GENPOOLING[spec.network]()
    if spec.d != len(net.products):
        raise ValueError(f"d must equal the product count {len(net.products)}")
    instance = _pooling_instance(net, spec)
    theta_free = _stream(spec.seed, _TAG_THETA).uniform(0.2, 0.6, size=spec.d)
    binding = GenPoolingBinding(instance, ("f",), spec.grid_divisions)
    theta_true = binding.full_parameter(theta_free)
    ns, nj = len(net.feeds), len(net.products)

    def draw_context(rng):
        return {
            "availability": rng.uniform(0.5, 1.5, size=ns),
            "demand": rng.uniform(0.5, 1.5, size=nj),
        }

    train = _pooled_split(binding, theta_free, spec, _TAG_TRAIN, _TAG_TRAIN_NOISE,
                          spec.n_train, draw_context)
    test = _pooled_split(binding, theta_free, spec, _TAG_TEST, _TAG_TEST_NOISE,
                         max(spec.n_test, 1), draw_context)
    if spec.n_test == 0:
        test = dataclasses.replace(test, observations=[])
    return GenResult(theta_true, train, test, _manifest(spec, theta_true, train))


# ---------------------------------------------------------------------------
# Dispatch and persistence
# ---------------------------------------------------------------------------

_GENERATORS = {"fba": gen_fba, "pooling": gen_pooling, "genpooling": gen_genpooling}


def _manifest(spec: GenSpec, theta_true: np.ndarray, train: Dataset) -> dict:
    manifest = {
        "case": spec.case,
        "network": spec.network,
        "d": spec.d,
        "n_train": spec.n_train,
        "n_test": spec.n_test,
        "sigma": spec.sigma,
        "seed": spec.seed,
        "theta_true": [float(v) for v in np.asarray(theta_true).ravel()],
    }
    binding = train.binding
    if isinstance(binding, FbaBinding) and binding.norm_mean is not None:
        manifest["standardize_mean"] = [float(v) for v in binding.norm_mean]
        manifest["standardize_scale"] = [float(v) for v in binding.norm_scale]
    return manifest


def search_domain(binding: Binding) -> ParameterDomain:
    """The parameter domain the inverse search runs over for a binding.

    Flux-objective weights live on the probability simplex (searched over
    all but the last weight); demand caps and paired quality limits live in
    the boxes their ground truths are drawn from.
    """
    if isinstance(binding, FbaBinding):
        d = len(binding.problem.objective_set) - 1
        return ParameterDomain(np.zeros(d), np.ones(d), simplex_coupled=True)
    if isinstance(binding, PoolingBinding):
        d = len(binding.network.products)
        return ParameterDomain(np.full(d, 0.5), np.full(d, 1.0))
    d = len(binding.network.products)
    return ParameterDomain(np.full(d, 0.2), np.full(d, 0.6))


def generate(spec: GenSpec, out_dir: str | None = None) -> GenResult:
    """Generate train and test splits; optionally write them under out_dir.

    Writes ``train.obs``, ``test.obs`` and ``manifest.yaml`` when ``out_dir``
    is given.  Same spec and seed give byte-identical dataset files.
    """
    result = _GENERATORS[spec.case](spec)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        for split_name, dataset in (("train", result.train), ("test", result.test)):
            if not dataset.observations:
                continue
            write_observations(
                os.path.join(out_dir, f"{split_name}.obs"),
                dataset.binding, dataset.observations, dataset.sigma,
                dataset.network_label,
            )
        with open(os.path.join(out_dir, "manifest.yaml"), "w", encoding="utf-8") as fh:
            yaml.safe_dump(result.manifest, fh, sort_keys=True)
    return result
