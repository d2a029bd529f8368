"""Surrogate-driven search over the decision-loss landscape.

The loop evaluates a low-discrepancy initial design, then repeats: fit (or
rebuild) the GP surrogate on everything evaluated so far, minimize the
lower-confidence-bound acquisition, evaluate the true loss at the proposal,
and append the result.  Every random decision is keyed to (seed, purpose,
iteration), so a run can be killed and resumed from its trace file and will
retrace the identical trajectory.
"""
from __future__ import annotations

import dataclasses
import logging
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .acquisition import AcquisitionConfig, minimize_acquisition, sobol_points
from .domain import ParameterDomain
from .gp import EvaluationDataset, GPModel, build_model, fit
from .loss import LossConfig, Observation, evaluate_loss

logger = logging.getLogger("bo4io.bo_loop")

DUPLICATE_TOL = 1e-9

# Spawn-key tags for the per-purpose random streams.
_TAG_DESIGN = 29
_TAG_ACQUISITION = 23


@dataclass(frozen=True)
class BOConfig:
    """Everything one search run needs.

    ``iterations`` counts surrogate-guided steps after the initial design;
    zero means design only.  ``refit_every`` spaces out hyperparameter
    refits (the surrogate itself is always conditioned on all data).
    """

    domain: ParameterDomain
    observations: list[Observation]
    loss: LossConfig
    iterations: int
    seed: int = 0
    n0: int | None = None
    acquisition: AcquisitionConfig = field(default_factory=AcquisitionConfig)
    refit_every: int = 1
    nu: float = 2.5
    trace_path: str | None = None
    resume: bool = False

    def __post_init__(self) -> None:
        if self.iterations < 0:
            raise ValueError("iterations must be nonnegative")
        if self.refit_every < 1:
            raise ValueError("refit_every must be at least 1")
        if self.n0 is not None and self.n0 < 2:
            raise ValueError("initial design needs at least 2 points")
        if not self.observations:
            raise ValueError("need at least one observation")

    @property
    def design_size(self) -> int:
        return self.n0 if self.n0 is not None else max(5, 2 * self.domain.dim + 1)


@dataclass(frozen=True)
class TraceRow:
    iteration: int
    theta: tuple[float, ...]
    loss: float
    best: float
    bo_time_s: float
    fop_time_s: float


@dataclass(frozen=True)
class BOResult:
    incumbent: np.ndarray
    incumbent_loss: float
    rows: tuple[TraceRow, ...]
    model: GPModel


# ---------------------------------------------------------------------------
# Trace file I/O
# ---------------------------------------------------------------------------


def _header(dim: int) -> str:
    names = ["iteration"] + [f"theta_{i}" for i in range(dim)]
    return ",".join(names + ["loss", "best_so_far", "bo_time_s", "fop_time_s"])


def _format_row(row: TraceRow) -> str:
    cells = [str(row.iteration)]
    cells += [repr(v) for v in row.theta]
    cells += [repr(row.loss), repr(row.best), repr(row.bo_time_s),
              repr(row.fop_time_s)]
    return ",".join(cells)


def read_trace(path) -> list[TraceRow]:
    """Parse a trace file; a torn final row (crash mid-write) is dropped."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        return []
    header = lines[0].split(",")
    dim = sum(1 for name in header if name.startswith("theta_"))
    if dim == 0:
        raise ValueError(f"unrecognized trace header in {path}")
    rows: list[TraceRow] = []
    for pos, ln in enumerate(lines[1:]):
        cells = ln.split(",")
        try:
            if len(cells) != dim + 5:
                raise ValueError("wrong column count")
            rows.append(TraceRow(
                iteration=int(cells[0]),
                theta=tuple(float(c) for c in cells[1:1 + dim]),
                loss=float(cells[1 + dim]),
                best=float(cells[2 + dim]),
                bo_time_s=float(cells[3 + dim]),
                fop_time_s=float(cells[4 + dim]),
            ))
        except ValueError:
            if pos == len(lines) - 2:
                break
            raise ValueError(f"malformed trace row {pos + 1} in {path}")
    return rows


class _TraceWriter:
    """Append-only row sink; flushes every row so a crash loses at most one."""

    def __init__(self, path, dim: int, preserved: list[TraceRow]):
        self._fh = None
        if path is None:
            return
        self._fh = open(path, "w", encoding="utf-8")
        self._fh.write(_header(dim) + "\n")
        for row in preserved:
            self._fh.write(_format_row(row) + "\n")
        self._fh.flush()

    def append(self, row: TraceRow) -> None:
        if self._fh is not None:
            self._fh.write(_format_row(row) + "\n")
            self._fh.flush()

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()


# ---------------------------------------------------------------------------
# The loop
# ---------------------------------------------------------------------------


def _derived_seed(seed: int, *key: int) -> int:
    return int(np.random.SeedSequence(entropy=seed, spawn_key=key).generate_state(1)[0])


def initial_design(domain: ParameterDomain, n0: int, seed: int) -> np.ndarray:
    """n0 low-discrepancy points inside the domain, deterministic per seed."""
    return sobol_points(domain, n0, _derived_seed(seed, _TAG_DESIGN))


def _dedupe(candidate: np.ndarray, evaluated: np.ndarray,
            fallbacks: np.ndarray) -> np.ndarray:
    """Swap a near-duplicate proposal for the best fresh scatter candidate."""
    def fresh(point: np.ndarray) -> bool:
        return float(np.min(np.linalg.norm(evaluated - point, axis=1))) >= DUPLICATE_TOL

    if fresh(candidate):
        return candidate
    for point in fallbacks:
        if fresh(point):
            logger.info("duplicate proposal replaced by scatter candidate")
            return point
    logger.warning("all candidates duplicate evaluated points; keeping proposal")
    return candidate


def _refit_step(completed: int, refit_every: int) -> int:
    """Latest step at or before ``completed`` whose fit was scheduled."""
    return ((completed - 1) // refit_every) * refit_every + 1


def run(cfg: BOConfig) -> BOResult:
    """Execute the search and return the incumbent, trace, and final model."""
    dim = cfg.domain.dim
    n0 = cfg.design_size

    preserved: list[TraceRow] = []
    if cfg.resume and cfg.trace_path is not None and os.path.exists(cfg.trace_path):
        preserved = read_trace(cfg.trace_path)
        if preserved and len(preserved[0].theta) != dim:
            raise ValueError("trace dimension does not match the domain")

    design = initial_design(cfg.domain, n0, cfg.seed)
    for i, row in enumerate(preserved[:n0]):
        if not np.allclose(row.theta, design[i], atol=1e-12, rtol=0.0):
            raise ValueError(
                "trace design points do not match this configuration; "
                "refusing to resume"
            )

    writer = _TraceWriter(cfg.trace_path, dim, preserved)
    rows: list[TraceRow] = list(preserved)
    try:
        thetas = [np.array(r.theta) for r in rows]
        losses = [r.loss for r in rows]
        best = min(losses) if losses else np.inf

        # Finish any outstanding design evaluations.
        for i in range(len(rows), n0):
            theta = design[i]
            t0 = time.perf_counter()
            ev = evaluate_loss(theta, cfg.observations, cfg.loss)
            fop_t = time.perf_counter() - t0
            if ev.penalized:
                logger.warning("design point %d infeasible; penalty applied", i + 1)
            best = min(best, ev.value)
            row = TraceRow(i + 1, tuple(float(v) for v in theta), ev.value,
                           best, 0.0, fop_t)
            rows.append(row)
            writer.append(row)
            thetas.append(np.asarray(theta, dtype=float))
            losses.append(ev.value)

        completed = len(rows) - n0
        model: GPModel | None = None
        kernel_cfg = None
        if completed > 0:
            # Replay the last scheduled hyperparameter fit so the resumed
            # trajectory matches an uninterrupted run exactly.
            s = _refit_step(completed, cfg.refit_every)
            fit_data = EvaluationDataset.from_raw(
                np.array(thetas[: n0 + s - 1]), np.array(losses[: n0 + s - 1])
            )
            kernel_cfg = fit(fit_data, cfg.domain, cfg.seed, nu=cfg.nu).kernel

        for t in range(completed + 1, cfg.iterations + 1):
            t0 = time.perf_counter()
            data = EvaluationDataset.from_raw(np.array(thetas), np.array(losses))
            if (t - 1) % cfg.refit_every == 0 or kernel_cfg is None:
                model = fit(data, cfg.domain, cfg.seed, nu=cfg.nu)
                kernel_cfg = model.kernel
            else:
                model = build_model(data, kernel_cfg)
            acq = dataclasses.replace(
                cfg.acquisition, seed=_derived_seed(cfg.seed, _TAG_ACQUISITION, t)
            )
            candidate, scatter = minimize_acquisition(
                model, cfg.domain, acq, with_scatter=True
            )
            candidate = _dedupe(candidate, np.array(thetas), scatter)
            bo_t = time.perf_counter() - t0

            t1 = time.perf_counter()
            ev = evaluate_loss(candidate, cfg.observations, cfg.loss)
            fop_t = time.perf_counter() - t1
            if ev.penalized:
                logger.warning("iteration %d proposal infeasible; penalty applied",
                               n0 + t)
            best = min(best, ev.value)
            row = TraceRow(n0 + t, tuple(float(v) for v in candidate), ev.value,
                           best, bo_t, fop_t)
            rows.append(row)
            writer.append(row)
            thetas.append(np.asarray(candidate, dtype=float))
            losses.append(ev.value)
    finally:
        writer.close()

    # Final surrogate conditioned on everything, for downstream profiling.
    data = EvaluationDataset.from_raw(np.array(thetas), np.array(losses))
    if kernel_cfg is not None:
        final_model = build_model(data, kernel_cfg)
    else:
        final_model = fit(data, cfg.domain, cfg.seed, nu=cfg.nu)

    best_idx = int(np.argmin(losses))
    return BOResult(
        incumbent=thetas[best_idx].copy(),
        incumbent_loss=float(losses[best_idx]),
        rows=tuple(rows),
        model=final_model,
    )
