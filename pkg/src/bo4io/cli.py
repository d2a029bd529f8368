"""Command-line front end: datagen, run, profile, report.

One YAML config file can drive a whole experiment; each command reads its
own section.  Exit codes: 0 success, 2 configuration error, 3 numerical
failure, 4 I/O failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import hashlib
import os
import sys

import numpy as np
import yaml

from . import __version__
from .acquisition import AcquisitionConfig
from .bo_loop import BOConfig, read_trace, run
from .datagen import GenSpec, generate, search_domain
from .fop.networks import BUNDLED_FBA, BUNDLED_GENPOOLING, BUNDLED_POOLING
from .fop.oracle import OracleError
from .gp import NumericalError
from .loss import LossConfig, read_observations
from .profile import ProfileConfig, profile_parameter, total_width, write_profile

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4

NETWORK_REGISTRY = {**BUNDLED_FBA, **BUNDLED_POOLING, **BUNDLED_GENPOOLING}


class ConfigError(ValueError):
    pass


def _load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = yaml.safe_load(fh)
    except OSError as exc:
        raise exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError(f"config {path} must be a mapping of sections")
    return cfg


def _section(cfg: dict, name: str) -> dict:
    sect = cfg.get(name)
    if not isinstance(sect, dict):
        raise ConfigError(f"config is missing the '{name}' section")
    return sect


def _digest(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_datagen(args) -> int:
    cfg = _section(_load_config(args.config), "datagen")
    if args.seed is not None:
        cfg = {**cfg, "seed": args.seed}
    try:
        spec = GenSpec(**cfg)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"datagen section: {exc}") from exc
    result = generate(spec, out_dir=args.out_dir)
    manifest_path = os.path.join(args.out_dir, "manifest.yaml")
    manifest = dict(result.manifest)
    manifest["version"] = __version__
    manifest["digests"] = {}
    for name in ("train.obs", "test.obs"):
        path = os.path.join(args.out_dir, name)
        if os.path.exists(path):
            manifest["digests"][name] = _digest(path)
    with open(manifest_path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(manifest, fh, sort_keys=True)
    print(f"wrote {args.out_dir}/train.obs ({spec.n_train} observations)")
    if spec.n_test:
        print(f"wrote {args.out_dir}/test.obs ({spec.n_test} observations)")
    print(f"theta_true {' '.join(repr(v) for v in manifest['theta_true'])}")
    return EXIT_OK


def _build_bo_config(cfg: dict, args, trace_path: str, resume: bool) -> BOConfig:
    data_path = cfg.get("data", os.path.join(args.out_dir, "train.obs"))
    binding, observations, _meta = read_observations(data_path, NETWORK_REGISTRY)
    domain = search_domain(binding)
    workers = args.workers if args.workers is not None else int(cfg.get("workers", 1))
    weight = cfg.get("weight")
    loss_cfg = LossConfig(
        binding,
        weight=None if weight is None else np.asarray(weight, dtype=float),
        workers=workers,
    )
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    acq = AcquisitionConfig(beta=float(cfg.get("beta", 4.0)))
    try:
        return BOConfig(
            domain=domain,
            observations=observations,
            loss=loss_cfg,
            iterations=int(cfg["iterations"]),
            seed=seed,
            n0=cfg.get("n0"),
            acquisition=acq,
            refit_every=int(cfg.get("refit_every", 1)),
            nu=float(cfg.get("nu", 2.5)),
            trace_path=trace_path,
            resume=resume,
        )
    except KeyError as exc:
        raise ConfigError(f"run section is missing {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"run section: {exc}") from exc


def cmd_run(args) -> int:
    cfg = _section(_load_config(args.config), "run")
    os.makedirs(args.out_dir, exist_ok=True)
    trace_path = cfg.get("trace", os.path.join(args.out_dir, "trace.csv"))
    bo_cfg = _build_bo_config(cfg, args, trace_path, args.resume)
    result = run(bo_cfg)
    summary = {
        "incumbent": [float(v) for v in result.incumbent],
        "incumbent_loss": float(result.incumbent_loss),
        "evaluations": len(result.rows),
        "seed": bo_cfg.seed,
        "version": __version__,
        "trace": trace_path,
        "trace_digest": _digest(trace_path),
    }
    with open(os.path.join(args.out_dir, "run_summary.yaml"), "w",
              encoding="utf-8") as fh:
        yaml.safe_dump(summary, fh, sort_keys=True)
    print(f"incumbent {' '.join(repr(float(v)) for v in result.incumbent)}")
    print(f"incumbent_loss {result.incumbent_loss!r}")
    print(f"evaluations {len(result.rows)}")
    return EXIT_OK


def cmd_profile(args) -> int:
    whole = _load_config(args.config)
    run_cfg = _section(whole, "run")
    prof_cfg = whole.get("profile") or {}
    os.makedirs(args.out_dir, exist_ok=True)
    trace_path = run_cfg.get("trace", os.path.join(args.out_dir, "trace.csv"))
    if not os.path.exists(trace_path):
        raise FileNotFoundError(f"trace file {trace_path} not found; run first")
    # Re-entering the finished run replays the final surrogate
    # deterministically without re-evaluating anything.
    bo_cfg = _build_bo_config(run_cfg, args, trace_path, resume=True)
    result = run(bo_cfg)
    domain = bo_cfg.domain
    params = prof_cfg.get("parameters", list(range(domain.dim)))
    rho = float(prof_cfg.get("rho", 3.84))
    alpha = float(prof_cfg.get("alpha", 0.05))
    df = int(prof_cfg.get("df", 1))
    for k in params:
        if not 0 <= int(k) < domain.dim:
            raise ConfigError(f"profile parameter index {k} out of range")
        lb, ub = float(domain.lower[k]), float(domain.upper[k])
        step = float(prof_cfg.get("step", (ub - lb) / 100.0))
        try:
            pcfg = ProfileConfig(k=int(k), lb=lb, ub=ub, step=step,
                                 rho=rho, alpha=alpha, df=df)
        except ValueError as exc:
            raise ConfigError(f"profile section: {exc}") from exc
        pres = profile_parameter(
            result.model, domain, pcfg, result.incumbent_loss,
            incumbent_k=float(result.incumbent[k]),
        )
        out = os.path.join(args.out_dir, f"profile_{k}.txt")
        write_profile(out, pres)
        print(f"parameter {k} classification {pres.classification} "
              f"oa_width {total_width(pres.oa_ci)!r}")
    return EXIT_OK


def _quantiles(rows: np.ndarray) -> tuple[float, float, float]:
    return (float(np.median(rows)), float(np.quantile(rows, 0.25)),
            float(np.quantile(rows, 0.75)))


def cmd_report(args) -> int:
    if not args.traces:
        raise ConfigError("report needs at least one trace file")
    os.makedirs(args.out_dir, exist_ok=True)
    traces = [read_trace(p) for p in args.traces]
    if any(not t for t in traces):
        raise ConfigError("empty trace file given to report")
    horizon = min(len(t) for t in traces)
    best = np.array([[row.best for row in t[:horizon]] for t in traces])
    loss = np.array([[row.loss for row in t[:horizon]] for t in traces])
    conv_path = os.path.join(args.out_dir, "convergence.csv")
    with open(conv_path, "w", encoding="utf-8") as fh:
        fh.write("iteration,median_best,q25_best,q75_best,median_loss\n")
        for i in range(horizon):
            med, q25, q75 = _quantiles(best[:, i])
            fh.write(f"{i + 1},{med!r},{q25!r},{q75!r},"
                     f"{float(np.median(loss[:, i]))!r}\n")
    print(f"wrote {conv_path} ({horizon} iterations, {len(traces)} traces)")
    print(f"final median_best {repr(float(np.median(best[:, -1])))}")

    if args.profiles:
        from .profile import read_profile

        widths: dict[int, list[float]] = {}
        for path in args.profiles:
            prof = read_profile(path)
            k = int(prof["parameter"])
            w = sum(hi - lo for (lo, hi) in prof["oa_ci"])
            widths.setdefault(k, []).append(w)
        ci_path = os.path.join(args.out_dir, "ci_width.csv")
        with open(ci_path, "w", encoding="utf-8") as fh:
            fh.write("parameter,median_oa_width,q25,q75\n")
            for k in sorted(widths):
                med, q25, q75 = _quantiles(np.array(widths[k]))
                fh.write(f"{k},{med!r},{q25!r},{q75!r}\n")
        print(f"wrote {ci_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bo4io",
        description="Inverse optimization by Bayesian optimization over the "
                    "decision-loss landscape.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out-dir", default=".", help="artifact directory")
    common.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
    common.add_argument("--workers", type=int, default=None,
                        help="loss-evaluation worker processes")

    p = sub.add_parser("datagen", parents=[common],
                       help="generate synthetic observation datasets")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_datagen)

    p = sub.add_parser("run", parents=[common], help="run the inverse search")
    p.add_argument("--config", required=True)
    p.add_argument("--resume", action="store_true",
                   help="continue from an existing trace file")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("profile", parents=[common],
                       help="profile-likelihood confidence intervals")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("report", parents=[common],
                       help="aggregate traces into plot data")
    p.add_argument("traces", nargs="*", help="trace files from run")
    p.add_argument("--profiles", nargs="*", default=[],
                   help="profile files from profile")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, OracleError, RuntimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
