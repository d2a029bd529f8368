"""Adapter for delegating forward solves to an external command.

The oracle command is spawned per solve; it receives a bo4io-fop v1 document
on stdin and must answer on stdout with::

    status optimal
    objective -400.0
    decision f A->P 300.0
    decision y P->Y 100.0

one ``decision`` line per component, labels following the same scheme as the
in-process solvers (arcs as "src->dst", reactions by name, qualities as
"pool:quality").  Any other status token is passed through; a missing
objective defaults to nan for non-optimal statuses.
"""
from __future__ import annotations

import os
import shlex
import subprocess

import numpy as np

from .types import FopSolution

ENV_CMD = "BO4IO_ORACLE_CMD"


class OracleError(RuntimeError):
    """External solver unavailable, timed out, or spoke the protocol wrong."""


class ExternalOracle:
    def __init__(self, command: str | None = None, timeout_s: float = 60.0):
        cmd = command or os.environ.get(ENV_CMD)
        if not cmd:
            raise OracleError(
                f"no oracle command given and {ENV_CMD} is not set"
            )
        self.argv = shlex.split(cmd)
        self.timeout_s = timeout_s

    def solve(self, document: str) -> FopSolution:
        try:
            proc = subprocess.run(
                self.argv,
                input=document,
                capture_output=True,
                text=True,
                timeout=self.timeout_s,
            )
        except subprocess.TimeoutExpired as exc:
            raise OracleError(
                f"oracle timed out after {self.timeout_s:g}s"
            ) from exc
        except OSError as exc:
            raise OracleError(f"could not spawn oracle: {exc}") from exc
        if proc.returncode != 0:
            tail = (proc.stderr or "").strip().splitlines()[-3:]
            raise OracleError(
                f"oracle exited with {proc.returncode}: {' | '.join(tail)}"
            )
        return _parse_reply(proc.stdout)


def _parse_reply(text: str) -> FopSolution:
    status = None
    objective = float("nan")
    families: dict[str, list[str]] = {}
    values: dict[str, list[float]] = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] == "status":
                status = parts[1]
            elif parts[0] == "objective":
                objective = float(parts[1])
            elif parts[0] == "decision":
                fam, label, val = parts[1], parts[2], float(parts[3])
                families.setdefault(fam, []).append(label)
                values.setdefault(fam, []).append(val)
            else:
                raise OracleError(f"unexpected oracle line {line!r}")
        except (IndexError, ValueError) as exc:
            if isinstance(exc, OracleError):
                raise
            raise OracleError(f"malformed oracle line {line!r}") from exc
    if status is None:
        raise OracleError("oracle reply carried no status line")
    flat = np.array([v for fam in families for v in values[fam]], dtype=float)
    return FopSolution(status, objective, flat, families)
