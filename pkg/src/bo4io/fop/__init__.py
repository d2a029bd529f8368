"""Forward optimization problems: self-contained global solvers plus I/O."""
from .docfmt import FormatError, read_fop, write_fop
from .networks import (
    BUNDLED_FBA,
    BUNDLED_GENPOOLING,
    BUNDLED_POOLING,
    haverly1,
    tiny_genpooling,
    toy_metabolic10,
    two_pool_synthetic,
)
from .oracle import ENV_CMD, ExternalOracle, OracleError
from .pooling import pooling_residuals, solve_genpooling, solve_pooling
from .qp import kkt_residuals, solve_fba
from .simplex import solve_lp
from .types import (
    STATUS_GRID_OPTIMAL,
    STATUS_INFEASIBLE,
    STATUS_OPTIMAL,
    STATUS_UNBOUNDED,
    FbaProblem,
    FopSolution,
    GenPoolingNetwork,
    LinearProgramSpec,
    PoolingNetwork,
    arc_label,
    infeasible_solution,
)

__all__ = [
    "BUNDLED_FBA",
    "BUNDLED_GENPOOLING",
    "BUNDLED_POOLING",
    "ENV_CMD",
    "ExternalOracle",
    "FbaProblem",
    "FopSolution",
    "FormatError",
    "GenPoolingNetwork",
    "LinearProgramSpec",
    "OracleError",
    "PoolingNetwork",
    "STATUS_GRID_OPTIMAL",
    "STATUS_INFEASIBLE",
    "STATUS_OPTIMAL",
    "STATUS_UNBOUNDED",
    "arc_label",
    "haverly1",
    "infeasible_solution",
    "kkt_residuals",
    "pooling_residuals",
    "read_fop",
    "solve_fba",
    "solve_genpooling",
    "solve_lp",
    "solve_pooling",
    "tiny_genpooling",
    "toy_metabolic10",
    "two_pool_synthetic",
    "write_fop",
]
