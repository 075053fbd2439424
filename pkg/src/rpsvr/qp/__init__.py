"""Solvers for the reduced reward-cum-penalty SVR dual and their oracles."""

from .oracle import project_box_hyperplane, solve_full_oracle
from .problem import (
    DualSolution,
    ReducedDual,
    bias_interval,
    interior_sets,
    kkt_residual,
    multipliers,
    recover_bias,
    split_gamma,
)
from .reference import solve_reference
from .smo import solve_smo

__all__ = [
    "DualSolution",
    "ReducedDual",
    "bias_interval",
    "interior_sets",
    "kkt_residual",
    "multipliers",
    "project_box_hyperplane",
    "recover_bias",
    "solve_full_oracle",
    "solve_reference",
    "solve_smo",
    "split_gamma",
]
