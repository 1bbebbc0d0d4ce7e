"""Convex surrogate construction and an interior-point cone solver."""

from .ipm import SolveResult, solve_ipm, solve_standard
from .p4 import (
    OffloadInstance,
    StructuralInfeasibility,
    build_p4,
    p2_kkt_residual,
    socp_equivalence_check,
)
from .program import Affine, ConicProgram, Constraint, StandardForm

__all__ = [
    "Affine",
    "ConicProgram",
    "Constraint",
    "OffloadInstance",
    "SolveResult",
    "StandardForm",
    "StructuralInfeasibility",
    "build_p4",
    "p2_kkt_residual",
    "socp_equivalence_check",
    "solve_ipm",
    "solve_standard",
]
