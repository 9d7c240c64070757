"""Accelerated first-order solvers for transport-constrained optimization on a periodic 2D grid."""

from .accel import AccelConfig, ga_solve
from .fixedpoint import LineSearchState, StopCriteria, rpgd_solve
from .grid import GridSpec
from .models import ModelKind, ProblemSpec, ReducedProblem
from .newton import NewtonConfig, nk_solve
from .report import SolveReport, Status

__all__ = [
    "AccelConfig", "GridSpec", "LineSearchState", "ModelKind", "NewtonConfig", "ProblemSpec",
    "ReducedProblem", "SolveReport", "Status", "StopCriteria", "ga_solve", "nk_solve", "rpgd_solve",
]
