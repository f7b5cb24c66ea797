"""Advected MEMS model: Krein-Rutman splitting of the drift, minimal branch, semi-stability and Hardy-type checks."""

from .grid import Field, Grid, VectorField, build_grid, integrate
from .fieldexpr import parse_expression, evaluate
from .operators import assemble_advection_diffusion, assemble_kr_generator, assemble_weighted_form
from .hodge import Decomposition, decompose, verify_decomposition
from .solver import P0, Branch, continue_branch, newton_solve, shooting_oracle
from .spectral import linearized_stability, principal_eigenpair

__all__ = [
    "Field", "Grid", "VectorField", "build_grid", "integrate", "parse_expression", "evaluate",
    "assemble_advection_diffusion", "assemble_kr_generator", "assemble_weighted_form",
    "Decomposition", "decompose", "verify_decomposition", "P0", "Branch", "continue_branch",
    "newton_solve", "shooting_oracle", "linearized_stability", "principal_eigenpair",
]
