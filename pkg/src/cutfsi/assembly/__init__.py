"""Residual/Jacobian assembly of the cut fluid-structure-contact system."""

from .forms import TERMS
from .ghost import FACE_TERMS
from .params import (
    PhysicalParams,
    StabilizationParams,
    contact_gap_function,
    cut_weight,
    fluid_stress,
    green_lagrange,
    solid_stress,
    solid_stress_derivative,
    solid_stress_tangent,
    supg_delta,
)
from .system import (
    ALL_TERMS,
    AssemblyError,
    StateVector,
    StepProblem,
    assemble_jacobian,
    assemble_residual,
)

__all__ = [
    "ALL_TERMS", "AssemblyError", "FACE_TERMS", "PhysicalParams", "StabilizationParams", "StateVector",
    "StepProblem", "TERMS", "assemble_jacobian", "assemble_residual", "contact_gap_function", "cut_weight",
    "fluid_stress", "green_lagrange", "solid_stress", "solid_stress_derivative", "solid_stress_tangent",
    "supg_delta",
]
