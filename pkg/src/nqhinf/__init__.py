"""Synthesis and verification of worst-case-ratio controllers with convex costs."""

from .system import (
    ConfigError,
    Controller,
    DomainError,
    NumericalError,
    SynthesisError,
    SystemLTI,
    ToolkitError,
)
from .convex import (
    BoundedQuadraticFn,
    ComposedFn,
    ConjugateFn,
    ConvexFn,
    ExpAbsFn,
    InducedDifference,
    PiecewiseQuadraticFn,
    QuadraticFn,
    ScaledFn,
    SumFn,
    bregman,
    check_duality_identity,
    check_three_point,
    conjugate_value_numeric,
    finite_diff_check,
    grad_conjugate,
)

__all__ = [
    "BoundedQuadraticFn",
    "ComposedFn",
    "ConfigError",
    "ConjugateFn",
    "Controller",
    "ConvexFn",
    "DomainError",
    "ExpAbsFn",
    "InducedDifference",
    "NumericalError",
    "PiecewiseQuadraticFn",
    "QuadraticFn",
    "ScaledFn",
    "SumFn",
    "SynthesisError",
    "SystemLTI",
    "ToolkitError",
    "bregman",
    "check_duality_identity",
    "check_three_point",
    "conjugate_value_numeric",
    "finite_diff_check",
    "grad_conjugate",
]

__version__ = "0.1.0"
