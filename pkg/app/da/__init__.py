"""Truncated Taylor-polynomial (differential algebra) engine."""

from app.da.algebra import (
    DaContext,
    MultiIndex,
    TruncatedPoly,
    constant,
    get_context,
    intrinsic,
    variable,
)
from app.da.maps import (
    Derivatives,
    PolyMap,
    compose,
    convergence_radius,
    evaluate,
    extract_derivatives,
    gradient,
    hessian,
    hessian_tensor,
    jacobian,
)

__all__ = [
    'DaContext',
    'MultiIndex',
    'TruncatedPoly',
    'constant',
    'get_context',
    'intrinsic',
    'variable',
    'Derivatives',
    'PolyMap',
    'compose',
    'convergence_radius',
    'evaluate',
    'extract_derivatives',
    'gradient',
    'hessian',
    'hessian_tensor',
    'jacobian',
]
