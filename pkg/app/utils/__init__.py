"""Utility functions."""

from app.utils.scalar import Scalar, cos, dot, sin, sqrt, value_of

__all__ = [
    'Scalar',
    'cos',
    'dot',
    'sin',
    'sqrt',
    'value_of',
]
