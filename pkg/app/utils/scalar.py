"""Scalar helpers shared by float and truncated-polynomial code paths."""

import math
from typing import Sequence, Union

from app.da.algebra import TruncatedPoly

Scalar = Union[float, TruncatedPoly]


def value_of(x: Scalar) -> float:
    """Plain value of a scalar (constant part for polynomials)."""
    if isinstance(x, TruncatedPoly):
        return x.constant
    return float(x)


def sqrt(x: Scalar) -> Scalar:
    if isinstance(x, TruncatedPoly):
        return x.sqrt()
    return math.sqrt(x)


def sin(x: Scalar) -> Scalar:
    if isinstance(x, TruncatedPoly):
        return x.sin()
    return math.sin(x)


def cos(x: Scalar) -> Scalar:
    if isinstance(x, TruncatedPoly):
        return x.cos()
    return math.cos(x)


def dot(a: Sequence[Scalar], b: Sequence[Scalar]) -> Scalar:
    """Left-to-right sum of products, same evaluation order for both scalar kinds."""
    total = a[0] * b[0]
    for left, right in zip(a[1:], b[1:]):
        total = total + left * right
    return total
