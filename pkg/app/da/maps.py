"""Vector-valued expansions, composition, evaluation and derivative extraction."""

import math
from typing import Iterator, NamedTuple, Sequence, Union

import numpy as np

from app.core.errors import DaArgumentError
from app.da.algebra import DaContext, TruncatedPoly, flush_tiny, require_hessian


class PolyMap:
    """Vector of truncated polynomials sharing one context.

    Coefficients are held as a (components x monomials) array.
    """

    __slots__ = ("context", "coeffs")

    def __init__(self, components: Sequence[TruncatedPoly]):
        if not components:
            raise DaArgumentError("a PolyMap needs at least one component")
        context = components[0].context
        for component in components[1:]:
            if component.context != context:
                raise DaArgumentError("PolyMap components must share one context")
        self.context = context
        self.coeffs = np.vstack([c.coeffs for c in components])

    @classmethod
    def from_array(cls, context: DaContext, coeffs: np.ndarray) -> "PolyMap":
        instance = cls.__new__(cls)
        instance.context = context
        instance.coeffs = np.atleast_2d(coeffs)
        return instance

    def __len__(self) -> int:
        return self.coeffs.shape[0]

    def __getitem__(self, index: int) -> TruncatedPoly:
        return TruncatedPoly(self.context, self.coeffs[index].copy())

    def __iter__(self) -> Iterator[TruncatedPoly]:
        for index in range(len(self)):
            yield self[index]

    @property
    def components(self) -> tuple:
        return tuple(self)

    @property
    def constant(self) -> np.ndarray:
        return self.coeffs[:, 0].copy()

    def __repr__(self) -> str:
        return f"PolyMap({len(self)} components, {self.context})"


Expansion = Union[TruncatedPoly, PolyMap]


def _as_matrix(p: Expansion) -> np.ndarray:
    return np.atleast_2d(p.coeffs)


def monomial_values(outer: DaContext, inner: Sequence[TruncatedPoly]) -> np.ndarray:
    """Every monomial of `outer` evaluated on the inner polynomials (rows follow outer's basis)."""
    ctx = inner[0].context
    values = np.empty((outer.size, ctx.size))
    values[0] = 0.0
    values[0, 0] = 1.0
    inner_coeffs = [p.coeffs for p in inner]
    for idx in range(1, outer.size):
        values[idx] = ctx.multiply(values[outer.parent[idx]], inner_coeffs[outer.parent_var[idx]])
    return values


def compose(outer: Expansion, inner: Sequence[TruncatedPoly]) -> Expansion:
    """Substitute `inner` for the variables of `outer`.

    Inner constant parts act as re-centering displacements; the result is
    truncated at the inner context's order and has the same kind as `outer`.
    """
    if len(inner) != outer.context.num_vars:
        raise DaArgumentError(
            f"composition needs {outer.context.num_vars} inner polynomials, got {len(inner)}"
        )
    ctx = inner[0].context
    for p in inner[1:]:
        if p.context != ctx:
            raise DaArgumentError("inner polynomials must share one context")
    values = monomial_values(outer.context, inner)
    result = flush_tiny(_as_matrix(outer) @ values)
    if isinstance(outer, TruncatedPoly):
        return TruncatedPoly(ctx, result[0])
    return PolyMap.from_array(ctx, result)


def evaluate(p: Expansion, point: Sequence[float]) -> Union[float, np.ndarray]:
    """Value of the polynomial(s) at the displacement `point`."""
    point = np.asarray(point, dtype=float)
    ctx = p.context
    if point.shape != (ctx.num_vars,):
        raise DaArgumentError(f"point has shape {point.shape}, expected ({ctx.num_vars},)")
    values = np.prod(point[np.newaxis, :] ** ctx.exponents, axis=1)
    if isinstance(p, TruncatedPoly):
        return float(p.coeffs @ values)
    return p.coeffs @ values


def gradient(p: TruncatedPoly) -> np.ndarray:
    return p.coeffs[p.context.linear_index].copy()


def hessian(p: TruncatedPoly) -> np.ndarray:
    """Symmetric matrix of second derivatives."""
    ctx = p.context
    require_hessian(ctx)
    return p.coeffs[ctx.quadratic_index] * ctx.hessian_scale


def jacobian(m: PolyMap) -> np.ndarray:
    return m.coeffs[:, m.context.linear_index]


def hessian_tensor(m: PolyMap) -> np.ndarray:
    """Second derivatives of every component, shape (components, vars, vars)."""
    ctx = m.context
    require_hessian(ctx)
    return m.coeffs[:, ctx.quadratic_index] * ctx.hessian_scale


class Derivatives(NamedTuple):
    value: float
    grad_x: np.ndarray
    grad_u: np.ndarray
    hess_xx: np.ndarray
    hess_xu: np.ndarray
    hess_uu: np.ndarray


def extract_derivatives(p: TruncatedPoly, num_x: int) -> Derivatives:
    """Value, gradient and Hessian blocks, with the first `num_x` variables as the x-block."""
    grad = gradient(p)
    hess = hessian(p)
    return Derivatives(
        value=p.constant,
        grad_x=grad[:num_x],
        grad_u=grad[num_x:],
        hess_xx=hess[:num_x, :num_x],
        hess_xu=hess[:num_x, num_x:],
        hess_uu=hess[num_x:, num_x:],
    )


def convergence_radius(m: Expansion, eps: float) -> float:
    """Displacement norm within which the truncation error stays near `eps`.

    Uses R = (eps / A_k)**(1/k) for the highest order k with a nonzero
    coefficient mass A_k (max over components of the summed absolute
    coefficients of degree k); an affine map gives +inf.
    """
    if not eps > 0.0:
        raise DaArgumentError(f"eps must be positive, got {eps}")
    ctx = m.context
    magnitudes = np.abs(_as_matrix(m))
    for order in range(ctx.order, 1, -1):
        mass = magnitudes[:, ctx.degrees == order].sum(axis=1).max()
        if mass > 0.0:
            return (eps / mass) ** (1.0 / order)
    return math.inf
