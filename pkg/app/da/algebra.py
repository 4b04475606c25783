"""Truncated multivariate Taylor polynomials.

A polynomial lives in a :class:`DaContext` (variable count and truncation
order). Coefficients are addressed by multi-index; internally they are kept
in one float array laid out over the graded monomial basis of the context,
so that the Cauchy product reduces to a gather/scatter over a precomputed
pair table.
"""

import math
from functools import lru_cache
from typing import Dict, Iterator, List, Mapping, Sequence, Tuple

import numpy as np

from app.core.errors import CapabilityError, DaArgumentError, DaDomainError

MultiIndex = Tuple[int, ...]

# Coefficients smaller than this are flushed to zero after every operation.
DROP_BELOW = 1e-300
MAX_ORDER = 4


def _exponents_of_degree(num_vars: int, degree: int) -> List[MultiIndex]:
    if num_vars == 1:
        return [(degree,)]
    exponents = []
    for first in range(degree, -1, -1):
        for rest in _exponents_of_degree(num_vars - 1, degree - first):
            exponents.append((first,) + rest)
    return exponents


def graded_monomials(num_vars: int, order: int) -> List[MultiIndex]:
    """Multi-indices of total degree <= order, by degree then descending lexicographic order."""
    monomials: List[MultiIndex] = []
    for degree in range(order + 1):
        monomials.extend(_exponents_of_degree(num_vars, degree))
    return monomials


class DaContext:
    """Immutable truncation context shared by every polynomial built on it."""

    def __init__(self, num_vars: int, order: int):
        if num_vars < 1:
            raise DaArgumentError(f"num_vars must be >= 1, got {num_vars}")
        if order < 1 or order > MAX_ORDER:
            raise DaArgumentError(f"order must lie in [1, {MAX_ORDER}], got {order}")
        base = order + 1
        if num_vars * math.log2(base) >= 62:
            raise DaArgumentError(f"{num_vars} variables at order {order} exceed the monomial encoding")

        self.num_vars = num_vars
        self.order = order

        monomials = graded_monomials(num_vars, order)
        self.monomials: Tuple[MultiIndex, ...] = tuple(monomials)
        self.size = len(monomials)
        self._index: Dict[MultiIndex, int] = {m: i for i, m in enumerate(monomials)}

        exponents = np.array(monomials, dtype=np.int64).reshape(self.size, num_vars)
        self.exponents = exponents
        self.degrees = exponents.sum(axis=1)

        # Product table: every pair (i, j) whose degrees add up to <= order,
        # and the slot k of the product monomial. Exponent sums never exceed
        # the order, so base-(order+1) codes add without carries.
        codes = exponents @ (base ** np.arange(num_vars, dtype=np.int64))
        sorter = np.argsort(codes)
        sorted_codes = codes[sorter]
        by_degree = [np.flatnonzero(self.degrees == d) for d in range(order + 1)]
        left, right, target = [], [], []
        for di in range(order + 1):
            for dj in range(order + 1 - di):
                ii, jj = np.meshgrid(by_degree[di], by_degree[dj], indexing="ij")
                ii = ii.ravel()
                jj = jj.ravel()
                kk = sorter[np.searchsorted(sorted_codes, codes[ii] + codes[jj])]
                left.append(ii)
                right.append(jj)
                target.append(kk)
        self.mul_left = np.concatenate(left)
        self.mul_right = np.concatenate(right)
        self.mul_target = np.concatenate(target)

        # Each nonconstant monomial is its parent times one variable.
        parent = np.zeros(self.size, dtype=np.int64)
        parent_var = np.full(self.size, -1, dtype=np.int64)
        for idx in range(1, self.size):
            exps = list(monomials[idx])
            var = next(i for i, e in enumerate(exps) if e)
            exps[var] -= 1
            parent[idx] = self._index[tuple(exps)]
            parent_var[idx] = var
        self.parent = parent
        self.parent_var = parent_var

        self.linear_index = np.array(
            [self._index[tuple(1 if i == j else 0 for j in range(num_vars))] for i in range(num_vars)],
            dtype=np.int64,
        )
        if order >= 2:
            quad = np.empty((num_vars, num_vars), dtype=np.int64)
            for i in range(num_vars):
                for j in range(num_vars):
                    exps = [0] * num_vars
                    exps[i] += 1
                    exps[j] += 1
                    quad[i, j] = self._index[tuple(exps)]
            self.quadratic_index = quad
            self.hessian_scale = np.ones((num_vars, num_vars)) + np.eye(num_vars)
        else:
            self.quadratic_index = None
            self.hessian_scale = None

        for array in (
            self.exponents, self.degrees, self.mul_left, self.mul_right,
            self.mul_target, self.parent, self.parent_var, self.linear_index,
        ):
            array.flags.writeable = False

    def index_of(self, multi_index: Sequence[int]) -> int:
        """Slot of a multi-index in the coefficient array."""
        key = tuple(int(e) for e in multi_index)
        if len(key) != self.num_vars:
            raise DaArgumentError(
                f"multi-index {key} has {len(key)} entries, context has {self.num_vars} variables"
            )
        if any(e < 0 for e in key) or sum(key) > self.order:
            raise DaArgumentError(f"multi-index {key} is outside order {self.order}")
        return self._index[key]

    def multiply(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Truncated Cauchy product of two coefficient arrays."""
        weights = a[self.mul_left] * b[self.mul_right]
        return np.bincount(self.mul_target, weights=weights, minlength=self.size)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DaContext):
            return NotImplemented
        return self.num_vars == other.num_vars and self.order == other.order

    def __hash__(self) -> int:
        return hash((self.num_vars, self.order))

    def __repr__(self) -> str:
        return f"DaContext(num_vars={self.num_vars}, order={self.order})"


@lru_cache(maxsize=None)
def get_context(num_vars: int, order: int) -> DaContext:
    """Shared context for a (num_vars, order) pair; building the tables is not free."""
    return DaContext(num_vars, order)


def flush_tiny(coeffs: np.ndarray) -> np.ndarray:
    coeffs[np.abs(coeffs) < DROP_BELOW] = 0.0
    return coeffs


def _is_number(value: object) -> bool:
    return isinstance(value, (int, float, np.floating, np.integer)) and not isinstance(value, bool)


class TruncatedPoly:
    """Taylor expansion of a scalar around a reference point, truncated at the context order.

    Supports +, -, *, / and ** against other polynomials of the same context and
    against plain numbers, so model code written for floats runs unchanged.
    """

    __slots__ = ("context", "coeffs")

    # Make numpy scalars defer to the reflected operators below.
    __array_ufunc__ = None

    def __init__(self, context: DaContext, coeffs: np.ndarray):
        self.context = context
        self.coeffs = coeffs

    @classmethod
    def from_coefficients(cls, context: DaContext, coefficients: Mapping[Sequence[int], float]) -> "TruncatedPoly":
        coeffs = np.zeros(context.size)
        for multi_index, value in coefficients.items():
            coeffs[context.index_of(multi_index)] = float(value)
        return cls(context, flush_tiny(coeffs))

    # Inspection

    @property
    def constant(self) -> float:
        return float(self.coeffs[0])

    @property
    def coefficients(self) -> Dict[MultiIndex, float]:
        """Nonzero coefficients keyed by multi-index, in graded order."""
        return dict(self.items())

    def items(self) -> Iterator[Tuple[MultiIndex, float]]:
        for idx in np.flatnonzero(self.coeffs):
            yield self.context.monomials[idx], float(self.coeffs[idx])

    def __getitem__(self, multi_index: Sequence[int]) -> float:
        return float(self.coeffs[self.context.index_of(multi_index)])

    def degree_norms(self) -> np.ndarray:
        """Sum of absolute coefficients per total degree."""
        return np.bincount(self.context.degrees, weights=np.abs(self.coeffs), minlength=self.context.order + 1)

    def __repr__(self) -> str:
        terms = ", ".join(f"{m}: {c!r}" for m, c in self.items())
        return f"TruncatedPoly({{{terms}}}, order={self.context.order})"

    # Arithmetic

    def _other_coeffs(self, other: "TruncatedPoly") -> np.ndarray:
        if other.context != self.context:
            raise DaArgumentError(f"context mismatch: {self.context} vs {other.context}")
        return other.coeffs

    def __add__(self, other):
        if isinstance(other, TruncatedPoly):
            return TruncatedPoly(self.context, flush_tiny(self.coeffs + self._other_coeffs(other)))
        if _is_number(other):
            coeffs = self.coeffs.copy()
            coeffs[0] = self.coeffs[0] + other
            return TruncatedPoly(self.context, flush_tiny(coeffs))
        return NotImplemented

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, TruncatedPoly):
            return TruncatedPoly(self.context, flush_tiny(self.coeffs - self._other_coeffs(other)))
        if _is_number(other):
            coeffs = self.coeffs.copy()
            coeffs[0] = self.coeffs[0] - other
            return TruncatedPoly(self.context, flush_tiny(coeffs))
        return NotImplemented

    def __rsub__(self, other):
        if _is_number(other):
            coeffs = -self.coeffs
            coeffs[0] = other - self.coeffs[0]
            return TruncatedPoly(self.context, flush_tiny(coeffs))
        return NotImplemented

    def __neg__(self):
        return TruncatedPoly(self.context, -self.coeffs)

    def __pos__(self):
        return self

    def __mul__(self, other):
        if isinstance(other, TruncatedPoly):
            product = self.context.multiply(self.coeffs, self._other_coeffs(other))
            return TruncatedPoly(self.context, flush_tiny(product))
        if _is_number(other):
            return TruncatedPoly(self.context, flush_tiny(self.coeffs * other))
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, TruncatedPoly):
            quotient = self * other.reciprocal()
            # Keep the constant part on the same rounding path as float division.
            quotient.coeffs[0] = self.coeffs[0] / other.coeffs[0]
            return quotient
        if _is_number(other):
            if other == 0:
                raise DaDomainError("division", 0.0)
            return TruncatedPoly(self.context, flush_tiny(self.coeffs / other))
        return NotImplemented

    def __rtruediv__(self, other):
        if _is_number(other):
            quotient = self.reciprocal() * other
            quotient.coeffs[0] = other / self.coeffs[0]
            return quotient
        return NotImplemented

    def __pow__(self, exponent):
        if isinstance(exponent, (int, np.integer)) and exponent >= 0:
            result = constant(self.context, 1.0)
            for _ in range(int(exponent)):
                result = result * self
            result.coeffs[0] = float(self.coeffs[0]) ** int(exponent)
            return result
        if _is_number(exponent):
            return self.pow(float(exponent))
        return NotImplemented

    # Intrinsics

    def _apply_series(self, series: Sequence[float]) -> "TruncatedPoly":
        """Evaluate sum(series[k] * N**k) with N the nilpotent part, by Horner's rule."""
        ctx = self.context
        nilpotent = self.coeffs.copy()
        nilpotent[0] = 0.0
        result = np.zeros(ctx.size)
        result[0] = series[-1]
        for coefficient in reversed(series[:-1]):
            result = ctx.multiply(result, nilpotent)
            result[0] = result[0] + coefficient
        result[0] = series[0]
        return TruncatedPoly(ctx, flush_tiny(result))

    def pow(self, exponent: float) -> "TruncatedPoly":
        c = float(self.coeffs[0])
        integral = float(exponent).is_integer()
        if integral and exponent >= 0:
            return self ** int(exponent)
        if c == 0.0:
            raise DaDomainError(f"pow({exponent})", c)
        if c < 0.0 and not integral:
            raise DaDomainError(f"pow({exponent})", c)
        series = [c ** exponent]
        for k in range(1, self.context.order + 1):
            series.append(series[-1] * (exponent - k + 1) / (k * c))
        return self._apply_series(series)

    def sqrt(self) -> "TruncatedPoly":
        c = float(self.coeffs[0])
        if not c > 0.0:
            raise DaDomainError("sqrt", c)
        series = [math.sqrt(c)]
        for k in range(1, self.context.order + 1):
            series.append(series[-1] * (0.5 - k + 1) / (k * c))
        return self._apply_series(series)

    def reciprocal(self) -> "TruncatedPoly":
        c = float(self.coeffs[0])
        if c == 0.0:
            raise DaDomainError("reciprocal", c)
        series = [1.0 / c]
        for _ in range(self.context.order):
            series.append(-series[-1] / c)
        return self._apply_series(series)

    def sin(self) -> "TruncatedPoly":
        c = float(self.coeffs[0])
        cycle = (math.sin(c), math.cos(c), -math.sin(c), -math.cos(c))
        return self._apply_series([cycle[k % 4] / math.factorial(k) for k in range(self.context.order + 1)])

    def cos(self) -> "TruncatedPoly":
        c = float(self.coeffs[0])
        cycle = (math.cos(c), -math.sin(c), -math.cos(c), math.sin(c))
        return self._apply_series([cycle[k % 4] / math.factorial(k) for k in range(self.context.order + 1)])

    def exp(self) -> "TruncatedPoly":
        value = math.exp(float(self.coeffs[0]))
        return self._apply_series([value / math.factorial(k) for k in range(self.context.order + 1)])

    def log(self) -> "TruncatedPoly":
        c = float(self.coeffs[0])
        if not c > 0.0:
            raise DaDomainError("log", c)
        series = [math.log(c)]
        for k in range(1, self.context.order + 1):
            series.append((-1.0) ** (k + 1) / (k * c ** k))
        return self._apply_series(series)


def variable(context: DaContext, index: int, center: float = 0.0) -> TruncatedPoly:
    """Independent variable `index` expanded around `center`."""
    if not 0 <= index < context.num_vars:
        raise DaArgumentError(f"variable index {index} outside [0, {context.num_vars})")
    coeffs = np.zeros(context.size)
    coeffs[0] = center
    coeffs[context.linear_index[index]] = 1.0
    return TruncatedPoly(context, coeffs)


def constant(context: DaContext, value: float) -> TruncatedPoly:
    coeffs = np.zeros(context.size)
    coeffs[0] = value
    return TruncatedPoly(context, coeffs)


_INTRINSICS = {
    "sqrt": TruncatedPoly.sqrt,
    "reciprocal": TruncatedPoly.reciprocal,
    "sin": TruncatedPoly.sin,
    "cos": TruncatedPoly.cos,
    "exp": TruncatedPoly.exp,
    "log": TruncatedPoly.log,
}


def intrinsic(name: str, arg: TruncatedPoly, exponent: float = None) -> TruncatedPoly:
    """Apply an intrinsic by name ("pow" takes `exponent`)."""
    if name == "pow":
        if exponent is None:
            raise DaArgumentError("pow needs an exponent")
        return arg.pow(exponent)
    try:
        function = _INTRINSICS[name]
    except KeyError:
        raise DaArgumentError(f"unknown intrinsic {name!r}") from None
    return function(arg)


def require_hessian(context: DaContext) -> None:
    if context.order < 2:
        raise CapabilityError(f"second derivatives need order >= 2, context has order {context.order}")
