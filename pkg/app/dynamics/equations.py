"""Right-hand sides of the equations of motion, in normalized units.

Every function here is written once for plain floats and truncated
polynomials: only +, -, *, / and the helpers of app.utils.scalar are used.
"""

from typing import Callable, Dict, List, Sequence

from app.core.errors import DynamicsDomainError
from app.dynamics.models import ModelKind, ModelSpec
from app.utils.scalar import Scalar, cos, dot, sin, sqrt, value_of

# Smoothing of ||u|| in the mass equation, in normalized thrust units.
KAPPA = 1e-12
# Minimum 1 - p^2 - q^2 accepted by the equinoctial model.
EQUINOCTIAL_GUARD = 1e-10

State = List[Scalar]


def _inverse_mass(x: Sequence[Scalar]) -> Scalar:
    m = value_of(x[6])
    if not m > 0.0:
        raise DynamicsDomainError("mass", m)
    return 1.0 / x[6]


def mass_rate(model: ModelSpec, u: Sequence[Scalar]) -> Scalar:
    """-sqrt(u.u + kappa^2) / (Isp g0)."""
    return -sqrt(dot(u, u) + KAPPA * KAPPA) / model.exhaust_velocity


def two_body(model: ModelSpec, x: Sequence[Scalar], u: Sequence[Scalar]) -> State:
    rx, ry, rz, vx, vy, vz = x[:6]
    r2 = rx * rx + ry * ry + rz * rz
    if not value_of(r2) > 0.0:
        raise DynamicsDomainError("radius", value_of(r2))
    gravity = -model.mu / (r2 * sqrt(r2))
    inv_m = _inverse_mass(x)
    return [
        vx,
        vy,
        vz,
        gravity * rx + u[0] * inv_m,
        gravity * ry + u[1] * inv_m,
        gravity * rz + u[2] * inv_m,
        mass_rate(model, u),
    ]


def cr3bp(model: ModelSpec, x: Sequence[Scalar], u: Sequence[Scalar]) -> State:
    mu = model.mu
    px, py, pz, vx, vy, vz = x[:6]
    d1 = px + mu
    d2 = px + (mu - 1.0)
    yz = py * py + pz * pz
    r1_sq = d1 * d1 + yz
    r2_sq = d2 * d2 + yz
    if not value_of(r1_sq) > 0.0:
        raise DynamicsDomainError("distance to primary", value_of(r1_sq))
    if not value_of(r2_sq) > 0.0:
        raise DynamicsDomainError("distance to secondary", value_of(r2_sq))
    k1 = (1.0 - mu) / (r1_sq * sqrt(r1_sq))
    k2 = mu / (r2_sq * sqrt(r2_sq))
    inv_m = _inverse_mass(x)
    return [
        vx,
        vy,
        vz,
        2.0 * vy + px - k1 * d1 - k2 * d2 + u[0] * inv_m,
        -2.0 * vx + py - (k1 + k2) * py + u[1] * inv_m,
        -(k1 + k2) * pz + u[2] * inv_m,
        mass_rate(model, u),
    ]


def equinoctial(model: ModelSpec, x: Sequence[Scalar], u: Sequence[Scalar]) -> State:
    """Gauss equations in (a, p, q, r, s, L) with the thrust in the RTN frame."""
    a, p, q, r, s, lon = x[:6]
    if not value_of(a) > 0.0:
        raise DynamicsDomainError("semi-major axis", value_of(a))
    radicand = 1.0 - p * p - q * q
    if value_of(radicand) <= EQUINOCTIAL_GUARD:
        raise DynamicsDomainError("1 - p^2 - q^2", value_of(radicand))
    sin_l = sin(lon)
    cos_l = cos(lon)
    psi = 1.0 + p * sin_l + q * cos_l
    if value_of(psi) == 0.0:
        raise DynamicsDomainError("psi", 0.0)
    inv_m = _inverse_mass(x)
    b = sqrt(radicand)
    ur = u[0] * inv_m
    ut = u[1] * inv_m
    un = u[2] * inv_m

    sqrt_a_mu = sqrt(a / model.mu)
    sqrt_a3_mu = sqrt_a_mu * a
    inv_psi = 1.0 / psi
    out_of_plane = (r * cos_l - s * sin_l) * inv_psi
    inclination_gain = 0.5 * b * sqrt_a_mu * (1.0 + r * r + s * s) * inv_psi * un

    a_dot = (2.0 / b) * sqrt_a3_mu * ((q * sin_l - p * cos_l) * ur + psi * ut)
    p_dot = b * sqrt_a_mu * (
        -cos_l * ur + ((p + sin_l) * inv_psi + sin_l) * ut - q * out_of_plane * un
    )
    q_dot = b * sqrt_a_mu * (
        sin_l * ur + ((q + cos_l) * inv_psi + cos_l) * ut + p * out_of_plane * un
    )
    r_dot = inclination_gain * sin_l
    s_dot = inclination_gain * cos_l
    mean_motion = sqrt(model.mu / (a * a * a))
    l_dot = mean_motion * psi * psi / (b * b * b) - b * sqrt_a_mu * out_of_plane * un
    return [a_dot, p_dot, q_dot, r_dot, s_dot, l_dot, mass_rate(model, u)]


def double_integrator(model: ModelSpec, x: Sequence[Scalar], u: Sequence[Scalar]) -> State:
    return [x[3], x[4], x[5], u[0], u[1], u[2]]


_RHS: Dict[ModelKind, Callable[[ModelSpec, Sequence[Scalar], Sequence[Scalar]], State]] = {
    ModelKind.TWO_BODY: two_body,
    ModelKind.CR3BP: cr3bp,
    ModelKind.EQUINOCTIAL: equinoctial,
    ModelKind.DOUBLE_INTEGRATOR: double_integrator,
}


def rhs(model: ModelSpec, x: Sequence[Scalar], u: Sequence[Scalar]) -> State:
    """Time derivative of the state under control u."""
    return _RHS[model.kind](model, x, u)
