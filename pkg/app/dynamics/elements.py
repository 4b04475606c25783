"""Orbital element conversions and integrals of motion."""

import math
from typing import Sequence, Tuple

import numpy as np
from scipy.optimize import brentq


def keplerian_to_equinoctial(
    a: float, e: float, i: float, raan: float, argp: float, nu: float
) -> Tuple[float, float, float, float, float, float]:
    """(a, e, i, RAAN, arg. of periapsis, true anomaly) in radians to (a, p, q, r, s, L)."""
    lon_periapsis = raan + argp
    half_tan = math.tan(i / 2.0)
    return (
        a,
        e * math.sin(lon_periapsis),
        e * math.cos(lon_periapsis),
        half_tan * math.sin(raan),
        half_tan * math.cos(raan),
        lon_periapsis + nu,
    )


def equinoctial_to_keplerian(
    a: float, p: float, q: float, r: float, s: float, lon: float
) -> Tuple[float, float, float, float, float, float]:
    """Inverse of keplerian_to_equinoctial; angles wrapped to [0, 2 pi)."""
    e = math.hypot(p, q)
    half_tan = math.hypot(r, s)
    i = 2.0 * math.atan(half_tan)
    raan = math.atan2(r, s) if half_tan > 0.0 else 0.0
    lon_periapsis = math.atan2(p, q) if e > 0.0 else 0.0
    argp = lon_periapsis - raan
    nu = lon - lon_periapsis
    two_pi = 2.0 * math.pi
    return a, e, i, raan % two_pi, argp % two_pi, nu % two_pi


def orbital_energy(x: Sequence[float], mu: float) -> float:
    r = np.asarray(x[:3], dtype=float)
    v = np.asarray(x[3:6], dtype=float)
    return 0.5 * float(v @ v) - mu / float(np.linalg.norm(r))


def angular_momentum(x: Sequence[float]) -> float:
    return float(np.linalg.norm(np.cross(np.asarray(x[:3], dtype=float), np.asarray(x[3:6], dtype=float))))


def effective_potential(x: Sequence[float], mu: float) -> float:
    px, py, pz = x[:3]
    r1 = math.sqrt((px + mu) ** 2 + py ** 2 + pz ** 2)
    r2 = math.sqrt((px + mu - 1.0) ** 2 + py ** 2 + pz ** 2)
    return 0.5 * (px ** 2 + py ** 2) + (1.0 - mu) / r1 + mu / r2


def jacobi_constant(x: Sequence[float], mu: float) -> float:
    """C = 2 Omega - v.v in the rotating frame."""
    v = np.asarray(x[3:6], dtype=float)
    return 2.0 * effective_potential(x, mu) - float(v @ v)


def _collinear_force(px: float, mu: float) -> float:
    d1 = px + mu
    d2 = px + mu - 1.0
    return px - (1.0 - mu) * d1 / abs(d1) ** 3 - mu * d2 / abs(d2) ** 3


def collinear_equilibrium(mu: float, point: int) -> float:
    """x-coordinate of L1, L2 or L3, bracketed between the singularities and found with brentq."""
    margin = 1e-9
    if point == 1:
        bracket = (-mu + margin, 1.0 - mu - margin)
    elif point == 2:
        bracket = (1.0 - mu + margin, 2.0)
    elif point == 3:
        bracket = (-2.0, -mu - margin)
    else:
        raise ValueError(f"collinear points are 1, 2 or 3, got {point}")
    return brentq(_collinear_force, *bracket, args=(mu,), xtol=1e-15, rtol=4 * np.finfo(float).eps)
