"""Equations of motion and stage propagation."""

from app.dynamics.elements import (
    angular_momentum,
    collinear_equilibrium,
    equinoctial_to_keplerian,
    jacobi_constant,
    keplerian_to_equinoctial,
    orbital_energy,
)
from app.dynamics.equations import KAPPA, rhs
from app.dynamics.models import ModelKind, ModelSpec, NormalizationUnits, Spacecraft, StageSpec
from app.dynamics.propagator import expand_stage, propagate_real, propagate_stage, rollout

__all__ = [
    'angular_momentum',
    'collinear_equilibrium',
    'equinoctial_to_keplerian',
    'jacobi_constant',
    'keplerian_to_equinoctial',
    'orbital_energy',
    'KAPPA',
    'rhs',
    'ModelKind',
    'ModelSpec',
    'NormalizationUnits',
    'Spacecraft',
    'StageSpec',
    'expand_stage',
    'propagate_real',
    'propagate_stage',
    'rollout',
]
