"""Stage/terminal costs, constraints and augmented-Lagrangian bookkeeping.

Cost and constraint functions accept floats or truncated polynomials.
"""

import logging
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from app.dynamics.models import ModelSpec, Spacecraft
from app.utils.scalar import Scalar, dot, sqrt, value_of

logger = logging.getLogger(__name__)


class CostSpec(BaseModel):
    """Homotopy blend of the energy and pseudo-Huber stage costs."""

    model_config = ConfigDict(frozen=True)

    eta: float = Field(default=1.0, ge=0.0, le=1.0, description="Weight of the energy term")
    sigma: float = Field(default=1e-2, gt=0.0, description="Pseudo-Huber width")
    terminal_weights: Optional[Tuple[float, ...]] = Field(
        default=None, description="Per-component terminal weights (all ones when omitted)"
    )


class HomotopySchedule(BaseModel):
    """Ordered (eta, sigma) pairs leading from energy- to fuel-optimal costs."""

    model_config = ConfigDict(frozen=True)

    stages: Tuple[Tuple[float, float], ...]

    @field_validator("stages")
    @classmethod
    def _check_stages(cls, stages):
        if not stages:
            raise ValueError("homotopy schedule is empty")
        if stages[0][0] != 1.0:
            raise ValueError(f"first homotopy pair must have eta = 1, got {stages[0][0]}")
        for eta, sigma in stages:
            if not 0.0 <= eta <= 1.0:
                raise ValueError(f"eta must lie in [0, 1], got {eta}")
            if not sigma > 0.0:
                raise ValueError(f"sigma must be positive, got {sigma}")
        for (eta0, sigma0), (eta1, sigma1) in zip(stages, stages[1:]):
            if eta1 > eta0:
                raise ValueError(f"eta must be non-increasing ({eta0} -> {eta1})")
            if sigma1 > sigma0:
                raise ValueError(f"sigma must be non-increasing ({sigma0} -> {sigma1})")
        return stages

    def __len__(self) -> int:
        return len(self.stages)


FUEL_SCHEDULE = HomotopySchedule(stages=((1.0, 1e-2), (0.5, 1e-2), (0.1, 2e-3), (1e-3, 1e-3)))
ENERGY_SCHEDULE = HomotopySchedule(stages=((1.0, 1e-2),))


def homotopy_advance(schedule: HomotopySchedule, index: int) -> Optional[Tuple[float, float]]:
    """Pair following `index`, or None once the schedule is exhausted."""
    if not 0 <= index < len(schedule):
        raise ValueError(f"homotopy index {index} outside schedule of length {len(schedule)}")
    if index + 1 < len(schedule):
        return schedule.stages[index + 1]
    return None


# Costs

def pseudo_huber(u: Sequence[Scalar], sigma: float) -> Scalar:
    """sigma * (sqrt(u.u / sigma^2 + 1) - 1)."""
    return sigma * (sqrt(dot(u, u) / (sigma * sigma) + 1.0) - 1.0)


def stage_cost(spec: CostSpec, x: Sequence[Scalar], u: Sequence[Scalar]) -> Scalar:
    energy = 0.5 * dot(u, u)
    if spec.eta == 1.0:
        return energy
    return spec.eta * energy + (1.0 - spec.eta) * pseudo_huber(u, spec.sigma)


def terminal_cost(
    x_final: Sequence[Scalar],
    target: Sequence[float],
    indices: Optional[Sequence[int]] = None,
    weights: Optional[Sequence[float]] = None,
) -> Scalar:
    """Weighted squared residual on the matched state components."""
    indices = range(len(target)) if indices is None else indices
    total = 0.0
    for n, i in enumerate(indices):
        residual = x_final[i] - target[i]
        weight = 1.0 if weights is None else weights[n]
        total = total + weight * residual * residual
    return total


# Constraints

@dataclass(frozen=True)
class ConstraintSet:
    """Path inequalities [u.u - u_max^2, m_dry - m] and terminal state matching.

    Bounds are normalized. Path equalities and terminal inequalities are
    supported in the bookkeeping but empty for every bundled model.
    """

    u_max: Optional[float] = None
    m_dry: Optional[float] = None
    mass_index: Optional[int] = None
    terminal_indices: Tuple[int, ...] = ()

    @classmethod
    def for_model(
        cls,
        model: ModelSpec,
        spacecraft: Optional[Spacecraft] = None,
        path_constraints: bool = True,
        terminal_equality: bool = True,
    ) -> "ConstraintSet":
        u_max = m_dry = None
        if path_constraints and spacecraft is not None:
            u_max = spacecraft.u_max / model.units.thrust_unit
            if model.has_mass:
                m_dry = spacecraft.m_dry / model.units.mass_unit
        return cls(
            u_max=u_max,
            m_dry=m_dry,
            mass_index=model.mass_index,
            terminal_indices=model.terminal_indices if terminal_equality else (),
        )

    @property
    def n_ineq(self) -> int:
        return int(self.u_max is not None) + int(self.m_dry is not None)

    @property
    def n_eq(self) -> int:
        return 0

    @property
    def n_tineq(self) -> int:
        return 0

    @property
    def n_teq(self) -> int:
        return len(self.terminal_indices)

    @property
    def path_equality_mask(self) -> np.ndarray:
        return np.array([False] * self.n_ineq + [True] * self.n_eq, dtype=bool)

    @property
    def terminal_equality_mask(self) -> np.ndarray:
        return np.array([False] * self.n_tineq + [True] * self.n_teq, dtype=bool)

    def path(self, x: Sequence[Scalar], u: Sequence[Scalar]) -> List[Scalar]:
        """Inequalities first, then equalities."""
        values = []
        if self.u_max is not None:
            values.append(dot(u, u) - self.u_max * self.u_max)
        if self.m_dry is not None:
            values.append(self.m_dry - x[self.mass_index])
        return values

    def terminal(self, x: Sequence[Scalar], target: Sequence[float]) -> List[Scalar]:
        return [x[i] - target[i] for i in self.terminal_indices]


class ConstraintValues(NamedTuple):
    values: List[np.ndarray]
    g_max: float


def max_violation(values: Sequence[float], equality_mask: np.ndarray) -> float:
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return 0.0
    violation = np.where(equality_mask, np.abs(values), np.maximum(values, 0.0))
    return float(violation.max())


def eval_constraints(
    constraints: ConstraintSet,
    states: Sequence[Sequence[float]],
    controls: Sequence[Sequence[float]],
    target: Sequence[float],
) -> ConstraintValues:
    """Per-stage constraint values (terminal block last) and the max violation."""
    values = [np.array(constraints.path(x, u), dtype=float) for x, u in zip(states[:-1], controls)]
    values.append(np.array(constraints.terminal(states[-1], target), dtype=float))
    path_mask = constraints.path_equality_mask
    g_max = max(
        [max_violation(v, path_mask) for v in values[:-1]]
        + [max_violation(values[-1], constraints.terminal_equality_mask)]
    )
    return ConstraintValues(values=values, g_max=g_max)


# Augmented Lagrangian

@dataclass
class DualPenaltyState:
    """Multipliers and penalties per stage; the last entry belongs to the terminal block."""

    lambdas: List[np.ndarray] = field(default_factory=list)
    mus: List[np.ndarray] = field(default_factory=list)

    @classmethod
    def initial(cls, constraints: ConstraintSet, horizon: int, mu0: float = 10.0) -> "DualPenaltyState":
        path = constraints.n_ineq + constraints.n_eq
        terminal = constraints.n_tineq + constraints.n_teq
        sizes = [path] * horizon + [terminal]
        return cls(
            lambdas=[np.zeros(n) for n in sizes],
            mus=[np.full(n, mu0) for n in sizes],
        )

    @property
    def horizon(self) -> int:
        return len(self.lambdas) - 1


def penalty(
    g: Sequence[Scalar],
    lambdas: np.ndarray,
    mus: np.ndarray,
    equality_mask: np.ndarray,
) -> Scalar:
    """Sum of (lambda_i + I_i/2 g_i) g_i with I_i = mu_i when active.

    Equalities are always active; inequalities when violated or carrying a
    positive multiplier.
    """
    total = 0.0
    for i, gi in enumerate(g):
        lam = float(lambdas[i])
        active = equality_mask[i] or value_of(gi) > 0.0 or lam > 0.0
        weight = float(mus[i]) if active else 0.0
        total = total + (lam + 0.5 * weight * gi) * gi
    return total


def augment(
    spec: CostSpec,
    constraints: ConstraintSet,
    duals: DualPenaltyState,
    stage: int,
    x: Sequence[Scalar],
    u: Optional[Sequence[Scalar]] = None,
    target: Optional[Sequence[float]] = None,
    indices: Optional[Sequence[int]] = None,
) -> Scalar:
    """Augmented stage cost, or the augmented terminal cost when stage == horizon.

    `indices` selects the state components entering the terminal cost.
    """
    if stage == duals.horizon:
        base = terminal_cost(x, target, indices, spec.terminal_weights)
        g = constraints.terminal(x, target)
        mask = constraints.terminal_equality_mask
    else:
        base = stage_cost(spec, x, u)
        g = constraints.path(x, u)
        mask = constraints.path_equality_mask
    if not g:
        return base
    return base + penalty(g, duals.lambdas[stage], duals.mus[stage], mask)


def update_duals(
    constraints: ConstraintSet,
    values: Sequence[np.ndarray],
    duals: DualPenaltyState,
    beta: float = 10.0,
    mu_max: float = 1e8,
) -> DualPenaltyState:
    """First-order multiplier update with clamping, then geometric penalty growth."""
    lambdas, mus = [], []
    horizon = duals.horizon
    for k, (g, lam, mu) in enumerate(zip(values, duals.lambdas, duals.mus)):
        mask = constraints.terminal_equality_mask if k == horizon else constraints.path_equality_mask
        updated = lam + mu * g
        lambdas.append(np.where(mask, updated, np.maximum(updated, 0.0)))
        mus.append(np.minimum(beta * mu, mu_max))
    logger.debug(
        "duals updated: max |lambda| %.3e, max mu %.3e",
        max((float(np.abs(lam).max()) for lam in lambdas if lam.size), default=0.0),
        max((float(m.max()) for m in mus if m.size), default=0.0),
    )
    return DualPenaltyState(lambdas=lambdas, mus=mus)
