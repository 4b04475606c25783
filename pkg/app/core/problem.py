"""Optimal-control problem assembled from a model, a horizon and its costs."""

from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from app.core.ocp import ConstraintSet, CostSpec, DualPenaltyState, augment
from app.da import DaContext, TruncatedPoly, constant, get_context, variable
from app.dynamics.models import ModelSpec, Spacecraft, StageSpec


@dataclass(frozen=True)
class OptimalControlProblem:
    """Fixed-time transfer from x0 toward target in `horizon` equal stages (normalized units)."""

    model: ModelSpec
    stage: StageSpec
    x0: np.ndarray
    target: np.ndarray
    horizon: int
    constraints: ConstraintSet
    cost: CostSpec
    context: DaContext
    spacecraft: Optional[Spacecraft] = None

    @classmethod
    def create(
        cls,
        model: ModelSpec,
        stage: StageSpec,
        x0: Sequence[float],
        target: Sequence[float],
        horizon: int,
        constraints: ConstraintSet,
        cost: Optional[CostSpec] = None,
        order: int = 2,
        spacecraft: Optional[Spacecraft] = None,
    ) -> "OptimalControlProblem":
        if horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {horizon}")
        if order < 2:
            raise ValueError(f"expansion order must be >= 2, got {order}")
        x0 = np.asarray(x0, dtype=float)
        if x0.shape != (model.state_size,):
            raise ValueError(f"x0 has {x0.size} components, {model.kind.value} needs {model.state_size}")
        return cls(
            model=model,
            stage=stage,
            x0=x0,
            target=np.asarray(target, dtype=float),
            horizon=horizon,
            constraints=constraints,
            cost=cost or CostSpec(),
            context=get_context(model.state_size + model.control_size, order),
            spacecraft=spacecraft,
        )

    @property
    def nx(self) -> int:
        return self.model.state_size

    @property
    def nu(self) -> int:
        return self.model.control_size

    @property
    def order(self) -> int:
        return self.context.order

    def with_cost(self, cost: CostSpec) -> "OptimalControlProblem":
        return replace(self, cost=cost)

    def with_order(self, order: int) -> "OptimalControlProblem":
        return replace(self, context=get_context(self.nx + self.nu, order))

    # Expansions of the augmented costs around a nominal point

    def stage_cost_poly(self, duals: DualPenaltyState, k: int, x: Sequence[float], u: Sequence[float]) -> TruncatedPoly:
        xs = [variable(self.context, i, float(v)) for i, v in enumerate(x)]
        us = [variable(self.context, self.nx + j, float(v)) for j, v in enumerate(u)]
        cost = augment(self.cost, self.constraints, duals, k, xs, us)
        return _as_poly(self.context, cost)

    def terminal_cost_poly(self, duals: DualPenaltyState, x: Sequence[float]) -> TruncatedPoly:
        xs = [variable(self.context, i, float(v)) for i, v in enumerate(x)]
        cost = augment(
            self.cost, self.constraints, duals, self.horizon, xs,
            target=self.target, indices=self.model.terminal_indices,
        )
        return _as_poly(self.context, cost)


def _as_poly(context: DaContext, value) -> TruncatedPoly:
    if isinstance(value, TruncatedPoly):
        return value
    return constant(context, float(value))
