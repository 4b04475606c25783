"""Fixed-step RK4 stage propagation for floats and truncated polynomials."""

from typing import List, Sequence

import numpy as np

from app.core.errors import DaArgumentError, DynamicsDomainError
from app.da import DaContext, PolyMap, variable
from app.dynamics.equations import State, rhs
from app.dynamics.models import ModelSpec, StageSpec
from app.utils.scalar import Scalar


def rk4_step(model: ModelSpec, h: float, x: Sequence[Scalar], u: Sequence[Scalar]) -> State:
    """One classical Runge-Kutta step with the control held constant."""
    half = 0.5 * h
    k1 = rhs(model, x, u)
    k2 = rhs(model, [xi + half * ki for xi, ki in zip(x, k1)], u)
    k3 = rhs(model, [xi + half * ki for xi, ki in zip(x, k2)], u)
    k4 = rhs(model, [xi + h * ki for xi, ki in zip(x, k3)], u)
    sixth = h / 6.0
    return [
        xi + sixth * (a + 2.0 * b + 2.0 * c + d)
        for xi, a, b, c, d in zip(x, k1, k2, k3, k4)
    ]


def propagate_stage(model: ModelSpec, stage: StageSpec, x: Sequence[Scalar], u: Sequence[Scalar]) -> State:
    """
    Integrate one stage under zero-order-hold control.

    Args:
        model: Equations of motion
        stage: Duration and substep count
        x: Initial state (floats or polynomials)
        u: Control held over the stage

    Returns:
        State at the end of the stage, same scalar kind as the inputs
    """
    h = stage.dt / stage.substeps
    state = list(x)
    for substep in range(stage.substeps):
        try:
            state = rk4_step(model, h, state, u)
        except DynamicsDomainError as e:
            raise e.at(substep=substep)
    return state


def propagate_real(model: ModelSpec, stage: StageSpec, x: Sequence[float], u: Sequence[float]) -> np.ndarray:
    return np.array(propagate_stage(model, stage, [float(v) for v in x], [float(v) for v in u]))


def expand_stage(
    model: ModelSpec,
    stage: StageSpec,
    x: Sequence[float],
    u: Sequence[float],
    context: DaContext,
) -> PolyMap:
    """Taylor expansion of the stage map around (x, u) in the variables (dx, du)."""
    nx = len(x)
    if context.num_vars != nx + len(u):
        raise DaArgumentError(
            f"context has {context.num_vars} variables, stage map needs {nx + len(u)}"
        )
    xs = [variable(context, i, float(v)) for i, v in enumerate(x)]
    us = [variable(context, nx + j, float(v)) for j, v in enumerate(u)]
    return PolyMap(propagate_stage(model, stage, xs, us))


def rollout(
    model: ModelSpec,
    stage: StageSpec,
    x0: Sequence[float],
    controls: Sequence[Sequence[float]],
) -> List[np.ndarray]:
    """States x_0..x_N from repeated real propagation."""
    states = [np.asarray(x0, dtype=float)]
    for k, u in enumerate(controls):
        try:
            states.append(propagate_real(model, stage, states[-1], u))
        except DynamicsDomainError as e:
            raise e.at(stage=k)
    return states
