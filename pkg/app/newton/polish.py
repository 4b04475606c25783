"""Damped Newton polishing of an almost-feasible trajectory to full feasibility."""

import logging
import math
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from app.core.errors import FactorizationError, PolishFailure
from app.core.ocp import eval_constraints
from app.core.problem import OptimalControlProblem
from app.dynamics.propagator import rollout
from app.newton.block_tridiag import FactorizationCost, block_cholesky, factorization_cost, tridiag_solve
from app.newton.gamma import (
    apply_decision,
    apply_delta_transpose,
    assemble_sigma,
    build_active_set,
    expand_gamma,
    jacobian_blocks,
)

logger = logging.getLogger(__name__)


class NewtonSettings(BaseModel):
    model_config = ConfigDict(frozen=True)

    eps_n: float = Field(default=1e-10, gt=0.0, description="Target max active-constraint residual")
    eps_cv: float = Field(default=1.1, gt=0.0, description="Minimum convergence rate for reusing Delta")
    gamma: float = Field(default=0.5, gt=0.0, lt=1.0, description="Line-search contraction")
    alpha_min: float = Field(default=2.0 ** -20, gt=0.0, description="Smallest step before the line search gives up")
    tol_active: Optional[float] = Field(
        default=None, ge=0.0, description="Activity tolerance; None treats every inequality as active"
    )
    max_iters: int = Field(default=200, ge=1, description="Accepted Newton steps allowed")
    final_slack: float = Field(default=10.0, ge=1.0, description="Multiple of eps_n allowed after re-propagation")
    max_restarts: int = Field(default=3, ge=0, description="Polishing rounds restarted from the re-propagated states")


class NewtonStep(NamedTuple):
    iteration: int
    d_max: float
    alpha: float
    rate: float


@dataclass
class PolishResult:
    states: List[np.ndarray]
    controls: List[np.ndarray]
    d_max: float
    iterations: int
    trace: List[NewtonStep] = field(default_factory=list)
    factorization: Optional[FactorizationCost] = None


def convergence_rate(d_star: float, d_max: float) -> float:
    """log d* / log d, or +inf where the ratio carries no information."""
    if not (0.0 < d_star < 1.0 and 0.0 < d_max < 1.0):
        return math.inf
    return math.log(d_star) / math.log(d_max)


def _factorize(problem, states, controls, tol_active):
    stack = build_active_set(problem.constraints, states, controls, problem.target, tol_active)
    gamma = expand_gamma(problem, states, controls, stack)
    blocks = jacobian_blocks(gamma)
    sigma = assemble_sigma(blocks)
    return stack, gamma, blocks, sigma, block_cholesky(sigma)


def newton_polish(
    problem: OptimalControlProblem,
    states: Sequence[np.ndarray],
    controls: Sequence[np.ndarray],
    settings: Optional[NewtonSettings] = None,
) -> PolishResult:
    """
    Drive the active constraints and continuity residuals below eps_n.

    Each outer iteration re-expands the constraint maps from scratch and
    factorizes Sigma; inner iterations reuse that factorization while the
    observed convergence rate stays above eps_cv. Surrogate constraint values
    come from the maps, which are re-centered by composition after every
    accepted step. Multipliers are not touched. Once the surrogate residual
    is below eps_n the controls are re-propagated from x0, and polishing
    restarts from the propagated states (up to max_restarts times) while
    their true violation stays above eps_n.

    Raises:
        PolishFailure: line search stalled, Sigma could not be factorized
            twice in a row, or the re-propagated trajectory misses
            final_slack * eps_n; carries the Newton steps taken so far
    """
    settings = settings or NewtonSettings()
    tol_active = settings.tol_active if settings.tol_active is not None else math.inf
    states = [np.asarray(x, dtype=float).copy() for x in states]
    controls = [np.asarray(u, dtype=float).copy() for u in controls]
    trace: List[NewtonStep] = []
    cost: Optional[FactorizationCost] = None
    iterations = 0
    restarts = 0

    def failure(reason: str, d_max: float) -> PolishFailure:
        return PolishFailure(reason, trajectory=(states, controls), d_max=d_max, trace=trace)

    while True:
        try:
            stack, gamma, blocks, sigma, factor = _factorize(problem, states, controls, tol_active)
        except FactorizationError as e:
            tighter = tol_active / 10.0 if math.isfinite(tol_active) else 0.0
            logger.warning("%s; rebuilding the active set with tol_active=%.1e", e, tighter)
            try:
                stack, gamma, blocks, sigma, factor = _factorize(problem, states, controls, tighter)
            except FactorizationError as again:
                d_max = float(np.max(np.abs(gamma_residual(problem, states, controls, tighter))))
                raise failure(str(again), d_max) from again
            tol_active = tighter
        if cost is None:
            cost = factorization_cost(sigma)

        d = gamma.residual()
        d_max = float(np.max(np.abs(d))) if d.size else 0.0
        if d_max <= settings.eps_n:
            propagated, true_d_max = _verify(problem, states, controls)
            if true_d_max <= settings.eps_n or restarts >= settings.max_restarts:
                states = propagated
                break
            # continuity gaps below eps_n can still add up along the re-propagation
            logger.debug("re-propagated d_max=%.3e above eps_n, polishing from the propagated states", true_d_max)
            states = propagated
            restarts += 1
            continue
        logger.debug("Newton refactorization: %d active rows, d_max=%.3e", stack.size, d_max)

        rate = math.inf
        while d_max > settings.eps_n and rate > settings.eps_cv:
            if iterations >= settings.max_iters:
                raise failure(f"no convergence in {settings.max_iters} Newton steps", d_max)
            step = -apply_delta_transpose(blocks, tridiag_solve(factor, d))
            alpha, d_star, d_star_max = 1.0, d, math.inf
            while not d_star_max < d_max:
                if alpha < settings.alpha_min:
                    raise failure("Newton line search stalled", d_max)
                d_star = gamma.evaluate(alpha * step)
                d_star_max = float(np.max(np.abs(d_star)))
                alpha *= settings.gamma
            taken = (alpha / settings.gamma) * step
            states, controls = apply_decision(states, controls, taken)
            gamma = gamma.shift(taken)
            d = d_star
            rate = convergence_rate(d_star_max, d_max)
            d_max = d_star_max
            iterations += 1
            trace.append(NewtonStep(iterations, d_max, alpha / settings.gamma, rate))
            logger.debug("Newton step %d: d_max=%.3e alpha=%.3e rate=%.3f", iterations, d_max, alpha / settings.gamma, rate)

    if true_d_max > settings.final_slack * settings.eps_n:
        raise failure("re-propagated trajectory misses the feasibility target", true_d_max)
    logger.info("Newton polish finished in %d steps, d_max=%.3e", iterations, true_d_max)
    return PolishResult(states, controls, true_d_max, iterations, trace, cost)


def gamma_residual(problem, states, controls, tol_active) -> np.ndarray:
    stack = build_active_set(problem.constraints, states, controls, problem.target, tol_active)
    return expand_gamma(problem, states, controls, stack).residual()


def _verify(problem: OptimalControlProblem, states, controls):
    """Single-shooting propagation of the polished controls and its true constraint violation."""
    propagated = rollout(problem.model, problem.stage, problem.x0, controls)
    continuity = max(float(np.max(np.abs(a - b))) for a, b in zip(propagated, states))
    values = eval_constraints(problem.constraints, propagated, controls, problem.target)
    logger.debug("verification: continuity drift %.3e, g_max %.3e", continuity, values.g_max)
    return propagated, values.g_max
