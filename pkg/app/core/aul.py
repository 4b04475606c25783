"""Augmented-Lagrangian outer loop with homotopy continuation on the stage cost."""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.core.ddp import (
    ApproxStats,
    DdpSettings,
    SolverVariant,
    TraceRow,
    Trajectory,
    ddp_solve,
    refresh_costs,
    rollout_initial,
)
from app.core.errors import ConvergenceFailure
from app.core.ocp import (
    FUEL_SCHEDULE,
    CostSpec,
    DualPenaltyState,
    HomotopySchedule,
    eval_constraints,
    homotopy_advance,
    update_duals,
)
from app.core.problem import OptimalControlProblem

logger = logging.getLogger(__name__)


class AulSettings(BaseModel):
    """Outer-loop tolerance and penalty growth."""

    model_config = ConfigDict(frozen=True)

    eps_aul: float = Field(default=1e-6, gt=0.0, description="Target max constraint violation")
    mu0: float = Field(default=10.0, gt=0.0, description="Initial penalty")
    beta: float = Field(default=10.0, gt=1.0, description="Penalty growth factor")
    mu_max: float = Field(default=1e8, gt=0.0, description="Penalty ceiling")
    max_aul_iters: int = Field(default=200, ge=1, description="Outer iterations allowed per homotopy pair")

    @model_validator(mode="after")
    def _check_penalties(self):
        if self.mu0 > self.mu_max:
            raise ValueError(f"mu0 ({self.mu0}) exceeds mu_max ({self.mu_max})")
        return self


@dataclass
class PhaseSummary:
    eta: float
    sigma: float
    n_ddp: int = 0
    n_aul: int = 0
    g_max: float = float("inf")
    cost: float = float("inf")

    @property
    def label(self) -> str:
        return f"eta={self.eta:g} sigma={self.sigma:g}"


@dataclass
class AulResult:
    trajectory: Trajectory
    duals: DualPenaltyState
    phases: List[PhaseSummary]
    stats: ApproxStats
    trace: List[TraceRow] = field(default_factory=list)
    ddp_converged: bool = True

    @property
    def n_ddp(self) -> int:
        return sum(p.n_ddp for p in self.phases)

    @property
    def n_aul(self) -> int:
        return sum(p.n_aul for p in self.phases)

    @property
    def g_max(self) -> float:
        return self.phases[-1].g_max

    @property
    def cost(self) -> float:
        return self.trajectory.cost


def aul_solve(
    problem: OptimalControlProblem,
    controls: Sequence[np.ndarray],
    variant: SolverVariant,
    ddp_settings: Optional[DdpSettings] = None,
    aul_settings: Optional[AulSettings] = None,
    schedule: HomotopySchedule = FUEL_SCHEDULE,
) -> AulResult:
    """
    Solve the constrained problem through every homotopy pair of `schedule`.

    For each (eta, sigma) the inner DDP solve is repeated on the augmented
    cost, updating multipliers and penalties in between, until the maximum
    constraint violation is at most eps_aul. Multipliers carry over from one
    pair to the next. Only the first inner solve of the run must make
    progress; a later one that finds no descent step hands its iterate back
    to the outer loop.

    Raises:
        ConvergenceFailure: inner solve failed or max_aul_iters was reached,
            with `phase` naming the homotopy pair and `partial` holding the
            AulResult accumulated so far
    """
    ddp_settings = ddp_settings or DdpSettings()
    aul_settings = aul_settings or AulSettings()
    duals = DualPenaltyState.initial(problem.constraints, problem.horizon, aul_settings.mu0)
    stats = ApproxStats()
    trace: List[TraceRow] = []
    phases: List[PhaseSummary] = []
    traj: Optional[Trajectory] = None
    ddp_converged = True

    def failure(reason: str, phase: str, cause: Optional[ConvergenceFailure] = None) -> ConvergenceFailure:
        current = traj if traj is not None else (cause.trajectory if cause is not None else None)
        partial = AulResult(current, duals, phases, stats, trace, False) if current is not None else None
        return ConvergenceFailure(reason, trajectory=current, phase=phase, partial=partial)

    index, pair = 0, schedule.stages[0]
    while pair is not None:
        eta, sigma = pair
        summary = PhaseSummary(eta, sigma)
        phases.append(summary)
        phase_problem = problem.with_cost(
            CostSpec(eta=eta, sigma=sigma, terminal_weights=problem.cost.terminal_weights)
        )
        logger.info("homotopy phase %s", summary.label)
        if traj is None:
            traj = rollout_initial(phase_problem, list(controls), duals)
        else:
            traj = refresh_costs(phase_problem, traj, duals)

        while True:
            first_solve = index == 0 and summary.n_aul == 0
            try:
                result = ddp_solve(phase_problem, traj, duals, variant, ddp_settings, require_progress=first_solve)
            except ConvergenceFailure as e:
                raise failure(e.reason, summary.label, e) from e
            offset = len(trace)
            trace.extend(row._replace(iteration=offset + n) for n, row in enumerate(result.trace, start=1))
            traj = result.trajectory
            stats.merge(result.stats)
            ddp_converged = ddp_converged and result.converged
            summary.n_ddp += result.iterations
            summary.n_aul += 1

            values = eval_constraints(phase_problem.constraints, traj.states, traj.controls, phase_problem.target)
            summary.g_max = values.g_max
            summary.cost = traj.cost
            logger.info(
                "AUL iteration %d (%s): J=%.9e g_max=%.3e", summary.n_aul, summary.label, traj.cost, values.g_max
            )
            if values.g_max <= aul_settings.eps_aul:
                break
            if summary.n_aul >= aul_settings.max_aul_iters:
                raise failure(
                    f"g_max={values.g_max:.3e} above eps_aul={aul_settings.eps_aul:.1e} "
                    f"after {summary.n_aul} AUL iterations",
                    summary.label,
                )
            duals = update_duals(
                phase_problem.constraints, values.values, duals, aul_settings.beta, aul_settings.mu_max
            )
            traj = refresh_costs(phase_problem, traj, duals)

        pair = homotopy_advance(schedule, index)
        index += 1

    return AulResult(traj, duals, phases, stats, trace, ddp_converged)
