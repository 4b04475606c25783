"""Differential dynamic programming on Taylor-expanded stage maps.

Three backward sweeps are available: iLQR (first-order dynamics), DDP (adds
the dynamics Hessians contracted with V_x) and Q (builds the action-value
polynomial by composition). Each can run with or without the polynomial
dynamics approximation in the forward pass.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, NamedTuple, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy.linalg import cho_factor, cho_solve

from app.core.errors import (
    ConvergenceFailure,
    DaDomainError,
    DynamicsDomainError,
    RegularizationExhausted,
)
from app.core.ocp import DualPenaltyState, eval_constraints
from app.core.problem import OptimalControlProblem
from app.da import (
    PolyMap,
    TruncatedPoly,
    compose,
    constant,
    convergence_radius,
    extract_derivatives,
    hessian_tensor,
    jacobian,
    variable,
)
from app.dynamics.propagator import expand_stage

logger = logging.getLogger(__name__)

LINE_SEARCH_ALPHAS = tuple(2.0 ** -i for i in range(11))


class SweepKind(str, Enum):
    ILQR = "iLQR"
    DDP = "DDP"
    Q = "Q"


class SolverVariant(NamedTuple):
    sweep: SweepKind
    dyn_approx: bool

    @property
    def name(self) -> str:
        return self.sweep.value + ("Dyn" if self.dyn_approx else "")

    @classmethod
    def parse(cls, name: str) -> "SolverVariant":
        """'iLQR', 'DDP', 'Q', optionally suffixed with 'Dyn'."""
        base, dyn = (name[:-3], True) if name.endswith("Dyn") else (name, False)
        for kind in SweepKind:
            if kind.value == base:
                return cls(kind, dyn)
        raise ValueError(f"unknown solver variant {name!r}; expected one of {', '.join(VARIANT_NAMES)}")

    def __str__(self) -> str:
        return self.name


ALL_VARIANTS = tuple(SolverVariant(kind, dyn) for dyn in (False, True) for kind in SweepKind)
VARIANT_NAMES = tuple(v.name for v in ALL_VARIANTS)


class DdpSettings(BaseModel):
    """Inner-loop tolerances, regularization ladder and line search."""

    model_config = ConfigDict(frozen=True)

    eps_ddp: float = Field(default=1e-4, gt=0.0, description="Cost-decrease stopping tolerance")
    eps_da: float = Field(default=1e-6, ge=0.0, description="Truncation tolerance for reusing stage maps")
    reg0: float = Field(default=1e-6, gt=0.0, description="First nonzero Q_uu shift")
    reg_min: float = Field(default=1e-8, ge=0.0, description="Shifts decreased below this drop to zero")
    reg_max: float = Field(default=1e8, gt=0.0, description="Ceiling of the regularization ladder")
    reg_scale: float = Field(default=10.0, gt=1.0, description="Ladder growth factor")
    reg_decrease_after: int = Field(default=2, ge=1, description="Consecutive full steps before the shift decreases")
    alphas: Tuple[float, ...] = Field(default=LINE_SEARCH_ALPHAS, description="Line-search multipliers, tried in order")
    max_iters: int = Field(default=5000, ge=1)

    @field_validator("alphas")
    @classmethod
    def _check_alphas(cls, alphas):
        if not alphas:
            raise ValueError("line search needs at least one alpha")
        for alpha in alphas:
            if not 0.0 < alpha <= 1.0:
                raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
        return alphas

    @model_validator(mode="after")
    def _check_ladder(self):
        if self.reg0 > self.reg_max:
            raise ValueError(f"reg0 ({self.reg0}) exceeds reg_max ({self.reg_max})")
        return self


@dataclass
class ApproxStats:
    """Stages advanced by composition vs. re-expanded from scratch."""

    approximated: int = 0
    recomputed: int = 0

    @property
    def total(self) -> int:
        return self.approximated + self.recomputed

    @property
    def share(self) -> float:
        return self.approximated / self.total if self.total else 0.0

    def merge(self, other: "ApproxStats") -> None:
        self.approximated += other.approximated
        self.recomputed += other.recomputed


@dataclass
class RegularizationLadder:
    """Levenberg-style shift added to Q_uu.

    Failures move rho up by reg_scale (starting from reg0); every
    `decrease_after` consecutive full steps move it down, and it drops to
    zero below reg_min.
    """

    reg0: float = 1e-6
    reg_min: float = 1e-8
    reg_max: float = 1e8
    scale: float = 10.0
    decrease_after: int = 2
    rho: float = 0.0
    full_steps: int = 0

    @classmethod
    def from_settings(cls, settings: DdpSettings) -> "RegularizationLadder":
        return cls(
            reg0=settings.reg0,
            reg_min=settings.reg_min,
            reg_max=settings.reg_max,
            scale=settings.reg_scale,
            decrease_after=settings.reg_decrease_after,
        )

    def increase(self) -> float:
        candidate = max(self.rho * self.scale, self.reg0)
        # relative slack so that reg0 * scale**n lands on reg_max despite rounding
        if candidate > self.reg_max * (1.0 + 1e-9):
            raise RegularizationExhausted(candidate, self.reg_max)
        self.rho = candidate
        self.full_steps = 0
        logger.debug("regularization increased to %.3e", self.rho)
        return self.rho

    def accept(self, alpha: float) -> None:
        if alpha < 1.0:
            self.full_steps = 0
            return
        self.full_steps += 1
        if self.full_steps >= self.decrease_after and self.rho > 0.0:
            self.rho /= self.scale
            if self.rho < self.reg_min:
                self.rho = 0.0
            self.full_steps = 0


def regularize(q_uu: np.ndarray, ladder: RegularizationLadder) -> Tuple[np.ndarray, tuple]:
    """Shift Q_uu by the ladder's rho, climbing the ladder until Cholesky succeeds.

    Returns the shifted matrix and its `cho_factor`; raises
    RegularizationExhausted once rho would exceed reg_max.
    """
    q_uu = 0.5 * (q_uu + q_uu.T)
    identity = np.eye(q_uu.shape[0])
    while True:
        shifted = q_uu + ladder.rho * identity
        try:
            return shifted, cho_factor(shifted)
        except np.linalg.LinAlgError:
            ladder.increase()


class ControlLaw(NamedTuple):
    feedforward: List[np.ndarray]
    feedback: List[np.ndarray]

    @classmethod
    def zeros(cls, horizon: int, nx: int, nu: int) -> "ControlLaw":
        return cls([np.zeros(nu) for _ in range(horizon)], [np.zeros((nu, nx)) for _ in range(horizon)])


@dataclass
class Trajectory:
    """Nominal iterate with the expansions built around it."""

    states: List[np.ndarray]
    controls: List[np.ndarray]
    stage_polys: List[PolyMap]
    cost_polys: List[TruncatedPoly]
    terminal_poly: TruncatedPoly
    cost: float
    radii: Dict[Tuple[int, float], float] = field(default_factory=dict, repr=False)

    @property
    def horizon(self) -> int:
        return len(self.controls)

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def radius(self, k: int, eps_da: float) -> float:
        """Convergence radius of stage k's map, cached per tolerance."""
        if eps_da <= 0.0:
            return 0.0
        key = (k, eps_da)
        if key not in self.radii:
            self.radii[key] = convergence_radius(self.stage_polys[k], eps_da)
        return self.radii[key]

    def g_max(self, problem: OptimalControlProblem) -> float:
        return eval_constraints(problem.constraints, self.states, self.controls, problem.target).g_max


def _costs(problem: OptimalControlProblem, duals: DualPenaltyState, states, controls):
    cost_polys = [problem.stage_cost_poly(duals, k, x, u) for k, (x, u) in enumerate(zip(states[:-1], controls))]
    terminal_poly = problem.terminal_cost_poly(duals, states[-1])
    cost = math.fsum(p.constant for p in cost_polys) + terminal_poly.constant
    return cost_polys, terminal_poly, cost


def rollout_initial(
    problem: OptimalControlProblem,
    controls: List[np.ndarray],
    duals: DualPenaltyState,
) -> Trajectory:
    """Propagate from x0 under `controls`, expanding dynamics and costs at every stage."""
    if len(controls) != problem.horizon:
        raise ValueError(f"expected {problem.horizon} controls, got {len(controls)}")
    states = [problem.x0.copy()]
    stage_polys = []
    controls = [np.asarray(u, dtype=float).copy() for u in controls]
    for k, u in enumerate(controls):
        try:
            poly = expand_stage(problem.model, problem.stage, states[-1], u, problem.context)
        except DynamicsDomainError as e:
            raise e.at(stage=k)
        stage_polys.append(poly)
        states.append(poly.constant)
    cost_polys, terminal_poly, cost = _costs(problem, duals, states, controls)
    return Trajectory(states, controls, stage_polys, cost_polys, terminal_poly, cost)


def refresh_costs(problem: OptimalControlProblem, traj: Trajectory, duals: DualPenaltyState) -> Trajectory:
    """Same states and stage maps, costs re-expanded for new duals or homotopy weights."""
    cost_polys, terminal_poly, cost = _costs(problem, duals, traj.states, traj.controls)
    return Trajectory(traj.states, traj.controls, traj.stage_polys, cost_polys, terminal_poly, cost, traj.radii)


# Backward sweeps

def _gains(q_u, q_ux, q_uu, ladder):
    _, factor = regularize(q_uu, ladder)
    return -cho_solve(factor, q_u), -cho_solve(factor, q_ux)


def backward_sweep(
    problem: OptimalControlProblem,
    traj: Trajectory,
    kind: SweepKind,
    ladder: RegularizationLadder,
) -> ControlLaw:
    """Gains from the second-order action-value model of each stage.

    With kind=DDP the Q blocks include V_x contracted with the dynamics
    Hessians; iLQR drops that term.
    """
    if kind is SweepKind.Q:
        return backward_sweep_q(problem, traj, ladder)
    nx = problem.nx
    terminal = extract_derivatives(traj.terminal_poly, nx)
    v_x, v_xx = terminal.grad_x, terminal.hess_xx
    feedforward: List[np.ndarray] = [None] * traj.horizon
    feedback: List[np.ndarray] = [None] * traj.horizon
    for k in range(traj.horizon - 1, -1, -1):
        cost = extract_derivatives(traj.cost_polys[k], nx)
        jac = jacobian(traj.stage_polys[k])
        f_x, f_u = jac[:, :nx], jac[:, nx:]
        q_x = cost.grad_x + f_x.T @ v_x
        q_u = cost.grad_u + f_u.T @ v_x
        q_xx = cost.hess_xx + f_x.T @ v_xx @ f_x
        q_xu = cost.hess_xu + f_x.T @ v_xx @ f_u
        q_uu = cost.hess_uu + f_u.T @ v_xx @ f_u
        if kind is SweepKind.DDP:
            curvature = np.tensordot(v_x, hessian_tensor(traj.stage_polys[k]), axes=1)
            q_xx = q_xx + curvature[:nx, :nx]
            q_xu = q_xu + curvature[:nx, nx:]
            q_uu = q_uu + curvature[nx:, nx:]
        a, b = _gains(q_u, q_xu.T, q_uu, ladder)
        feedforward[k], feedback[k] = a, b
        v_x = q_x + b.T @ q_uu @ a + b.T @ q_u + q_xu @ a
        v_xx = q_xx + b.T @ q_uu @ b + b.T @ q_xu.T + q_xu @ b
        v_xx = 0.5 * (v_xx + v_xx.T)
    return ControlLaw(feedforward, feedback)


def backward_sweep_q(
    problem: OptimalControlProblem,
    traj: Trajectory,
    ladder: RegularizationLadder,
) -> ControlLaw:
    """Gains read off the composed action-value polynomial P_Q = P_l + P_V(P_f - x_{k+1}, 0)."""
    ctx, nx, nu = problem.context, problem.nx, problem.nu
    zeros = [constant(ctx, 0.0) for _ in range(nu)]
    dx = [variable(ctx, i) for i in range(nx)]
    value = traj.terminal_poly
    feedforward: List[np.ndarray] = [None] * traj.horizon
    feedback: List[np.ndarray] = [None] * traj.horizon
    for k in range(traj.horizon - 1, -1, -1):
        next_state = traj.states[k + 1]
        deviation = [p - float(x) for p, x in zip(traj.stage_polys[k], next_state)]
        q_poly = traj.cost_polys[k] + compose(value, deviation + zeros)
        q = extract_derivatives(q_poly, nx)
        a, b = _gains(q.grad_u, q.hess_xu.T, q.hess_uu, ladder)
        feedforward[k], feedback[k] = a, b
        policy = [
            constant(ctx, float(a[j])) + _linear(dx, b[j])
            for j in range(nu)
        ]
        value = compose(q_poly, dx + policy)
    return ControlLaw(feedforward, feedback)


def _linear(variables: List[TruncatedPoly], row: np.ndarray) -> TruncatedPoly:
    total = variables[0] * float(row[0])
    for v, c in zip(variables[1:], row[1:]):
        total = total + v * float(c)
    return total


# Forward pass

def forward_pass(
    problem: OptimalControlProblem,
    traj: Trajectory,
    law: ControlLaw,
    alpha: float,
    duals: DualPenaltyState,
    dyn_approx: bool = False,
    eps_da: float = 0.0,
) -> Optional[Tuple[Trajectory, ApproxStats]]:
    """Apply u* = u + alpha a + b dx* along a new rollout.

    With dyn_approx, a stage whose joint displacement lies strictly inside
    the convergence radius of its map is advanced by composing that map;
    otherwise it is re-expanded from scratch. Returns None when the rollout
    hits a dynamics singularity.
    """
    ctx, nx = problem.context, problem.nx
    stats = ApproxStats()
    states = [problem.x0.copy()]
    controls: List[np.ndarray] = []
    stage_polys: List[PolyMap] = []
    try:
        for k in range(traj.horizon):
            dx = states[k] - traj.states[k]
            du = alpha * law.feedforward[k] + law.feedback[k] @ dx
            u = traj.controls[k] + du
            displacement = np.concatenate([dx, du])
            if dyn_approx and float(np.linalg.norm(displacement)) < traj.radius(k, eps_da):
                shifted = [variable(ctx, i, float(d)) for i, d in enumerate(displacement)]
                poly = compose(traj.stage_polys[k], shifted)
                stats.approximated += 1
            else:
                poly = expand_stage(problem.model, problem.stage, states[k], u, ctx)
                stats.recomputed += 1
            controls.append(u)
            stage_polys.append(poly)
            states.append(poly.constant)
        cost_polys, terminal_poly, cost = _costs(problem, duals, states, controls)
    except (DynamicsDomainError, DaDomainError) as e:
        logger.debug("forward pass with alpha=%.3e aborted: %s", alpha, e)
        return None
    if not math.isfinite(cost):
        return None
    return Trajectory(states, controls, stage_polys, cost_polys, terminal_poly, cost), stats


# Solver loop

class TraceRow(NamedTuple):
    section: str
    iteration: int
    cost: float
    g_max: float
    alpha: float
    reg: float
    approx_share: float


class DdpResult(NamedTuple):
    trajectory: Trajectory
    iterations: int
    converged: bool
    stats: ApproxStats
    trace: List[TraceRow]


def ddp_solve(
    problem: OptimalControlProblem,
    traj: Trajectory,
    duals: DualPenaltyState,
    variant: SolverVariant,
    settings: Optional[DdpSettings] = None,
    ladder: Optional[RegularizationLadder] = None,
    require_progress: bool = True,
) -> DdpResult:
    """Sweep and line-searched forward pass until the cost decrease falls to eps_ddp.

    A line search whose best trial stays within eps_ddp above J ends the
    solve at a fixed point. When the regularization ladder runs out, a solve
    with require_progress that never accepted a step raises
    ConvergenceFailure; any other solve returns its iterate with
    converged=False and leaves the decision to the caller.
    """
    settings = settings or DdpSettings()
    ladder = ladder or RegularizationLadder.from_settings(settings)
    stats = ApproxStats()
    trace: List[TraceRow] = []
    accepted_steps = 0

    def exhausted(iterations, error):
        if require_progress and accepted_steps == 0:
            raise ConvergenceFailure(f"no descent step found: {error}", trajectory=traj) from error
        logger.info("DDP stopped after %d iterations without a descent step: %s", iterations, error)
        return DdpResult(traj, iterations, False, stats, trace)

    for iteration in range(1, settings.max_iters + 1):
        try:
            law = backward_sweep(problem, traj, variant.sweep, ladder)
        except RegularizationExhausted as e:
            return exhausted(iteration - 1, e)

        candidate, best_trial_cost = None, math.inf
        for alpha in settings.alphas:
            result = forward_pass(problem, traj, law, alpha, duals, variant.dyn_approx, settings.eps_da)
            if result is None:
                continue
            trial, trial_stats = result
            if trial.cost < traj.cost:
                candidate = (alpha, trial, trial_stats)
                break
            best_trial_cost = min(best_trial_cost, trial.cost)
            logger.debug("iteration %d: alpha=%.3e rejected (J*=%.9e, J=%.9e)", iteration, alpha, trial.cost, traj.cost)

        if candidate is None:
            if best_trial_cost - traj.cost <= settings.eps_ddp:
                return DdpResult(traj, iteration, True, stats, trace)
            try:
                ladder.increase()
            except RegularizationExhausted as e:
                return exhausted(iteration, e)
            continue

        alpha, trial, trial_stats = candidate
        decrease = traj.cost - trial.cost
        traj = trial
        accepted_steps += 1
        ladder.accept(alpha)
        stats.merge(trial_stats)
        row = TraceRow("ddp", iteration, traj.cost, traj.g_max(problem), alpha, ladder.rho, trial_stats.share)
        trace.append(row)
        logger.debug(
            "iteration %d: J=%.9e g_max=%.3e alpha=%.3e reg=%.1e approx=%.2f",
            iteration, row.cost, row.g_max, alpha, row.reg, row.approx_share,
        )
        if decrease <= settings.eps_ddp:
            return DdpResult(traj, iteration, True, stats, trace)

    logger.warning("DDP stopped after max_iters=%d without meeting eps_ddp", settings.max_iters)
    return DdpResult(traj, settings.max_iters, False, stats, trace)
