"""Scenario runs: AUL solve, Newton polish, verification and reporting."""

import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Literal, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, Field

from app.bench import artifacts
from app.bench.scenario import ScenarioConfig, load_scenario
from app.core.aul import aul_solve
from app.core.ddp import SolverVariant, TraceRow
from app.core.errors import (
    ConvergenceFailure,
    DaDomainError,
    DynamicsDomainError,
    PolishFailure,
)
from app.core.ocp import CostSpec, eval_constraints, stage_cost, terminal_cost
from app.core.problem import OptimalControlProblem
from app.dynamics.propagator import rollout
from app.newton.polish import NewtonStep, newton_polish

logger = logging.getLogger(__name__)

Outcome = Literal["Converged", "DNC"]


class RunReport(BaseModel):
    """Metrics of one scenario run (report.txt, the registry and the HTTP API all carry these)."""

    scenario: str
    variant: str
    order: int
    outcome: Outcome
    reason: str = ""
    fuel_kg: Optional[float] = Field(default=None, description="m0 - m_N of the verification propagation")
    cost: float = Field(description="Un-augmented objective of the final homotopy pair")
    g_max: float
    n_ddp: int = 0
    n_aul: int = 0
    n_newton: int = 0
    approx_share: float = 0.0
    wall_time_s: float = 0.0
    eps_aul: float
    eps_da: float
    eps_n: float
    block_flop_ratio: Optional[float] = None

    @property
    def converged(self) -> bool:
        return self.outcome == "Converged"


@dataclass
class RunResult:
    report: RunReport
    states: List[np.ndarray]
    controls: List[np.ndarray]
    ddp_trace: List[TraceRow] = field(default_factory=list)
    newton_trace: List[NewtonStep] = field(default_factory=list)
    out_dir: Optional[Path] = None


def objective(problem: OptimalControlProblem, spec: CostSpec, states, controls) -> float:
    total = math.fsum(stage_cost(spec, x, u) for x, u in zip(states[:-1], controls))
    return total + terminal_cost(states[-1], problem.target, problem.model.terminal_indices, spec.terminal_weights)


def fuel_mass(problem: OptimalControlProblem, states: Sequence[np.ndarray]) -> Optional[float]:
    if problem.spacecraft is None or problem.model.mass_index is None:
        return None
    i = problem.model.mass_index
    return (states[0][i] - states[-1][i]) * problem.model.units.mass_unit


def run_scenario(config: ScenarioConfig, out_dir: Union[str, Path, None] = None) -> RunResult:
    """
    Rollout, AUL solve, Newton polish, independent verification propagation.

    Solver failures never escape: they become outcome "DNC" with the reason
    and the best iterate available.

    Args:
        config: Validated scenario
        out_dir: When given, artifacts are written there

    Returns:
        RunResult with the report, the verified trajectory and the traces
    """
    problem = config.problem()
    variant = config.variant
    eps_n = config.solver.eps_n
    final_eta, final_sigma = config.schedule.stages[-1]
    spec = CostSpec(eta=final_eta, sigma=final_sigma, terminal_weights=problem.cost.terminal_weights)
    logger.info("running %s with %s (order %d)", config.name, variant.name, config.solver.order)

    started = time.perf_counter()
    controls = config.initial_controls()
    counts = dict(n_ddp=0, n_aul=0, n_newton=0, approx_share=0.0)
    ddp_trace: List[TraceRow] = []
    newton_trace: List[NewtonStep] = []
    block_ratio = None
    reason = ""
    try:
        aul = aul_solve(
            problem, controls, variant, config.ddp_settings(), config.aul_settings(), config.schedule
        )
        controls = aul.trajectory.controls
        ddp_trace = aul.trace
        counts.update(n_ddp=aul.n_ddp, n_aul=aul.n_aul, approx_share=aul.stats.share)
        if config.solver.newton and aul.g_max > eps_n:
            logger.info("Newton polish from g_max=%.3e", aul.g_max)
            polished = newton_polish(problem, aul.trajectory.states, controls, config.newton_settings())
            controls = polished.controls
            newton_trace = polished.trace
            counts["n_newton"] = polished.iterations
            if polished.factorization is not None:
                block_ratio = polished.factorization.ratio
    except ConvergenceFailure as e:
        reason = str(e)
        controls = _best_controls(e, controls)
        if e.partial is not None:
            ddp_trace = e.partial.trace
            counts.update(n_ddp=e.partial.n_ddp, n_aul=e.partial.n_aul, approx_share=e.partial.stats.share)
    except PolishFailure as e:
        reason = str(e)
        controls = _best_controls(e, controls)
        newton_trace = e.trace
        counts["n_newton"] = len(e.trace)
    except (DynamicsDomainError, DaDomainError) as e:
        reason = f"dynamics failure: {e}"

    wall_time = time.perf_counter() - started
    try:
        states = rollout(problem.model, problem.stage, problem.x0, controls)
        g_max = eval_constraints(problem.constraints, states, controls, problem.target).g_max
    except DynamicsDomainError as e:
        states, g_max = [problem.x0], math.inf
        reason = reason or f"verification propagation failed: {e}"
    if not reason and g_max > eps_n:
        reason = f"verified g_max={g_max:.3e} above eps_n={eps_n:.1e}"
    outcome: Outcome = "DNC" if reason else "Converged"
    if reason:
        logger.warning("%s: DNC (%s)", config.name, reason)

    converged_states = len(states) == problem.horizon + 1
    report = RunReport(
        scenario=config.name,
        variant=variant.name,
        order=config.solver.order,
        outcome=outcome,
        reason=reason,
        fuel_kg=fuel_mass(problem, states) if converged_states else None,
        cost=objective(problem, spec, states, controls) if converged_states else math.inf,
        g_max=g_max,
        wall_time_s=wall_time,
        eps_aul=config.solver.eps_aul,
        eps_da=config.eps_da,
        eps_n=eps_n,
        block_flop_ratio=block_ratio,
        **counts,
    )
    logger.info(
        "%s %s: %s J=%.6g fuel=%s g_max=%.3e in %.2fs",
        config.name, variant.name, outcome, report.cost, report.fuel_kg, g_max, wall_time,
    )
    result = RunResult(report, states, list(controls), ddp_trace, newton_trace)
    if out_dir is not None:
        result.out_dir = emit_artifacts(config, problem, result, out_dir)
    return result


def _best_controls(error, fallback):
    trajectory = getattr(error, "trajectory", None)
    if trajectory is None:
        return fallback
    if isinstance(trajectory, tuple):
        return trajectory[1]
    return trajectory.controls


def emit_artifacts(config: ScenarioConfig, problem: OptimalControlProblem, result: RunResult, out_dir) -> Path:
    """Write trajectory.csv, convergence.csv, report.txt and scenario.scn into out_dir."""
    out_dir = artifacts.prepare_dir(out_dir)
    units = problem.model.units
    if len(result.states) == len(result.controls) + 1:
        artifacts.write_trajectory(
            out_dir / artifacts.TRAJECTORY_FILE,
            result.states,
            result.controls,
            dt_days=problem.stage.dt / units.day,
            thrust_unit=units.thrust_unit if problem.model.has_mass else 1.0,
            mass_unit=units.mass_unit,
            mass_index=problem.model.mass_index,
        )
    rows = [
        (row.section, row.iteration, row.cost, row.g_max, row.alpha, row.reg, row.approx_share)
        for row in result.ddp_trace
    ]
    rows += [("newton", step.iteration, None, step.d_max, step.alpha, None, None) for step in result.newton_trace]
    artifacts.write_csv(out_dir / artifacts.CONVERGENCE_FILE, artifacts.CONVERGENCE_COLUMNS, rows)
    artifacts.write_report(out_dir / artifacts.REPORT_FILE, result.report.model_dump())
    artifacts.copy_scenario(config.source, out_dir)
    logger.info("artifacts written to %s", out_dir)
    return out_dir


# Batch runs

COMPARE_COLUMNS = ("variant", "outcome", "J", "J_normalized", "fuel_kg", "wall_time_s", "time_normalized")
SWEEP_COLUMNS = (
    "parameter", "value", "outcome", "J_kg", "g_max", "n_ddp", "n_aul", "n_newton", "approx_share", "wall_time_s",
)


def compare_variants(
    config: ScenarioConfig,
    variants: Sequence[Union[str, SolverVariant]],
    out_dir: Union[str, Path, None] = None,
) -> List[Dict[str, object]]:
    """Run each variant on one scenario; J and wall time normalized by the first converged variant."""
    if not variants:
        raise ValueError("compare needs at least one variant")
    results = []
    for variant in variants:
        name = variant.name if isinstance(variant, SolverVariant) else SolverVariant.parse(variant).name
        sub_dir = Path(out_dir) / name if out_dir is not None else None
        results.append(run_scenario(config.with_overrides(variant=name), sub_dir).report)
    reference = next((r for r in results if r.converged), None)
    rows = []
    for report in results:
        normalized = reference is not None and report.converged
        rows.append({
            "variant": report.variant,
            "outcome": report.outcome,
            "J": report.cost if report.converged else None,
            "J_normalized": report.cost / reference.cost if normalized and reference.cost else None,
            "fuel_kg": report.fuel_kg if report.converged else None,
            "wall_time_s": report.wall_time_s,
            "time_normalized": report.wall_time_s / reference.wall_time_s if normalized and reference.wall_time_s else None,
        })
    if out_dir is not None:
        path = artifacts.prepare_dir(out_dir) / artifacts.COMPARE_FILE
        artifacts.write_csv(path, COMPARE_COLUMNS, [[row[c] for c in COMPARE_COLUMNS] for row in rows])
    return rows


def sweep(
    config: ScenarioConfig,
    eps_values: Optional[Sequence[float]] = None,
    orders: Optional[Sequence[int]] = None,
    out_dir: Union[str, Path, None] = None,
) -> List[Dict[str, object]]:
    """One run per eps_aul value (eps_da following it) or per expansion order."""
    if (eps_values is None) == (orders is None):
        raise ValueError("sweep needs exactly one of eps_values and orders")
    parameter = "eps_aul" if eps_values is not None else "order"
    values = list(eps_values if eps_values is not None else orders)
    rows = []
    for value in values:
        sub_dir = Path(out_dir) / f"{parameter}_{value}" if out_dir is not None else None
        report = run_scenario(config.with_overrides(**{parameter: value}), sub_dir).report
        rows.append({
            "parameter": parameter,
            "value": value,
            "outcome": report.outcome,
            "J_kg": report.fuel_kg if report.fuel_kg is not None else report.cost,
            "g_max": report.g_max,
            "n_ddp": report.n_ddp,
            "n_aul": report.n_aul,
            "n_newton": report.n_newton,
            "approx_share": report.approx_share,
            "wall_time_s": report.wall_time_s,
        })
    if out_dir is not None:
        path = artifacts.prepare_dir(out_dir) / artifacts.SWEEP_FILE
        artifacts.write_csv(path, SWEEP_COLUMNS, [[row[c] for c in SWEEP_COLUMNS] for row in rows])
    return rows


class VerificationResult(BaseModel):
    ok: bool
    terminal_drift: float
    g_max: float
    fuel_kg: Optional[float] = None
    fuel_mismatch_kg: Optional[float] = None
    tolerance: float


def verify_run(report_dir: Union[str, Path]) -> VerificationResult:
    """
    Re-propagate the controls stored in a run directory from x0.

    The run passes when the re-propagated final state matches the stored one
    within 10*eps_n, the constraint violation stays within eps_n, and the
    stored fuel mass agrees with the propagation.
    """
    report_dir = Path(report_dir)
    config = load_scenario(report_dir / artifacts.SCENARIO_FILE)
    fields = artifacts.read_report(report_dir / artifacts.REPORT_FILE)
    config = config.with_overrides(
        variant=fields.get("variant"),
        order=int(fields["order"]) if fields.get("order") else None,
        eps_aul=float(fields["eps_aul"]) if fields.get("eps_aul") else None,
        eps_da=float(fields["eps_da"]) if fields.get("eps_da") else None,
        eps_n=float(fields["eps_n"]) if fields.get("eps_n") else None,
    )
    problem = config.problem()
    stored_states, controls = artifacts.read_trajectory(report_dir / artifacts.TRAJECTORY_FILE)
    states = rollout(problem.model, problem.stage, problem.x0, controls)
    drift = float(np.max(np.abs(states[-1] - stored_states[-1])))
    g_max = eval_constraints(problem.constraints, states, controls, problem.target).g_max
    tolerance = 10.0 * config.solver.eps_n
    fuel = fuel_mass(problem, states)
    mismatch = None
    if fuel is not None and fields.get("fuel_kg"):
        mismatch = abs(fuel - float(fields["fuel_kg"]))
    ok = drift <= tolerance and g_max <= config.solver.eps_n and (mismatch is None or mismatch <= 1e-9)
    return VerificationResult(
        ok=ok, terminal_drift=drift, g_max=g_max, fuel_kg=fuel, fuel_mismatch_kg=mismatch, tolerance=tolerance
    )
