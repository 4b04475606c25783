import dataclasses
import math

import numpy as np
import pytest
from conftest import double_integrator_problem, zero_duals

from app.bench.scenario import load_scenario
from app.core.ddp import (
    VARIANT_NAMES,
    ControlLaw,
    DdpSettings,
    RegularizationLadder,
    SolverVariant,
    SweepKind,
    backward_sweep,
    backward_sweep_q,
    ddp_solve,
    forward_pass,
    regularize,
    rollout_initial,
)
from app.core.errors import ConvergenceFailure, RegularizationExhausted
from app.core.ocp import ConstraintSet, CostSpec
from app.core.problem import OptimalControlProblem
from app.dynamics.models import ModelKind, ModelSpec, NormalizationUnits, StageSpec


def _lqr_matrices(dt):
    eye, zero = np.eye(3), np.zeros((3, 3))
    a = np.block([[eye, dt * eye], [zero, eye]])
    b = np.vstack([0.5 * dt ** 2 * eye, dt * eye])
    return a, b


def _riccati_feedback(problem):
    a, b = _lqr_matrices(problem.stage.dt)
    p = 2.0 * np.diag(problem.cost.terminal_weights)
    gains = []
    for _ in range(problem.horizon):
        k = -np.linalg.solve(np.eye(3) + b.T @ p @ b, b.T @ p @ a)
        p = a.T @ p @ a + a.T @ p @ b @ k
        gains.append(k)
    return gains[::-1]


def _least_squares_controls(problem):
    a, b = _lqr_matrices(problem.stage.dt)
    n = problem.horizon
    w = np.diag(problem.cost.terminal_weights)
    g = np.hstack([np.linalg.matrix_power(a, n - 1 - k) @ b for k in range(n)])
    c = np.linalg.matrix_power(a, n) @ problem.x0 - problem.target
    u = -np.linalg.solve(np.eye(3 * n) + 2.0 * g.T @ w @ g, 2.0 * g.T @ w @ c)
    return u.reshape(n, 3)


def _initial(problem, controls=None):
    controls = controls if controls is not None else [np.zeros(3)] * problem.horizon
    return rollout_initial(problem, controls, zero_duals(problem))


def _ladder():
    return RegularizationLadder()


class TestRegularization:
    def test_positive_definite_matrix_is_unchanged(self):
        ladder = _ladder()
        shifted, _ = regularize(np.eye(2), ladder)
        np.testing.assert_array_equal(shifted, np.eye(2))
        assert ladder.rho == 0.0

    def test_indefinite_matrix_climbs_to_first_working_shift(self):
        ladder = _ladder()
        shifted, _ = regularize(np.diag([1.0, -0.5]), ladder)
        assert ladder.rho == pytest.approx(1.0)
        assert np.linalg.eigvalsh(shifted).min() == pytest.approx(0.5)

    def test_ladder_is_exhausted_after_the_expected_number_of_steps(self):
        ladder = RegularizationLadder(reg0=1e-6, reg_max=1e8, scale=10.0)
        ladder.increase()
        for _ in range(14):
            ladder.increase()
        assert ladder.rho == pytest.approx(1e8)
        with pytest.raises(RegularizationExhausted):
            ladder.increase()

    def test_full_steps_decrease_the_shift(self):
        ladder = RegularizationLadder(rho=1e-3)
        ladder.accept(1.0)
        assert ladder.rho == 1e-3
        ladder.accept(1.0)
        assert ladder.rho == pytest.approx(1e-4)
        ladder.accept(1.0)
        ladder.accept(0.5)
        ladder.accept(1.0)
        assert ladder.rho == pytest.approx(1e-4)

    def test_small_shift_drops_to_zero(self):
        ladder = RegularizationLadder(rho=1e-8, reg_min=1e-8)
        ladder.accept(1.0)
        ladder.accept(1.0)
        assert ladder.rho == 0.0


class TestVariants:
    @pytest.mark.parametrize(
        "name, sweep, dyn",
        [("iLQR", SweepKind.ILQR, False), ("DDPDyn", SweepKind.DDP, True), ("QDyn", SweepKind.Q, True)],
    )
    def test_parse(self, name, sweep, dyn):
        variant = SolverVariant.parse(name)
        assert variant == SolverVariant(sweep, dyn)
        assert str(variant) == name

    def test_unknown_variant(self):
        with pytest.raises(ValueError):
            SolverVariant.parse("Newton")

    def test_six_variants(self):
        assert set(VARIANT_NAMES) == {"iLQR", "DDP", "Q", "iLQRDyn", "DDPDyn", "QDyn"}

    def test_settings_reject_bad_alphas(self):
        with pytest.raises(ValueError):
            DdpSettings(alphas=(1.0, 1.5))
        with pytest.raises(ValueError):
            DdpSettings(reg0=1.0, reg_max=1e-3)


class TestBackwardSweep:
    def test_feedback_matches_riccati(self, lqr_problem):
        traj = _initial(lqr_problem)
        law = backward_sweep(lqr_problem, traj, SweepKind.ILQR, _ladder())
        for b, k in zip(law.feedback, _riccati_feedback(lqr_problem)):
            np.testing.assert_allclose(b, k, atol=1e-10)

    def test_ilqr_and_ddp_agree_on_linear_dynamics(self, lqr_problem):
        traj = _initial(lqr_problem)
        ilqr = backward_sweep(lqr_problem, traj, SweepKind.ILQR, _ladder())
        ddp = backward_sweep(lqr_problem, traj, SweepKind.DDP, _ladder())
        for k in range(lqr_problem.horizon):
            np.testing.assert_allclose(ilqr.feedforward[k], ddp.feedforward[k], atol=1e-14)
            np.testing.assert_allclose(ilqr.feedback[k], ddp.feedback[k], atol=1e-14)

    def test_q_sweep_matches_riccati(self, lqr_problem):
        traj = _initial(lqr_problem)
        q = backward_sweep_q(lqr_problem, traj, _ladder())
        ddp = backward_sweep(lqr_problem, traj, SweepKind.DDP, _ladder())
        for k, riccati in enumerate(_riccati_feedback(lqr_problem)):
            np.testing.assert_allclose(q.feedback[k], riccati, atol=1e-9)
            np.testing.assert_allclose(q.feedforward[k], ddp.feedforward[k], atol=1e-9)

    def test_q_sweep_matches_ddp_on_one_nonlinear_stage(self, spacecraft):
        units = NormalizationUnits(lu=1.0, tu=1.0, mu_grav=1.0)
        model = ModelSpec.build(ModelKind.TWO_BODY, units, spacecraft)
        problem = OptimalControlProblem.create(
            model=model,
            stage=StageSpec(dt=0.5, substeps=10),
            x0=[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0],
            target=[0.8, 0.6, 0.1, -0.5, 0.9, 0.0, 1.0],
            horizon=1,
            constraints=ConstraintSet(),
            cost=CostSpec(),
        )
        traj = _initial(problem, [np.array([0.01, 0.02, 0.0])])
        q = backward_sweep_q(problem, traj, _ladder())
        ddp = backward_sweep(problem, traj, SweepKind.DDP, _ladder())
        np.testing.assert_allclose(q.feedforward[0], ddp.feedforward[0], rtol=1e-8, atol=1e-12)
        np.testing.assert_allclose(q.feedback[0], ddp.feedback[0], rtol=1e-8, atol=1e-12)


class TestForwardPass:
    def test_zero_law_keeps_the_trajectory(self, lqr_problem):
        controls = [np.full(3, 0.1 * k) for k in range(lqr_problem.horizon)]
        traj = _initial(lqr_problem, controls)
        law = ControlLaw.zeros(lqr_problem.horizon, lqr_problem.nx, lqr_problem.nu)
        trial, stats = forward_pass(lqr_problem, traj, law, 1.0, zero_duals(lqr_problem))
        for x_new, x_old in zip(trial.states, traj.states):
            np.testing.assert_array_equal(x_new, x_old)
        assert trial.cost == traj.cost
        assert stats.recomputed == lqr_problem.horizon

    def test_zero_tolerance_recomputes_every_stage(self, lqr_problem):
        traj = _initial(lqr_problem)
        law = backward_sweep(lqr_problem, traj, SweepKind.ILQR, _ladder())
        duals = zero_duals(lqr_problem)
        exact, _ = forward_pass(lqr_problem, traj, law, 0.5, duals)
        approx, stats = forward_pass(lqr_problem, traj, law, 0.5, duals, dyn_approx=True, eps_da=0.0)
        assert (stats.approximated, stats.recomputed) == (0, lqr_problem.horizon)
        for a, b in zip(approx.states, exact.states):
            np.testing.assert_array_equal(a, b)
        assert approx.cost == exact.cost

    def test_composed_maps_are_exact_for_linear_dynamics(self, lqr_problem):
        traj = _initial(lqr_problem)
        law = backward_sweep(lqr_problem, traj, SweepKind.ILQR, _ladder())
        duals = zero_duals(lqr_problem)
        exact, _ = forward_pass(lqr_problem, traj, law, 1.0, duals)
        approx, stats = forward_pass(lqr_problem, traj, law, 1.0, duals, dyn_approx=True, eps_da=1e-6)
        assert stats.approximated == lqr_problem.horizon
        assert stats.share == 1.0
        for a, b in zip(approx.states, exact.states):
            np.testing.assert_allclose(a, b, atol=1e-12)

    def test_composed_maps_track_the_exact_rollout_inside_their_radius(self, earth_mars_path):
        problem = dataclasses.replace(load_scenario(earth_mars_path).problem(), horizon=3)
        traj = _initial(problem, [np.array([0.03, -0.02, 0.01])] * problem.horizon)
        eps_da = 1e-6
        radius = min(traj.radius(k, eps_da) for k in range(problem.horizon))
        step = np.array([1.0, 1.0, -1.0]) / math.sqrt(3.0) * 1e-3 * radius
        law = ControlLaw([step] * problem.horizon, [np.zeros((problem.nu, problem.nx))] * problem.horizon)
        duals = zero_duals(problem)
        exact, _ = forward_pass(problem, traj, law, 1.0, duals)
        approx, stats = forward_pass(problem, traj, law, 1.0, duals, dyn_approx=True, eps_da=eps_da)
        assert stats.approximated == problem.horizon
        for a, b in zip(approx.states, exact.states):
            np.testing.assert_allclose(a, b, rtol=0.0, atol=1e-5)


class TestDdpSolve:
    def test_lqr_converges_to_the_least_squares_optimum(self, lqr_problem):
        result = ddp_solve(lqr_problem, _initial(lqr_problem), zero_duals(lqr_problem), SolverVariant.parse("iLQR"))
        assert result.converged
        assert result.iterations == 2
        assert result.trace[0].alpha == 1.0
        np.testing.assert_allclose(np.array(result.trajectory.controls), _least_squares_controls(lqr_problem), atol=1e-9)

    @pytest.mark.parametrize("name", ["DDP", "Q", "iLQRDyn", "DDPDyn", "QDyn"])
    def test_every_variant_reaches_the_same_optimum(self, lqr_problem, name):
        result = ddp_solve(lqr_problem, _initial(lqr_problem), zero_duals(lqr_problem), SolverVariant.parse(name))
        assert result.converged
        np.testing.assert_allclose(np.array(result.trajectory.controls), _least_squares_controls(lqr_problem), atol=1e-8)

    def test_cost_decreases_monotonically(self, lqr_problem):
        traj = _initial(lqr_problem)
        result = ddp_solve(lqr_problem, traj, zero_duals(lqr_problem), SolverVariant.parse("DDP"))
        costs = [traj.cost] + [row.cost for row in result.trace]
        assert all(later < earlier for earlier, later in zip(costs, costs[1:]))

    def test_optimal_iterate_is_a_fixed_point(self, lqr_problem):
        optimum = _initial(lqr_problem, list(_least_squares_controls(lqr_problem)))
        settings = DdpSettings()
        ladder = RegularizationLadder.from_settings(settings)
        result = ddp_solve(lqr_problem, optimum, zero_duals(lqr_problem), SolverVariant.parse("iLQR"), settings, ladder)
        assert result.converged
        assert result.iterations == 1
        assert ladder.rho == 0.0
        assert abs(result.trajectory.cost - optimum.cost) <= settings.eps_ddp

    def test_exhausted_ladder_without_progress_is_a_failure(self):
        problem = double_integrator_problem(horizon=1, dt=1.0, terminal_weights=(-10.0, -10.0, -10.0, 0.0, 0.0, 0.0))
        traj = _initial(problem)
        settings = DdpSettings(reg0=1e-6, reg_max=1e-6)
        with pytest.raises(ConvergenceFailure) as excinfo:
            ddp_solve(problem, traj, zero_duals(problem), SolverVariant.parse("iLQR"), settings)
        assert excinfo.value.trajectory is traj

    def test_exhausted_ladder_on_a_later_solve_returns_the_iterate(self):
        problem = double_integrator_problem(horizon=1, dt=1.0, terminal_weights=(-10.0, -10.0, -10.0, 0.0, 0.0, 0.0))
        traj = _initial(problem)
        settings = DdpSettings(reg0=1e-6, reg_max=1e-6)
        result = ddp_solve(
            problem, traj, zero_duals(problem), SolverVariant.parse("iLQR"), settings, require_progress=False
        )
        assert not result.converged
        assert result.trajectory is traj
        assert result.trace == []

    def test_solve_near_the_optimum_stops_without_regularizing(self, lqr_problem):
        optimum = _least_squares_controls(lqr_problem)
        nudged = _initial(lqr_problem, list(optimum + 1e-9))
        settings = DdpSettings(alphas=(1.0,))
        ladder = RegularizationLadder.from_settings(settings)
        result = ddp_solve(lqr_problem, nudged, zero_duals(lqr_problem), SolverVariant.parse("DDP"), settings, ladder)
        assert result.converged
        assert ladder.rho == 0.0
        assert result.trajectory.cost <= nudged.cost

    def test_rollout_needs_one_control_per_stage(self, lqr_problem):
        with pytest.raises(ValueError):
            _initial(lqr_problem, [np.zeros(3)])
