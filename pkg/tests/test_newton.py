import math

import numpy as np
import pytest
from conftest import double_integrator_problem

from app.core.errors import PolishFailure
from app.core.ocp import ConstraintSet
from app.core.problem import OptimalControlProblem
from app.dynamics.models import ModelKind, ModelSpec, NormalizationUnits, Spacecraft, StageSpec
from app.dynamics.propagator import rollout
from app.newton import (
    NewtonSettings,
    apply_delta_transpose,
    assemble_sigma,
    build_active_set,
    convergence_rate,
    delta_matrix,
    expand_gamma,
    jacobian_blocks,
    merge_decision,
    newton_polish,
)


def _trajectory(problem, controls):
    controls = [np.asarray(u, dtype=float) for u in controls]
    return rollout(problem.model, problem.stage, problem.x0, controls), controls


@pytest.fixture
def saturated_stage():
    """One stage whose thrust overshoots the bound: |u|^2 - u_max^2 = 0.24."""
    problem = double_integrator_problem(horizon=1, dt=1.0, constraints=ConstraintSet(u_max=0.5))
    states, controls = _trajectory(problem, [[0.6, 0.3, 0.2]])
    return problem, states, controls


@pytest.fixture
def constrained_problem():
    constraints = ConstraintSet(u_max=0.5, terminal_indices=(0, 1, 2))
    problem = double_integrator_problem(horizon=3, dt=0.5, constraints=constraints)
    states, controls = _trajectory(problem, [[0.1, 0.2, 0.3], [0.4, 0.0, -0.2], [0.3, 0.3, 0.3]])
    # perturb interior states so the continuity rows carry residuals too
    states[1] = states[1] + 1e-3
    states[2] = states[2] - 2e-3
    return problem, states, controls


class TestActiveSet:
    def test_interior_stage_is_excluded_and_saturated_included(self):
        constraints = ConstraintSet(u_max=1.0, terminal_indices=(0, 1))
        states = [np.zeros(6)] * 3
        controls = [np.array([0.1, 0.0, 0.0]), np.array([0.6, 0.8, 0.0])]
        stack = build_active_set(constraints, states, controls, np.zeros(6), tol_active=1e-3)
        assert stack.path == ((), (0,))
        assert stack.terminal == (0, 1)
        assert stack.size == 0 + 6 + 1 + 6 + 2

    def test_infinite_tolerance_keeps_everything(self):
        constraints = ConstraintSet(u_max=1.0)
        states = [np.zeros(6)] * 3
        controls = [np.array([0.1, 0.0, 0.0]), np.zeros(3)]
        stack = build_active_set(constraints, states, controls, np.zeros(6), tol_active=math.inf)
        assert stack.path == ((0,), (0,))
        assert stack.terminal == ()


class TestNormalMatrix:
    def test_sigma_equals_delta_delta_transpose(self, constrained_problem):
        problem, states, controls = constrained_problem
        stack = build_active_set(problem.constraints, states, controls, problem.target, math.inf)
        blocks = jacobian_blocks(expand_gamma(problem, states, controls, stack))
        delta = delta_matrix(blocks)
        assert delta.shape == (stack.size, 3 * (3 + 6))
        np.testing.assert_allclose(assemble_sigma(blocks).to_dense(), delta @ delta.T, atol=1e-13)
        w = np.linspace(-1.0, 1.0, stack.size)
        np.testing.assert_allclose(apply_delta_transpose(blocks, w), delta.T @ w, atol=1e-13)

    def test_without_path_or_terminal_rows(self):
        problem = double_integrator_problem(horizon=2, dt=0.5)
        states, controls = _trajectory(problem, [[0.1, 0.0, 0.0], [0.0, 0.1, 0.0]])
        stack = build_active_set(problem.constraints, states, controls, problem.target, math.inf)
        sigma = assemble_sigma(jacobian_blocks(expand_gamma(problem, states, controls, stack)))
        assert sigma.sizes == [6, 6]
        # coupling of consecutive continuity rows is -A for the step matrix A
        step_matrix = np.block([[np.eye(3), 0.5 * np.eye(3)], [np.zeros((3, 3)), np.eye(3)]])
        np.testing.assert_allclose(sigma.lower[0], -step_matrix, atol=1e-15)


class TestGamma:
    def test_residual_holds_constraint_values_and_continuity_gaps(self, constrained_problem):
        problem, states, controls = constrained_problem
        stack = build_active_set(problem.constraints, states, controls, problem.target, math.inf)
        gamma = expand_gamma(problem, states, controls, stack)
        d = gamma.residual()
        assert d.size == stack.size
        assert d[0] == pytest.approx(0.14 - 0.25)
        np.testing.assert_allclose(d[1:7], np.full(6, 1e-3), atol=1e-15)
        np.testing.assert_allclose(gamma.evaluate(np.zeros(27)), d, atol=1e-15)

    def test_shift_recenters_on_the_step(self, constrained_problem):
        problem, states, controls = constrained_problem
        stack = build_active_set(problem.constraints, states, controls, problem.target, math.inf)
        gamma = expand_gamma(problem, states, controls, stack)
        step = np.linspace(-0.01, 0.02, 27)
        np.testing.assert_allclose(gamma.shift(step).residual(), gamma.evaluate(step), atol=1e-14)

    def test_decision_vector_layout(self, constrained_problem):
        _, states, controls = constrained_problem
        y = merge_decision(states, controls)
        assert y.size == 27
        np.testing.assert_array_equal(y[:3], controls[0])
        np.testing.assert_array_equal(y[3:9], states[1])


class TestPolish:
    def test_convergence_rate(self):
        assert convergence_rate(1e-4, 1e-2) == pytest.approx(2.0)
        assert convergence_rate(0.5, 1.5) == math.inf
        assert convergence_rate(0.0, 0.1) == math.inf

    def test_scalar_newton_converges_quadratically(self, saturated_stage):
        problem, states, controls = saturated_stage
        settings = NewtonSettings(tol_active=math.inf, eps_cv=1e9)
        result = newton_polish(problem, states, controls, settings)
        d = [0.24] + [step.d_max for step in result.trace]
        assert d[1] == pytest.approx(0.24 ** 2 / 1.96)
        for before, after in zip(d[:-1], d[1:]):
            assert after <= 2.0 * before ** 2
        assert all(step.alpha == 1.0 for step in result.trace)
        assert result.iterations == len(result.trace) <= 5
        assert np.linalg.norm(result.controls[0]) == pytest.approx(0.5, abs=1e-10)
        np.testing.assert_allclose(result.controls[0] / np.linalg.norm(result.controls[0]), controls[0] / np.linalg.norm(controls[0]))
        assert result.d_max <= settings.eps_n
        assert result.factorization is not None

    def test_feasible_input_returns_immediately(self):
        problem = double_integrator_problem(horizon=3, dt=0.5, constraints=ConstraintSet(u_max=0.5))
        states, controls = _trajectory(problem, [[0.1, 0.0, 0.0]] * 3)
        result = newton_polish(problem, states, controls, NewtonSettings(tol_active=0.1))
        assert result.iterations == 0
        assert result.trace == []
        np.testing.assert_array_equal(result.controls[0], controls[0])

    def test_singular_rows_trigger_a_tighter_active_set(self):
        problem = double_integrator_problem(horizon=2, dt=0.5, constraints=ConstraintSet(u_max=0.5))
        states, controls = _trajectory(problem, [np.zeros(3)] * 2)
        result = newton_polish(problem, states, controls)
        assert result.iterations == 0

    def test_continuity_and_terminal_gaps_are_closed(self):
        constraints = ConstraintSet(u_max=10.0, terminal_indices=(0, 1, 2))
        problem = double_integrator_problem(horizon=3, dt=0.5, constraints=constraints)
        states, controls = _trajectory(problem, [[0.1, 0.2, 0.3], [0.4, 0.0, -0.2], [0.3, 0.3, 0.3]])
        states[1] = states[1] + 1e-3
        result = newton_polish(problem, states, controls, NewtonSettings(tol_active=0.05))
        assert result.iterations >= 1
        propagated = rollout(problem.model, problem.stage, problem.x0, result.controls)
        np.testing.assert_allclose(propagated[-1][:3], problem.target[:3], atol=1e-9)
        assert result.d_max <= NewtonSettings().eps_n

    def test_step_budget_exhausted(self, saturated_stage):
        problem, states, controls = saturated_stage
        with pytest.raises(PolishFailure) as excinfo:
            newton_polish(problem, states, controls, NewtonSettings(tol_active=math.inf, max_iters=1))
        assert excinfo.value.d_max == pytest.approx(0.24 ** 2 / 1.96)
        assert len(excinfo.value.trajectory) == 2
        assert [step.iteration for step in excinfo.value.trace] == [1]


def _unit_two_body_problem(horizon, constraints):
    units = NormalizationUnits(lu=1.0, tu=1.0, mu_grav=1.0)
    spacecraft = Spacecraft(isp=2000.0, g0=9.81, m_dry=500.0, u_max=0.5, m0=1000.0)
    return OptimalControlProblem.create(
        model=ModelSpec.build(ModelKind.TWO_BODY, units, spacecraft),
        stage=StageSpec(dt=0.2, substeps=4),
        x0=[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0],
        target=[0.9, 0.4, 0.0, -0.4, 0.9, 0.0, 1.0],
        horizon=horizon,
        constraints=constraints,
    )


@pytest.mark.parametrize("kind", ["double_integrator", "two_body"])
def test_sigma_matches_dense_product_on_random_small_instances(kind):
    rng = np.random.default_rng(41)
    u_max = 0.05
    for horizon in range(1, 6):
        constraints = ConstraintSet(u_max=u_max, terminal_indices=(0, 1, 2))
        if kind == "double_integrator":
            problem = double_integrator_problem(horizon=horizon, dt=0.3, constraints=constraints)
        else:
            problem = _unit_two_body_problem(horizon, constraints)
        controls = []
        for k in range(horizon):
            direction = rng.normal(size=3)
            magnitude = u_max if k % 2 == 0 else 0.2 * u_max
            controls.append(magnitude * direction / np.linalg.norm(direction))
        states, controls = _trajectory(problem, controls)
        states = [states[0]] + [x + rng.normal(scale=1e-4, size=x.size) for x in states[1:]]
        stack = build_active_set(problem.constraints, states, controls, problem.target, tol_active=1e-3)
        assert stack.path[0] == (0,)
        if horizon > 1:
            assert stack.path[1] == ()
        blocks = jacobian_blocks(expand_gamma(problem, states, controls, stack))
        delta = delta_matrix(blocks)
        np.testing.assert_allclose(assemble_sigma(blocks).to_dense(), delta @ delta.T, rtol=0.0, atol=1e-12)
