import math

import numpy as np
import pytest

from app.core.ocp import (
    ENERGY_SCHEDULE,
    FUEL_SCHEDULE,
    ConstraintSet,
    CostSpec,
    DualPenaltyState,
    HomotopySchedule,
    augment,
    eval_constraints,
    homotopy_advance,
    max_violation,
    penalty,
    pseudo_huber,
    stage_cost,
    terminal_cost,
    update_duals,
)
from app.da import extract_derivatives, get_context, variable


class TestStageCost:
    @pytest.mark.parametrize("eta, sigma", [(1.0, 1e-2), (0.5, 1e-2), (0.0, 1.0)])
    def test_zero_control_is_free(self, eta, sigma):
        assert stage_cost(CostSpec(eta=eta, sigma=sigma), [], [0.0, 0.0, 0.0]) == 0.0

    def test_pure_pseudo_huber(self):
        u = [1.0, 1.0, 1.0]
        assert stage_cost(CostSpec(eta=0.0, sigma=1.0), [], u) == pytest.approx(1.0)

    def test_pure_energy(self):
        assert stage_cost(CostSpec(eta=1.0), [], [0.1, 0.0, 0.0]) == pytest.approx(0.005)

    def test_blend(self):
        u = [0.3, 0.4, 0.0]
        spec = CostSpec(eta=0.5, sigma=0.1)
        expected = 0.5 * 0.125 + 0.5 * 0.1 * (math.sqrt(0.25 / 0.01 + 1.0) - 1.0)
        assert stage_cost(spec, [], u) == pytest.approx(expected)

    def test_pseudo_huber_approaches_the_norm(self):
        assert pseudo_huber([3.0, 4.0, 0.0], 1e-6) == pytest.approx(5.0, rel=1e-6)

    def test_pseudo_huber_expansion_is_smooth_at_zero(self):
        ctx = get_context(3, 2)
        u = [variable(ctx, i) for i in range(3)]
        d = extract_derivatives(pseudo_huber(u, 0.01), 0)
        np.testing.assert_allclose(d.grad_u, np.zeros(3))
        np.testing.assert_allclose(d.hess_uu, np.eye(3) / 0.01)


class TestTerminalCost:
    def test_zero_residual(self):
        target = np.array([1.0, 2.0, 3.0])
        assert terminal_cost(target, target) == 0.0

    def test_unit_offset(self):
        assert terminal_cost([1.0, 0.0, 0.0], [0.0, 0.0, 0.0]) == pytest.approx(1.0)

    def test_matches_weighted_quadratic(self):
        rng = np.random.default_rng(3)
        x, target, weights = rng.normal(size=7), rng.normal(size=7), rng.uniform(size=5)
        indices = (0, 1, 2, 3, 4)
        residual = x[:5] - target[:5]
        expected = float(np.sum(weights * residual ** 2))
        assert terminal_cost(x, target, indices, weights) == pytest.approx(expected, rel=1e-14)


class TestConstraints:
    def test_feasible_trajectory(self):
        constraints = ConstraintSet(u_max=1.0, m_dry=0.5, mass_index=6)
        states = [np.array([0, 0, 0, 0, 0, 0, 1.0])] * 3
        controls = [np.array([0.1, 0.0, 0.0])] * 2
        values = eval_constraints(constraints, states, controls, np.zeros(7))
        assert values.g_max == 0.0
        assert len(values.values) == 3
        assert values.values[-1].size == 0

    def test_thrust_on_the_boundary(self):
        constraints = ConstraintSet(u_max=0.5)
        assert constraints.path([], [0.3, 0.4, 0.0]) == [pytest.approx(0.0, abs=1e-16)]

    def test_two_stage_hand_computation(self):
        constraints = ConstraintSet(u_max=1.0, m_dry=0.5, mass_index=6, terminal_indices=(0, 1))
        states = [
            np.array([0, 0, 0, 0, 0, 0, 1.0]),
            np.array([0, 0, 0, 0, 0, 0, 0.7]),
            np.array([0.9, -0.05, 0, 0, 0, 0, 0.4]),
        ]
        controls = [np.array([1.2, 0.0, 0.0]), np.array([0.0, 0.5, 0.0])]
        values = eval_constraints(constraints, states, controls, np.array([1.0, 0, 0, 0, 0, 0, 0]))
        np.testing.assert_allclose(values.values[0], [0.44, -0.5])
        np.testing.assert_allclose(values.values[1], [-0.75, -0.2])
        np.testing.assert_allclose(values.values[2], [-0.1, -0.05])
        assert values.g_max == pytest.approx(0.44)

    def test_equalities_count_both_signs(self):
        assert max_violation([-0.3, 0.1], np.array([True, False])) == pytest.approx(0.3)
        assert max_violation([], np.array([], dtype=bool)) == 0.0

    def test_for_model_normalizes_bounds(self, two_body_model, spacecraft):
        constraints = ConstraintSet.for_model(two_body_model, spacecraft)
        units = two_body_model.units
        assert constraints.u_max == pytest.approx(0.5 / units.thrust_unit)
        assert constraints.m_dry == pytest.approx(0.5)
        assert constraints.terminal_indices == (0, 1, 2, 3, 4, 5)
        assert (constraints.n_ineq, constraints.n_teq) == (2, 6)

    def test_for_model_without_path_constraints(self, two_body_model, spacecraft):
        constraints = ConstraintSet.for_model(two_body_model, spacecraft, path_constraints=False)
        assert constraints.n_ineq == 0


class TestAugmentedLagrangian:
    def test_no_multipliers_leave_cost_unchanged(self):
        spec = CostSpec()
        constraints = ConstraintSet(u_max=1.0)
        duals = DualPenaltyState.initial(constraints, horizon=1, mu0=0.0)
        u = [2.0, 0.0, 0.0]
        assert augment(spec, constraints, duals, 0, [], u) == pytest.approx(stage_cost(spec, [], u))

    def test_equality_penalty(self):
        assert penalty([0.5], np.array([1.0]), np.array([10.0]), np.array([True])) == pytest.approx(1.75)

    def test_satisfied_inequality_adds_nothing(self):
        assert penalty([-0.1], np.array([0.0]), np.array([10.0]), np.array([False])) == 0.0

    def test_violated_inequality_is_penalized(self):
        assert penalty([0.2], np.array([0.0]), np.array([10.0]), np.array([False])) == pytest.approx(0.2)

    def test_terminal_stage_uses_terminal_block(self):
        spec = CostSpec(terminal_weights=(1.0, 1.0))
        constraints = ConstraintSet(terminal_indices=(0, 1))
        duals = DualPenaltyState.initial(constraints, horizon=2)
        x = [1.5, 0.0]
        cost = augment(spec, constraints, duals, 2, x, target=[1.0, 0.0], indices=(0, 1))
        assert cost == pytest.approx(0.25 + 0.5 * 10.0 * 0.25)

    def test_dual_update(self):
        constraints = ConstraintSet(u_max=1.0, terminal_indices=(0,))
        duals = DualPenaltyState(
            lambdas=[np.array([0.0]), np.array([2.0])],
            mus=[np.array([10.0]), np.array([10.0])],
        )
        updated = update_duals(constraints, [np.array([-1.0]), np.array([0.1])], duals)
        assert updated.lambdas[0].tolist() == [0.0]
        assert updated.lambdas[1][0] == pytest.approx(3.0)
        assert updated.mus[0].tolist() == [100.0]

    def test_penalty_growth_is_capped(self):
        constraints = ConstraintSet(u_max=1.0)
        duals = DualPenaltyState(lambdas=[np.zeros(1), np.zeros(0)], mus=[np.array([1e7]), np.zeros(0)])
        updated = update_duals(constraints, [np.zeros(1), np.zeros(0)], duals, beta=10.0, mu_max=1e8)
        assert updated.mus[0].tolist() == [1e8]

    def test_initial_sizes(self):
        constraints = ConstraintSet(u_max=1.0, m_dry=0.1, mass_index=6, terminal_indices=(0, 1, 2))
        duals = DualPenaltyState.initial(constraints, horizon=4)
        assert duals.horizon == 4
        assert [lam.size for lam in duals.lambdas] == [2, 2, 2, 2, 3]
        assert all((mu == 10.0).all() for mu in duals.mus)


class TestHomotopy:
    def test_fuel_schedule_advances(self):
        assert homotopy_advance(FUEL_SCHEDULE, 0) == (0.5, 1e-2)
        assert homotopy_advance(FUEL_SCHEDULE, 2) == (1e-3, 1e-3)

    def test_last_index_is_exhausted(self):
        assert homotopy_advance(FUEL_SCHEDULE, len(FUEL_SCHEDULE) - 1) is None
        assert homotopy_advance(ENERGY_SCHEDULE, 0) is None

    def test_index_outside_schedule(self):
        with pytest.raises(ValueError):
            homotopy_advance(ENERGY_SCHEDULE, 1)

    @pytest.mark.parametrize(
        "stages",
        [
            ((1.0, 1e-2), (0.5, 1e-2), (0.7, 1e-3)),
            ((1.0, 1e-3), (0.5, 1e-2)),
            ((0.5, 1e-2),),
            (),
        ],
    )
    def test_invalid_schedules(self, stages):
        with pytest.raises(ValueError):
            HomotopySchedule(stages=stages)
