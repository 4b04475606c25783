import numpy as np
import pytest

from app.bench.scenario import coerce_value, list_scenarios, load_scenario, parse_scenario, parse_sections
from app.core.errors import ScenarioError
from app.dynamics.models import ModelKind

MINIMAL = """
[scenario]
name = tiny

[model]
kind = TwoBodyCartesian
lu = 149597870.7
tu = 5022642.891
mu_grav = 1.32712440041e11

[spacecraft]
m0 = 1000
m_dry = 500
isp = 2000
u_max = 0.5

[transfer]
tof = 100
horizon = 5
x0 = 149597870.7, 0, 0, 0, 29.78, 0
x_t = 0, 149597870.7, 0, -29.78, 0, 0
"""


def _with(text, section, line):
    """Insert `line` right after the `[section]` header."""
    return text.replace(f"[{section}]\n", f"[{section}]\n{line}\n", 1)


class TestBundledScenarios:
    def test_every_bundled_scenario_loads(self, scenario_dir):
        paths = list_scenarios(scenario_dir)
        assert {p.stem for p in paths} >= {
            "earth_mars", "halo_L2_to_L1", "nrho_to_dro", "dro_to_dro",
            "leo_to_leo", "meo_to_meo", "gto_to_geo", "double_integrator",
        }
        for path in paths:
            config = load_scenario(path)
            assert config.name == path.stem
            problem = config.problem()
            assert problem.x0.shape == (problem.nx,)
            assert len(config.initial_controls()) == config.transfer.horizon

    def test_earth_mars(self, earth_mars_path):
        config = load_scenario(earth_mars_path)
        assert config.transfer.horizon == 40
        assert config.transfer.tof == pytest.approx(348.79)
        assert config.model.kind == ModelKind.TWO_BODY
        assert config.schedule.stages == ((1.0, 1e-2), (0.5, 1e-2), (0.1, 2e-3), (1e-3, 1e-3))
        assert config.variant.name == "iLQRDyn"
        assert config.eps_da == config.solver.eps_aul == 1e-6
        problem = config.problem()
        assert problem.stage.dt * 40 == pytest.approx(348.79 * 86400.0 / 5022642.891)
        assert problem.x0[6] == 1.0
        assert problem.constraints.m_dry == pytest.approx(0.5)
        assert np.linalg.norm(problem.x0[:3]) == pytest.approx(1.0, abs=0.02)

    def test_double_integrator_is_unconstrained(self, double_integrator_path):
        config = load_scenario(double_integrator_path)
        problem = config.problem()
        assert problem.nx == 6
        assert problem.constraints.n_ineq == 0 and problem.constraints.n_teq == 0
        assert problem.stage.dt == pytest.approx(1.0 / 11.0)
        assert config.schedule.stages == ((1.0, 1e-2),)
        assert not config.solver.newton

    def test_equinoctial_targets_come_from_elements(self, scenario_dir):
        config = load_scenario(scenario_dir / "gto_to_geo.scn")
        assert config.scenario.long_running
        x0 = config.problem().x0
        assert x0.shape == (7,)
        assert np.hypot(x0[1], x0[2]) > 0.5


class TestValidation:
    def test_minimal_file(self):
        config = parse_scenario(MINIMAL)
        assert config.solver.variant == "iLQRDyn"
        assert config.units.vu == pytest.approx(149597870.7 / 5022642.891)

    def test_ascending_eta_is_rejected(self):
        text = MINIMAL + "\n[solver]\nhomotopy = 1:1e-2, 0.5:1e-2, 0.7:1e-3\n"
        with pytest.raises(ScenarioError) as excinfo:
            parse_scenario(text, "bad.scn")
        assert excinfo.value.key == "solver.homotopy"
        assert "non-increasing" in str(excinfo.value)
        assert excinfo.value.line == MINIMAL.count("\n") + 3

    def test_missing_thrust_bound_names_the_key(self):
        text = MINIMAL.replace("u_max = 0.5\n", "")
        with pytest.raises(ScenarioError) as excinfo:
            parse_scenario(text)
        assert excinfo.value.key == "spacecraft.u_max"
        assert "spacecraft.u_max" in str(excinfo.value)

    def test_unknown_section_reports_its_line(self):
        with pytest.raises(ScenarioError) as excinfo:
            parse_scenario("[scenario]\nname = x\n\n[engine]\nthrust = 1\n", "odd.scn")
        assert excinfo.value.line == 4
        assert str(excinfo.value).startswith("odd.scn: line 4:")

    def test_unknown_key(self):
        with pytest.raises(ScenarioError) as excinfo:
            parse_scenario(_with(MINIMAL, "transfer", "warp = 9"))
        assert excinfo.value.key == "transfer.warp"
        assert excinfo.value.line == MINIMAL.splitlines().index("[transfer]") + 2

    @pytest.mark.parametrize(
        "section, line",
        [
            ("solver", "variant = Newton"),
            ("solver", "order = 5"),
            ("transfer", "horizon = 1"),
            ("model", "vu = 12.0"),
        ],
    )
    def test_invalid_values(self, section, line):
        text = MINIMAL if section != "solver" else MINIMAL + "\n[solver]\n"
        with pytest.raises(ScenarioError):
            parse_scenario(_with(text, section, line))

    def test_missing_spacecraft_for_a_massive_model(self):
        start = MINIMAL.index("[spacecraft]")
        end = MINIMAL.index("[transfer]")
        with pytest.raises(ScenarioError) as excinfo:
            parse_scenario(MINIMAL[:start] + MINIMAL[end:])
        assert "[spacecraft]" in str(excinfo.value)

    def test_duplicate_key(self):
        with pytest.raises(ScenarioError) as excinfo:
            parse_scenario(_with(MINIMAL, "scenario", "name = again"))
        assert excinfo.value.key == "scenario.name"

    def test_unreadable_file(self, tmp_path):
        with pytest.raises(ScenarioError):
            load_scenario(tmp_path / "absent.scn")


class TestValues:
    def test_coercion(self):
        assert coerce_value("3") == 3
        assert coerce_value("1e-6") == 1e-6
        assert coerce_value("true") is True
        assert coerce_value("iLQRDyn") == "iLQRDyn"
        assert coerce_value("1, 2.5, 3") == [1, 2.5, 3]
        assert coerce_value("1:1e-2, 0.5:1e-2") == [(1, 1e-2), (0.5, 1e-2)]

    def test_comments_and_line_numbers(self):
        sections = parse_sections("# header\n[scenario]\nname = a  # trailing\n")
        assert sections == {"scenario": {"name": ("a", 3)}}


class TestOverrides:
    def test_eps_aul_resets_derived_eps_da(self, earth_mars_path):
        config = load_scenario(earth_mars_path).with_overrides(eps_aul=1e-2)
        assert config.solver.eps_aul == 1e-2
        assert config.eps_da == 1e-2
        assert config.with_overrides(eps_da=1e-5).eps_da == 1e-5

    def test_none_overrides_are_ignored(self, earth_mars_path):
        config = load_scenario(earth_mars_path)
        assert config.with_overrides(variant=None, order=None) is config

    def test_invalid_override(self, earth_mars_path):
        with pytest.raises(ScenarioError):
            load_scenario(earth_mars_path).with_overrides(order=7)

    def test_order_override_reaches_the_problem(self, earth_mars_path):
        problem = load_scenario(earth_mars_path).with_overrides(order=3).problem()
        assert problem.order == 3
