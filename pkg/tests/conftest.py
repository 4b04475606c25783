"""Shared fixtures: small problems, bundled scenarios and an isolated run registry."""

from pathlib import Path

import numpy as np
import pytest

from app.core.ocp import ConstraintSet, CostSpec, DualPenaltyState
from app.core.problem import OptimalControlProblem
from app.dynamics.models import ModelKind, ModelSpec, NormalizationUnits, Spacecraft, StageSpec

ROOT = Path(__file__).resolve().parent.parent
SCENARIO_DIR = ROOT / "scenarios"


@pytest.fixture
def scenario_dir() -> Path:
    return SCENARIO_DIR


@pytest.fixture
def earth_mars_path() -> Path:
    return SCENARIO_DIR / "earth_mars.scn"


@pytest.fixture
def double_integrator_path() -> Path:
    return SCENARIO_DIR / "double_integrator.scn"


def double_integrator_model() -> ModelSpec:
    units = NormalizationUnits(lu=1.0, tu=86400.0, mu_grav=1.0)
    return ModelSpec.build(ModelKind.DOUBLE_INTEGRATOR, units)


def double_integrator_problem(
    horizon: int = 11,
    dt: float = 1.0 / 11.0,
    constraints: ConstraintSet = None,
    terminal_weights=(1.0, 1.0, 1.0, 0.0, 0.0, 0.0),
    order: int = 2,
) -> OptimalControlProblem:
    model = double_integrator_model()
    return OptimalControlProblem.create(
        model=model,
        stage=StageSpec(dt=dt, substeps=1),
        x0=np.ones(6),
        target=np.array([1.0, -1.0, 0.0, 0.0, 0.0, 0.0]),
        horizon=horizon,
        constraints=constraints or ConstraintSet(),
        cost=CostSpec(terminal_weights=terminal_weights),
        order=order,
    )


@pytest.fixture
def lqr_problem() -> OptimalControlProblem:
    return double_integrator_problem()


@pytest.fixture
def sun_units() -> NormalizationUnits:
    return NormalizationUnits(lu=149597870.7, tu=5022642.891, mu_grav=1.32712440041e11, mass_unit=1000.0)


@pytest.fixture
def spacecraft() -> Spacecraft:
    return Spacecraft(isp=2000.0, g0=9.81, m_dry=500.0, u_max=0.5, m0=1000.0)


@pytest.fixture
def two_body_model(sun_units, spacecraft) -> ModelSpec:
    return ModelSpec.build(ModelKind.TWO_BODY, sun_units, spacecraft)


def zero_duals(problem: OptimalControlProblem) -> DualPenaltyState:
    return DualPenaltyState.initial(problem.constraints, problem.horizon)


@pytest.fixture
def runs_db(tmp_path, monkeypatch):
    """Registry and artifacts redirected under tmp_path; the global storage is rebuilt on it."""
    from app.storage import runs
    from app.storage.database import Database

    monkeypatch.setenv("TRAJOPT_RUNS_DB", str(tmp_path / "runs.db"))
    monkeypatch.setenv("TRAJOPT_OUTPUT_DIR", str(tmp_path / "output"))
    storage = runs.RunStorage(Database(tmp_path / "runs.db"))
    monkeypatch.setattr(runs, "_run_storage", storage)
    return storage
