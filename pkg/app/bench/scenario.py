"""Scenario files: flat `key = value` text under bracketed section headers.

Example::

    [scenario]
    name = earth_mars

    [model]
    kind = TwoBodyCartesian
    lu = 149597870.7
    ...

Values may be numbers, booleans, strings, comma-separated lists, and
`a:b` pairs (homotopy schedules). `#` starts a comment.
"""

import math
import re
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from app.core.aul import AulSettings
from app.core.ddp import DdpSettings, SolverVariant
from app.core.errors import ScenarioError
from app.core.ocp import FUEL_SCHEDULE, ConstraintSet, CostSpec, HomotopySchedule
from app.core.problem import OptimalControlProblem
from app.dynamics.elements import keplerian_to_equinoctial
from app.dynamics.models import ModelKind, ModelSpec, NormalizationUnits, Spacecraft, StageSpec
from app.newton.polish import NewtonSettings

SECTIONS = ("scenario", "model", "spacecraft", "transfer", "solver")

_INT = re.compile(r"^[+-]?\d+$")


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ScenarioSection(_Section):
    name: str
    description: str = ""
    long_running: bool = False


class ModelSection(_Section):
    kind: ModelKind
    lu: float = Field(gt=0, description="Length unit [km]")
    tu: float = Field(gt=0, description="Time unit [s]")
    vu: Optional[float] = Field(default=None, gt=0, description="Velocity unit [km/s]; derived when omitted")
    mu_grav: float = Field(gt=0, description="Gravitational parameter [km^3/s^2]")
    mass_ratio: Optional[float] = Field(default=None, description="CR3BP mass parameter")


class SpacecraftSection(_Section):
    m0: float = Field(gt=0, description="Initial mass [kg]")
    m_dry: float = Field(gt=0, description="Dry mass [kg]")
    isp: float = Field(gt=0, description="Specific impulse [s]")
    g0: float = Field(default=9.81, gt=0)
    u_max: float = Field(gt=0, description="Maximum thrust [N]")


Vector = Tuple[float, ...]

# RK4 steps per stage when a scenario does not set them
DEFAULT_SUBSTEPS = {
    ModelKind.TWO_BODY: 50,
    ModelKind.CR3BP: 100,
    ModelKind.EQUINOCTIAL: 20,
    ModelKind.DOUBLE_INTEGRATOR: 4,
}


class TransferSection(_Section):
    tof: float = Field(gt=0, description="Time of flight [days]")
    horizon: int = Field(ge=2, description="Number of stages N")
    substeps: Optional[int] = Field(default=None, ge=1, description="RK4 steps per stage; defaults per model kind")
    state_units: Literal["physical", "normalized"] = "physical"
    x0: Optional[Vector] = None
    x_t: Optional[Vector] = None
    kepler0: Optional[Vector] = Field(default=None, description="a [km], e, i, RAAN, arg. periapsis, true anomaly [deg]")
    kepler_t: Optional[Vector] = None
    u0: float = Field(default=1e-6, description="Initial guess per control component [N, or normalized when massless]")
    terminal_weights: Optional[Vector] = None
    path_constraints: bool = True
    terminal_equality: bool = True

    @model_validator(mode="after")
    def _check_states(self):
        if (self.x0 is None) == (self.kepler0 is None):
            raise ValueError("give exactly one of x0 and kepler0")
        if (self.x_t is None) == (self.kepler_t is None):
            raise ValueError("give exactly one of x_t and kepler_t")
        for key in ("x0", "x_t"):
            value = getattr(self, key)
            if value is not None and len(value) != 6:
                raise ValueError(f"{key} needs 6 components (position and velocity, or the six elements), got {len(value)}")
        for key in ("kepler0", "kepler_t"):
            value = getattr(self, key)
            if value is not None and len(value) != 6:
                raise ValueError(f"{key} needs 6 elements (a, e, i, raan, argp, nu), got {len(value)}")
        return self


class SolverSection(_Section):
    variant: str = "iLQRDyn"
    order: int = Field(default=2, ge=2, le=4)
    eps_ddp: float = Field(default=1e-4, gt=0)
    eps_aul: float = Field(default=1e-6, gt=0)
    eps_da: Optional[float] = Field(default=None, gt=0, description="Defaults to eps_aul")
    eps_n: float = Field(default=1e-10, gt=0)
    eps_cv: float = Field(default=1.1, gt=0)
    homotopy: Tuple[Tuple[float, float], ...] = FUEL_SCHEDULE.stages
    max_ddp_iters: int = Field(default=5000, ge=1)
    max_aul_iters: int = Field(default=200, ge=1)
    newton: bool = True

    @field_validator("variant")
    @classmethod
    def _check_variant(cls, value):
        SolverVariant.parse(value)
        return value

    @field_validator("homotopy", mode="before")
    @classmethod
    def _wrap_single_pair(cls, value):
        if isinstance(value, (list, tuple)) and value and not isinstance(value[0], (list, tuple)):
            return (tuple(value),)
        return value

    @field_validator("homotopy")
    @classmethod
    def _check_schedule(cls, value):
        HomotopySchedule(stages=value)
        return value


_SECTION_MODELS = {
    "scenario": ScenarioSection,
    "model": ModelSection,
    "spacecraft": SpacecraftSection,
    "transfer": TransferSection,
    "solver": SolverSection,
}


class ScenarioConfig(BaseModel):
    """A fully validated scenario."""

    model_config = ConfigDict(frozen=True)

    scenario: ScenarioSection
    model: ModelSection
    spacecraft: Optional[SpacecraftSection] = None
    transfer: TransferSection
    solver: SolverSection = SolverSection()
    source: Optional[str] = None

    @model_validator(mode="after")
    def _check_consistency(self):
        if self.model.kind != ModelKind.DOUBLE_INTEGRATOR and self.spacecraft is None:
            raise ValueError(f"{self.model.kind.value} needs a [spacecraft] section")
        if self.model.kind == ModelKind.CR3BP and self.model.mass_ratio is None:
            raise ValueError("Cr3bp needs model.mass_ratio")
        if self.transfer.kepler0 is not None and self.model.kind != ModelKind.EQUINOCTIAL:
            raise ValueError("kepler0/kepler_t are only accepted for EquinoctialGauss models")
        weights = self.transfer.terminal_weights
        if weights is not None and len(weights) != len(self.model_spec.terminal_indices):
            raise ValueError(
                f"terminal_weights needs {len(self.model_spec.terminal_indices)} entries, got {len(weights)}"
            )
        # builds and validates the units (vu cross-check)
        self.units
        return self

    @property
    def name(self) -> str:
        return self.scenario.name

    @property
    def variant(self) -> SolverVariant:
        return SolverVariant.parse(self.solver.variant)

    @property
    def eps_da(self) -> float:
        return self.solver.eps_da if self.solver.eps_da is not None else self.solver.eps_aul

    @property
    def units(self) -> NormalizationUnits:
        mass_unit = self.spacecraft.m0 if self.spacecraft is not None else 1.0
        return NormalizationUnits(
            lu=self.model.lu, tu=self.model.tu, vu=self.model.vu,
            mu_grav=self.model.mu_grav, mass_unit=mass_unit,
        )

    @property
    def physical_spacecraft(self) -> Optional[Spacecraft]:
        if self.spacecraft is None:
            return None
        return Spacecraft(**self.spacecraft.model_dump())

    @property
    def model_spec(self) -> ModelSpec:
        return ModelSpec.build(self.model.kind, self.units, self.physical_spacecraft, self.model.mass_ratio)

    @property
    def stage(self) -> StageSpec:
        tof = self.transfer.tof * self.units.day
        substeps = self.transfer.substeps or DEFAULT_SUBSTEPS[self.model.kind]
        return StageSpec(dt=tof / self.transfer.horizon, substeps=substeps)

    @property
    def schedule(self) -> HomotopySchedule:
        return HomotopySchedule(stages=self.solver.homotopy)

    def _normalize(self, state: Optional[Vector], elements: Optional[Vector]) -> List[float]:
        units = self.units
        if elements is not None:
            a, e, i, raan, argp, nu = elements
            return list(keplerian_to_equinoctial(
                a / units.lu, e, math.radians(i), math.radians(raan), math.radians(argp), math.radians(nu)
            ))
        if self.transfer.state_units == "normalized":
            return list(state)
        if self.model.kind == ModelKind.EQUINOCTIAL:
            return [state[0] / units.lu, *state[1:]]
        return [v / units.lu for v in state[:3]] + [v / units.vu for v in state[3:]]

    def initial_state(self) -> np.ndarray:
        state = self._normalize(self.transfer.x0, self.transfer.kepler0)
        if self.model_spec.has_mass:
            state.append(1.0)
        return np.array(state)

    def target_state(self) -> np.ndarray:
        state = self._normalize(self.transfer.x_t, self.transfer.kepler_t)
        if self.model_spec.has_mass:
            # unused by terminal costs and constraints
            state.append(0.0)
        return np.array(state)

    def initial_controls(self) -> List[np.ndarray]:
        value = self.transfer.u0
        if self.model_spec.has_mass:
            value = value / self.units.thrust_unit
        return [np.full(3, value) for _ in range(self.transfer.horizon)]

    def problem(self) -> OptimalControlProblem:
        model = self.model_spec
        constraints = ConstraintSet.for_model(
            model, self.physical_spacecraft, self.transfer.path_constraints, self.transfer.terminal_equality
        )
        return OptimalControlProblem.create(
            model=model,
            stage=self.stage,
            x0=self.initial_state(),
            target=self.target_state(),
            horizon=self.transfer.horizon,
            constraints=constraints,
            cost=CostSpec(terminal_weights=self.transfer.terminal_weights),
            order=self.solver.order,
            spacecraft=self.physical_spacecraft,
        )

    def ddp_settings(self) -> DdpSettings:
        return DdpSettings(eps_ddp=self.solver.eps_ddp, eps_da=self.eps_da, max_iters=self.solver.max_ddp_iters)

    def aul_settings(self) -> AulSettings:
        return AulSettings(eps_aul=self.solver.eps_aul, max_aul_iters=self.solver.max_aul_iters)

    def newton_settings(self) -> NewtonSettings:
        return NewtonSettings(eps_n=self.solver.eps_n, eps_cv=self.solver.eps_cv, tol_active=self.solver.eps_aul)

    def with_overrides(self, **overrides: Any) -> "ScenarioConfig":
        """Copy with solver keys replaced (None values are ignored); eps_aul also resets eps_da unless given."""
        overrides = {k: v for k, v in overrides.items() if v is not None}
        if not overrides:
            return self
        solver = self.solver.model_dump()
        if "eps_aul" in overrides and "eps_da" not in overrides:
            solver["eps_da"] = None
        solver.update(overrides)
        try:
            return self.model_copy(update={"solver": SolverSection(**solver)})
        except ValidationError as e:
            raise ScenarioError(_first_message(e), path=self.source) from None


# Parsing

RawValue = Union[str, float, int, bool, list, tuple]


def _scalar(text: str) -> RawValue:
    lowered = text.lower()
    if lowered in ("true", "yes"):
        return True
    if lowered in ("false", "no"):
        return False
    if _INT.match(text):
        return int(text)
    try:
        return float(text)
    except ValueError:
        return text


def coerce_value(text: str) -> RawValue:
    """Turn a raw value into a scalar, a list, or a list of pairs."""
    text = text.strip()
    if "," in text:
        return [coerce_value(item) for item in text.split(",") if item.strip()]
    if ":" in text:
        return tuple(_scalar(part.strip()) for part in text.split(":"))
    return _scalar(text)


def parse_sections(text: str, path: Optional[str] = None) -> Dict[str, Dict[str, Tuple[RawValue, int]]]:
    """Sections -> key -> (value, line number)."""
    sections: Dict[str, Dict[str, Tuple[RawValue, int]]] = {}
    current: Optional[str] = None
    for number, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ScenarioError(f"malformed section header {line!r}", path=path, line=number)
            current = line[1:-1].strip()
            if current not in SECTIONS:
                raise ScenarioError(f"unknown section [{current}]", path=path, line=number)
            if current in sections:
                raise ScenarioError(f"section [{current}] repeated", path=path, line=number)
            sections[current] = {}
            continue
        if "=" not in line:
            raise ScenarioError(f"expected 'key = value', got {line!r}", path=path, line=number)
        if current is None:
            raise ScenarioError("key outside any section", path=path, line=number)
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ScenarioError("empty key", path=path, line=number)
        if key in sections[current]:
            raise ScenarioError("duplicate key", path=path, line=number, key=f"{current}.{key}")
        sections[current][key] = (coerce_value(value), number)
    return sections


def _first_message(error: ValidationError) -> str:
    first = error.errors()[0]
    return first["msg"].removeprefix("Value error, ")


def parse_scenario(text: str, path: Optional[str] = None) -> ScenarioConfig:
    sections = parse_sections(text, path)
    built: Dict[str, BaseModel] = {}
    for name, entries in sections.items():
        values = {key: value for key, (value, _) in entries.items()}
        try:
            built[name] = _SECTION_MODELS[name](**values)
        except ValidationError as e:
            first = e.errors()[0]
            key = str(first["loc"][0]) if first["loc"] else None
            line = entries[key][1] if key in entries else None
            raise ScenarioError(
                _first_message(e), path=path, line=line, key=f"{name}.{key}" if key else name
            ) from None
    for required in ("scenario", "model", "transfer"):
        if required not in built:
            raise ScenarioError(f"missing section [{required}]", path=path)
    try:
        return ScenarioConfig(**built, source=path)
    except ValidationError as e:
        raise ScenarioError(_first_message(e), path=path) from None


def load_scenario(path: Union[str, Path]) -> ScenarioConfig:
    """
    Read and validate a scenario file.

    Raises:
        ScenarioError: unreadable file, syntax error, unknown key or failed
            invariant, with file/line/key context where known
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ScenarioError(f"cannot read scenario: {e.strerror}", path=str(path)) from None
    return parse_scenario(text, str(path))


def list_scenarios(directory: Union[str, Path]) -> List[Path]:
    return sorted(Path(directory).glob("*.scn"))
