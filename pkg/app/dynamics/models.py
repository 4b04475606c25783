"""Pydantic models describing units, the spacecraft, the dynamics model and stage discretization."""

from enum import Enum
from typing import Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

KM = 1000.0


class ModelKind(str, Enum):
    """Supported equations of motion."""

    TWO_BODY = "TwoBodyCartesian"
    CR3BP = "Cr3bp"
    EQUINOCTIAL = "EquinoctialGauss"
    DOUBLE_INTEGRATOR = "DoubleIntegrator"


class NormalizationUnits(BaseModel):
    """Length/time/velocity/mass units used to normalize a problem."""

    model_config = ConfigDict(frozen=True)

    lu: float = Field(gt=0, description="Length unit [km]")
    tu: float = Field(gt=0, description="Time unit [s]")
    vu: float = Field(gt=0, description="Velocity unit [km/s]")
    mu_grav: float = Field(gt=0, description="Gravitational parameter of the central/primary body [km^3/s^2]")
    mass_unit: float = Field(default=1.0, gt=0, description="Mass unit [kg]")

    @model_validator(mode="before")
    @classmethod
    def _derive_velocity_unit(cls, data):
        if isinstance(data, dict) and data.get("vu") is None and data.get("lu") and data.get("tu"):
            data = dict(data)
            data["vu"] = data["lu"] / data["tu"]
        return data

    @model_validator(mode="after")
    def _check_velocity_unit(self):
        expected = self.lu / self.tu
        if abs(self.vu - expected) > 1e-9 * expected:
            raise ValueError(f"vu={self.vu} does not match lu/tu={expected}")
        return self

    @property
    def acceleration_unit(self) -> float:
        """Acceleration unit in m/s^2."""
        return self.lu * KM / self.tu ** 2

    @property
    def thrust_unit(self) -> float:
        """Thrust unit in N (mass unit times acceleration unit)."""
        return self.mass_unit * self.acceleration_unit

    @property
    def day(self) -> float:
        """One day in time units."""
        return 86400.0 / self.tu


class Spacecraft(BaseModel):
    """Propulsion and mass properties."""

    model_config = ConfigDict(frozen=True)

    isp: float = Field(gt=0, description="Specific impulse [s]")
    g0: float = Field(default=9.81, gt=0, description="Standard gravity [m/s^2]")
    m_dry: float = Field(gt=0, description="Dry mass [kg]")
    u_max: float = Field(gt=0, description="Maximum thrust magnitude [N]")
    m0: float = Field(gt=0, description="Initial wet mass [kg]")

    @model_validator(mode="after")
    def _check_masses(self):
        if not self.m0 > self.m_dry:
            raise ValueError(f"m0={self.m0} must exceed m_dry={self.m_dry}")
        return self


class ModelSpec(BaseModel):
    """Equations of motion with their normalized parameters."""

    model_config = ConfigDict(frozen=True)

    kind: ModelKind
    units: NormalizationUnits
    mu: float = Field(description="Normalized gravitational parameter, or the CR3BP mass ratio")
    exhaust_velocity: Optional[float] = Field(
        default=None, gt=0, description="Isp*g0 in velocity units; None for massless models"
    )

    @model_validator(mode="after")
    def _check_mu(self):
        if self.kind == ModelKind.CR3BP and not 0.0 < self.mu < 0.5:
            raise ValueError(f"CR3BP mass ratio must lie in (0, 0.5), got {self.mu}")
        if self.kind != ModelKind.CR3BP and self.kind != ModelKind.DOUBLE_INTEGRATOR and not self.mu > 0.0:
            raise ValueError(f"gravitational parameter must be positive, got {self.mu}")
        if self.has_mass and self.exhaust_velocity is None:
            raise ValueError(f"{self.kind.value} needs an exhaust velocity")
        return self

    @classmethod
    def build(
        cls,
        kind: ModelKind,
        units: NormalizationUnits,
        spacecraft: Optional[Spacecraft] = None,
        mass_ratio: Optional[float] = None,
    ) -> "ModelSpec":
        """
        Derive normalized parameters from physical units.

        Args:
            kind: Model kind
            units: Normalization units
            spacecraft: Propulsion data (required for models carrying mass)
            mass_ratio: CR3BP mass ratio

        Returns:
            ModelSpec in normalized units
        """
        if kind == ModelKind.CR3BP:
            if mass_ratio is None:
                raise ValueError("CR3BP model needs a mass ratio")
            mu = mass_ratio
        elif kind == ModelKind.DOUBLE_INTEGRATOR:
            mu = 0.0
        else:
            mu = units.mu_grav * units.tu ** 2 / units.lu ** 3
        exhaust_velocity = None
        if spacecraft is not None and kind != ModelKind.DOUBLE_INTEGRATOR:
            exhaust_velocity = spacecraft.isp * spacecraft.g0 / (units.vu * KM)
        return cls(kind=kind, units=units, mu=mu, exhaust_velocity=exhaust_velocity)

    @property
    def has_mass(self) -> bool:
        return self.kind != ModelKind.DOUBLE_INTEGRATOR

    @property
    def state_size(self) -> int:
        return 7 if self.has_mass else 6

    @property
    def control_size(self) -> int:
        return 3

    @property
    def mass_index(self) -> Optional[int]:
        return 6 if self.has_mass else None

    @property
    def terminal_indices(self) -> Tuple[int, ...]:
        """State components matched at the final stage (equinoctial: a, p, q, r, s)."""
        if self.kind == ModelKind.EQUINOCTIAL:
            return (0, 1, 2, 3, 4)
        return (0, 1, 2, 3, 4, 5)


class StageSpec(BaseModel):
    """Duration and integrator resolution of one stage."""

    model_config = ConfigDict(frozen=True)

    dt: float = Field(gt=0, description="Stage duration [TU]")
    substeps: int = Field(ge=1, description="RK4 steps per stage")

    def halves(self) -> "StageSpec":
        """Stage of half the duration with half the steps (substeps must be even)."""
        if self.substeps % 2:
            raise ValueError("substeps must be even to split a stage")
        return StageSpec(dt=self.dt / 2, substeps=self.substeps // 2)
