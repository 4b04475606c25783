"""Request and response models of the run service."""

from typing import List, Literal, Optional

from pydantic import BaseModel, Field

from app.bench.runner import RunReport


class RunRequest(BaseModel):
    """Request model for solving a bundled scenario."""

    scenario: str = Field(description="Bundled scenario name, e.g. 'earth_mars'")
    variant: Optional[str] = Field(default=None, description="Solver variant, e.g. 'iLQRDyn'")
    order: Optional[int] = Field(default=None, ge=2, le=4, description="Taylor expansion order")
    eps_aul: Optional[float] = Field(default=None, gt=0, description="AUL feasibility tolerance")
    eps_da: Optional[float] = Field(default=None, gt=0, description="Dynamics-approximation tolerance")
    allow_long_running: bool = Field(default=False, description="Accept scenarios flagged long_running")


class RunResponse(BaseModel):
    """Response model for a finished run."""

    run_id: Optional[str] = Field(default=None, description="Registry id, absent when recording failed")
    report: RunReport
    out_dir: Optional[str] = None


class RunRecord(BaseModel):
    """One row of the run registry."""

    run_id: str
    scenario: str
    variant: str
    expansion_order: int
    outcome: Literal["Converged", "DNC"]
    reason: Optional[str] = None
    fuel_kg: Optional[float] = None
    cost: Optional[float] = None
    g_max: Optional[float] = None
    n_ddp: Optional[int] = None
    n_aul: Optional[int] = None
    n_newton: Optional[int] = None
    approx_share: Optional[float] = None
    wall_time_s: Optional[float] = None
    out_dir: Optional[str] = None
    created_at: int


class ScenarioInfo(BaseModel):
    """Summary of a bundled scenario."""

    name: str
    description: str = ""
    model: str
    horizon: int
    tof_days: float
    long_running: bool = False


class ScenarioList(BaseModel):
    scenarios: List[ScenarioInfo]
    count: int
