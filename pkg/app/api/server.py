import logging
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware

from app import __version__
from app.api.models import RunRecord, RunRequest, RunResponse, ScenarioInfo, ScenarioList
from app.bench.runner import run_scenario
from app.bench.scenario import ScenarioConfig, list_scenarios, load_scenario
from app.core.config import configure_logging, get_output_dir, get_scenario_dir
from app.core.errors import ScenarioError
from app.storage.runs import get_run_storage, new_run_id

logger = logging.getLogger(__name__)

app = FastAPI(
    title="Trajectory Optimization API",
    description="Runs bundled low-thrust transfer scenarios and keeps a registry of the results",
    version=__version__,
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


@app.on_event("startup")
async def startup():
    configure_logging()
    logger.info("scenarios from %s", get_scenario_dir())


def _scenario_path(name: str) -> Path:
    for path in list_scenarios(get_scenario_dir()):
        if path.stem == name:
            return path
    raise HTTPException(status_code=404, detail=f"Scenario '{name}' not found")


def _info(config: ScenarioConfig) -> ScenarioInfo:
    return ScenarioInfo(
        name=config.name,
        description=config.scenario.description,
        model=config.model.kind.value,
        horizon=config.transfer.horizon,
        tof_days=config.transfer.tof,
        long_running=config.scenario.long_running,
    )


@app.get("/health")
async def health_check():
    """Health check endpoint."""
    return {"status": "healthy", "service": "trajopt"}


@app.get("/scenarios", response_model=ScenarioList)
async def get_scenarios() -> ScenarioList:
    """List the bundled scenarios with their size and flags."""
    try:
        infos = [_info(load_scenario(path)) for path in list_scenarios(get_scenario_dir())]
        return ScenarioList(scenarios=infos, count=len(infos))
    except ScenarioError as e:
        raise HTTPException(status_code=500, detail=f"Bundled scenario is invalid: {e}")


@app.post("/runs", response_model=RunResponse)
def create_run(run_request: RunRequest) -> RunResponse:
    """
    Solve a bundled scenario synchronously and record it.

    - Scenarios flagged long_running are refused unless allow_long_running is set
    - Solver failures are not errors: they come back with outcome "DNC"
    """
    try:
        config = load_scenario(_scenario_path(run_request.scenario))
        if config.scenario.long_running and not run_request.allow_long_running:
            raise HTTPException(
                status_code=400,
                detail=f"Scenario '{config.name}' is long-running; set allow_long_running to run it",
            )
        config = config.with_overrides(
            variant=run_request.variant,
            order=run_request.order,
            eps_aul=run_request.eps_aul,
            eps_da=run_request.eps_da,
        )
        # artifacts land in <output dir>/<scenario>/<run id>
        run_id = new_run_id()
        result = run_scenario(config, get_output_dir() / config.name / run_id)
        out_dir = str(result.out_dir) if result.out_dir is not None else None
        recorded = get_run_storage().record_run(result.report, out_dir, run_id=run_id)
        run_id = recorded["run"]["run_id"] if recorded["success"] else None
        return RunResponse(run_id=run_id, report=result.report, out_dir=out_dir)
    except HTTPException:
        raise
    except ScenarioError as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        raise HTTPException(status_code=500, detail=str(e))


@app.get("/runs")
async def get_runs(scenario: Optional[str] = None, limit: int = 50):
    """
    List recorded runs, most recent first.

    Args:
        scenario: Optional scenario filter
        limit: Maximum number of rows

    Returns:
        Runs and their count
    """
    try:
        result = get_run_storage().list_runs(scenario=scenario, limit=limit)
        if not result["success"]:
            raise HTTPException(status_code=400, detail=result["error"])
        return {
            "runs": [RunRecord(**row) for row in result["runs"]],
            "count": result["count"],
        }
    except HTTPException:
        raise
    except Exception as e:
        raise HTTPException(status_code=500, detail=str(e))


@app.get("/runs/{run_id}", response_model=RunRecord)
async def get_run(run_id: str) -> RunRecord:
    try:
        result = get_run_storage().get_run(run_id)
        if not result["success"]:
            raise HTTPException(status_code=404, detail=result["error"])
        return RunRecord(**result["run"])
    except HTTPException:
        raise
    except Exception as e:
        raise HTTPException(status_code=500, detail=str(e))


if __name__ == "__main__":
    import uvicorn

    uvicorn.run(app, host="0.0.0.0", port=8000)
