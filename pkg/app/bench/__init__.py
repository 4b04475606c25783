"""Scenario files, solver runs, artifacts and the command line."""

from app.bench.runner import (
    RunReport,
    RunResult,
    VerificationResult,
    compare_variants,
    emit_artifacts,
    run_scenario,
    sweep,
    verify_run,
)
from app.bench.scenario import ScenarioConfig, list_scenarios, load_scenario, parse_scenario

__all__ = [
    'RunReport',
    'RunResult',
    'VerificationResult',
    'compare_variants',
    'emit_artifacts',
    'run_scenario',
    'sweep',
    'verify_run',
    'ScenarioConfig',
    'list_scenarios',
    'load_scenario',
    'parse_scenario',
]
