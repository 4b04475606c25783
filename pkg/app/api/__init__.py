"""API layer - endpoints and models."""

from app.api.models import (
    RunRecord,
    RunRequest,
    RunResponse,
    ScenarioInfo,
    ScenarioList,
)

__all__ = [
    'RunRecord',
    'RunRequest',
    'RunResponse',
    'ScenarioInfo',
    'ScenarioList',
]
