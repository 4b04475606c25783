"""Core solver modules.

Only the dependency-free errors and configuration are re-exported here;
app.da and app.dynamics import from this package, so the solver modules
(ocp, problem, ddp, aul) are imported from their own paths.
"""

from app.core.config import configure_logging, get_setting
from app.core.errors import (
    CapabilityError,
    ConvergenceFailure,
    DaArgumentError,
    DaDomainError,
    DynamicsDomainError,
    FactorizationError,
    PolishFailure,
    RegularizationExhausted,
    ScenarioError,
    TrajoptError,
)

__all__ = [
    'configure_logging',
    'get_setting',
    'CapabilityError',
    'ConvergenceFailure',
    'DaArgumentError',
    'DaDomainError',
    'DynamicsDomainError',
    'FactorizationError',
    'PolishFailure',
    'RegularizationExhausted',
    'ScenarioError',
    'TrajoptError',
]
