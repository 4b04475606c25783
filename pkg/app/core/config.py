"""Process configuration read from environment variables, and logging setup."""

import logging
import os
from pathlib import Path
from typing import Optional

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

_DEFAULTS = {
    "TRAJOPT_LOG_LEVEL": "INFO",
    "TRAJOPT_DATA_DIR": "data",
    "TRAJOPT_SCENARIO_DIR": "scenarios",
    "TRAJOPT_OUTPUT_DIR": "output",
}


def get_setting(name: str, default: Optional[str] = None) -> str:
    """
    Read one configuration value.

    Args:
        name: Environment variable name (TRAJOPT_*)
        default: Fallback when the variable is unset (defaults to the table above)

    Returns:
        The configured string value
    """
    value = os.getenv(name)
    if value is None or value == "":
        value = default if default is not None else _DEFAULTS.get(name)
    if value is None:
        raise ValueError(f"Configuration value {name} is not set.")
    return value


def get_data_dir() -> Path:
    return Path(get_setting("TRAJOPT_DATA_DIR"))


def get_runs_db_path() -> Path:
    """SQLite run registry location (TRAJOPT_RUNS_DB, else <data dir>/runs.db)."""
    explicit = os.getenv("TRAJOPT_RUNS_DB")
    if explicit:
        return Path(explicit)
    return get_data_dir() / "runs.db"


def get_scenario_dir() -> Path:
    """Directory holding the bundled .scn files."""
    explicit = os.getenv("TRAJOPT_SCENARIO_DIR")
    if explicit:
        return Path(explicit)
    return Path(__file__).resolve().parent.parent.parent / _DEFAULTS["TRAJOPT_SCENARIO_DIR"]


def get_output_dir() -> Path:
    return Path(get_setting("TRAJOPT_OUTPUT_DIR"))


def configure_logging(level: Optional[str] = None) -> None:
    """
    Install a single stream handler on the root logger.

    Called by entry points only (CLI, server startup). Repeated calls
    just update the level.

    Args:
        level: Level name; defaults to TRAJOPT_LOG_LEVEL
    """
    level_name = (level or get_setting("TRAJOPT_LOG_LEVEL")).upper()
    numeric = logging.getLevelName(level_name)
    if not isinstance(numeric, int):
        raise ValueError(f"Unknown log level {level_name!r}")

    root = logging.getLogger()
    if not any(getattr(h, "_trajopt", False) for h in root.handlers):
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        handler._trajopt = True
        root.addHandler(handler)
    root.setLevel(numeric)
