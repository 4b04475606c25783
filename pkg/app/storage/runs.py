"""Storage layer for scenario runs."""

import logging
import sqlite3
import uuid
from pathlib import Path
from typing import Dict, Optional, Union

from app.bench.runner import RunReport
from app.storage.database import Database, get_database

logger = logging.getLogger(__name__)


def new_run_id() -> str:
    return f"run_{uuid.uuid4().hex[:12]}"


class RunStorage:
    """Records run reports in the SQLite registry."""

    def __init__(self, db: Optional[Database] = None):
        self.db = db or get_database()

    def record_run(
        self,
        report: RunReport,
        out_dir: Union[str, Path, None] = None,
        run_id: Optional[str] = None,
    ) -> dict:
        """
        Store a finished run.

        Args:
            report: Report of the run
            out_dir: Artifact directory, when artifacts were written
            run_id: Id reserved before the run started; a fresh one otherwise

        Returns:
            {"success": True, "run": row} or {"success": False, "error": message}
        """
        run_id = run_id or new_run_id()
        try:
            row = self.db.insert_run({
                "run_id": run_id,
                "scenario": report.scenario,
                "variant": report.variant,
                "expansion_order": report.order,
                "outcome": report.outcome,
                "reason": report.reason or None,
                "fuel_kg": report.fuel_kg,
                "cost": _finite(report.cost),
                "g_max": _finite(report.g_max),
                "n_ddp": report.n_ddp,
                "n_aul": report.n_aul,
                "n_newton": report.n_newton,
                "approx_share": report.approx_share,
                "wall_time_s": report.wall_time_s,
                "out_dir": str(out_dir) if out_dir is not None else None,
            })
        except sqlite3.Error as e:
            logger.error("could not record run of %s: %s", report.scenario, e)
            return {"success": False, "error": f"Failed to record run: {e}"}
        logger.info("recorded %s (%s, %s)", run_id, report.scenario, report.outcome)
        return {"success": True, "run": row}

    def get_run(self, run_id: str) -> dict:
        row = self.db.get_run(run_id)
        if row is None:
            return {"success": False, "error": f"Run '{run_id}' not found"}
        return {"success": True, "run": row}

    def list_runs(self, scenario: Optional[str] = None, limit: int = 50) -> dict:
        if limit < 1:
            return {"success": False, "error": "limit must be positive"}
        runs = self.db.list_runs(scenario=scenario, limit=limit)
        return {"success": True, "runs": runs, "count": len(runs)}


def _finite(value: float) -> Optional[float]:
    # SQLite stores inf but JSON responses cannot carry it
    return value if value == value and abs(value) != float("inf") else None


# Global storage instance
_run_storage = None


def get_run_storage() -> RunStorage:
    """Get the global run storage instance."""
    global _run_storage
    if _run_storage is None:
        _run_storage = RunStorage()
    return _run_storage

