"""SQLite run registry."""

import logging
import sqlite3
from contextlib import contextmanager
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from app.core.config import get_runs_db_path

logger = logging.getLogger(__name__)

RUN_COLUMNS = (
    "run_id",
    "scenario",
    "variant",
    "expansion_order",
    "outcome",
    "reason",
    "fuel_kg",
    "cost",
    "g_max",
    "n_ddp",
    "n_aul",
    "n_newton",
    "approx_share",
    "wall_time_s",
    "out_dir",
    "created_at",
)


class Database:
    """SQLite database manager for recorded scenario runs."""

    def __init__(self, db_path: Union[str, Path, None] = None):
        self.db_path = Path(db_path) if db_path is not None else get_runs_db_path()
        self.db_path.parent.mkdir(parents=True, exist_ok=True)
        self._init_database()

    @contextmanager
    def get_connection(self):
        """Context manager for database connections."""
        conn = sqlite3.connect(str(self.db_path))
        conn.row_factory = sqlite3.Row
        try:
            yield conn
            conn.commit()
        except Exception:
            conn.rollback()
            raise
        finally:
            conn.close()

    def _init_database(self):
        with self.get_connection() as conn:
            cursor = conn.cursor()
            cursor.execute("""
                CREATE TABLE IF NOT EXISTS runs (
                    run_id TEXT PRIMARY KEY,
                    scenario TEXT NOT NULL,
                    variant TEXT NOT NULL,
                    expansion_order INTEGER NOT NULL,
                    outcome TEXT NOT NULL,
                    reason TEXT,
                    fuel_kg REAL,
                    cost REAL,
                    g_max REAL,
                    n_ddp INTEGER,
                    n_aul INTEGER,
                    n_newton INTEGER,
                    approx_share REAL,
                    wall_time_s REAL,
                    out_dir TEXT,
                    created_at INTEGER NOT NULL
                )
            """)
            cursor.execute("""
                CREATE INDEX IF NOT EXISTS idx_runs_scenario
                ON runs(scenario, created_at DESC)
            """)
        logger.debug("run registry ready at %s", self.db_path)

    def insert_run(self, row: Dict[str, Any]) -> Dict[str, Any]:
        """Insert one run; missing columns are stored as NULL and created_at defaults to now."""
        row = dict(row)
        row.setdefault("created_at", int(datetime.now().timestamp()))
        values = tuple(row.get(column) for column in RUN_COLUMNS)
        placeholders = ", ".join("?" for _ in RUN_COLUMNS)
        with self.get_connection() as conn:
            conn.execute(
                f"INSERT INTO runs ({', '.join(RUN_COLUMNS)}) VALUES ({placeholders})",
                values,
            )
        return {column: row.get(column) for column in RUN_COLUMNS}

    def get_run(self, run_id: str) -> Optional[Dict[str, Any]]:
        with self.get_connection() as conn:
            cursor = conn.execute("SELECT * FROM runs WHERE run_id = ?", (run_id,))
            row = cursor.fetchone()
            return dict(row) if row else None

    def list_runs(self, scenario: Optional[str] = None, limit: int = 50) -> List[Dict[str, Any]]:
        """Most recent runs first, optionally for one scenario."""
        query = "SELECT * FROM runs"
        params: tuple = ()
        if scenario is not None:
            query += " WHERE scenario = ?"
            params = (scenario,)
        query += " ORDER BY created_at DESC, rowid DESC LIMIT ?"
        with self.get_connection() as conn:
            cursor = conn.execute(query, params + (limit,))
            return [dict(row) for row in cursor.fetchall()]


# Global database instance
_database = None


def get_database() -> Database:
    """Get the global database instance."""
    global _database
    if _database is None:
        _database = Database()
    return _database
