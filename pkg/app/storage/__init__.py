"""Data persistence layer."""

from app.storage.database import Database, get_database
from app.storage.runs import RunStorage, get_run_storage, new_run_id

__all__ = [
    'Database',
    'get_database',
    'RunStorage',
    'get_run_storage',
    'new_run_id',
]
