"""
SQLite database module for storing Monte Carlo experiment results.
"""

import json
import sqlite3
from contextlib import contextmanager
from typing import Any, Dict, List, Optional, Sequence

from .config import default_db_path

ROW_COLUMNS = (
    'estimator', 'scheme', 'rho', 'n', 'k', 'm', 'r', 'd1', 'target',
    'mean_estimate', 'bias', 'mse', 'variance',
    'mean_cv', 'var_cv', 'mean_mse_hat', 'var_mse_hat', 'mean_gamma',
    'replications', 'failures', 'clamped', 'seed', 'wall_time',
)


def _convert_numpy_types(obj):
    """Recursively convert numpy types to native Python types for JSON serialization."""
    import numpy as np
    if isinstance(obj, dict):
        return {k: _convert_numpy_types(v) for k, v in obj.items()}
    elif isinstance(obj, (list, tuple)):
        return [_convert_numpy_types(item) for item in obj]
    elif isinstance(obj, (np.integer,)):
        return int(obj)
    elif isinstance(obj, (np.floating,)):
        return float(obj)
    elif isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


def _nan_to_none(value):
    if isinstance(value, float) and value != value:
        return None
    return value


class ResultsDatabase:
    """Manages SQLite database for experiment runs and their aggregate rows."""

    def __init__(self, db_path: str = None):
        """Initialize database connection.

        Args:
            db_path: Path to SQLite database file. Defaults to $RSENTROPY_DB_PATH
                or './rsentropy_results.db'
        """
        if db_path is None:
            db_path = default_db_path()
        self.db_path = db_path
        self._init_database()

    @contextmanager
    def _get_connection(self):
        """Context manager for database connections."""
        conn = sqlite3.connect(self.db_path)
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
        """Create database tables if they don't exist."""
        with self._get_connection() as conn:
            cursor = conn.cursor()

            cursor.execute("""
                CREATE TABLE IF NOT EXISTS experiment_runs (
                    id INTEGER PRIMARY KEY AUTOINCREMENT,
                    name TEXT NOT NULL,
                    estimator TEXT NOT NULL,
                    master_seed INTEGER NOT NULL,
                    replications INTEGER NOT NULL,
                    spec_json TEXT NOT NULL,
                    created_at DATETIME DEFAULT CURRENT_TIMESTAMP
                )
            """)

            cursor.execute("""
                CREATE TABLE IF NOT EXISTS aggregate_rows (
                    id INTEGER PRIMARY KEY AUTOINCREMENT,
                    run_id INTEGER NOT NULL,
                    estimator TEXT NOT NULL,
                    scheme TEXT NOT NULL,
                    rho REAL,
                    n INTEGER NOT NULL,
                    k INTEGER NOT NULL,
                    m INTEGER NOT NULL,
                    r INTEGER NOT NULL,
                    d1 REAL,
                    target REAL,
                    mean_estimate REAL,
                    bias REAL,
                    mse REAL,
                    variance REAL,
                    mean_cv REAL,
                    var_cv REAL,
                    mean_mse_hat REAL,
                    var_mse_hat REAL,
                    mean_gamma REAL,
                    replications INTEGER,
                    failures INTEGER,
                    clamped INTEGER,
                    seed INTEGER,
                    wall_time REAL,
                    FOREIGN KEY (run_id) REFERENCES experiment_runs(id)
                )
            """)

            cursor.execute("""
                CREATE INDEX IF NOT EXISTS idx_rows_run
                ON aggregate_rows(run_id, estimator, scheme)
            """)

    def insert_run(
        self,
        name: str,
        estimator: str,
        master_seed: int,
        replications: int,
        spec: Dict[str, Any]
    ) -> int:
        """Record an experiment run.

        Args:
            name: Experiment name
            estimator: Estimator studied (entropy, mi, std_mi, kl, or a list joined by commas)
            master_seed: Master seed of the replications
            replications: Replications per cell
            spec: Full experiment specification

        Returns:
            ID of inserted run
        """
        with self._get_connection() as conn:
            cursor = conn.cursor()
            cursor.execute("""
                INSERT INTO experiment_runs
                (name, estimator, master_seed, replications, spec_json)
                VALUES (?, ?, ?, ?, ?)
            """, (
                name,
                estimator,
                int(master_seed),
                int(replications),
                json.dumps(_convert_numpy_types(spec), sort_keys=True)
            ))
            return cursor.lastrowid

    def insert_rows(self, run_id: int, rows: Sequence) -> int:
        """Store aggregate rows (AggregateRow or dicts) under a run.

        NaN values are stored as NULL.

        Returns:
            Number of rows inserted
        """
        placeholders = ", ".join("?" for _ in ROW_COLUMNS)
        columns = ", ".join(ROW_COLUMNS)
        with self._get_connection() as conn:
            cursor = conn.cursor()
            for row in rows:
                data = row if isinstance(row, dict) else row.to_dict()
                data = _convert_numpy_types(data)
                cursor.execute(
                    f"INSERT INTO aggregate_rows (run_id, {columns}) VALUES (?, {placeholders})",
                    (run_id, *(_nan_to_none(data.get(column)) for column in ROW_COLUMNS))
                )
            return len(rows)

    def get_runs(self, name: Optional[str] = None, limit: Optional[int] = None) -> List[Dict[str, Any]]:
        """Query experiment runs, most recent first.

        Args:
            name: Filter by experiment name
            limit: Maximum number of results

        Returns:
            List of run dictionaries with the parsed spec under 'spec'
        """
        with self._get_connection() as conn:
            cursor = conn.cursor()

            query = "SELECT * FROM experiment_runs WHERE 1=1"
            params = []

            if name:
                query += " AND name = ?"
                params.append(name)

            query += " ORDER BY id DESC"

            if limit:
                query += " LIMIT ?"
                params.append(int(limit))

            cursor.execute(query, params)
            results = []
            for row in cursor.fetchall():
                record = dict(row)
                record['spec'] = json.loads(record.pop('spec_json'))
                results.append(record)
            return results

    def get_rows(self, run_id: int, estimator: Optional[str] = None) -> List[Dict[str, Any]]:
        """Aggregate rows of a run in insertion order."""
        with self._get_connection() as conn:
            cursor = conn.cursor()
            query = "SELECT * FROM aggregate_rows WHERE run_id = ?"
            params: list = [run_id]
            if estimator:
                query += " AND estimator = ?"
                params.append(estimator)
            cursor.execute(query + " ORDER BY id", params)
            return [dict(row) for row in cursor.fetchall()]

    def delete_run(self, run_id: int) -> bool:
        """Delete a run and its rows.

        Returns:
            True if deleted, False if not found
        """
        with self._get_connection() as conn:
            cursor = conn.cursor()
            # Delete rows first
            cursor.execute("DELETE FROM aggregate_rows WHERE run_id = ?", (run_id,))
            cursor.execute("DELETE FROM experiment_runs WHERE id = ?", (run_id,))
            return cursor.rowcount > 0

    def save_experiment(self, spec, rows: Sequence) -> int:
        """Store an ExperimentSpec and its rows in one call; returns the run ID."""
        run_id = self.insert_run(spec.name, spec.estimator, spec.seed, spec.replications, spec.to_dict())
        self.insert_rows(run_id, rows)
        return run_id
