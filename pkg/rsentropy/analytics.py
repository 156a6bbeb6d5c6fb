"""
Analytics over simulation results: frames, reference comparisons and text reports.
"""

from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from .config import load_reference_tables
from .db import ResultsDatabase
from .errors import ConfigurationError

KEY_COLUMNS = ['rho', 'n', 'k', 'scheme']
RELATIVE = 'relative'
ABSOLUTE = 'absolute'


def rows_to_frame(rows: Sequence) -> pd.DataFrame:
    """AggregateRows (or dicts) as a DataFrame, one row per cell and estimator."""
    if not rows:
        return pd.DataFrame()
    records = [row if isinstance(row, dict) else row.to_dict() for row in rows]
    return pd.DataFrame(records)


def reference_frame(table: str, tables: Optional[Dict[str, Any]] = None) -> pd.DataFrame:
    """One of the shipped reference tables as a DataFrame."""
    tables = tables if tables is not None else load_reference_tables()
    spec = tables[table]
    return pd.DataFrame(spec['rows'], columns=spec['columns'])


def compare_with_reference(
    frame: pd.DataFrame,
    table: str = 'mse_simulation',
    tables: Optional[Dict[str, Any]] = None,
    keys: Optional[List[str]] = None
) -> pd.DataFrame:
    """Deviation of simulated columns from a reference table.

    Columns present in both the frame and the reference are compared cell by
    cell; each comparison gets the table tolerance unless the reference lists a
    widened tolerance for that cell and column. The table's ``tolerance_kind``
    is 'relative' (the default) or 'absolute'; ``within`` tests the matching
    error against the tolerance.

    Args:
        frame: Simulation results (see rows_to_frame)
        table: Name of the reference table
        tables: Reference tables (package tables by default)
        keys: Columns identifying a cell

    Returns:
        Long DataFrame with the key columns plus column, simulated, reference,
        abs_error, rel_error, tolerance, tolerance_kind and within

    Raises:
        ConfigurationError: For an unknown tolerance_kind
    """
    tables = tables if tables is not None else load_reference_tables()
    reference = reference_frame(table, tables)
    spec = tables[table]
    kind = spec.get('tolerance_kind', RELATIVE)
    if kind not in (RELATIVE, ABSOLUTE):
        raise ConfigurationError(f"unknown tolerance_kind {kind!r} in reference table {table!r}")
    keys = keys or [c for c in KEY_COLUMNS if c in reference.columns and c in frame.columns]
    values = [c for c in reference.columns if c not in keys and c in frame.columns]

    merged = frame[keys + values].merge(reference[keys + values], on=keys, suffixes=('_sim', '_ref'))
    widened = {
        (tuple(w[key] for key in keys), w['column']): w['tolerance']
        for w in spec.get('widened', [])
    }

    records = []
    for _, row in merged.iterrows():
        cell = tuple(row[key] for key in keys)
        for column in values:
            simulated = float(row[f'{column}_sim'])
            expected = float(row[f'{column}_ref'])
            tolerance = widened.get((cell, column), spec.get('tolerance', 0.0))
            err = abs(simulated - expected)
            rel = err / abs(expected) if expected != 0 else float('inf')
            records.append({
                **dict(zip(keys, cell)),
                'column': column,
                'simulated': simulated,
                'reference': expected,
                'abs_error': err,
                'rel_error': rel,
                'tolerance': tolerance,
                'tolerance_kind': kind,
                'within': bool((err if kind == ABSOLUTE else rel) <= tolerance),
            })
    return pd.DataFrame(records)


def dominance_count(frame: pd.DataFrame, column: str = 'mse') -> Dict[str, int]:
    """Count cells where DRSS is no worse than RSS for the same (rho, n, k).

    Returns:
        Dictionary with 'cells' (paired cells) and 'drss_wins'
    """
    keys = [c for c in ['estimator', 'rho', 'n', 'k'] if c in frame.columns]
    rss = frame[frame['scheme'] == 'rss'].set_index(keys)[column]
    drss = frame[frame['scheme'] == 'drss'].set_index(keys)[column]
    rss, drss = rss.align(drss, join='inner')
    return {'cells': int(len(rss)), 'drss_wins': int(np.sum(drss.to_numpy() <= rss.to_numpy()))}


def format_table(frame: pd.DataFrame, columns: Optional[List[str]] = None, digits: int = 4) -> str:
    """Fixed-width text rendering of a results frame."""
    if frame.empty:
        return "(no rows)"
    view = frame[columns] if columns else frame
    return view.to_string(index=False, float_format=lambda v: f"{v:.{digits}f}")


class ResultsAnalytics:
    """Summaries of stored experiment runs."""

    def __init__(self, db_path: Optional[str] = None):
        """Initialize analytics with database connection.

        Args:
            db_path: Path to SQLite database file
        """
        self.db = ResultsDatabase(db_path)

    def get_rows_df(self, run_id: int, estimator: Optional[str] = None) -> pd.DataFrame:
        """Rows of a stored run as a DataFrame; NULLs come back as NaN."""
        rows = self.db.get_rows(run_id, estimator)
        if not rows:
            return pd.DataFrame()
        df = pd.DataFrame(rows)
        numeric = [c for c in df.columns if c not in ('estimator', 'scheme')]
        df[numeric] = df[numeric].apply(pd.to_numeric, errors='coerce')
        return df

    def get_run_summary(self, run_id: int) -> Dict[str, Any]:
        """Summary of a run: grid size, best and worst cells by MSE, DRSS dominance."""
        runs = [r for r in self.db.get_runs() if r['id'] == run_id]
        if not runs:
            return {'run_id': run_id, 'error': 'Run not found'}
        df = self.get_rows_df(run_id)
        if df.empty:
            return {'run_id': run_id, 'name': runs[0]['name'], 'error': 'No rows stored'}

        best = df.loc[df['mse'].idxmin()]
        worst = df.loc[df['mse'].idxmax()]
        return {
            'run_id': run_id,
            'name': runs[0]['name'],
            'estimator': runs[0]['estimator'],
            'master_seed': runs[0]['master_seed'],
            'replications': runs[0]['replications'],
            'cells': len(df),
            'failures': int(df['failures'].sum()),
            'clamped': int(df['clamped'].sum()),
            'best_cell': {'scheme': best['scheme'], 'rho': best['rho'], 'n': int(best['n']),
                          'k': int(best['k']), 'mse': float(best['mse'])},
            'worst_cell': {'scheme': worst['scheme'], 'rho': worst['rho'], 'n': int(worst['n']),
                           'k': int(worst['k']), 'mse': float(worst['mse'])},
            'dominance': dominance_count(df),
            'frame': df,
        }


def generate_report(
    run_id: int,
    output_file: Optional[str] = None,
    db_path: Optional[str] = None
) -> str:
    """Generate a text report of a stored experiment run.

    Args:
        run_id: Run ID in the results database
        output_file: Optional path to save report
        db_path: Optional database path

    Returns:
        Report text
    """
    analytics = ResultsAnalytics(db_path)
    summary = analytics.get_run_summary(run_id)

    if 'error' in summary:
        report = f"Error generating report for run {run_id}: {summary['error']}"
    else:
        dominance = summary['dominance']
        report = f"""
Experiment Report - {summary['name']} (run {run_id})
{'=' * 50}

Estimator: {summary['estimator']}
Master seed: {summary['master_seed']}
Replications per cell: {summary['replications']}
Cells: {summary['cells']}
Failed replications: {summary['failures']}
Clamped MI estimates: {summary['clamped']}
DRSS <= RSS in {dominance['drss_wins']} of {dominance['cells']} paired cells

Results:
{'-' * 50}
"""
        columns = [c for c in ['estimator', 'scheme', 'rho', 'n', 'k', 'r', 'bias', 'mse',
                               'mean_cv', 'mean_mse_hat'] if c in summary['frame'].columns]
        report += format_table(summary['frame'], columns) + "\n"
        best = summary['best_cell']
        report += f"\nLowest MSE: {best['scheme']} rho={best['rho']} n={best['n']} k={best['k']} "
        report += f"({best['mse']:.4f})\n"

    if output_file:
        with open(output_file, 'w') as f:
            f.write(report)
        print(f"Report saved to {output_file}")

    return report
