#!/usr/bin/env python3
"""
Desk-scale reproduction of the reference tables.

Runs the relative-efficiency grid, the Monte Carlo MSE study and the
body-fat variable selection, compares each with the shipped reference values
and stores the simulation in a SQLite results database.

Usage:
    python reproduce_tables.py [--table NAME] [--replications R] [--seed S]
                               [--output-dir DIR] [--db PATH] [--dry-run] [--verbose]

Examples:
    # Everything at R = 2000
    python reproduce_tables.py --verbose

    # Only the relative efficiencies
    python reproduce_tables.py --table relative_efficiency

    # See what would run
    python reproduce_tables.py --dry-run
"""

import argparse
import os
import sys
from datetime import datetime

# Add parent directory to path for imports
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from datasets import load_dataset_descriptor, load_dataset_sample
from rsentropy.analytics import compare_with_reference, dominance_count, format_table, rows_to_frame
from rsentropy.config import default_db_path, default_n_jobs, load_reference_tables
from rsentropy.db import ResultsDatabase
from rsentropy.divergence import select_variables
from rsentropy.simlab import ExperimentSpec, run_experiment
from rsentropy.theory import relative_efficiency_grid

TABLES = ['relative_efficiency', 'mse_simulation', 'variable_selection']

# RSS and DRSS cells of the MSE study: n = 15, 30, 45 for k = 3, 5
MSE_DESIGNS = [(k, n // k, r) for r in (1, 2) for n in (15, 30, 45) for k in (3, 5)]


def report_comparison(comparison, verbose=False):
    """Print a comparison summary; returns the number of cells outside tolerance."""
    misses = comparison[~comparison['within']]
    print(f"  {len(comparison) - len(misses)} of {len(comparison)} values within tolerance")
    if verbose and not misses.empty:
        print(format_table(misses))
    return len(misses)


def reproduce_relative_efficiency(output_dir, reference, verbose=False):
    frame = relative_efficiency_grid(verbose=verbose)
    frame.to_csv(os.path.join(output_dir, 'relative_efficiency.csv'), index=False)
    return report_comparison(compare_with_reference(frame, 'relative_efficiency', reference), verbose)


def reproduce_mse_simulation(output_dir, reference, replications, seed, db_path, verbose=False):
    spec = ExperimentSpec(
        name='mse_simulation',
        rhos=[0.9, 0.8],
        designs=MSE_DESIGNS,
        rank_by=1,
        target=[0],
        replications=replications,
        seed=seed,
        n_jobs=default_n_jobs(),
        output=os.path.join(output_dir, 'mse_simulation.csv'),
    )
    rows = run_experiment(spec, verbose=verbose)
    run_id = ResultsDatabase(db_path).save_experiment(spec, rows)
    if verbose:
        print(f"  Stored run {run_id} in {db_path}")

    frame = rows_to_frame(rows)
    misses = report_comparison(compare_with_reference(frame, 'mse_simulation', reference), verbose)
    dominance = dominance_count(frame)
    print(f"  DRSS <= RSS in {dominance['drss_wins']} of {dominance['cells']} cells")
    return misses


def reproduce_variable_selection(output_dir, reference, verbose=False):
    descriptor = load_dataset_descriptor('body_fat_drss')
    columns = descriptor['candidates'] + [descriptor['target']]
    sample = load_dataset_sample('body_fat_drss', columns)
    frame = select_variables(sample, target=[len(columns) - 1], candidates=list(range(len(columns) - 1)),
                             size=2, d1=descriptor['d1'], names=columns)
    frame.to_csv(os.path.join(output_dir, 'variable_selection.csv'), index=False)
    if verbose:
        print(format_table(frame[['subset', 'I_hat', 'I_std']], digits=3))
    return report_comparison(
        compare_with_reference(frame, 'variable_selection', reference, keys=['subset']), verbose
    )


def main():
    parser = argparse.ArgumentParser(description='Reproduce the reference tables at desk scale')
    parser.add_argument('--table', choices=TABLES, help='Only reproduce this table')
    parser.add_argument('--replications', '-R', type=int, default=2000, help='Monte Carlo replications')
    parser.add_argument('--seed', type=int, default=20240101, help='Master seed')
    parser.add_argument('--output-dir', default='reproduction', help='Directory for CSV outputs')
    parser.add_argument('--db', default=None, help='Results database (default $RSENTROPY_DB_PATH)')
    parser.add_argument('--dry-run', action='store_true', help='Show what would be done without doing it')
    parser.add_argument('--verbose', '-v', action='store_true', help='Verbose output')
    args = parser.parse_args()

    tables = [args.table] if args.table else TABLES
    db_path = args.db or default_db_path()

    timestamp = datetime.now().strftime('%Y-%m-%d %H:%M:%S')
    if args.verbose or args.dry_run:
        print(f"Reproduction run at {timestamp}")
        print(f"Tables: {', '.join(tables)}")
        print(f"Replications: {args.replications}, seed: {args.seed}")
        print(f"Database: {db_path}")
    if args.dry_run:
        return 0

    os.makedirs(args.output_dir, exist_ok=True)
    reference = load_reference_tables()
    misses = 0
    for table in tables:
        print(f"{table}:")
        if table == 'relative_efficiency':
            misses += reproduce_relative_efficiency(args.output_dir, reference, args.verbose)
        elif table == 'mse_simulation':
            misses += reproduce_mse_simulation(args.output_dir, reference, args.replications, args.seed,
                                               db_path, args.verbose)
        else:
            misses += reproduce_variable_selection(args.output_dir, reference, args.verbose)

    print(f"{misses} value(s) outside tolerance")
    return 0 if misses == 0 else 1


if __name__ == '__main__':
    sys.exit(main())
