#!/usr/bin/env python3
"""
Solve and freeze the piecewise-linear kernel constants.

Writes rsentropy/data/kernel_constants.json with the constants of every
dimension and the residual of each kernel condition, so that later runs read
the table instead of solving on first use.

Usage:
    python derive_kernel_constants.py [--dims 1 2 3 4] [--output PATH] [--dry-run] [--verbose]

Examples:
    # Solve p = 1..4 and write the package table
    python derive_kernel_constants.py --verbose

    # Show the solved constants without writing anything
    python derive_kernel_constants.py --dry-run --verbose
"""

import argparse
import os
import sys

# Add parent directory to path for imports
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from rsentropy.errors import ConfigurationError
from rsentropy.kernels import (CONSTANTS_PATH, CONSTRAINT_TOL, MAX_JOE_DIM, PIECEWISE_JOE, KernelSpec,
                               constraint_residuals, save_constants_table, solve_joe_constants)


def describe(p, verbose=False):
    """Solve one dimension; returns the worst residual."""
    spec = KernelSpec(family=PIECEWISE_JOE, p=p, **solve_joe_constants(p))
    residuals = constraint_residuals(spec)
    worst = max(abs(v) for v in residuals.values())
    if verbose:
        print(f"  p={p}: xi1={spec.xi1:.6f} xi2={spec.xi2:.6f} k0(0)={spec.k00:.6f} "
              f"kappa02={spec.kappa02:.6f} (max residual {worst:.2e})")
    return worst


def main():
    parser = argparse.ArgumentParser(description='Solve the piecewise kernel constants')
    parser.add_argument('--dims', type=int, nargs='+', default=list(range(1, MAX_JOE_DIM + 1)),
                        help='Dimensions to solve')
    parser.add_argument('--output', default=CONSTANTS_PATH, help='Table path')
    parser.add_argument('--dry-run', action='store_true', help='Solve and report without writing')
    parser.add_argument('--verbose', '-v', action='store_true', help='Verbose output')
    args = parser.parse_args()

    failed = []
    for p in args.dims:
        try:
            worst = describe(p, args.verbose)
        except ConfigurationError as e:
            print(f"  p={p}: ERROR {e}")
            failed.append(p)
            continue
        if worst > CONSTRAINT_TOL:
            print(f"  p={p}: residual {worst:.2e} exceeds {CONSTRAINT_TOL:.0e}")
            failed.append(p)

    if failed:
        print(f"Not writing the table: dimension(s) {failed} failed")
        return 1

    if args.dry_run:
        print(f"Would write constants for p={args.dims} to {args.output}")
        return 0

    save_constants_table(args.output, args.dims)
    print(f"Wrote constants for p={args.dims} to {args.output}")
    return 0


if __name__ == '__main__':
    sys.exit(main())
