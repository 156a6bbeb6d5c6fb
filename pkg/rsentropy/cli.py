#!/usr/bin/env python3
"""
Command-line front end for ranked set sample entropy estimation.

Usage:
    rsentropy SUBCOMMAND [options] [--dry-run] [--verbose] [--output PATH]

Examples:
    # Draw a double ranked set sample from a bivariate normal parent
    rsentropy sample --parent bivariate_normal --rho 0.9 -k 3 -m 10 -r 2 --rank-by 1 --output s.csv

    # Entropy of one column with the bandwidth rule
    rsentropy entropy --input s.csv --columns x1 --d1 1.2

    # Mutual information of (X1, X2) with Y on the body-fat sample
    rsentropy mi --input datasets/body_fat_drss/sample.csv --x X1 X2 --y Y --d1 0.6 --kernel joe

    # Rank candidate pairs by standardized mutual information with Y
    rsentropy select-vars --input datasets/body_fat_drss/sample.csv --target Y \\
        --candidates X1 X2 X3 --size 2 --d1 0.6

    # Run a simulation study and store it
    rsentropy simulate --spec study.json --db results.db --output table.csv
"""

import argparse
import dataclasses
import json
import os
import sys
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd

from .analytics import format_table, rows_to_frame
from .config import BandwidthTables, load_experiment_spec
from .db import ResultsDatabase
from .designs import Design, FinitePopulation, RankedSetSample, draw_mrss
from .divergence import (BANDWIDTH_MODES, JOINT_BANDWIDTH, entropy_population, kl_divergence,
                         mutual_information, population_mutual_information, select_variables)
from .entropy import BandwidthPolicy, SupportSpec, estimate_entropy
from .errors import IngestionError, ParameterError, RSEntropyError
from .kernels import kernel_by_name
from .parents import parent_from_dict
from .simlab import D1_GRID, finite_population_study, rows_to_csv, run_experiment, tune_d1
from .theory import relative_efficiency_grid


# --------------------------------------------------------------------------
# Shared helpers
# --------------------------------------------------------------------------

def _emit(text: str, output: Optional[str], verbose: bool = False):
    if output:
        with open(output, 'w') as f:
            f.write(text if text.endswith("\n") else text + "\n")
        if verbose:
            print(f"Wrote {output}")
    else:
        print(text)


def _emit_frame(frame: pd.DataFrame, output: Optional[str], verbose: bool = False):
    if output:
        frame.to_csv(output, index=False)
        if verbose:
            print(f"Wrote {len(frame)} rows to {output}")
    else:
        print(format_table(frame))


def _read_frame(path: str) -> pd.DataFrame:
    if not os.path.exists(path):
        raise IngestionError(f"input file not found: {path}")
    try:
        return pd.read_csv(path)
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise IngestionError(f"malformed CSV {path}: {e}") from e


def _load_sample(
    path: str,
    columns: Optional[Sequence[str]] = None,
    r: int = 1,
    rank_by: int = 0
) -> RankedSetSample:
    """Long-format ranked set sample, or a flat CSV read as a simple random sample."""
    frame = _read_frame(path)
    if 'cycle' in frame.columns and 'rank' in frame.columns:
        return RankedSetSample.from_frame(frame, columns, r=r, rank_by=rank_by)
    return RankedSetSample.from_srs(FinitePopulation.from_frame(frame, columns).rows)


def _column_index(value: str, columns: Sequence[str]) -> int:
    if value in columns:
        return list(columns).index(value)
    try:
        index = int(value)
    except ValueError:
        raise ParameterError(f"unknown column {value!r} (available: {', '.join(columns)})") from None
    if not 0 <= index < len(columns):
        raise ParameterError(f"column index {index} out of range for {len(columns)} columns")
    return index


def _policy(args) -> BandwidthPolicy:
    if args.gamma is not None:
        return BandwidthPolicy.fixed(args.gamma)
    if args.cv_grid:
        return BandwidthPolicy.cv_grid(args.grid, args.d1 if args.d1 is not None else 1.0)
    if args.d1 is None:
        raise ParameterError("one of --gamma, --d1 or --cv-grid is required")
    return BandwidthPolicy.rule(args.d1)


def _support(args) -> SupportSpec:
    if args.support == 'rectangle':
        if not args.lo or not args.hi:
            raise ParameterError("--support rectangle needs --lo and --hi")
        return SupportSpec.rectangle(args.lo, args.hi)
    if args.support == 'density_floor':
        if args.eps is None:
            raise ParameterError("--support density_floor needs --eps")
        return SupportSpec.density_floor(args.eps)
    return SupportSpec.all_points()


def _gamma_for(sample: RankedSetSample, kernel, args) -> float:
    return _policy(args).resolve(sample, kernel)


# --------------------------------------------------------------------------
# Subcommands
# --------------------------------------------------------------------------

def cmd_sample(args) -> int:
    if args.population:
        source = FinitePopulation.from_csv(args.population, args.columns)
        columns = list(source.columns)
    else:
        config = {'name': args.parent}
        if args.rho is not None:
            config['rho'] = args.rho
        source = parent_from_dict(config)
        columns = [f"x{c + 1}" for c in range(source.dim)]
    design_rank_by = _column_index(args.rank_by, columns)
    design = Design(k=args.k, m=args.m, r=args.r, rank_by=design_rank_by,
                    replacement=not args.without_replacement, ranking_noise_sd=args.noise_sd)

    if args.dry_run:
        print(f"Would draw a {design.scheme} sample: k={design.k} m={design.m} r={design.r} "
              f"(n={design.n}, {design.units_per_cycle} units per cycle), seed={args.seed}")
        return 0

    sample = draw_mrss(source, design, args.seed)
    frame = sample.to_frame(columns)
    if args.output:
        frame.to_csv(args.output, index=False)
        if args.verbose:
            print(f"Wrote {sample.n} observations to {args.output}")
    else:
        print(frame.to_csv(index=False), end="")
    return 0


def cmd_entropy(args) -> int:
    policy = _policy(args)
    support = _support(args)
    sample = _load_sample(args.input, args.columns, args.r, args.rank_by)
    kernel = kernel_by_name(args.kernel, sample.p)
    if args.dry_run:
        print(f"Would estimate H from {sample.n} observations (k={sample.k}, m={sample.m}, p={sample.p}) "
              f"with {kernel.family}, bandwidth {policy.mode}, support {support.mode}")
        return 0
    report = estimate_entropy(sample, kernel, policy, support, diagnostics=not args.no_diagnostics)
    _emit(report.to_json(), args.output, args.verbose)
    return 0


def cmd_mi(args) -> int:
    columns = list(args.x) + list(args.y)
    _policy(args)
    support = _support(args)
    sample = _load_sample(args.input, columns, args.r)
    kernel = kernel_by_name(args.kernel, sample.p)
    blocks = (tuple(range(len(args.x))), tuple(range(len(args.x), len(columns))))
    if args.dry_run:
        print(f"Would estimate I({','.join(args.x)}; {','.join(args.y)}) from {sample.n} observations "
              f"with {kernel.family} (p={sample.p})")
        return 0
    gamma = _gamma_for(sample, kernel, args)
    report = mutual_information(sample, kernel, gamma, support, blocks)
    _emit(report.to_json(), args.output, args.verbose)
    return 0


def cmd_kl(args) -> int:
    _policy(args)
    first = _load_sample(args.input, args.columns)
    second = _load_sample(args.input2, args.columns)
    kernel = kernel_by_name(args.kernel, first.p)
    if args.dry_run:
        print(f"Would estimate KL from {first.n} and {second.n} observations with {kernel.family}")
        return 0
    gamma = _gamma_for(first, kernel, args)
    value = kl_divergence(first, second, kernel, gamma)
    _emit(json.dumps({'kl': value, 'gamma_used': gamma, 'n1': first.n, 'n2': second.n},
                     indent=2, sort_keys=True), args.output, args.verbose)
    return 0


def cmd_select_vars(args) -> int:
    if args.gamma is None and args.d1 is None:
        raise ParameterError("one of --gamma or --d1 is required")
    if args.gamma is not None and not args.gamma > 0:
        raise ParameterError(f"bandwidth must be positive, got {args.gamma}")
    columns = list(args.candidates) + list(args.target)
    sample = _load_sample(args.input, columns, args.r)
    candidates = list(range(len(args.candidates)))
    target = list(range(len(args.candidates), len(columns)))
    if args.dry_run:
        print(f"Would rank subsets of size {args.size} of {', '.join(args.candidates)} "
              f"against {', '.join(args.target)} on {sample.n} observations")
        return 0
    kernel = None
    if args.kernel not in ('joe', 'piecewise_joe'):
        kernel = kernel_by_name(args.kernel)
    frame = select_variables(sample, target, candidates, args.size, kernel=kernel, gamma=args.gamma,
                             d1=args.d1, names=columns, n_jobs=args.n_jobs,
                             bandwidth=args.bandwidth_mode)
    _emit_frame(frame, args.output, args.verbose)
    return 0


def _experiment_spec(args):
    spec = load_experiment_spec(args.spec)
    overrides = {}
    if args.replications is not None:
        overrides['replications'] = args.replications
    if args.seed is not None:
        overrides['seed'] = args.seed
    if args.n_jobs is not None:
        overrides['n_jobs'] = args.n_jobs
    return dataclasses.replace(spec, **overrides) if overrides else spec


def cmd_simulate(args) -> int:
    spec = _experiment_spec(args)
    if args.dry_run:
        cells = spec.cells()
        print(f"Would run '{spec.name}': {len(cells)} cells x {spec.replications} replications "
              f"of the {spec.estimator} estimator (seed {spec.seed})")
        return 0
    rows = run_experiment(spec, verbose=args.verbose)
    if args.db:
        run_id = ResultsDatabase(args.db).save_experiment(spec, rows)
        if args.verbose:
            print(f"Stored run {run_id} in {args.db}")
    if args.output:
        rows_to_csv(rows, args.output)
    else:
        print(format_table(rows_to_frame(rows), ['scheme', 'rho', 'n', 'k', 'r', 'bias', 'mse',
                                                 'mean_cv', 'mean_mse_hat', 'failures']))
    return 0


def cmd_tune_d1(args) -> int:
    spec = _experiment_spec(args)
    lo, hi, step = args.grid if args.grid else (D1_GRID[0], D1_GRID[-1], 0.05)
    if step <= 0 or hi < lo:
        raise ParameterError(f"invalid d1 grid {lo}..{hi} step {step}")
    grid = np.round(np.arange(lo, hi + 1e-9, step), 4)
    if args.dry_run:
        print(f"Would tune d1 over {len(grid)} values for {len(spec.cells())} cells "
              f"x {spec.replications} replications")
        return 0
    _emit_frame(tune_d1(spec, grid, verbose=args.verbose), args.output, args.verbose)
    return 0


def cmd_re_approx(args) -> int:
    tables = BandwidthTables(args.tables)
    kernel = kernel_by_name(args.kernel)
    for rho in args.rhos:
        for k in args.ks:
            for scheme in args.schemes:
                tables.re_constant(scheme, k, rho)
    if args.dry_run:
        print(f"Would compute {len(args.rhos) * len(args.ns) * len(args.ks) * len(args.schemes)} "
              f"relative efficiencies with {kernel.family}")
        return 0
    frame = relative_efficiency_grid(args.rhos, args.ns, args.ks, args.schemes, kernel, tables, args.verbose)
    _emit_frame(frame, args.output, args.verbose)
    return 0


def cmd_population_entropy(args) -> int:
    population = FinitePopulation.from_csv(args.population, args.columns)
    columns = list(population.columns)
    target = _column_index(args.target, columns)
    if args.gamma is None and args.d1 is None:
        raise ParameterError("one of --gamma or --d1 is required")
    if args.gamma is not None and not args.gamma > 0:
        raise ParameterError(f"bandwidth must be positive, got {args.gamma}")

    if args.study:
        if args.gamma is not None:
            raise ParameterError("--gamma cannot be combined with --study; resamples take the rule bandwidth from --d1")
        designs = [tuple(int(v) for v in d.split(',')) for d in args.designs]
        if args.dry_run:
            print(f"Would resample {population.size} rows with designs {designs} x {args.replications}")
            return 0
        rows = finite_population_study(
            population, designs, args.replications, args.seed if args.seed is not None else 0,
            rank_by=_column_index(args.rank_by, columns), target=target, kernel=args.kernel,
            d1=args.d1, mi_d1=args.mi_d1, population_d1=args.population_d1,
            population_mi_d1=args.population_mi_d1, n_jobs=args.n_jobs,
            verbose=args.verbose,
        )
        _emit_frame(rows_to_frame(rows), args.output, args.verbose)
        return 0

    if args.dry_run:
        print(f"Would compute the plug-in entropy of {columns[target]} over {population.size} rows")
        return 0
    rows_1d = population.rows[:, [target]]
    H_N = entropy_population(rows_1d, kernel_by_name(args.kernel, 1), args.gamma, d1=args.d1)
    result = {'column': columns[target], 'N': population.size, 'H': H_N}
    if args.mi_with:
        other = _column_index(args.mi_with, columns)
        pair = population.rows[:, [target, other]]
        kernel = kernel_by_name(args.kernel, 2)
        gamma = args.gamma
        if gamma is None:
            gamma = BandwidthPolicy.rule(args.mi_d1).resolve(RankedSetSample.from_srs(pair), kernel)
        report = population_mutual_information(pair, kernel, gamma)
        result.update({'with': columns[other], 'I': report.I_hat, 'I_std': report.I_std, 'mi_gamma': gamma})
    _emit(json.dumps(result, indent=2, sort_keys=True), args.output, args.verbose)
    return 0


# --------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------

def _common(parser: argparse.ArgumentParser):
    parser.add_argument('--output', '-o', help='Write results to this file instead of stdout')
    parser.add_argument('--dry-run', action='store_true', help='Validate the configuration without computing')
    parser.add_argument('--verbose', '-v', action='store_true', help='Verbose output')


def _bandwidth(parser: argparse.ArgumentParser, cv: bool = True):
    parser.add_argument('--gamma', type=float, help='Fixed bandwidth')
    parser.add_argument('--d1', type=float, help='Constant of the IQR bandwidth rule')
    if cv:
        parser.add_argument('--cv-grid', action='store_true', help='Select the bandwidth by cross-validation')
        parser.add_argument('--grid', type=float, nargs='+',
                            help='Explicit CV grid (default: around the rule)')


def _support_flags(parser: argparse.ArgumentParser):
    parser.add_argument('--support', choices=['all', 'rectangle', 'density_floor'], default='all',
                        help='Support set trimming the entropy sum')
    parser.add_argument('--lo', type=float, nargs='+', help='Rectangle lower corner')
    parser.add_argument('--hi', type=float, nargs='+', help='Rectangle upper corner')
    parser.add_argument('--eps', type=float, help='Density floor')


def _experiment_flags(parser: argparse.ArgumentParser):
    parser.add_argument('--spec', required=True, help='Experiment spec (JSON or key = value text)')
    parser.add_argument('--replications', '-R', type=int, help='Override the replication count')
    parser.add_argument('--seed', type=int, help='Override the master seed')
    parser.add_argument('--n-jobs', type=int, help='Worker processes')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='rsentropy',
        description='Entropy, mutual information and KL estimation from ranked set samples'
    )
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('sample', help='Draw a ranked set sample to CSV')
    source = p.add_mutually_exclusive_group()
    source.add_argument('--parent', default='bivariate_normal', help='Parent model name')
    source.add_argument('--population', help='Finite population CSV (drawn with replacement by default)')
    p.add_argument('--rho', type=float, help='Correlation of the bivariate normal parent')
    p.add_argument('--columns', nargs='+', help='Population columns to keep')
    p.add_argument('-k', type=int, required=True, help='Set size')
    p.add_argument('-m', type=int, required=True, help='Cycles')
    p.add_argument('-r', type=int, default=1, help='Ranking stages')
    p.add_argument('--rank-by', default='0', help='Ranking coordinate (index or column name)')
    p.add_argument('--noise-sd', type=float, default=0.0, help='Judgement ranking noise')
    p.add_argument('--without-replacement', action='store_true',
                   help='Draw population units without replacement')
    p.add_argument('--seed', type=int, default=0, help='Master seed')
    _common(p)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser('entropy', help='Entropy of a ranked set sample')
    p.add_argument('--input', required=True, help='Sample CSV')
    p.add_argument('--columns', nargs='+', help='Columns forming the variable')
    p.add_argument('-r', type=int, default=1, help='Ranking stages used to draw the sample')
    p.add_argument('--rank-by', type=int, default=0, help='Ranking coordinate used to draw the sample')
    p.add_argument('--kernel', default='gaussian', help='gaussian or joe')
    p.add_argument('--no-diagnostics', action='store_true', help='Skip CV and MSE diagnostics')
    _bandwidth(p)
    _support_flags(p)
    _common(p)
    p.set_defaults(func=cmd_entropy)

    p = sub.add_parser('mi', help='Mutual information between two column blocks')
    p.add_argument('--input', required=True, help='Sample CSV')
    p.add_argument('--x', nargs='+', required=True, help='First block of columns')
    p.add_argument('--y', nargs='+', required=True, help='Second block of columns')
    p.add_argument('-r', type=int, default=1, help='Ranking stages used to draw the sample')
    p.add_argument('--kernel', default='joe', help='gaussian or joe')
    _bandwidth(p)
    _support_flags(p)
    _common(p)
    p.set_defaults(func=cmd_mi)

    p = sub.add_parser('kl', help='Kullback-Leibler divergence between two samples')
    p.add_argument('--input', required=True, help='First sample CSV')
    p.add_argument('--input2', required=True, help='Second sample CSV')
    p.add_argument('--columns', nargs='+', help='Columns forming the variable')
    p.add_argument('--kernel', default='gaussian', help='gaussian or joe')
    _bandwidth(p)
    _common(p)
    p.set_defaults(func=cmd_kl)

    p = sub.add_parser('select-vars', help='Rank candidate subsets by standardized MI with a target')
    p.add_argument('--input', required=True, help='Sample CSV')
    p.add_argument('--target', nargs='+', required=True, help='Target column(s)')
    p.add_argument('--candidates', nargs='+', required=True, help='Candidate columns')
    p.add_argument('--size', type=int, default=2, help='Subset size')
    p.add_argument('-r', type=int, default=1, help='Ranking stages used to draw the sample')
    p.add_argument('--kernel', default='joe', help='gaussian or joe')
    p.add_argument('--bandwidth-mode', choices=BANDWIDTH_MODES, default=JOINT_BANDWIDTH,
                   help='Apply the rule once at the joint dimension or per entropy block')
    p.add_argument('--n-jobs', type=int, default=1, help='Worker processes')
    _bandwidth(p, cv=False)
    _common(p)
    p.set_defaults(func=cmd_select_vars)

    p = sub.add_parser('simulate', help='Run a Monte Carlo experiment')
    _experiment_flags(p)
    p.add_argument('--db', help='Store the run in this SQLite database')
    _common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser('tune-d1', help='Tune the bandwidth rule constant by simulation')
    _experiment_flags(p)
    p.add_argument('--grid', type=float, nargs=3, metavar=('LO', 'HI', 'STEP'), help='d1 grid')
    _common(p)
    p.set_defaults(func=cmd_tune_d1)

    p = sub.add_parser('re-approx', help='Approximate relative efficiencies against SRS')
    p.add_argument('--rhos', type=float, nargs='+', default=[0.9, 0.8])
    p.add_argument('--ns', type=int, nargs='+', default=[15, 30, 45])
    p.add_argument('--ks', type=int, nargs='+', default=[3, 5])
    p.add_argument('--schemes', nargs='+', choices=['rss', 'drss'], default=['rss', 'drss'])
    p.add_argument('--kernel', default='gaussian', help='gaussian or joe')
    p.add_argument('--tables', help='Bandwidth tables JSON (package tables by default)')
    _common(p)
    p.set_defaults(func=cmd_re_approx)

    p = sub.add_parser('population-entropy', help='Plug-in entropy and MI of a finite population')
    p.add_argument('--population', required=True, help='Population CSV')
    p.add_argument('--columns', nargs='+', help='Columns to load')
    p.add_argument('--target', default='0', help='Column whose entropy is computed')
    p.add_argument('--mi-with', help='Also compute I(target; this column)')
    p.add_argument('--mi-d1', type=float, default=1.0, help='Rule constant of the joint MI bandwidth')
    p.add_argument('--kernel', default='gaussian', help='gaussian or joe')
    p.add_argument('--study', action='store_true', help='Run the resampling study instead')
    p.add_argument('--designs', nargs='+', default=['3,10,1', '3,10,2', '1,30,1'], help='k,m,r triples')
    p.add_argument('--rank-by', default='1', help='Ranking column for the study')
    p.add_argument('--replications', '-R', type=int, default=2000)
    p.add_argument('--seed', type=int, help='Master seed for the study')
    p.add_argument('--population-d1', type=float,
                   help='Rule constant of the population entropy target (default: --d1)')
    p.add_argument('--population-mi-d1', type=float,
                   help='Rule constant of the population MI target (default: --mi-d1)')
    p.add_argument('--n-jobs', type=int, help='Worker processes')
    _bandwidth(p, cv=False)
    _common(p)
    p.set_defaults(func=cmd_population_entropy)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    try:
        return args.func(args)
    except ParameterError as e:
        print(f"Error: {e}", file=sys.stderr)
        return 2
    except (RSEntropyError, OSError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return 1


if __name__ == '__main__':
    sys.exit(main())
