"""
Monte Carlo harness for the entropy, mutual information and KL estimators.

Every replication draws its sample from a seed sequence keyed by
(master seed, cell index, replication index), so results do not depend on the
number of workers. Aggregates are accumulated in replication order.
"""

import time
import warnings
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from .config import BandwidthTables, default_n_jobs
from .designs import Design, FinitePopulation, PopulationSource, RankedSetSample, draw_mrss
from .divergence import kl_divergence, mutual_information, standardized_mi
from .entropy import alpha_hats, bandwidth_rule, cv_gamma, entropy_rss, gated_mse
from .errors import ConfigurationError, NumericalError, ParameterError, RSEntropyError, RSEntropyWarning
from .kernels import kernel_by_name
from .parents import BivariateNormal, MultivariateNormal, Normal, ParentModel, parent_from_dict

ENTROPY = "entropy"
MI = "mi"
STD_MI = "std_mi"
KL = "kl"
ESTIMATORS = (ENTROPY, MI, STD_MI, KL)

FAILURE_THRESHOLD = 0.01
D1_GRID = tuple(np.round(np.arange(0.5, 2.0 + 1e-9, 0.05), 2))


@dataclass
class ExperimentSpec:
    """A simulation study over a grid of designs and correlations."""
    name: str = "experiment"
    parent: Dict[str, Any] = field(default_factory=lambda: {"name": "bivariate_normal"})
    rhos: List[float] = field(default_factory=lambda: [0.9])
    designs: List[Tuple[int, int, int]] = field(default_factory=lambda: [(3, 10, 1)])
    rank_by: int = 1
    target: List[int] = field(default_factory=lambda: [0])
    blocks: List[List[int]] = field(default_factory=lambda: [[0], [1]])
    kernel: str = "scaled_gaussian"
    estimator: str = ENTROPY
    d1: Optional[float] = None  # None: look up the tabulated constant per cell
    diagnostics: bool = True
    kl_shift: float = 1.0
    replications: int = 2000
    seed: int = 0
    n_jobs: Optional[int] = None
    output: Optional[str] = None

    def __post_init__(self):
        if self.replications < 1:
            raise ParameterError(f"replications must be >= 1, got {self.replications}")
        if self.estimator not in ESTIMATORS:
            raise ParameterError(f"Unknown estimator: {self.estimator!r}")
        self.designs = [tuple(int(v) for v in d) for d in self.designs]
        for k, m, r in self.designs:
            Design(k=k, m=m, r=r, rank_by=self.rank_by)
        if self.d1 is not None and not self.d1 > 0:
            raise ParameterError(f"d1 must be positive, got {self.d1}")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ExperimentSpec':
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigurationError(f"unknown experiment spec key(s): {', '.join(unknown)}")
        return cls(**data)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['designs'] = [list(d) for d in self.designs]
        return data

    def cells(self) -> List[Tuple[Optional[float], Design]]:
        """(rho, design) pairs in a fixed order; rho is None for parents without one."""
        rhos = self.rhos if self.parent.get("name") == "bivariate_normal" else [None]
        return [
            (rho, Design(k=k, m=m, r=r, rank_by=self.rank_by))
            for rho in rhos for (k, m, r) in self.designs
        ]

    def build_parent(self, rho: Optional[float]) -> ParentModel:
        config = dict(self.parent)
        if rho is not None:
            config['rho'] = rho
        return parent_from_dict(config)


@dataclass
class AggregateRow:
    """Summary of the replications of one estimator in one grid cell."""
    estimator: str
    scheme: str
    rho: Optional[float]
    n: int
    k: int
    m: int
    r: int
    d1: Optional[float]
    target: float
    mean_estimate: float
    bias: float
    mse: float
    variance: float
    mean_cv: float = float('nan')
    var_cv: float = float('nan')
    mean_mse_hat: float = float('nan')
    var_mse_hat: float = float('nan')
    mean_gamma: float = float('nan')
    replications: int = 0
    failures: int = 0
    clamped: int = 0
    seed: int = 0
    wall_time: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


class RunningMoments:
    """Welford accumulator: count, mean and centred second moment."""

    def __init__(self):
        self.count = 0
        self.mean = 0.0
        self.m2 = 0.0

    def push(self, value: float):
        self.count += 1
        delta = value - self.mean
        self.mean += delta / self.count
        self.m2 += delta * (value - self.mean)

    @property
    def population_variance(self) -> float:
        return self.m2 / self.count if self.count else float('nan')

    @property
    def variance(self) -> float:
        """Unbiased variance; undefined (NaN) below two values."""
        return self.m2 / (self.count - 1) if self.count > 1 else float('nan')


# --------------------------------------------------------------------------
# True values
# --------------------------------------------------------------------------

def _gaussian_cov(parent: ParentModel) -> Optional[np.ndarray]:
    if isinstance(parent, BivariateNormal):
        return np.array([[1.0, parent.rho], [parent.rho, 1.0]])
    if isinstance(parent, MultivariateNormal):
        return parent.cov
    if isinstance(parent, Normal):
        return np.array([[parent.variance]])
    return None


def _gaussian_entropy(cov: np.ndarray) -> float:
    _, logdet = np.linalg.slogdet(cov)
    return float(0.5 * (cov.shape[0] * np.log(2.0 * np.pi * np.e) + logdet))


def true_value(parent: ParentModel, estimator: str, target: Sequence[int],
               blocks: Sequence[Sequence[int]], kl_shift: float = 1.0) -> float:
    """Closed-form value of the estimated quantity for a parent."""
    cov = _gaussian_cov(parent)
    if cov is None:
        if estimator == ENTROPY and parent.dim == 1:
            return parent.entropy()
        raise ConfigurationError(f"no closed-form {estimator} for parent {parent.name}")
    if estimator == ENTROPY:
        return _gaussian_entropy(cov[np.ix_(target, target)])
    if estimator in (MI, STD_MI):
        b1, b2 = list(blocks[0]), list(blocks[1])
        value = (_gaussian_entropy(cov[np.ix_(b1, b1)]) + _gaussian_entropy(cov[np.ix_(b2, b2)])
                 - _gaussian_entropy(cov[np.ix_(b1 + b2, b1 + b2)]))
        return standardized_mi(value) if estimator == STD_MI else value
    sub = cov[np.ix_(target, target)]
    shift = np.full(len(target), kl_shift)
    return float(0.5 * shift @ np.linalg.solve(sub, shift))


# --------------------------------------------------------------------------
# Replications
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class _Settings:
    kernel: str
    target: Tuple[int, ...]
    blocks: Tuple[Tuple[int, ...], Tuple[int, ...]]
    d1: float
    mi_d1: float
    diagnostics: bool
    kl_shift: float


def _entropy_replicate(sample: RankedSetSample, settings: _Settings) -> Dict[str, float]:
    sub = sample.project(settings.target)
    kernel = kernel_by_name(settings.kernel, sub.p)
    gamma = bandwidth_rule(sub, settings.d1, sub.p)
    out = {ENTROPY: entropy_rss(sub, kernel, gamma), 'gamma': gamma}
    if settings.diagnostics and sub.m >= 2:
        cv, d = cv_gamma(sub, kernel, gamma)
        alpha1, alpha2 = alpha_hats(sub, kernel, gamma)
        out['cv'] = cv
        out['mse_hat'] = gated_mse(cv, d, alpha1, alpha2, sub.n)
    return out


def _mi_replicate(sample: RankedSetSample, settings: _Settings) -> Dict[str, float]:
    coordinates = list(settings.blocks[0]) + list(settings.blocks[1])
    joint = sample.project(coordinates)
    kernel = kernel_by_name(settings.kernel, joint.p)
    gamma = bandwidth_rule(joint, settings.mi_d1, joint.p)
    n1 = len(settings.blocks[0])
    blocks = (tuple(range(n1)), tuple(range(n1, joint.p)))
    with warnings.catch_warnings():
        warnings.simplefilter('ignore', RSEntropyWarning)
        report = mutual_information(joint, kernel, gamma, blocks=blocks)
    return {MI: report.I_hat, STD_MI: report.I_std, 'clamped': float(report.clamped), 'mi_gamma': gamma}


def _replicate(
    source: PopulationSource,
    design: Design,
    estimators: Sequence[str],
    settings: _Settings,
    seed: np.random.SeedSequence
) -> Optional[Dict[str, float]]:
    """One replication; None when an estimator fails on the drawn sample."""
    try:
        draw_seed, shift_seed = seed.spawn(2)
        sample = draw_mrss(source, design, draw_seed)
        out: Dict[str, float] = {}
        if ENTROPY in estimators:
            out.update(_entropy_replicate(sample, settings))
        if MI in estimators or STD_MI in estimators:
            out.update(_mi_replicate(sample, settings))
        if KL in estimators:
            other = draw_mrss(source, design, shift_seed).project(settings.target)
            shifted = RankedSetSample(other.design, other.obs + settings.kl_shift)
            first = sample.project(settings.target)
            kernel = kernel_by_name(settings.kernel, first.p)
            gamma = bandwidth_rule(first, settings.d1, first.p)
            out[KL] = kl_divergence(first, shifted, kernel, gamma)
            out['gamma'] = gamma
        return out
    except RSEntropyError:
        return None


def _replication_seed(master: int, cell: int, rep: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(master, spawn_key=(cell, rep))


def run_cell(
    source: PopulationSource,
    design: Design,
    estimators: Sequence[str],
    settings: _Settings,
    targets: Dict[str, float],
    replications: int,
    seed: int,
    cell_index: int,
    rho: Optional[float] = None,
    n_jobs: int = 1
) -> List[AggregateRow]:
    """Run the replications of one cell and aggregate every requested estimator."""
    start = time.perf_counter()
    results = Parallel(n_jobs=n_jobs)(
        delayed(_replicate)(source, design, estimators, settings, _replication_seed(seed, cell_index, rep))
        for rep in range(replications)
    )
    failures = sum(1 for r in results if r is None)
    if failures > FAILURE_THRESHOLD * replications:
        raise NumericalError(
            f"{failures} of {replications} replications failed for {design.scheme} k={design.k} m={design.m}"
        )
    if failures:
        warnings.warn(f"{failures} replication(s) failed and were skipped", RSEntropyWarning)
    ok = [r for r in results if r is not None]

    rows = []
    for estimator in estimators:
        errors, cv, mse_hat, gamma = RunningMoments(), RunningMoments(), RunningMoments(), RunningMoments()
        clamped = 0
        for r in ok:
            errors.push(r[estimator] - targets[estimator])
            if estimator == ENTROPY and 'cv' in r:
                cv.push(r['cv'])
                mse_hat.push(r['mse_hat'])
            gamma.push(r['mi_gamma'] if estimator in (MI, STD_MI) else r['gamma'])
            clamped += int(r.get('clamped', 0.0)) if estimator in (MI, STD_MI) else 0
        bias = errors.mean
        rows.append(AggregateRow(
            estimator=estimator,
            scheme=design.scheme,
            rho=rho,
            n=design.n, k=design.k, m=design.m, r=design.r,
            d1=settings.mi_d1 if estimator in (MI, STD_MI) else settings.d1,
            target=targets[estimator],
            mean_estimate=targets[estimator] + bias,
            bias=bias,
            mse=errors.population_variance + bias ** 2,
            variance=errors.variance,
            mean_cv=cv.mean if cv.count else float('nan'),
            var_cv=cv.variance,
            mean_mse_hat=mse_hat.mean if mse_hat.count else float('nan'),
            var_mse_hat=mse_hat.variance,
            mean_gamma=gamma.mean,
            replications=len(ok),
            failures=failures,
            clamped=clamped,
            seed=seed,
            wall_time=time.perf_counter() - start,
        ))
    return rows


def _resolve_d1(spec: ExperimentSpec, tables: BandwidthTables, design: Design, rho: Optional[float]) -> float:
    if spec.d1 is not None:
        return spec.d1
    if rho is None:
        raise ConfigurationError("d1 must be given for parents without a tabulated correlation")
    if spec.estimator in (MI, STD_MI):
        return tables.mi_d1(design.r, design.k, rho)
    return tables.entropy_d1(design.r, design.k, len(spec.target), rho)


def run_experiment(
    spec: ExperimentSpec,
    tables: BandwidthTables = None,
    verbose: bool = False
) -> List[AggregateRow]:
    """Run every (rho, design) cell of an experiment.

    Args:
        spec: Experiment specification
        tables: Tabulated d1 constants (package tables by default)
        verbose: Print one line per cell

    Returns:
        One AggregateRow per cell, in cell order
    """
    tables = tables if tables is not None else BandwidthTables()
    n_jobs = spec.n_jobs if spec.n_jobs is not None else default_n_jobs()
    rows = []
    for cell_index, (rho, design) in enumerate(spec.cells()):
        parent = spec.build_parent(rho)
        d1 = _resolve_d1(spec, tables, design, rho)
        settings = _Settings(
            kernel=spec.kernel,
            target=tuple(spec.target),
            blocks=(tuple(spec.blocks[0]), tuple(spec.blocks[1])),
            d1=d1, mi_d1=d1,
            diagnostics=spec.diagnostics,
            kl_shift=spec.kl_shift,
        )
        truth = true_value(parent, spec.estimator, spec.target, spec.blocks, spec.kl_shift)
        targets = {spec.estimator: truth}
        cell_rows = run_cell(parent, design, [spec.estimator], settings, targets,
                             spec.replications, spec.seed, cell_index, rho, n_jobs)
        rows.extend(cell_rows)
        if verbose:
            row = cell_rows[0]
            print(f"  rho={rho} {design.scheme} k={design.k} m={design.m}: "
                  f"MSE={row.mse:.4f} bias={row.bias:+.4f} ({row.wall_time:.1f}s)")
    if spec.output:
        rows_to_csv(rows, spec.output)
    return rows


def d1_profile(spec: ExperimentSpec, grid: Sequence[float] = D1_GRID, verbose: bool = False) -> pd.DataFrame:
    """Simulated MSE for every (cell, d1); replications share seeds across d1 values."""
    grid = sorted(float(g) for g in grid)
    if not grid:
        raise ParameterError("d1 grid must be non-empty")
    records = []
    base = {**spec.to_dict(), 'diagnostics': False, 'output': None}
    for d1 in grid:
        trial = ExperimentSpec.from_dict({**base, 'd1': d1})
        for row in run_experiment(trial):
            records.append({'rho': row.rho, 'k': row.k, 'm': row.m, 'r': row.r, 'd1': d1, 'mse': row.mse})
        if verbose:
            print(f"  d1={d1:.2f} done")
    return pd.DataFrame(records)


def tune_d1(spec: ExperimentSpec, grid: Sequence[float] = D1_GRID, verbose: bool = False) -> pd.DataFrame:
    """d1 minimising the simulated MSE in every cell; ties go to the smaller d1."""
    profile = d1_profile(spec, grid, verbose)
    best = []
    for key, group in profile.groupby(['rho', 'k', 'm', 'r'], sort=False, dropna=False):
        group = group.sort_values('d1', kind='mergesort')
        pick = group.iloc[int(np.argmin(group['mse'].to_numpy()))]
        best.append({'rho': key[0], 'k': key[1], 'm': key[2], 'r': key[3],
                     'best_d1': float(pick['d1']), 'mse': float(pick['mse'])})
    return pd.DataFrame(best)


def finite_population_study(
    population,
    designs: Sequence[Tuple[int, int, int]] = ((3, 10, 1), (3, 10, 2), (1, 30, 1)),
    replications: int = 2000,
    seed: int = 0,
    columns: Optional[Sequence[str]] = None,
    rank_by: int = 0,
    target: int = 0,
    kernel: str = "scaled_gaussian",
    d1: float = 1.45,
    mi_d1: float = 1.0,
    population_d1: Optional[float] = None,
    population_mi_d1: Optional[float] = None,
    n_jobs: Optional[int] = None,
    verbose: bool = False
) -> List[AggregateRow]:
    """Resampling study of H, I and the standardized I on a finite population.

    Samples are drawn with replacement; targets are the N-point plug-in values
    of the whole population (computed with population_d1 / population_mi_d1,
    defaulting to d1 / mi_d1).

    Args:
        population: FinitePopulation, or a CSV path read with ``columns``
        designs: (k, m, r) triples; k=1 gives the SRS column
        replications: Replications per design
        seed: Master seed
        columns: Columns to load from the CSV (first two form the MI pair)
        rank_by: Ranking coordinate
        target: Coordinate whose entropy is estimated
        kernel: Kernel name
        d1: Rule constant for the entropy bandwidth
        mi_d1: Rule constant for the joint MI bandwidth
        n_jobs: Worker count
        verbose: Print one line per design

    Raises:
        IngestionError: If the CSV misses requested columns
    """
    from .divergence import entropy_population, population_mutual_information

    if replications < 1:
        raise ParameterError(f"replications must be >= 1, got {replications}")
    if not isinstance(population, FinitePopulation):
        population = FinitePopulation.from_csv(population, columns)
    if population.dim < 2:
        raise ParameterError("the population needs two coordinates for the MI pair")
    n_jobs = n_jobs if n_jobs is not None else default_n_jobs()
    other = 1 if target == 0 else 0
    blocks = ((target,), (other,))

    rows_1d = population.rows[:, [target]]
    kern_1d = kernel_by_name(kernel, 1)
    H_N = entropy_population(rows_1d, kern_1d, d1=population_d1 or d1)
    pair = population.rows[:, [target, other]]
    gamma_N = bandwidth_rule(RankedSetSample.from_srs(pair), population_mi_d1 or mi_d1, 2)
    with warnings.catch_warnings():
        warnings.simplefilter('ignore', RSEntropyWarning)
        mi_N = population_mutual_information(pair, kernel_by_name(kernel, 2), gamma_N)
    targets = {ENTROPY: H_N, MI: mi_N.I_hat, STD_MI: mi_N.I_std}
    if verbose:
        print(f"Population targets: H={H_N:.3f} I={mi_N.I_hat:.3f} I_std={mi_N.I_std:.3f}")

    settings = _Settings(kernel=kernel, target=(target,), blocks=blocks, d1=d1, mi_d1=mi_d1,
                         diagnostics=False, kl_shift=0.0)
    rows = []
    for cell_index, (k, m, r) in enumerate(designs):
        design = Design(k=k, m=m, r=r, rank_by=rank_by, replacement=True)
        cell_rows = run_cell(population, design, [ENTROPY, MI, STD_MI], settings, targets,
                             replications, seed, cell_index, None, n_jobs)
        rows.extend(cell_rows)
        if verbose:
            summary = ", ".join(f"{row.estimator} MSE={row.mse:.3f}" for row in cell_rows)
            print(f"  {design.scheme}: {summary}")
    return rows


def rows_to_csv(rows: Sequence[AggregateRow], path: str):
    """Write aggregate rows as CSV (one column per field)."""
    pd.DataFrame([row.to_dict() for row in rows]).to_csv(path, index=False)
