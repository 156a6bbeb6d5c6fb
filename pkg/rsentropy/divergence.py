"""
Mutual information, standardized mutual information and Kullback-Leibler
divergence built on the ranked set sample entropy estimator.
"""

import itertools
import json
import warnings
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from .designs import FinitePopulation, RankedSetSample, as_sample
from .density import kde_values
from .entropy import SupportSpec, bandwidth_rule, entropy_rss
from .errors import DomainError, EvaluationError, ParameterError, RSEntropyWarning
from .kernels import KernelSpec, piecewise_joe

JOINT_BANDWIDTH = "joint"
BLOCK_BANDWIDTH = "per_block"
BANDWIDTH_MODES = (JOINT_BANDWIDTH, BLOCK_BANDWIDTH)


@dataclass
class MiReport:
    """Mutual information estimate with its component entropies."""
    I_hat: float
    I_std: float
    H1: float
    H2: float
    H_joint: float
    gamma_used: float
    I_raw: float = 0.0  # before clamping at zero
    clamped: bool = False
    blocks: Tuple[Tuple[int, ...], Tuple[int, ...]] = ((0,), (1,))
    n: int = 0
    k: int = 0
    m: int = 0
    r: int = 0
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        data = asdict(self)
        data['blocks'] = [list(b) for b in self.blocks]
        return data

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def standardized_mi(I: float) -> float:
    """1 - exp(-2 I), a value in [0, 1).

    Raises:
        DomainError: If I is negative
    """
    if I < 0:
        raise DomainError(f"mutual information must be non-negative, got {I}")
    # 1 - exp(-2I) rounds to 1 once I is past ~18.5
    return float(min(-np.expm1(-2.0 * I), np.nextafter(1.0, 0.0)))


def _check_blocks(p: int, blocks) -> Tuple[Tuple[int, ...], Tuple[int, ...]]:
    if blocks is None:
        if p != 2:
            raise ParameterError(f"blocks must be given for p={p}")
        return (0,), (1,)
    b1, b2 = (tuple(int(c) for c in b) for b in blocks)
    if not b1 or not b2:
        raise ParameterError("both blocks must be non-empty")
    if set(b1) & set(b2):
        raise ParameterError(f"blocks overlap: {b1} and {b2}")
    if sorted(b1 + b2) != list(range(p)):
        raise ParameterError(f"blocks {b1} and {b2} do not partition coordinates 0..{p - 1}")
    return b1, b2


def mutual_information(
    sample,
    kernel: KernelSpec,
    gamma: float,
    S: Optional[SupportSpec] = None,
    blocks: Optional[Sequence[Sequence[int]]] = None
) -> MiReport:
    """I_hat = H_n(X1) + H_n(X2) - H_n(X) with one kernel k0 and one bandwidth.

    The blocks are coordinate lists partitioning the sample's coordinates;
    marginal entropies use the projections of the same ranked set sample.
    A negative estimate is clamped to 0 with an RSEntropyWarning.

    Raises:
        ParameterError: If the blocks overlap or miss coordinates
    """
    sample = as_sample(sample)
    S = S if S is not None else SupportSpec.all_points()
    b1, b2 = _check_blocks(sample.p, blocks)

    H1 = entropy_rss(sample.project(b1), kernel, gamma, S.project(b1))
    H2 = entropy_rss(sample.project(b2), kernel, gamma, S.project(b2))
    H = entropy_rss(sample, kernel, gamma, S)
    raw = H1 + H2 - H
    clamped = raw < 0
    if clamped:
        warnings.warn(f"negative mutual information estimate {raw:.4g} clamped to 0", RSEntropyWarning)
    I_hat = max(raw, 0.0)
    return MiReport(
        I_hat=I_hat,
        I_std=standardized_mi(I_hat),
        H1=H1,
        H2=H2,
        H_joint=H,
        gamma_used=gamma,
        I_raw=raw,
        clamped=bool(clamped),
        blocks=(b1, b2),
        n=sample.n, k=sample.k, m=sample.m, r=sample.design.r,
    )


def mutual_information_rule(
    sample,
    d1: float,
    kernel: Optional[KernelSpec] = None,
    S: Optional[SupportSpec] = None,
    blocks: Optional[Sequence[Sequence[int]]] = None
) -> MiReport:
    """I_hat with every entropy at its own rule bandwidth and dimension.

    Each of H_n(X1), H_n(X2) and H_n(X) takes the bandwidth rule with constant
    d1 applied to its own projection; without a kernel each uses the piecewise
    kernel of its own dimension. A marginal entropy is therefore the same
    whatever the other block is. gamma_used is the joint bandwidth and the
    block bandwidths are kept in extras.

    Raises:
        ParameterError: If the blocks overlap or miss coordinates
    """
    sample = as_sample(sample)
    S = S if S is not None else SupportSpec.all_points()
    b1, b2 = _check_blocks(sample.p, blocks)

    def own(coords):
        part = sample.project(coords)
        kern = kernel if kernel is not None else piecewise_joe(len(coords))
        g = bandwidth_rule(part, d1, part.p)
        return entropy_rss(part, kern, g, S.project(coords)), g

    H1, g1 = own(b1)
    H2, g2 = own(b2)
    H, g = own(tuple(range(sample.p)))
    raw = H1 + H2 - H
    clamped = raw < 0
    if clamped:
        warnings.warn(f"negative mutual information estimate {raw:.4g} clamped to 0", RSEntropyWarning)
    I_hat = max(raw, 0.0)
    return MiReport(
        I_hat=I_hat,
        I_std=standardized_mi(I_hat),
        H1=H1,
        H2=H2,
        H_joint=H,
        gamma_used=g,
        I_raw=raw,
        clamped=bool(clamped),
        blocks=(b1, b2),
        n=sample.n, k=sample.k, m=sample.m, r=sample.design.r,
        extras={'gamma_1': g1, 'gamma_2': g2},
    )


def kl_divergence(sample1, sample2, kernel: KernelSpec, gamma: float) -> float:
    """(1/n1) sum log(f1(X1) / f2(X1)) over the observations of sample1.

    Raises:
        ParameterError: If the dimensions differ or gamma <= 0
        EvaluationError: If the second density vanishes at an observation of sample1
    """
    x1 = as_sample(sample1).points()
    x2 = as_sample(sample2).points()
    if x1.shape[1] != x2.shape[1]:
        raise ParameterError(f"samples have different dimensions ({x1.shape[1]} and {x2.shape[1]})")
    f1 = kde_values(kernel, gamma, x1, x1)
    f2 = kde_values(kernel, gamma, x2, x1)
    zero = f2 <= 0
    if zero.any():
        raise EvaluationError("second density estimate is zero at evaluation points", int(zero.sum()))
    return float(np.mean(np.log(f1) - np.log(f2)))


def _population_sample(population) -> RankedSetSample:
    if isinstance(population, FinitePopulation):
        rows = population.rows
    else:
        rows = np.asarray(population, dtype=float)
    sample = RankedSetSample.from_srs(rows)
    if sample.n < 2:
        raise ParameterError(f"population needs at least 2 rows, got {sample.n}")
    return sample


def entropy_population(
    population,
    kernel: KernelSpec,
    gamma: Optional[float] = None,
    S: Optional[SupportSpec] = None,
    d1: Optional[float] = None
) -> float:
    """Plug-in entropy -(1/N) sum log f_N(X_i) I_S(X_i) of a whole finite population.

    When gamma is omitted it is taken from the bandwidth rule with constant d1
    applied to the N population rows.
    """
    sample = _population_sample(population)
    if gamma is None:
        if d1 is None:
            raise ParameterError("either gamma or d1 is required")
        gamma = bandwidth_rule(sample, d1, sample.p)
    return entropy_rss(sample, kernel, gamma, S)


def population_mutual_information(
    population,
    kernel: KernelSpec,
    gamma: float,
    S: Optional[SupportSpec] = None,
    blocks: Optional[Sequence[Sequence[int]]] = None
) -> MiReport:
    """N-point plug-in mutual information of a finite population (target of resampling studies)."""
    return mutual_information(_population_sample(population), kernel, gamma, S, blocks)


def _subset_mi(sample, subset, target, kernel, gamma, d1, S, bandwidth):
    coordinates = list(subset) + list(target)
    joint = sample.project(coordinates)
    blocks = (tuple(range(len(subset))), tuple(range(len(subset), len(coordinates))))
    S = S.project(coordinates) if S else None
    with warnings.catch_warnings():
        warnings.simplefilter('ignore', RSEntropyWarning)
        if gamma is None and bandwidth == BLOCK_BANDWIDTH:
            return mutual_information_rule(joint, d1, kernel, S, blocks)
        kern = kernel if kernel is not None else piecewise_joe(len(coordinates))
        g = gamma if gamma is not None else bandwidth_rule(joint, d1, joint.p)
        return mutual_information(joint, kern, g, S, blocks)


def select_variables(
    sample,
    target: Sequence[int],
    candidates: Sequence[int],
    size: int,
    kernel: Optional[KernelSpec] = None,
    gamma: Optional[float] = None,
    d1: Optional[float] = None,
    S: Optional[SupportSpec] = None,
    names: Optional[Sequence[str]] = None,
    n_jobs: int = 1,
    bandwidth: str = JOINT_BANDWIDTH
) -> pd.DataFrame:
    """Rank every size-``size`` subset of candidate coordinates by standardized MI with the target.

    For each subset the joint sample is (subset, target). A fixed gamma is used
    for all three entropies. Otherwise ``bandwidth`` picks how the rule with
    constant d1 is applied: 'joint' takes one rule bandwidth at the joint
    dimension, 'per_block' gives each entropy the rule at its own dimension
    (see mutual_information_rule). The kernel defaults to the piecewise kernel
    of the dimension its bandwidth was computed at.

    Returns:
        DataFrame sorted by I_std (descending) with columns subset, I_hat, I_std,
        H_subset, H_target, H_joint, gamma, gamma_subset, gamma_target, clamped
    """
    sample = as_sample(sample)
    target = list(target)
    candidates = list(candidates)
    if not 1 <= size <= len(candidates):
        raise ParameterError(f"subset size must lie in 1..{len(candidates)}, got {size}")
    if set(target) & set(candidates):
        raise ParameterError("target and candidate coordinates overlap")
    if gamma is None and d1 is None:
        raise ParameterError("either gamma or d1 is required")
    if bandwidth not in BANDWIDTH_MODES:
        raise ParameterError(f"bandwidth must be one of {BANDWIDTH_MODES}, got {bandwidth!r}")
    names = list(names) if names else [f"x{c + 1}" for c in range(sample.p)]

    subsets: List[Tuple[int, ...]] = list(itertools.combinations(candidates, size))
    reports = Parallel(n_jobs=n_jobs)(
        delayed(_subset_mi)(sample, subset, target, kernel, gamma, d1, S, bandwidth) for subset in subsets
    )
    frame = pd.DataFrame({
        'subset': [",".join(names[c] for c in subset) for subset in subsets],
        'I_hat': [r.I_hat for r in reports],
        'I_std': [r.I_std for r in reports],
        'H_subset': [r.H1 for r in reports],
        'H_target': [r.H2 for r in reports],
        'H_joint': [r.H_joint for r in reports],
        'gamma': [r.gamma_used for r in reports],
        'gamma_subset': [r.extras.get('gamma_1', r.gamma_used) for r in reports],
        'gamma_target': [r.extras.get('gamma_2', r.gamma_used) for r in reports],
        'clamped': [r.clamped for r in reports],
    })
    return frame.sort_values('I_std', ascending=False, kind='mergesort').reset_index(drop=True)
