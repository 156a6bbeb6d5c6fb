"""
Entropy estimation from ranked set samples.

H_n = -(1/n) sum log f_n(X_[i]j) I_S(X_[i]j), with f_n the product-kernel
density estimate of the whole sample. Bandwidths come from the IQR rule or
from leave-one-cycle-out cross-validation; the plug-in MSE estimator combines
the cross-validation statistics with the second-order terms alpha1 and alpha2.
"""

import json
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from .designs import RankedSetSample, as_sample
from .density import cycle_sums, kde_values, kernel_matrix
from .errors import EvaluationError, ParameterError
from .kernels import KernelSpec

ALL_POINTS = "all"
RECTANGLE = "rectangle"
DENSITY_FLOOR = "density_floor"

DEFAULT_GRID_SIZE = 25


@dataclass(frozen=True)
class SupportSpec:
    """The support set S used to trim the entropy sum."""
    mode: str = ALL_POINTS
    lo: Optional[Tuple[float, ...]] = None
    hi: Optional[Tuple[float, ...]] = None
    eps: Optional[float] = None

    def __post_init__(self):
        if self.mode == RECTANGLE:
            if self.lo is None or self.hi is None or len(self.lo) != len(self.hi):
                raise ParameterError("rectangle support needs lo and hi of equal length")
            if not all(a < b for a, b in zip(self.lo, self.hi)):
                raise ParameterError(f"rectangle needs lo < hi coordinate-wise, got {self.lo}, {self.hi}")
        elif self.mode == DENSITY_FLOOR:
            if self.eps is None or not self.eps > 0:
                raise ParameterError(f"density floor must be positive, got {self.eps}")
        elif self.mode != ALL_POINTS:
            raise ParameterError(f"Unknown support mode: {self.mode!r}")

    @classmethod
    def all_points(cls) -> 'SupportSpec':
        return cls()

    @classmethod
    def rectangle(cls, lo: Sequence[float], hi: Sequence[float]) -> 'SupportSpec':
        return cls(RECTANGLE, tuple(float(v) for v in lo), tuple(float(v) for v in hi))

    @classmethod
    def density_floor(cls, eps: float) -> 'SupportSpec':
        return cls(DENSITY_FLOOR, eps=float(eps))

    def indicator(self, points: np.ndarray, density: Optional[np.ndarray] = None) -> np.ndarray:
        """I_S at each row of points; DensityFloor needs the density values at those rows."""
        if self.mode == ALL_POINTS:
            return np.ones(points.shape[0], dtype=bool)
        if self.mode == RECTANGLE:
            if points.shape[1] != len(self.lo):
                raise ParameterError(f"rectangle has {len(self.lo)} coordinates, data has {points.shape[1]}")
            lo, hi = np.asarray(self.lo), np.asarray(self.hi)
            return np.all((points >= lo) & (points <= hi), axis=1)
        return np.asarray(density) >= self.eps

    def project(self, coordinates: Sequence[int]) -> 'SupportSpec':
        """Restrict a rectangle to a subset of coordinates; other modes are unchanged."""
        if self.mode != RECTANGLE:
            return self
        return SupportSpec.rectangle([self.lo[c] for c in coordinates], [self.hi[c] for c in coordinates])


FIXED = "fixed"
RULE = "rule"
CV_GRID = "cv"


@dataclass(frozen=True)
class BandwidthPolicy:
    """How the bandwidth is chosen: a fixed value, the IQR rule, or a CV grid search."""
    mode: str = RULE
    gamma: Optional[float] = None
    d1: Optional[float] = None
    grid: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        if self.mode == FIXED:
            if self.gamma is None or not self.gamma > 0:
                raise ParameterError(f"bandwidth must be positive, got {self.gamma}")
        elif self.mode == RULE:
            if self.d1 is None or not self.d1 > 0:
                raise ParameterError(f"d1 must be positive, got {self.d1}")
        elif self.mode == CV_GRID:
            if self.grid is None and (self.d1 is None or not self.d1 > 0):
                raise ParameterError("a CV policy needs a grid or a positive d1 to build one")
            if self.grid is not None:
                grid = tuple(sorted(float(g) for g in self.grid))
                if not grid or grid[0] <= 0:
                    raise ParameterError("CV grid must be non-empty with positive values")
                object.__setattr__(self, 'grid', grid)
        else:
            raise ParameterError(f"Unknown bandwidth mode: {self.mode!r}")

    @classmethod
    def fixed(cls, gamma: float) -> 'BandwidthPolicy':
        return cls(FIXED, gamma=float(gamma))

    @classmethod
    def rule(cls, d1: float) -> 'BandwidthPolicy':
        return cls(RULE, d1=float(d1))

    @classmethod
    def cv_grid(cls, grid: Optional[Sequence[float]] = None, d1: Optional[float] = None) -> 'BandwidthPolicy':
        return cls(CV_GRID, d1=d1, grid=tuple(grid) if grid is not None else None)

    def resolve(self, sample, kernel: KernelSpec, support: Optional[SupportSpec] = None) -> float:
        """The bandwidth this policy selects for a sample."""
        if self.mode == FIXED:
            return self.gamma
        sample = as_sample(sample)
        if self.mode == RULE:
            return bandwidth_rule(sample, self.d1, sample.p)
        grid = self.grid
        if grid is None:
            grid = default_cv_grid(bandwidth_rule(sample, self.d1, sample.p))
        return select_bandwidth_cv(sample, kernel, grid, support)


@dataclass
class EntropyReport:
    """Entropy estimate with its bandwidth and cross-validation diagnostics."""
    H: float
    gamma_used: float
    cv: Optional[float] = None
    d: Optional[float] = None
    mse_hat: Optional[float] = None
    alpha1_hat: Optional[float] = None
    alpha2_hat: Optional[float] = None
    n: int = 0
    k: int = 0
    m: int = 0
    r: int = 0
    p: int = 0
    kernel: str = ""
    support: str = ALL_POINTS
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


# --------------------------------------------------------------------------
# Point estimate
# --------------------------------------------------------------------------

def _support(S: Optional[SupportSpec]) -> SupportSpec:
    return S if S is not None else SupportSpec.all_points()


def _log_density(f: np.ndarray, inside: np.ndarray, what: str) -> np.ndarray:
    """log f where inside, 0 elsewhere; a vanishing in-support density is an error."""
    zero = inside & (f <= 0)
    if zero.any():
        raise EvaluationError(f"{what} density estimate is zero at in-support points", int(zero.sum()))
    out = np.zeros_like(f)
    out[inside] = np.log(f[inside])
    return out


def entropy_rss(sample, kernel: KernelSpec, gamma: float, S: Optional[SupportSpec] = None) -> float:
    """H_n = -(1/n) sum_ij log f_n(X_[i]j) I_S(X_[i]j).

    Raises:
        ParameterError: If gamma <= 0
        EvaluationError: If f_n vanishes at an in-support observation
    """
    if not gamma > 0:
        raise ParameterError(f"bandwidth must be positive, got {gamma}")
    points = as_sample(sample).points()
    f = kde_values(kernel, gamma, points, points)
    inside = _support(S).indicator(points, f)
    return float(-np.sum(_log_density(f, inside, "sample")) / points.shape[0])


# --------------------------------------------------------------------------
# Bandwidth rule
# --------------------------------------------------------------------------

def bandwidth_rule(sample, d1: float, p: Optional[int] = None) -> float:
    """gamma = d1 n^(-1/(2+0.5p)) IQR_bar (0.5 - alpha_hat) / (0.5 - 0.5^p).

    IQR_bar is the mean per-coordinate interquartile range and alpha_hat the
    share of observations inside the product of quartile intervals. The
    correction factor is 1 for p=1.

    Raises:
        ParameterError: For n < 4, d1 <= 0, a zero interquartile range or a
            non-positive correction factor
    """
    points = as_sample(sample).points()
    n = points.shape[0]
    p = points.shape[1] if p is None else p
    if not d1 > 0:
        raise ParameterError(f"d1 must be positive, got {d1}")
    if n < 4:
        raise ParameterError(f"bandwidth rule needs n >= 4, got {n}")
    q1, q3 = np.percentile(points, [25, 75], axis=0)
    iqr = q3 - q1
    if np.any(iqr <= 0):
        raise ParameterError("zero interquartile range: data are degenerate")

    factor = 1.0
    if p > 1:
        alpha_hat = float(np.mean(np.all((points >= q1) & (points <= q3), axis=1)))
        factor = (0.5 - alpha_hat) / (0.5 - 0.5 ** p)
        if factor <= 0:
            raise ParameterError(
                f"{alpha_hat:.3f} of the data lie inside the quartile box; rule bandwidth is not positive"
            )
    return float(d1 * n ** (-1.0 / (2.0 + 0.5 * p)) * np.mean(iqr) * factor)


def default_cv_grid(gamma_rule: float, size: int = DEFAULT_GRID_SIZE) -> np.ndarray:
    """Log-spaced grid over [gamma_rule / 4, 4 gamma_rule]."""
    return np.geomspace(gamma_rule / 4.0, 4.0 * gamma_rule, size)


# --------------------------------------------------------------------------
# Leave-one-cycle-out cross-validation
# --------------------------------------------------------------------------

def _leave_cycle_out(sample: RankedSetSample, kernel: KernelSpec, gamma: float, S: SupportSpec):
    """Full-sample entropy and the m leave-one-cycle-out entropies."""
    points = sample.points()
    n, k, m = sample.n, sample.k, sample.m
    sums = cycle_sums(kernel, gamma, points, points, m)
    total = sums.sum(axis=1)
    f = total / n
    H = -np.sum(_log_density(f, S.indicator(points, f), "sample")) / n

    own = sample.cycle_labels()
    reduced = np.empty(m)
    for j in range(m):
        keep = own != j
        f_j = (total[keep] - sums[keep, j]) / (n - k)
        inside = S.indicator(points[keep], f_j)
        reduced[j] = -np.sum(_log_density(f_j, inside, "leave-one-cycle-out")) / (n - k)
    return float(H), reduced


def cv_gamma(
    sample,
    kernel: KernelSpec,
    gamma: float,
    S: Optional[SupportSpec] = None
) -> Tuple[float, float]:
    """Leave-one-cycle-out statistics (CV_gamma, D_gamma).

    With d_j = H_n(X) - H_n(X^(-j)), CV is the mean of d_j^2 and D the mean of d_j.

    Raises:
        ParameterError: If the sample has a single cycle or gamma <= 0
    """
    sample = as_sample(sample)
    if sample.m < 2:
        raise ParameterError("cross-validation needs at least two cycles")
    if not gamma > 0:
        raise ParameterError(f"bandwidth must be positive, got {gamma}")
    H, reduced = _leave_cycle_out(sample, kernel, gamma, _support(S))
    dev = H - reduced
    return float(np.mean(dev ** 2)), float(np.mean(dev))


def cv_profile(
    sample,
    kernel: KernelSpec,
    grid: Sequence[float],
    S: Optional[SupportSpec] = None,
    n_jobs: int = 1
) -> pd.DataFrame:
    """CV_gamma and D_gamma over a grid, sorted by gamma."""
    grid = np.sort(np.asarray(grid, dtype=float))
    if grid.size == 0 or grid[0] <= 0:
        raise ParameterError("CV grid must be non-empty with positive values")
    sample = as_sample(sample)
    values = Parallel(n_jobs=n_jobs)(delayed(cv_gamma)(sample, kernel, g, S) for g in grid)
    return pd.DataFrame({
        'gamma': grid,
        'cv': [v[0] for v in values],
        'd': [v[1] for v in values],
    })


def select_bandwidth_cv(
    sample,
    kernel: KernelSpec,
    grid: Sequence[float],
    S: Optional[SupportSpec] = None,
    n_jobs: int = 1
) -> float:
    """Grid point minimising CV_gamma; ties go to the smallest gamma."""
    profile = cv_profile(sample, kernel, grid, S, n_jobs)
    return float(profile['gamma'].iloc[int(np.argmin(profile['cv'].to_numpy()))])


# --------------------------------------------------------------------------
# Plug-in MSE
# --------------------------------------------------------------------------

def _plug_in_parts(sample: RankedSetSample, kernel: KernelSpec, gamma: float, S: SupportSpec):
    points = sample.points()
    G = kernel_matrix(kernel, gamma, points, points)
    f = G.sum(axis=0) / sample.n
    inside = S.indicator(points, f)
    log_f = _log_density(f, inside, "sample")
    w = np.zeros_like(f)
    w[inside] = 1.0 / f[inside]
    return G, f, inside, log_f, w


def b_hat_matrix(sample, kernel: KernelSpec, gamma: float, S: Optional[SupportSpec] = None) -> np.ndarray:
    """B_hat evaluated at every pair of observations (cycle-major order).

    B_hat(x, y) = -1/(2n) sum_l G(X_l, x) G(X_l, y) I_S(X_l) / f_n(X_l)^2
                  + G(y, x) I_S(x) / f_n(x),   G(a, b) = gamma^-p K_p((a - b) / gamma).
    """
    sample = as_sample(sample)
    G, f, inside, log_f, w = _plug_in_parts(sample, kernel, gamma, _support(S))
    return -(G.T * (w * w)) @ G / (2.0 * sample.n) + w[:, None] * G


def a_hat_vector(sample, kernel: KernelSpec, gamma: float, S: Optional[SupportSpec] = None) -> np.ndarray:
    """A_hat(x) = (1/n) sum_l G(X_l, x) I_S(X_l) / f_n(X_l) + log f_n(x) I_S(x) at every observation."""
    sample = as_sample(sample)
    G, f, inside, log_f, w = _plug_in_parts(sample, kernel, gamma, _support(S))
    return G.T @ w / sample.n + log_f


def alpha_hats(
    sample,
    kernel: KernelSpec,
    gamma: float,
    S: Optional[SupportSpec] = None
) -> Tuple[float, float]:
    """Plug-in estimates (alpha1_hat, alpha2_hat).

    The between-rank term of alpha2_hat averages A_hat over the m cycles of a
    rank before squaring.
    """
    sample = as_sample(sample)
    if sample.m < 2:
        raise ParameterError("plug-in MSE needs at least two cycles")
    S = _support(S)
    n, k, m = sample.n, sample.k, sample.m
    B = b_hat_matrix(sample, kernel, gamma, S)
    A = a_hat_vector(sample, kernel, gamma, S)
    points = sample.points()
    inside = S.indicator(points, kde_values(kernel, gamma, points, points)).astype(float)
    ranks = sample.rank_labels()

    cross = 0.0
    second = 0.0
    for i in range(k):
        idx = np.nonzero(ranks == i)[0]
        sub = B[np.ix_(idx, idx)] * np.outer(inside[idx], inside[idx])
        cross += sub.sum() - np.trace(sub)
        second += (np.sum(A[idx] * inside[idx]) / m) ** 2

    alpha1 = np.sum(np.diag(B) * inside) / n - cross / (m * (m - 1) * k)
    alpha2 = np.sum(A * A * inside) / n - second / k
    return float(alpha1), float(alpha2)


def mse_hat(
    sample,
    kernel: KernelSpec,
    gamma: float,
    S: Optional[SupportSpec] = None
) -> Tuple[float, float, float]:
    """Gated plug-in MSE (M_hat, alpha1_hat, alpha2_hat).

    M_hat = t if t > 0 else 0, with t = CV + (alpha2_hat + 2 alpha1_hat |D|) / n.
    """
    sample = as_sample(sample)
    cv, d = cv_gamma(sample, kernel, gamma, S)
    alpha1, alpha2 = alpha_hats(sample, kernel, gamma, S)
    return gated_mse(cv, d, alpha1, alpha2, sample.n), alpha1, alpha2


def gated_mse(cv: float, d: float, alpha1: float, alpha2: float, n: int) -> float:
    t = cv + (alpha2 + 2.0 * alpha1 * abs(d)) / n
    return float(t) if t > 0 else 0.0


def estimate_entropy(
    sample,
    kernel: KernelSpec,
    policy: BandwidthPolicy,
    S: Optional[SupportSpec] = None,
    coordinates: Optional[Sequence[int]] = None,
    diagnostics: bool = True
) -> EntropyReport:
    """Select the bandwidth, estimate H and, for m >= 2, the CV/MSE diagnostics.

    Args:
        sample: RankedSetSample or flat (n, p) array
        kernel: Kernel to use
        policy: Bandwidth policy
        S: Support set (all points by default)
        coordinates: Optional subset of coordinates to estimate the entropy of
        diagnostics: Compute CV_gamma, D_gamma and M_hat
    """
    sample = as_sample(sample)
    S = _support(S)
    if coordinates is not None:
        sample = sample.project(coordinates)
        S = S.project(coordinates)
    gamma = policy.resolve(sample, kernel, S)
    report = EntropyReport(
        H=entropy_rss(sample, kernel, gamma, S),
        gamma_used=gamma,
        n=sample.n, k=sample.k, m=sample.m, r=sample.design.r, p=sample.p,
        kernel=kernel.family,
        support=S.mode,
    )
    if diagnostics and sample.m >= 2:
        report.cv, report.d = cv_gamma(sample, kernel, gamma, S)
        report.alpha1_hat, report.alpha2_hat = alpha_hats(sample, kernel, gamma, S)
        report.mse_hat = gated_mse(report.cv, report.d, report.alpha1_hat, report.alpha2_hat, sample.n)
    return report
