"""
Kernel density estimate and empirical cdf of a ranked set sample.
"""

from dataclasses import dataclass

import numpy as np

from .designs import RankedSetSample, as_sample
from .errors import ParameterError
from .kernels import KernelSpec

# Upper bound on elements in one (queries x points x p) block
BLOCK_ELEMENTS = 1 << 22


def _query_block(n_points: int, p: int) -> int:
    return max(1, BLOCK_ELEMENTS // max(1, n_points * p))


def kernel_matrix(kernel: KernelSpec, gamma: float, queries: np.ndarray, points: np.ndarray) -> np.ndarray:
    """G[q, l] = gamma^-p K_p((queries[q] - points[l]) / gamma), shape (nq, n)."""
    p = points.shape[1]
    diff = (queries[:, None, :] - points[None, :, :]) / gamma
    return kernel.product(diff) / gamma ** p


def cycle_sums(
    kernel: KernelSpec,
    gamma: float,
    queries: np.ndarray,
    points: np.ndarray,
    groups: int
) -> np.ndarray:
    """Kernel sums at each query split by consecutive groups of points.

    ``points`` must be ordered so that group g occupies rows
    g * (n / groups) .. (g + 1) * (n / groups) - 1. Returns an (nq, groups) array.
    """
    n, p = points.shape
    out = np.empty((queries.shape[0], groups))
    step = _query_block(n, p)
    for start in range(0, queries.shape[0], step):
        block = kernel_matrix(kernel, gamma, queries[start:start + step], points)
        out[start:start + step] = block.reshape(block.shape[0], groups, n // groups).sum(axis=2)
    return out


def kde_values(kernel: KernelSpec, gamma: float, points: np.ndarray, queries: np.ndarray) -> np.ndarray:
    """(1 / (n gamma^p)) sum_l K_p((t - X_l) / gamma) at every query row."""
    if gamma <= 0:
        raise ParameterError(f"bandwidth must be positive, got {gamma}")
    return cycle_sums(kernel, gamma, queries, points, 1)[:, 0] / points.shape[0]


@dataclass(frozen=True, eq=False)
class DensityEstimate:
    """Product-kernel density estimate with one scalar bandwidth."""
    sample: RankedSetSample
    kernel: KernelSpec
    gamma: float

    def __post_init__(self):
        if not self.gamma > 0:
            raise ParameterError(f"bandwidth must be positive, got {self.gamma}")
        object.__setattr__(self, 'sample', as_sample(self.sample))

    @property
    def p(self) -> int:
        return self.sample.p

    def evaluate(self, t) -> np.ndarray:
        """Evaluate at the rows of an (q, p) array (a 1-d array is read as q points when p=1)."""
        t = np.asarray(t, dtype=float)
        if t.ndim == 1:
            t = t[:, None] if self.p == 1 else t[None, :]
        if t.shape[1] != self.p:
            raise ParameterError(f"query dimension {t.shape[1]} does not match p={self.p}")
        return kde_values(self.kernel, self.gamma, self.sample.points(), t)

    def __call__(self, t) -> np.ndarray:
        return self.evaluate(t)


def kde_eval(est: DensityEstimate, t) -> float:
    """f_n(t) at a single p-vector t."""
    t = np.asarray(t, dtype=float).reshape(1, -1)
    if not np.all(np.isfinite(t)):
        raise ParameterError("evaluation point must be finite")
    return float(est.evaluate(t)[0])


def ecdf_eval(sample, t) -> float:
    """Fraction of observations coordinate-wise <= t."""
    points = as_sample(sample).points()
    t = np.asarray(t, dtype=float).reshape(1, -1)
    if t.shape[1] != points.shape[1]:
        raise ParameterError(f"query dimension {t.shape[1]} does not match p={points.shape[1]}")
    return float(np.mean(np.all(points <= t, axis=1)))
