"""
Analytic parent distributions used by the sampler, the theory engine and
the simulation harness.
"""

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy import stats

from .errors import ParameterError


class ParentModel:
    """Base class for analytic parents.

    Subclasses provide ``dim`` and the vectorised ``pdf`` and ``sample``;
    one-dimensional parents also provide ``cdf`` and ``quantile``.
    """

    dim: int = 1
    name: str = "parent"

    def pdf(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def cdf(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError(f"{self.name} has no closed-form cdf")

    def quantile(self, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError(f"{self.name} has no closed-form quantile")

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw ``size`` iid rows, returned with shape (size, dim)."""
        raise NotImplementedError

    def entropy(self) -> float:
        """Differential entropy in nats."""
        raise NotImplementedError

    def support(self, tail: float = 1e-9) -> Tuple[float, float]:
        """Quantile-truncated support used by quadrature (1-d parents)."""
        lo, hi = self.quantile(np.array([tail, 1.0 - tail]))
        return float(lo), float(hi)


@dataclass
class Normal(ParentModel):
    """Univariate normal N(mu, variance)."""
    mu: float = 0.0
    variance: float = 1.0

    dim = 1
    name = "normal"

    def __post_init__(self):
        if self.variance <= 0:
            raise ParameterError(f"variance must be positive, got {self.variance}")
        self._dist = stats.norm(loc=self.mu, scale=np.sqrt(self.variance))

    def pdf(self, x):
        return self._dist.pdf(np.asarray(x, dtype=float))

    def cdf(self, x):
        return self._dist.cdf(np.asarray(x, dtype=float))

    def quantile(self, u):
        return self._dist.ppf(np.asarray(u, dtype=float))

    def sample(self, rng, size):
        return self._dist.rvs(size=size, random_state=rng).reshape(size, 1)

    def entropy(self) -> float:
        return 0.5 * np.log(2.0 * np.pi * np.e * self.variance)


@dataclass
class Uniform(ParentModel):
    """Univariate uniform on [low, high]."""
    low: float = 0.0
    high: float = 1.0

    dim = 1
    name = "uniform"

    def __post_init__(self):
        if not self.high > self.low:
            raise ParameterError(f"need high > low, got [{self.low}, {self.high}]")
        self._dist = stats.uniform(loc=self.low, scale=self.high - self.low)

    def pdf(self, x):
        return self._dist.pdf(np.asarray(x, dtype=float))

    def cdf(self, x):
        return self._dist.cdf(np.asarray(x, dtype=float))

    def quantile(self, u):
        return self._dist.ppf(np.asarray(u, dtype=float))

    def sample(self, rng, size):
        return self._dist.rvs(size=size, random_state=rng).reshape(size, 1)

    def entropy(self) -> float:
        return float(np.log(self.high - self.low))

    def support(self, tail: float = 1e-9) -> Tuple[float, float]:
        return float(self.low), float(self.high)


@dataclass
class BivariateNormal(ParentModel):
    """Standard bivariate normal with correlation rho."""
    rho: float = 0.0

    dim = 2
    name = "bivariate_normal"

    def __post_init__(self):
        if not -1.0 < self.rho < 1.0:
            raise ParameterError(f"rho must lie in (-1, 1), got {self.rho}")
        self._dist = stats.multivariate_normal(
            mean=np.zeros(2), cov=[[1.0, self.rho], [self.rho, 1.0]]
        )

    def pdf(self, x):
        return np.atleast_1d(self._dist.pdf(np.asarray(x, dtype=float)))

    def cdf(self, x):
        return np.atleast_1d(self._dist.cdf(np.asarray(x, dtype=float)))

    def sample(self, rng, size):
        return np.asarray(self._dist.rvs(size=size, random_state=rng)).reshape(size, 2)

    def marginal(self, coordinate: int) -> Normal:
        """Both marginals are N(0, 1)."""
        if coordinate not in (0, 1):
            raise ParameterError(f"coordinate must be 0 or 1, got {coordinate}")
        return Normal(0.0, 1.0)

    def conditional_pdf(self, x: np.ndarray, given: np.ndarray) -> np.ndarray:
        """Density of one coordinate at x given the other equals ``given``.

        Broadcasts x against given.
        """
        var = 1.0 - self.rho ** 2
        z = np.asarray(x, dtype=float) - self.rho * np.asarray(given, dtype=float)
        return np.exp(-0.5 * z ** 2 / var) / np.sqrt(2.0 * np.pi * var)

    def entropy(self) -> float:
        return float(np.log(2.0 * np.pi * np.e) + 0.5 * np.log(1.0 - self.rho ** 2))

    def mutual_information(self) -> float:
        """I(X1, X2) = -0.5 log(1 - rho^2)."""
        return float(-0.5 * np.log(1.0 - self.rho ** 2))


@dataclass
class MultivariateNormal(ParentModel):
    """Zero-mean multivariate normal with an arbitrary covariance matrix."""
    cov: np.ndarray = field(default_factory=lambda: np.eye(2))
    mean: Optional[np.ndarray] = None

    name = "multivariate_normal"

    def __post_init__(self):
        self.cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if self.cov.shape[0] != self.cov.shape[1]:
            raise ParameterError(f"covariance must be square, got shape {self.cov.shape}")
        self.dim = self.cov.shape[0]
        self.mean = np.zeros(self.dim) if self.mean is None else np.asarray(self.mean, dtype=float)
        # raises if cov is not positive definite
        self._dist = stats.multivariate_normal(mean=self.mean, cov=self.cov)

    def pdf(self, x):
        return np.atleast_1d(self._dist.pdf(np.asarray(x, dtype=float)))

    def sample(self, rng, size):
        return np.asarray(self._dist.rvs(size=size, random_state=rng)).reshape(size, self.dim)

    def entropy(self) -> float:
        sign, logdet = np.linalg.slogdet(self.cov)
        return float(0.5 * (self.dim * np.log(2.0 * np.pi * np.e) + logdet))


def parent_from_dict(config: dict) -> ParentModel:
    """Build a parent from a ``{"name": ..., **params}`` mapping (experiment spec files)."""
    params = dict(config)
    name = params.pop("name", None)
    builders = {
        "normal": Normal,
        "uniform": Uniform,
        "bivariate_normal": BivariateNormal,
        "multivariate_normal": MultivariateNormal,
    }
    if name not in builders:
        raise ParameterError(f"Unknown parent model: {name!r}")
    return builders[name](**params)
