"""
Numerical evaluation of the theoretical quantities behind the RSS entropy
estimator: rank densities for RSS/DRSS/MRSS, the smoothed density Delta_gamma,
H_gamma, the second-order terms alpha1, alpha2 (RSS) and beta1, beta2 (SRS),
and the approximate relative efficiency.

Rank densities are computed in probability space: with u = F(x), the stage-r
density of rank i is g_i^(r)(u) f(x). Stage 1 gives Beta(i, k - i + 1)
profiles; every later stage takes the i-th order statistic of k independent
variables with the previous stage's profiles, through a Poisson-binomial
recursion over the cdfs.
"""

import itertools
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import stats

from .entropy import SupportSpec
from .errors import NumericalError, ParameterError
from .kernels import KernelSpec, scaled_gaussian
from .parents import BivariateNormal, Normal, ParentModel, Uniform
from .quadrature import composite_rule

ORDER_STATISTIC = "order_statistic"
CONCOMITANT = "concomitant"

TAIL = 1e-9
DEFAULT_TOL = 1e-6
NODE_ORDER = 32
INNER_PANELS = 64

Stages = Union[int, float]  # math.inf selects the limiting densities


# --------------------------------------------------------------------------
# Rank densities
# --------------------------------------------------------------------------

def poisson_binomial_pmf(probs: np.ndarray) -> np.ndarray:
    """Distribution of the number of successes of independent trials.

    Args:
        probs: Array (k, ...) of success probabilities

    Returns:
        Array (k + 1, ...) whose row c is P(exactly c successes)
    """
    probs = np.asarray(probs, dtype=float)
    pmf = np.zeros((probs.shape[0] + 1,) + probs.shape[1:])
    pmf[0] = 1.0
    for count, q in enumerate(probs, start=1):
        pmf[1:count + 1] = pmf[1:count + 1] * (1.0 - q) + pmf[:count] * q
        pmf[0] = pmf[0] * (1.0 - q)
    return pmf


def _next_stage(g: np.ndarray, G: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Profiles of the order statistics of k independent variables with profiles (g, G)."""
    k = g.shape[0]
    tail = np.cumsum(poisson_binomial_pmf(G)[::-1], axis=0)[::-1]
    G_next = tail[1:]  # row i-1: P(at least i of k below)
    g_next = np.zeros_like(g)
    for l in range(k):
        others = poisson_binomial_pmf(np.delete(G, l, axis=0))
        g_next += g[l][None, :] * others
    return g_next, G_next


def stage_profiles(k: int, r: Stages, u: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Density and cdf profiles (g, G), each (k, len(u)), of all ranks at stage r."""
    if k < 1:
        raise ParameterError(f"set size k must be >= 1, got {k}")
    u = np.asarray(u, dtype=float).reshape(-1)
    ranks = np.arange(1, k + 1)[:, None]
    if math.isinf(r):
        lower = (ranks - 1) / k
        g = np.where((u[None, :] >= lower) & (u[None, :] < ranks / k), float(k), 0.0)
        G = np.clip(k * u[None, :] - (ranks - 1), 0.0, 1.0)
        return g, G
    if r < 1:
        raise ParameterError(f"stage count r must be >= 1, got {r}")
    g = stats.beta.pdf(u[None, :], ranks, k - ranks + 1)
    G = stats.beta.cdf(u[None, :], ranks, k - ranks + 1)
    for _ in range(int(r) - 1):
        g, G = _next_stage(g, G)
    return g, G


def _check_rank(k: int, i: int):
    if not 1 <= i <= k:
        raise ParameterError(f"rank i must lie in 1..{k}, got {i}")


def _ranking_marginal(parent: ParentModel, rank_by: int = 0) -> ParentModel:
    if isinstance(parent, BivariateNormal):
        return parent.marginal(rank_by)
    if parent.dim != 1:
        raise ParameterError(f"rank densities need a 1-d or bivariate normal parent, got {parent.name}")
    return parent


def order_stat_density(parent: ParentModel, k: int, r: Stages, i: int, x) -> np.ndarray:
    """Density of the rank-i unit of an r-stage design, ranked on this coordinate.

    r=1 gives the classical order-statistic density; r >= 2 the i-th order
    statistic of k independent, non-identical stage-(r-1) variables;
    r=math.inf the limiting density.
    """
    _check_rank(k, i)
    marginal = _ranking_marginal(parent)
    x = np.asarray(x, dtype=float)
    g, _ = stage_profiles(k, r, marginal.cdf(x.reshape(-1)))
    return (g[i - 1] * marginal.pdf(x.reshape(-1))).reshape(x.shape)


def order_stat_cdf(parent: ParentModel, k: int, r: Stages, i: int, x) -> np.ndarray:
    """Cdf matching ``order_stat_density``."""
    _check_rank(k, i)
    marginal = _ranking_marginal(parent)
    x = np.asarray(x, dtype=float)
    _, G = stage_profiles(k, r, marginal.cdf(x.reshape(-1)))
    return G[i - 1].reshape(x.shape)


def order_stat_cdf_subsets(parent: ParentModel, k: int, r: int, i: int, x) -> np.ndarray:
    """Same cdf by direct enumeration of the subsets of units falling below x.

    P(X_(i) <= x) = sum over subsets A with |A| >= i of
    prod_{l in A} F_l(x) prod_{l not in A} (1 - F_l(x)), F_l the stage-(r-1) cdfs.
    """
    _check_rank(k, i)
    marginal = _ranking_marginal(parent)
    x = np.asarray(x, dtype=float)
    u = marginal.cdf(x.reshape(-1))
    F = np.repeat(u[None, :], k, axis=0) if r == 1 else stage_profiles(k, r - 1, u)[1]
    total = np.zeros_like(u)
    for size in range(i, k + 1):
        for subset in itertools.combinations(range(k), size):
            term = np.ones_like(u)
            for l in range(k):
                term = term * (F[l] if l in subset else 1.0 - F[l])
            total += term
    return total.reshape(x.shape)


def limiting_rank_density(parent: ParentModel, k: int, i: int, x) -> np.ndarray:
    """k f(x) on [F^-1((i-1)/k), F^-1(i/k)), zero elsewhere."""
    return order_stat_density(parent, k, math.inf, i, x)


def _inner_rule(marginal: ParentModel, k: int) -> Tuple[np.ndarray, np.ndarray]:
    lo, hi = marginal.support(TAIL)
    cuts = marginal.quantile(np.arange(1, k) / k) if k > 1 else None
    return composite_rule(lo, hi, INNER_PANELS // max(1, k), NODE_ORDER, cuts)


def concomitant_density(
    parent: BivariateNormal, k: int, r: Stages, i: int, x, rank_by: int = 0
) -> np.ndarray:
    """Density of the unranked coordinate of the rank-i unit.

    f_[i](x) = int f(x | y) f_(i)(y) dy with f_(i) the rank density of the
    ranking coordinate, evaluated by quadrature.
    """
    if not isinstance(parent, BivariateNormal):
        raise ParameterError("concomitant densities need a bivariate normal parent")
    _check_rank(k, i)
    x = np.asarray(x, dtype=float)
    return concomitant_densities(parent, k, r, x.reshape(-1), rank_by)[i - 1].reshape(x.shape)


def concomitant_densities(
    parent: BivariateNormal, k: int, r: Stages, x: np.ndarray, rank_by: int = 0
) -> np.ndarray:
    """All k concomitant densities at the points x, shape (k, len(x))."""
    ranking = parent.marginal(rank_by)
    y, wy = _inner_rule(ranking, k)
    g, _ = stage_profiles(k, r, ranking.cdf(y))
    rank_y = g * ranking.pdf(y)[None, :]
    conditional = parent.conditional_pdf(x[:, None], y[None, :])
    return (rank_y * wy[None, :]) @ conditional.T


@dataclass
class RankDensity:
    """Density of the rank-i unit of a (k, r) design for one coordinate of a parent."""
    parent: ParentModel
    k: int
    r: Stages
    i: int
    mode: str = ORDER_STATISTIC
    rank_by: int = 0

    def __post_init__(self):
        _check_rank(self.k, self.i)
        if self.mode not in (ORDER_STATISTIC, CONCOMITANT):
            raise ParameterError(f"Unknown rank density mode: {self.mode!r}")

    def pdf(self, x) -> np.ndarray:
        if self.mode == CONCOMITANT:
            return concomitant_density(self.parent, self.k, self.r, self.i, x, self.rank_by)
        return order_stat_density(self.parent, self.k, self.r, self.i, x)


# --------------------------------------------------------------------------
# Second-order terms
# --------------------------------------------------------------------------

class TheoryTerms(NamedTuple):
    alpha1: float
    alpha2: float
    beta1: float
    beta2: float
    H_gamma: float
    H: float


def _target(parent: ParentModel, mode: str, rank_by: int) -> ParentModel:
    if mode == CONCOMITANT:
        if not isinstance(parent, BivariateNormal):
            raise ParameterError("concomitant mode needs a bivariate normal parent")
        return parent.marginal(1 - rank_by)
    return _ranking_marginal(parent, rank_by)


def _rank_matrix(parent, target, k, r, x, mode, rank_by) -> np.ndarray:
    if k == 1:
        return target.pdf(x)[None, :]
    if mode == CONCOMITANT:
        return concomitant_densities(parent, k, r, x, rank_by)
    g, _ = stage_profiles(k, r, target.cdf(x))
    return g * target.pdf(x)[None, :]


def _terms_on_grid(parent, target, k, r, kernel, gamma, S, mode, rank_by, panels) -> np.ndarray:
    lo, hi = target.support(TAIL)
    cuts = None
    if math.isinf(r) and mode == ORDER_STATISTIC and k > 1:
        cuts = target.quantile(np.arange(1, k) / k)
    x, w = composite_rule(lo, hi, panels, NODE_ORDER, cuts)
    f = target.pdf(x)
    ranks = _rank_matrix(parent, target, k, r, x, mode, rank_by)

    K = kernel.k0((x[:, None] - x[None, :]) / gamma) / gamma
    inside = S.indicator(x[:, None]) if S.mode != "density_floor" else np.ones(x.shape, dtype=bool)
    mass = w * f * inside
    delta = K @ mass
    if S.mode == "density_floor":
        inside = S.indicator(x[:, None], delta)
        mass = w * f * inside
        delta = K @ mass
    if np.any(delta[inside] <= 0):
        raise NumericalError("smoothed density vanishes inside the support")

    inv = np.zeros_like(delta)
    inv[inside] = 1.0 / delta[inside]
    log_delta = np.zeros_like(delta)
    log_delta[inside] = np.log(delta[inside])

    B = -0.5 * (K.T * (mass * inv * inv)) @ K + inv[:, None] * K
    A = K.T @ (mass * inv) + log_delta
    H_gamma = -np.dot(mass, log_delta)

    diag_term = np.dot(mass, np.diag(B))
    sq_term = np.dot(mass, A * A)
    rank_mass = ranks * (w * inside)[None, :]
    alpha1 = diag_term - np.mean(np.einsum('ia,ab,ib->i', rank_mass, B, rank_mass))
    alpha2 = sq_term - np.mean((rank_mass @ A) ** 2)
    beta1 = diag_term - mass @ B @ mass
    beta2 = sq_term - np.dot(mass, A) ** 2
    return np.array([alpha1, alpha2, beta1, beta2, H_gamma])


def alpha_beta(
    parent: ParentModel,
    k: int,
    r: Stages,
    kernel: Optional[KernelSpec] = None,
    gamma: float = 0.5,
    S: Optional[SupportSpec] = None,
    mode: Optional[str] = None,
    rank_by: int = 0,
    tol: float = DEFAULT_TOL,
    max_doublings: int = 4
) -> TheoryTerms:
    """alpha1, alpha2 (RSS), beta1, beta2 (SRS), H_gamma and H for a 1-d target.

    Args:
        parent: 1-d parent (ranked directly) or bivariate normal (target is the
            coordinate not used for ranking)
        k: Set size
        r: Stage count, math.inf for the limiting design
        kernel: Kernel (scaled Gaussian by default)
        gamma: Bandwidth
        S: Support set on the target coordinate
        mode: order_statistic or concomitant (inferred from the parent if omitted)
        rank_by: Ranking coordinate of a bivariate parent
        tol: Relative change between successive node doublings that stops refinement
        max_doublings: Number of panel doublings allowed

    Raises:
        NumericalError: If the terms do not settle within max_doublings
    """
    if not gamma > 0:
        raise ParameterError(f"bandwidth must be positive, got {gamma}")
    kernel = kernel if kernel is not None else scaled_gaussian()
    S = S if S is not None else SupportSpec.all_points()
    mode = mode or (CONCOMITANT if isinstance(parent, BivariateNormal) else ORDER_STATISTIC)
    target = _target(parent, mode, rank_by)

    panels = 8
    previous = _terms_on_grid(parent, target, k, r, kernel, gamma, S, mode, rank_by, panels)
    change = np.inf
    for _ in range(max_doublings):
        panels *= 2
        current = _terms_on_grid(parent, target, k, r, kernel, gamma, S, mode, rank_by, panels)
        change = float(np.max(np.abs(current - previous) / np.maximum(1.0, np.abs(current))))
        if change <= tol:
            return TheoryTerms(*(float(v) for v in current), H=float(target.entropy()))
        previous = current
    raise NumericalError(f"second-order terms did not settle after {panels} panels", residual=change)


def smoothing_bias(parent: ParentModel, kernel: KernelSpec, gamma: float, S: Optional[SupportSpec] = None,
                   mode: Optional[str] = None) -> float:
    """H_gamma - H, the leading bias term."""
    terms = alpha_beta(parent, 1, 1, kernel, gamma, S, mode)
    return terms.H_gamma - terms.H


def approx_mse(terms: TheoryTerms, n: int, scheme: str = "rss") -> float:
    """(H_gamma - H)^2 + (a2 - 2 a1 (H_gamma - H)) / n with (a1, a2) = alphas for RSS, betas for SRS."""
    bias = terms.H_gamma - terms.H
    a1, a2 = (terms.beta1, terms.beta2) if scheme == "srs" else (terms.alpha1, terms.alpha2)
    return float(bias ** 2 + (a2 - 2.0 * a1 * bias) / n)


def relative_efficiency(
    parent: ParentModel,
    k: int,
    r: Stages,
    n: int,
    kernel: Optional[KernelSpec] = None,
    gamma_rss: float = 0.5,
    gamma_srs: Optional[float] = None,
    S: Optional[SupportSpec] = None,
    **kwargs
) -> float:
    """Approximate MSE(H_SRS) / MSE(H_RSS), each at its own bandwidth.

    With a common bandwidth this equals
    1 + n^-1 (beta2 - alpha2 - 2 (beta1 - alpha1)(H_gamma - H)) / MSE_RSS.

    Raises:
        NumericalError: If either approximate MSE is not positive
    """
    rss = alpha_beta(parent, k, r, kernel, gamma_rss, S, **kwargs)
    srs = rss
    if gamma_srs is not None and gamma_srs != gamma_rss:
        srs = alpha_beta(parent, 1, 1, kernel, gamma_srs, S, **kwargs)
    mse_rss = approx_mse(rss, n, "rss")
    mse_srs = approx_mse(srs, n, "srs")
    if mse_rss <= 0 or mse_srs <= 0:
        raise NumericalError(
            f"approximate MSE is not positive (rss {mse_rss:.3e}, srs {mse_srs:.3e}); check the bandwidth"
        )
    return mse_srs / mse_rss


def limiting_alpha_closed_form(terms: TheoryTerms, k: int) -> Tuple[float, float]:
    """The r -> infinity shortcut (beta1 - (k-1)/2, beta2 - (k-1)(1 - H_gamma)^2).

    The shortcut replaces (1/k) sum_i f_i(x) f_i(y) by k f(x) f(y) everywhere,
    which only holds when x and y fall in the same quantile slab; compare with
    ``alpha_beta(..., r=math.inf)``, which integrates the limiting densities.
    """
    return (terms.beta1 - (k - 1) / 2.0,
            terms.beta2 - (k - 1) * (1.0 - terms.H_gamma) ** 2)


def limiting_relative_efficiency_closed_form(terms: TheoryTerms, k: int, n: int) -> float:
    """Relative efficiency built from ``limiting_alpha_closed_form``."""
    bias = terms.H_gamma - terms.H
    a1, a2 = limiting_alpha_closed_form(terms, k)
    denominator = bias ** 2 + (a2 - 2.0 * a1 * bias) / n
    if denominator <= 0:
        raise NumericalError("limiting approximate MSE is not positive", residual=denominator)
    return float(1.0 + (k - 1) * ((1.0 - terms.H_gamma) ** 2 - bias) / n / denominator)


def theory_bandwidth(c: float, n: int, p: int = 1) -> float:
    """gamma = c n^(-1/(2 + 0.5p))."""
    return float(c * n ** (-1.0 / (2.0 + 0.5 * p)))


def relative_efficiency_grid(
    rhos: Sequence[float] = (0.9, 0.8),
    ns: Sequence[int] = (15, 30, 45),
    ks: Sequence[int] = (3, 5),
    schemes: Sequence[str] = ("rss", "drss"),
    kernel: Optional[KernelSpec] = None,
    tables=None,
    verbose: bool = False
) -> pd.DataFrame:
    """Approximate relative efficiencies over a (rho, n, k, scheme) grid.

    Bandwidth constants per scheme come from ``BandwidthTables.re_constant``.
    """
    from .config import BandwidthTables

    tables = tables if tables is not None else BandwidthTables()
    stages = {"rss": 1, "drss": 2}
    rows = []
    for rho in rhos:
        parent = BivariateNormal(rho)
        for n in ns:
            c_srs = tables.re_constant("srs", 1, rho)
            for k in ks:
                for scheme in schemes:
                    c = tables.re_constant(scheme, k, rho)
                    gamma, gamma_srs = theory_bandwidth(c, n), theory_bandwidth(c_srs, n)
                    re = relative_efficiency(parent, k, stages[scheme], n, kernel, gamma, gamma_srs)
                    rows.append({'rho': rho, 'n': n, 'k': k, 'scheme': scheme, 'c': c,
                                 'gamma': gamma, 'gamma_srs': gamma_srs, 're': re})
                    if verbose:
                        print(f"rho={rho} n={n} k={k} {scheme}: RE={re:.3f}")
    return pd.DataFrame(rows)


__all__ = [
    'BivariateNormal', 'Normal', 'Uniform', 'ParentModel', 'RankDensity', 'TheoryTerms',
    'alpha_beta', 'approx_mse', 'concomitant_density', 'concomitant_densities',
    'limiting_alpha_closed_form', 'limiting_rank_density', 'limiting_relative_efficiency_closed_form',
    'order_stat_cdf', 'order_stat_cdf_subsets', 'order_stat_density', 'poisson_binomial_pmf',
    'relative_efficiency', 'relative_efficiency_grid', 'smoothing_bias', 'stage_profiles',
    'theory_bandwidth',
]
