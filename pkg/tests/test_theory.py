import itertools
import math

import numpy as np
import pytest
from scipy import stats

from rsentropy.analytics import compare_with_reference
from rsentropy.config import BandwidthTables
from rsentropy.designs import rank_stage
from rsentropy.errors import ParameterError
from rsentropy.kernels import scaled_gaussian
from rsentropy.parents import BivariateNormal, Normal, Uniform
from rsentropy.quadrature import integrate
from rsentropy.theory import (
    RankDensity,
    alpha_beta,
    approx_mse,
    concomitant_densities,
    limiting_alpha_closed_form,
    limiting_rank_density,
    order_stat_cdf,
    order_stat_cdf_subsets,
    order_stat_density,
    poisson_binomial_pmf,
    relative_efficiency,
    relative_efficiency_grid,
    smoothing_bias,
    stage_profiles,
    theory_bandwidth,
)

X = np.linspace(-3.0, 3.0, 13)


# --- rank densities ---

def test_poisson_binomial_pmf():
    probs = np.array([[0.2, 0.5], [0.7, 0.5], [0.4, 0.5]])
    pmf = poisson_binomial_pmf(probs)
    assert pmf.shape == (4, 2)
    np.testing.assert_allclose(pmf.sum(axis=0), 1.0)
    np.testing.assert_allclose(pmf[:, 1], stats.binom.pmf(np.arange(4), 3, 0.5))
    assert pmf[3, 0] == pytest.approx(0.2 * 0.7 * 0.4)


@pytest.mark.parametrize("k, r", [(3, 1), (3, 2), (4, 3), (5, math.inf)])
def test_rank_profiles_average_to_parent(k, r):
    u = np.linspace(0.01, 0.99, 41)
    g, G = stage_profiles(k, r, u)
    np.testing.assert_allclose(g.mean(axis=0), 1.0, atol=1e-12)
    np.testing.assert_allclose(G.mean(axis=0), u, atol=1e-12)


def test_first_stage_is_beta():
    u = np.linspace(0.05, 0.95, 7)
    g, _ = stage_profiles(4, 1, u)
    np.testing.assert_allclose(g[2], stats.beta.pdf(u, 3, 2))


@pytest.mark.parametrize("k, r, i", [(3, 1, 1), (3, 2, 2), (3, 2, 3), (4, 2, 1)])
def test_cdf_recursion_matches_subset_enumeration(k, r, i):
    parent = Normal()
    np.testing.assert_allclose(order_stat_cdf(parent, k, r, i, X),
                               order_stat_cdf_subsets(parent, k, r, i, X), atol=1e-12)


@pytest.mark.parametrize("i", [1, 2, 3])
def test_drss_density_is_mixture_over_first_stage_ranks(i):
    # rank-i unit of k independent stage-1 units: sum_l f_l(x) P(exactly i-1 of the others below x)
    k = 3
    u = stats.norm.cdf(X)
    f1 = [stats.beta.pdf(u, l, k - l + 1) * stats.norm.pdf(X) for l in range(1, k + 1)]
    F1 = [stats.beta.cdf(u, l, k - l + 1) for l in range(1, k + 1)]
    expected = np.zeros_like(X)
    for l in range(k):
        others = [o for o in range(k) if o != l]
        for below in itertools.combinations(others, i - 1):
            term = f1[l].copy()
            for o in others:
                term = term * (F1[o] if o in below else 1.0 - F1[o])
            expected += term
    np.testing.assert_allclose(order_stat_density(Normal(), k, 2, i, X), expected, rtol=1e-12, atol=1e-14)


@pytest.mark.parametrize("r", [1, 2, 3])
def test_rank_density_is_cdf_derivative(r):
    h = 1e-5
    for i in (1, 2, 3):
        slope = (order_stat_cdf(Normal(), 3, r, i, X + h) - order_stat_cdf(Normal(), 3, r, i, X - h)) / (2 * h)
        np.testing.assert_allclose(order_stat_density(Normal(), 3, r, i, X), slope, rtol=1e-6, atol=1e-9)


@pytest.mark.slow
def test_drss_rank_cdfs_match_simulation():
    k, cycles = 3, 333_334
    rng = np.random.default_rng(2024)
    units = rng.random((cycles * k * k, k, 1))
    ids = np.tile(np.arange(k), (units.shape[0], 1))
    first, first_ids = rank_stage(units, ids, 0)
    second, _ = rank_stage(first, first_ids, 0)
    assert second.shape == (cycles, k, 1)
    for i in range(k):
        result = stats.kstest(second[:, i, 0], lambda x, i=i: order_stat_cdf(Uniform(), k, 2, i + 1, x))
        assert result.statistic < 0.005, (i, result.statistic)


@pytest.mark.parametrize("r", [1, 2, 3])
def test_rank_density_integrates_to_one(r):
    parent = Normal()
    for i in (1, 2, 3):
        mass = integrate(lambda x: order_stat_density(parent, 3, r, i, x), -12.0, 12.0)
        assert mass == pytest.approx(1.0, abs=1e-8)


def test_drss_ranks_are_more_separated():
    parent = Normal()
    mean = {r: integrate(lambda x, r=r: x * order_stat_density(parent, 3, r, 1, x), -12.0, 12.0)
            for r in (1, 2)}
    assert mean[2] < mean[1] < 0


def test_limiting_density_is_slab():
    parent = Uniform(0.0, 1.0)
    x = np.array([0.1, 0.3, 0.5, 0.9])
    np.testing.assert_allclose(limiting_rank_density(parent, 3, 1, x), [3.0, 3.0, 0.0, 0.0])
    np.testing.assert_allclose(limiting_rank_density(parent, 3, 3, x), [0.0, 0.0, 0.0, 3.0])


def test_concomitants_average_to_marginal():
    parent = BivariateNormal(0.8)
    x = np.linspace(-3.0, 3.0, 9)
    for r in (1, 2):
        dens = concomitant_densities(parent, 3, r, x, rank_by=1)
        np.testing.assert_allclose(dens.mean(axis=0), stats.norm.pdf(x), rtol=1e-6)


def test_rank_density_object():
    parent = BivariateNormal(0.8)
    density = RankDensity(parent, 3, 1, 2, mode='concomitant', rank_by=1)
    assert density.pdf(np.array([0.0]))[0] > 0
    expected = order_stat_density(Normal(), 3, 1, 1, 0.0)
    assert RankDensity(Normal(), 3, 1, 1).pdf(0.0) == pytest.approx(expected)
    with pytest.raises(ParameterError):
        RankDensity(Normal(), 3, 1, 4)
    with pytest.raises(ParameterError):
        RankDensity(Normal(), 3, 1, 1, mode='judgement')


def test_rank_errors():
    with pytest.raises(ParameterError):
        stage_profiles(0, 1, np.array([0.5]))
    with pytest.raises(ParameterError):
        stage_profiles(3, 0, np.array([0.5]))
    with pytest.raises(ParameterError):
        order_stat_density(Normal(), 3, 1, 0, X)


# --- second-order terms ---

def test_smoothing_bias_matches_gaussian_closed_form():
    gamma = 0.5
    # N(0, 1) smoothed by the variance-2 kernel at bandwidth gamma is N(0, 1 + 2 gamma^2)
    s2 = 1.0 + 2.0 * gamma ** 2
    expected = 0.5 * np.log(2.0 * np.pi * s2) + 0.5 / s2 - 0.5 * np.log(2.0 * np.pi * np.e)
    assert smoothing_bias(Normal(), scaled_gaussian(), gamma) == pytest.approx(expected, rel=1e-5)


def test_srs_terms_coincide():
    terms = alpha_beta(Normal(), 1, 1, gamma=0.4)
    assert terms.alpha1 == pytest.approx(terms.beta1, rel=1e-10)
    assert terms.alpha2 == pytest.approx(terms.beta2, rel=1e-10)
    assert relative_efficiency(Normal(), 1, 1, 30, gamma_rss=0.4) == pytest.approx(1.0, rel=1e-9)


@pytest.mark.parametrize("parent, r", [
    (Normal(), 1), (Normal(), 2), (BivariateNormal(0.9), 1), (BivariateNormal(0.9), 2),
])
def test_ranking_reduces_alpha2(parent, r):
    terms = alpha_beta(parent, 3, r, gamma=0.5, rank_by=1 if parent.dim == 2 else 0)
    assert terms.alpha2 <= terms.beta2 + 1e-12
    assert terms.H == pytest.approx(0.5 * np.log(2.0 * np.pi * np.e))


def test_approx_mse():
    terms = alpha_beta(Normal(), 3, 1, gamma=0.5)
    bias = terms.H_gamma - terms.H
    rss = bias ** 2 + (terms.alpha2 - 2 * terms.alpha1 * bias) / 20
    srs = bias ** 2 + (terms.beta2 - 2 * terms.beta1 * bias) / 20
    assert approx_mse(terms, 20, 'rss') == pytest.approx(rss)
    assert approx_mse(terms, 20, 'srs') == pytest.approx(srs)


def test_relative_efficiency_common_bandwidth_identity():
    parent = BivariateNormal(0.9)
    n = 30
    terms = alpha_beta(parent, 3, 2, gamma=0.45, rank_by=1)
    bias = terms.H_gamma - terms.H
    mse_rss = approx_mse(terms, n, 'rss')
    gap = terms.beta2 - terms.alpha2 - 2.0 * (terms.beta1 - terms.alpha1) * bias
    identity = 1.0 + gap / n / mse_rss
    assert relative_efficiency(parent, 3, 2, n, gamma_rss=0.45, rank_by=1) == pytest.approx(identity)


def test_limiting_terms_are_computable():
    terms = alpha_beta(Normal(), 3, math.inf, gamma=0.5)
    assert np.isfinite(terms.alpha1) and np.isfinite(terms.alpha2)
    a1, a2 = limiting_alpha_closed_form(terms, 3)
    assert a1 == pytest.approx(terms.beta1 - 1.0)
    assert a2 == pytest.approx(terms.beta2 - 2.0 * (1.0 - terms.H_gamma) ** 2)


def test_alpha_beta_rejects_bandwidth():
    with pytest.raises(ParameterError):
        alpha_beta(Normal(), 3, 1, gamma=0.0)


def test_theory_bandwidth():
    assert theory_bandwidth(1.4, 30) == pytest.approx(1.4 * 30 ** (-0.4))
    assert theory_bandwidth(1.0, 16, p=2) == pytest.approx(16 ** (-1.0 / 3.0))


# --- relative efficiency grid ---

@pytest.mark.slow
def test_relative_efficiency_grid_one_cell():
    frame = relative_efficiency_grid(rhos=(0.9,), ns=(30,), ks=(3,), schemes=('rss',))
    assert list(frame.columns) == ['rho', 'n', 'k', 'scheme', 'c', 'gamma', 'gamma_srs', 're']
    row = frame.iloc[0]
    tables = BandwidthTables()
    assert row['gamma'] == pytest.approx(theory_bandwidth(tables.re_constant('rss', 3, 0.9), 30))
    assert row['re'] > 0


@pytest.mark.slow
def test_relative_efficiency_large_sample_cells():
    frame = relative_efficiency_grid(rhos=(0.8,), ns=(45,), ks=(5,))
    comparison = compare_with_reference(frame, 'relative_efficiency')
    assert len(comparison) == 2
    assert comparison['within'].all(), comparison
    re = frame.set_index('scheme')['re']
    assert 1.0 < re['rss'] < re['drss']


@pytest.mark.slow
def test_perfect_ranking_bounds_small_sample_efficiency():
    # n=15 with the rho=0.9 bandwidth constants; perfect ranking is the best a ranking variable can do
    n = 15
    gamma_srs = theory_bandwidth(1.35, n)
    rss5 = theory_bandwidth(1.65, n)
    drss3 = theory_bandwidth(1.45, n)

    perfect_rss5 = relative_efficiency(Normal(), 5, 1, n, gamma_rss=rss5, gamma_srs=gamma_srs)
    concomitant_rss5 = relative_efficiency(BivariateNormal(0.9), 5, 1, n, gamma_rss=rss5, gamma_srs=gamma_srs)
    assert 1.0 < concomitant_rss5 < perfect_rss5 < 1.48

    perfect_drss3 = relative_efficiency(Normal(), 3, 2, n, gamma_rss=drss3, gamma_srs=gamma_srs)
    limit_drss3 = relative_efficiency(Normal(), 3, math.inf, n, gamma_rss=drss3, gamma_srs=gamma_srs)
    concomitant_drss3 = relative_efficiency(BivariateNormal(0.9), 3, 2, n, gamma_rss=drss3, gamma_srs=gamma_srs)
    assert 1.0 < concomitant_drss3 < perfect_drss3 < limit_drss3 < 1.58
    assert limit_drss3 == pytest.approx(1.30, abs=0.03)


@pytest.mark.reproduction
def test_relative_efficiency_reference_values():
    frame = relative_efficiency_grid()
    comparison = compare_with_reference(frame, 'relative_efficiency')
    assert len(comparison) == 24
    assert (comparison['simulated'] > 1.0).all(), comparison
    re = frame.pivot_table(index=['rho', 'n', 'k'], columns='scheme', values='re')
    assert (re['drss'] > re['rss']).all(), re
    cells = comparison.set_index(['rho', 'n', 'k', 'scheme'])['within']
    assert cells[(0.8, 45, 5, 'drss')] and cells[(0.8, 45, 5, 'rss')]
