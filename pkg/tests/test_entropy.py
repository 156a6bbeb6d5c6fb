import json
import math

import numpy as np
import pytest

from rsentropy.designs import Design, RankedSetSample, draw_mrss
from rsentropy.entropy import (
    BandwidthPolicy,
    SupportSpec,
    a_hat_vector,
    alpha_hats,
    b_hat_matrix,
    bandwidth_rule,
    cv_gamma,
    cv_profile,
    default_cv_grid,
    entropy_rss,
    estimate_entropy,
    gated_mse,
    mse_hat,
    select_bandwidth_cv,
)
from rsentropy.errors import ParameterError
from rsentropy.kernels import scaled_gaussian
from rsentropy.parents import Normal

NORMAL_ENTROPY = 0.5 * np.log(2.0 * np.pi * np.e)


@pytest.fixture
def normal_rss():
    return draw_mrss(Normal(), Design(k=3, m=8, r=1), seed=21)


# --- point estimate ---

def test_entropy_of_large_normal_sample():
    sample = RankedSetSample.from_srs(np.random.default_rng(3).standard_normal(2000))
    gamma = bandwidth_rule(sample, 1.0)
    assert entropy_rss(sample, scaled_gaussian(), gamma) == pytest.approx(NORMAL_ENTROPY, abs=0.06)


@pytest.mark.slow
def test_entropy_of_normal_sample_at_ten_thousand():
    sample = RankedSetSample.from_srs(np.random.default_rng(17).standard_normal(10_000))
    gamma = bandwidth_rule(sample, 1.0)
    assert entropy_rss(sample, scaled_gaussian(), gamma) == pytest.approx(NORMAL_ENTROPY, abs=0.05)


def test_two_point_entropy():
    # f(0) = f(1) = (k0(0) + k0(1)) / 2 at gamma = 1
    f = (1.0 + math.exp(-0.25)) / (2.0 * math.sqrt(4.0 * math.pi))
    assert entropy_rss(np.array([0.0, 1.0]), scaled_gaussian(), 1.0) == pytest.approx(-math.log(f), abs=1e-12)


def test_entropy_ignores_unit_order(rss_sample):
    kern = scaled_gaussian()
    H = entropy_rss(rss_sample, kern, 0.5)
    rng = np.random.default_rng(2)
    cycles = RankedSetSample(rss_sample.design, rss_sample.obs[:, rng.permutation(rss_sample.m), :])
    coords = rss_sample.project([1, 0])
    assert entropy_rss(cycles, kern, 0.5) == pytest.approx(H, rel=1e-12)
    assert entropy_rss(coords, kern, 0.5) == pytest.approx(H, rel=1e-12)
    flat = rss_sample.points()[rng.permutation(rss_sample.n)]
    assert entropy_rss(flat, kern, 0.5) == pytest.approx(H, rel=1e-12)


def test_entropy_is_shift_invariant_and_scale_equivariant(rss_sample):
    kern = scaled_gaussian()
    H = entropy_rss(rss_sample, kern, 0.5)
    shifted = RankedSetSample(rss_sample.design, rss_sample.obs + np.array([3.0, -7.5]))
    assert entropy_rss(shifted, kern, 0.5) == pytest.approx(H, rel=1e-10)
    scaled = RankedSetSample(rss_sample.design, 2.0 * rss_sample.obs)
    assert entropy_rss(scaled, kern, 1.0) == pytest.approx(H + 2 * math.log(2.0), rel=1e-10)


def test_entropy_matches_direct_formula():
    data = np.array([-1.0, 0.0, 0.5, 2.0])
    kern = scaled_gaussian()
    gamma = 0.8
    f = [np.mean(kern.k0((x - data) / gamma)) / gamma for x in data]
    assert entropy_rss(data, kern, gamma) == pytest.approx(-np.mean(np.log(f)))


def test_entropy_rejects_bandwidth(normal_rss):
    for gamma in (0.0, -0.5):
        with pytest.raises(ParameterError):
            entropy_rss(normal_rss, scaled_gaussian(), gamma)


def test_rectangle_support_trims_sum(normal_rss):
    kern = scaled_gaussian()
    assert entropy_rss(normal_rss, kern, 0.5, SupportSpec.rectangle([50.0], [60.0])) == 0.0
    wide = SupportSpec.rectangle([-50.0], [50.0])
    assert entropy_rss(normal_rss, kern, 0.5, wide) == pytest.approx(entropy_rss(normal_rss, kern, 0.5))


def test_density_floor_drops_low_density_points(normal_rss):
    kern = scaled_gaussian()
    full = entropy_rss(normal_rss, kern, 0.5)
    trimmed = entropy_rss(normal_rss, kern, 0.5, SupportSpec.density_floor(0.2))
    # only the high-density terms (small -log f) survive
    assert trimmed < full


def test_support_validation():
    with pytest.raises(ParameterError):
        SupportSpec.rectangle([0.0, 1.0], [1.0])
    with pytest.raises(ParameterError):
        SupportSpec.rectangle([1.0], [0.0])
    with pytest.raises(ParameterError):
        SupportSpec.density_floor(0.0)
    with pytest.raises(ParameterError):
        SupportSpec(mode='ball')


def test_support_projection():
    box = SupportSpec.rectangle([0.0, 1.0, 2.0], [1.0, 2.0, 3.0])
    assert box.project([2, 0]) == SupportSpec.rectangle([2.0, 0.0], [3.0, 1.0])
    floor = SupportSpec.density_floor(0.1)
    assert floor.project([0]) is floor


# --- bandwidth rule ---

def test_rule_one_dimension():
    data = np.arange(1.0, 17.0)
    q1, q3 = np.percentile(data, [25, 75])
    expected = 1.3 * 16 ** (-1.0 / 2.5) * (q3 - q1)
    assert bandwidth_rule(data, 1.3) == pytest.approx(expected)


def test_rule_two_dimensions():
    rng = np.random.default_rng(8)
    data = rng.standard_normal((40, 2))
    q1, q3 = np.percentile(data, [25, 75], axis=0)
    alpha_hat = np.mean(np.all((data >= q1) & (data <= q3), axis=1))
    expected = 0.7 * 40 ** (-1.0 / 3.0) * np.mean(q3 - q1) * (0.5 - alpha_hat) / 0.25
    assert bandwidth_rule(data, 0.7) == pytest.approx(expected)


def test_rule_errors():
    with pytest.raises(ParameterError):
        bandwidth_rule(np.arange(3.0), 1.0)
    with pytest.raises(ParameterError):
        bandwidth_rule(np.arange(10.0), 0.0)
    with pytest.raises(ParameterError):
        bandwidth_rule(np.ones(10), 1.0)
    # perfectly dependent pair: half the data sit in the quartile box
    diagonal = np.repeat(np.arange(1.0, 21.0)[:, None], 2, axis=1)
    with pytest.raises(ParameterError):
        bandwidth_rule(diagonal, 1.0)


def test_default_grid():
    grid = default_cv_grid(0.4)
    assert len(grid) == 25
    assert grid[0] == pytest.approx(0.1) and grid[-1] == pytest.approx(1.6)


def test_policy_validation():
    with pytest.raises(ParameterError):
        BandwidthPolicy.fixed(0.0)
    with pytest.raises(ParameterError):
        BandwidthPolicy.rule(-1.0)
    with pytest.raises(ParameterError):
        BandwidthPolicy.cv_grid()
    with pytest.raises(ParameterError):
        BandwidthPolicy.cv_grid([0.0, 1.0])
    with pytest.raises(ParameterError):
        BandwidthPolicy(mode='silverman')
    assert BandwidthPolicy.cv_grid([0.3, 0.1]).grid == (0.1, 0.3)


# --- cross-validation ---

@pytest.mark.parametrize("support", [None, SupportSpec.density_floor(0.05)])
def test_cv_matches_refitting(normal_rss, support):
    kern = scaled_gaussian()
    gamma = 0.45
    H = entropy_rss(normal_rss, kern, gamma, support)
    d = np.array([H - entropy_rss(normal_rss.drop_cycle(j), kern, gamma, support)
                  for j in range(normal_rss.m)])
    cv, mean_d = cv_gamma(normal_rss, kern, gamma, support)
    assert cv == pytest.approx(np.mean(d ** 2), rel=1e-10)
    assert mean_d == pytest.approx(np.mean(d), rel=1e-8, abs=1e-12)


def test_cv_needs_two_cycles():
    single = RankedSetSample(Design(k=3, m=1), np.array([[0.0], [1.0], [2.0]]))
    with pytest.raises(ParameterError):
        cv_gamma(single, scaled_gaussian(), 0.5)
    with pytest.raises(ParameterError):
        alpha_hats(single, scaled_gaussian(), 0.5)


def test_cv_profile_and_selection(normal_rss):
    kern = scaled_gaussian()
    grid = [0.8, 0.2, 0.4]
    profile = cv_profile(normal_rss, kern, grid)
    assert list(profile.columns) == ['gamma', 'cv', 'd']
    assert list(profile['gamma']) == [0.2, 0.4, 0.8]
    best = select_bandwidth_cv(normal_rss, kern, grid)
    assert best == profile['gamma'][profile['cv'].idxmin()]
    with pytest.raises(ParameterError):
        cv_profile(normal_rss, kern, [])


def _repeated_cycles(m=4):
    cycle = np.array([[-0.7], [0.1], [1.3]])
    return RankedSetSample(Design(k=3, m=m), np.repeat(cycle[:, None, :], m, axis=1))


def test_cv_vanishes_for_identical_cycles():
    cv, d = cv_gamma(_repeated_cycles(), scaled_gaussian(), 0.5)
    assert cv == pytest.approx(0.0, abs=1e-24)
    assert d == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("gamma", [0.2, 0.45, 1.0])
def test_cv_bounds_squared_mean_deviation(normal_rss, gamma):
    cv, d = cv_gamma(normal_rss, scaled_gaussian(), gamma)
    assert cv >= d * d


def test_cv_selection_breaks_ties_towards_small_bandwidth():
    # no point clears the floor, so every entropy and every CV value is exactly 0
    floor = SupportSpec.density_floor(1e6)
    profile = cv_profile(_repeated_cycles(), scaled_gaussian(), [0.9, 0.3, 0.6], floor)
    assert (profile['cv'] == 0.0).all()
    assert select_bandwidth_cv(_repeated_cycles(), scaled_gaussian(), [0.9, 0.3, 0.6], floor) == 0.3


# --- plug-in MSE ---

def test_gated_mse():
    assert gated_mse(0.01, -0.1, 0.5, 0.2, 10) == pytest.approx(0.01 + (0.2 + 0.1) / 10)
    assert gated_mse(0.01, 0.0, 0.0, -1.0, 10) == 0.0


def test_mse_hat_combines_parts(normal_rss):
    kern = scaled_gaussian()
    value, alpha1, alpha2 = mse_hat(normal_rss, kern, 0.5)
    cv, d = cv_gamma(normal_rss, kern, 0.5)
    assert value == pytest.approx(gated_mse(cv, d, alpha1, alpha2, normal_rss.n))
    assert value >= 0.0


def test_plug_in_terms_shapes(normal_rss):
    kern = scaled_gaussian()
    B = b_hat_matrix(normal_rss, kern, 0.5)
    A = a_hat_vector(normal_rss, kern, 0.5)
    assert B.shape == (normal_rss.n, normal_rss.n)
    assert A.shape == (normal_rss.n,)
    assert np.all(np.isfinite(B)) and np.all(np.isfinite(A))


def test_alpha2_is_a_variance_bound(normal_rss):
    # alpha2_hat = mean(A^2) - mean over ranks of squared rank means of A >= 0
    _, alpha2 = alpha_hats(normal_rss, scaled_gaussian(), 0.5)
    assert alpha2 >= -1e-12


def _gauss(u):
    return math.exp(-u * u / 4.0) / math.sqrt(4.0 * math.pi)


def _G(a, b, gamma):
    value = 1.0
    for a_d, b_d in zip(a, b):
        value *= _gauss((a_d - b_d) / gamma) / gamma
    return value


# rank 1 on the first row, cycles along the second axis; the last unit of rank 2 lies outside the box
SMALL_OBS = np.array([[[0.1, -0.3], [0.8, 0.2], [-0.5, 0.4]],
                      [[1.2, 0.9], [0.3, -0.1], [1.9, 1.4]]])


@pytest.mark.parametrize("box", [False, True])
def test_plug_in_terms_match_explicit_sums(box):
    sample = RankedSetSample(Design(k=2, m=3), SMALL_OBS)
    gamma = 0.7
    S = SupportSpec.rectangle([-1.0, -1.0], [1.5, 1.5]) if box else None
    k, m, n = 2, 3, 6
    # cycle-major order: unit (i, j) sits at position j * k + i
    units = {(i, j): tuple(SMALL_OBS[i, j]) for i in range(k) for j in range(m)}
    order = [units[(i, j)] for j in range(m) for i in range(k)]
    inside = {u: (not box) or all(-1.0 <= c <= 1.5 for c in u) for u in order}
    f = {u: sum(_G(u, v, gamma) for v in order) / n for u in order}

    def B(x, y):
        total = 0.0
        for v in order:
            if inside[v]:
                total += _G(v, x, gamma) * _G(v, y, gamma) / f[v] ** 2
        value = -total / (2.0 * n)
        if inside[x]:
            value += _G(y, x, gamma) / f[x]
        return value

    def A(x):
        total = sum(_G(v, x, gamma) / f[v] for v in order if inside[v]) / n
        return total + (math.log(f[x]) if inside[x] else 0.0)

    B_hat = b_hat_matrix(sample, scaled_gaussian(), gamma, S)
    A_hat = a_hat_vector(sample, scaled_gaussian(), gamma, S)
    for a, x in enumerate(order):
        assert A_hat[a] == pytest.approx(A(x), rel=1e-12, abs=1e-12)
        for b, y in enumerate(order):
            assert B_hat[a, b] == pytest.approx(B(x, y), rel=1e-12, abs=1e-12)

    diag = sum(B(u, u) for u in order if inside[u]) / n
    cross = 0.0
    for i in range(k):
        for j in range(m):
            for jj in range(m):
                x, y = units[(i, j)], units[(i, jj)]
                if j != jj and inside[x] and inside[y]:
                    cross += B(x, y)
    alpha1 = diag - cross / (k * m * (m - 1))

    squares = sum(A(u) ** 2 for u in order if inside[u]) / n
    rank_means = 0.0
    for i in range(k):
        rank_means += (sum(A(units[(i, j)]) for j in range(m) if inside[units[(i, j)]]) / m) ** 2
    alpha2 = squares - rank_means / k

    got1, got2 = alpha_hats(sample, scaled_gaussian(), gamma, S)
    assert got1 == pytest.approx(alpha1, rel=1e-10, abs=1e-12)
    assert got2 == pytest.approx(alpha2, rel=1e-10, abs=1e-12)


# --- end to end ---

def test_estimate_entropy_report(rss_sample):
    report = estimate_entropy(rss_sample, scaled_gaussian(), BandwidthPolicy.rule(1.2), coordinates=[0])
    assert report.p == 1 and report.n == 30 and report.k == 3
    assert report.gamma_used == pytest.approx(bandwidth_rule(rss_sample.project([0]), 1.2))
    direct = entropy_rss(rss_sample.project([0]), scaled_gaussian(), report.gamma_used)
    assert report.H == pytest.approx(direct)
    assert report.mse_hat is not None and report.cv is not None
    data = json.loads(report.to_json())
    assert data['kernel'] == 'scaled_gaussian' and data['support'] == 'all'


def test_estimate_entropy_without_diagnostics(rss_sample):
    report = estimate_entropy(rss_sample, scaled_gaussian(), BandwidthPolicy.fixed(0.5),
                              diagnostics=False)
    assert report.gamma_used == 0.5 and report.p == 2
    assert report.cv is None and report.mse_hat is None


def test_estimate_entropy_cv_policy(normal_rss):
    grid = [0.3, 0.5, 0.9]
    report = estimate_entropy(normal_rss, scaled_gaussian(), BandwidthPolicy.cv_grid(grid))
    assert report.gamma_used == select_bandwidth_cv(normal_rss, scaled_gaussian(), grid)
