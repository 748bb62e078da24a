import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cbml.bayes import (
    GaussianFit,
    fit_from_samples,
    fit_similarity_gaussians,
    harmonic_mean,
    linear_ratio_fit,
    phi_n,
    phi_p,
    posteriors,
    prior_ratio,
    ratio_fit,
)
from cbml.errors import InsufficientPairs, InsufficientVariance
from cbml.pairs import partition_pairs


def test_constant_sample_rejected():
    with pytest.raises(InsufficientVariance):
        fit_from_samples([0.5, 0.5], [0.1, 0.2])


def test_too_few_pairs():
    with pytest.raises(InsufficientPairs):
        fit_from_samples([0.5], [0.1, 0.2])


def test_two_point_fit():
    fit = fit_from_samples([0.4, 0.8], [0.0, 0.2])
    assert fit.mu_pos == pytest.approx(0.6, abs=1e-15)
    assert fit.sigma_pos == pytest.approx(math.sqrt(2 * 0.04), abs=1e-15)


def test_fit_from_matrix_counts_each_pair_once():
    # labels 0,0,0,1: positive pairs (0,1),(0,2),(1,2); negatives (k,3).
    sims = np.array(
        [
            [1.0, 0.4, 0.8, -0.4],
            [0.4, 1.0, 0.6, -0.8],
            [0.8, 0.6, 1.0, -0.6],
            [-0.4, -0.8, -0.6, 1.0],
        ]
    )
    fit = fit_similarity_gaussians(sims, *partition_pairs([0, 0, 0, 1]))
    assert fit.mu_pos == pytest.approx(0.6)
    assert fit.mu_neg == pytest.approx(-0.6)
    assert fit.sigma_pos == pytest.approx(0.2)
    assert fit.sigma_neg == pytest.approx(fit.sigma_pos)


def test_equal_variances_give_zero_quadratic():
    rf = ratio_fit(GaussianFit(0.7, 0.2, 0.1, 0.2))
    assert rf.zeta1 == 0.0


def test_identical_distributions():
    rf = ratio_fit(GaussianFit(0.3, 0.1, 0.3, 0.1))
    assert (rf.varsigma, rf.zeta1, rf.zeta2, rf.zeta3) == (1.0, 0.0, 0.0, 0.0)
    for z in (-1.0, 0.0, 0.42, 1.0):
        assert phi_n(z, rf) == 1.0
        assert phi_p(z, rf) == 1.0


def test_midpoint_ratio_is_one():
    rf = ratio_fit(GaussianFit(0.8, 0.3, 0.2, 0.3))
    assert phi_n(0.5, rf) == pytest.approx(1.0, abs=1e-12)


def test_equal_variance_matches_closed_form():
    mu_p, mu_n, s = 0.75, 0.1, 0.15
    rf = ratio_fit(GaussianFit(mu_p, s, mu_n, s))
    for z in np.linspace(-1, 1, 9):
        closed = math.exp((2 * (mu_p - mu_n) * z + (mu_n**2 - mu_p**2)) / (2 * s * s))
        assert phi_n(z, rf) == pytest.approx(closed, rel=1e-12)


def test_quadratic_ratio_matches_density_ratio():
    fit = GaussianFit(0.6, 0.1, 0.05, 0.25)
    rf = ratio_fit(fit)

    def pdf(z, mu, s):
        return math.exp(-((z - mu) ** 2) / (2 * s * s)) / (s * math.sqrt(2 * math.pi))

    for z in (-0.3, 0.1, 0.35, 0.7):
        direct = pdf(z, fit.mu_pos, fit.sigma_pos) / pdf(z, fit.mu_neg, fit.sigma_neg)
        assert phi_n(z, rf) == pytest.approx(direct, rel=1e-10)


def test_equal_variance_log_phi_collinear():
    rf = ratio_fit(GaussianFit(0.8, 0.25, 0.2, 0.25))
    logs = [math.log(phi_n(z, rf)) for z in (0.0, 0.5, 1.0)]
    assert logs[0] - 2 * logs[1] + logs[2] == pytest.approx(0.0, abs=1e-10)


def test_linear_fit_equals_exact_when_variances_agree():
    fit = GaussianFit(0.8, 0.25, 0.2, 0.25)
    z = np.linspace(-1, 1, 11)
    np.testing.assert_allclose(phi_n(z, linear_ratio_fit(fit)), phi_n(z, ratio_fit(fit)), rtol=1e-12)


def test_huge_exponents_do_not_overflow():
    rf = ratio_fit(GaussianFit(0.9, 0.001, -0.9, 0.001))
    assert np.isfinite(phi_n(1.0, rf))
    assert phi_p(1.0, rf) >= 0.0


@pytest.mark.parametrize("phi, theta, expected", [(1.0, 1.0, (0.5, 0.5)), (3.0, 1.0, (0.75, 0.25))])
def test_posterior_examples(phi, theta, expected):
    assert posteriors(phi, theta) == pytest.approx(expected, abs=1e-15)


def test_prior_ratio():
    assert prior_ratio(3, 12) == 0.25
    with pytest.raises(InsufficientPairs):
        prior_ratio(3, 0)


@given(st.floats(1e-6, 1e6), st.floats(1e-6, 1e6))
def test_posteriors_normalized(phi, theta):
    p_pos, p_neg = posteriors(phi, theta)
    assert 0 < p_neg < 1 and 0 < p_pos < 1
    assert p_pos + p_neg == pytest.approx(1.0, abs=1e-12)


@given(st.floats(1e-3, 1e3), st.floats(1e-3, 1e3), st.floats(1e-3, 1e3))
def test_p_neg_decreasing_in_phi(phi, bump, theta):
    assert posteriors(phi + bump, theta)[1] < posteriors(phi, theta)[1]


@given(st.floats(-3, 3), st.floats(-1, 1), st.floats(-1, 1), st.floats(0.05, 1), st.floats(0.05, 1))
def test_reciprocal_ratios(z, mu_p, mu_n, s_p, s_n):
    rf = ratio_fit(GaussianFit(mu_p, s_p, mu_n, s_n))
    if abs(rf.log_phi_n(z)) < 500:
        assert phi_n(z, rf) * phi_p(z, rf) == pytest.approx(1.0, abs=1e-12)


@given(st.floats(-1, 1), st.floats(0.01, 0.99), st.floats(0.05, 0.5))
def test_phi_increasing_when_positives_sit_higher(mu_n, gap, s):
    mu_p = min(1.0, mu_n + gap)
    if mu_p <= mu_n:
        return
    rf = ratio_fit(GaussianFit(mu_p, s, mu_n, s))
    z = np.linspace(-1, 1, 50)
    assert np.all(np.diff(rf.log_phi_n(z)) > 0)


@given(st.lists(st.floats(1e-3, 1.0), min_size=1, max_size=40))
def test_harmonic_not_above_arithmetic(values):
    assert harmonic_mean(values) <= np.mean(values) * (1 + 1e-12)


@given(st.lists(st.floats(1e-3, 1e3), min_size=1, max_size=20), st.floats(0.01, 100))
def test_harmonic_posterior_objective_matches_prior_form(phi_p_values, theta):
    """log of the harmonic-mean posterior equals log(1 + mean(phi_P) / theta)."""
    phi = np.array(phi_p_values)
    p_pos = 1.0 / (1.0 + phi / theta)
    lhs = -math.log(harmonic_mean(p_pos))
    rhs = math.log(1 + np.mean(phi) / theta)
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-12)
