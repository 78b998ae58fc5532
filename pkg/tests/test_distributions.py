import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from epirenew.distributions import (
    ContinuousLagDensity,
    DiscretePmf,
    TruncationWarning,
    discretize,
    match_moments,
)


def test_exponential_two_lags():
    with pytest.warns(TruncationWarning):
        pmf = discretize(ContinuousLagDensity.gamma(1.0, 1.0), 2)
    np.testing.assert_allclose(pmf.weights, [0.73105858, 0.26894142], atol=1e-8)
    assert pmf.first_lag == 1
    assert pmf.truncated_mass == pytest.approx(math.exp(-2))


def test_point_mass_in_first_bin():
    dens = ContinuousLagDensity.gamma(400.0, 800.0)  # mean 0.5, sd 0.025
    pmf = discretize(dens, 3)
    np.testing.assert_allclose(pmf.weights, [1.0, 0.0, 0.0], atol=1e-12)


def test_lognormal_matches_quadrature():
    mu, sigma = 1.0, 0.5

    def pdf(x):
        return math.exp(-((math.log(x) - mu) ** 2) / (2 * sigma**2)) / (x * sigma * math.sqrt(2 * math.pi))

    mass = np.array([integrate.quad(pdf, k - 1, k, epsabs=1e-14, epsrel=1e-13)[0] for k in range(1, 31)])
    pmf = discretize(ContinuousLagDensity.lognormal(mu, sigma), 30)
    np.testing.assert_allclose(pmf.weights, mass / mass.sum(), atol=1e-6)
    np.testing.assert_allclose(pmf.weights[:3], [0.02275015, 0.24695499, 0.30846941], atol=1e-8)


def test_delay_bins_start_at_zero():
    with pytest.warns(TruncationWarning):
        pmf = discretize(ContinuousLagDensity.gamma(1.0, 1.0), 1, kind="delay")
    assert pmf.first_lag == 0
    np.testing.assert_allclose(pmf.weights, [0.73105858, 0.26894142], atol=1e-8)


def test_truncation_warning_and_error():
    dens = ContinuousLagDensity.gamma(2.0, 0.1)  # mean 20
    with pytest.warns(TruncationWarning):
        discretize(dens, 40)
    with pytest.raises(ValueError):
        discretize(dens, 5)
    with pytest.raises(ValueError):
        discretize(dens, 0)


def test_invalid_density_parameters():
    with pytest.raises(ValueError):
        ContinuousLagDensity.gamma(-1.0, 1.0)
    with pytest.raises(ValueError):
        ContinuousLagDensity.lognormal(0.0, 0.0)
    ContinuousLagDensity.lognormal(-2.0, 1.0)


def test_pmf_validation():
    with pytest.raises(ValueError):
        DiscretePmf([0.5, 0.6])
    with pytest.raises(ValueError):
        DiscretePmf([1.2, -0.2])
    with pytest.raises(ValueError):
        DiscretePmf([])
    pmf = DiscretePmf.from_weights([1, 3])
    np.testing.assert_allclose(pmf.weights, [0.25, 0.75])
    assert pmf.mean() == pytest.approx(1.75)


def test_pmf_csv_round_trip(tmp_path):
    pmf = discretize(ContinuousLagDensity.from_mean_sd("gamma", 6.5, 4.3), 30)
    path = tmp_path / "g.csv"
    pmf.to_csv(path)
    back = DiscretePmf.from_csv(path)
    assert np.array_equal(back.weights, pmf.weights)
    assert back.first_lag == 1
    with pytest.raises(ValueError):
        DiscretePmf.from_csv("lag,weight\n1,0.5\n3,0.5\n")


def test_moment_matching_examples():
    p = match_moments("gamma", 10.0, 2.0)
    assert (p.shape, p.rate) == (5.0, 0.5)
    p = match_moments("gamma", 1.0, 1.0)
    assert (p.shape, p.rate) == (1.0, 1.0)
    p = match_moments("log-normal", 10.0, 2.0)
    assert p.a == pytest.approx(2.2114243145970685, rel=1e-12)
    assert p.b == pytest.approx(0.4269912842131027, rel=1e-12)
    assert math.exp(p.a + p.b**2 / 2) == pytest.approx(10.0)
    assert math.expm1(p.b**2) * 100 == pytest.approx(20.0)


@pytest.mark.parametrize("family", ["gamma", "lognormal", "weibull"])
@pytest.mark.parametrize("mean,d", [(10.0, 2.0), (0.5, 3.0), (200.0, 0.1)])
def test_moment_matching_recovers_moments(family, mean, d):
    dens = match_moments(family, mean, d).density()
    assert dens.mean() == pytest.approx(mean, rel=1e-8)
    assert dens.var() == pytest.approx(d * mean, rel=1e-8)


def test_moment_matching_rejects_bad_input():
    with pytest.raises(ValueError):
        match_moments("gamma", -1.0, 1.0)
    with pytest.raises(ValueError):
        match_moments("gamma", 1.0, 0.0)
    with pytest.raises(ValueError):
        match_moments("beta", 1.0, 1.0)


def test_integral_check():
    assert ContinuousLagDensity.weibull(2.0, 5.0).integral_check() == pytest.approx(1.0, abs=1e-9)


@given(
    shape=st.floats(0.5, 20.0),
    rate=st.floats(0.2, 5.0),
    max_lag=st.integers(1, 40),
    kind=st.sampled_from(["generation", "delay"]),
)
def test_discretize_sums_to_one(shape, rate, max_lag, kind):
    dens = ContinuousLagDensity.gamma(shape, rate)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        try:
            pmf = discretize(dens, max_lag, kind=kind)
        except ValueError:
            return
    assert abs(pmf.weights.sum() - 1.0) < 1e-12
    assert np.all(pmf.weights >= 0)


@given(shape=st.floats(1.0, 10.0), rate=st.floats(0.3, 3.0), extra=st.integers(1, 30))
def test_discretize_ratios_stable_under_longer_support(shape, rate, extra):
    dens = ContinuousLagDensity.gamma(shape, rate)
    n = max(int(math.ceil(dens.ppf(0.995))), 2)
    short = discretize(dens, n).weights
    long = discretize(dens, n + extra).weights[:n]
    # renormalization rescales every weight by the same factor
    np.testing.assert_allclose(long / long.sum(), short, rtol=1e-10, atol=1e-300)


@given(mean=st.floats(0.1, 500.0), d=st.floats(0.01, 50.0))
def test_gamma_rate_is_inverse_dispersion(mean, d):
    p = match_moments("gamma", mean, d)
    assert p.rate == pytest.approx(1.0 / d)
    assert p.shape / p.rate == pytest.approx(mean)
