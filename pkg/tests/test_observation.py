import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from oracles import convolve_loop
from scipy import stats

from epirenew.distributions import DiscretePmf
from epirenew.observation import (
    ObservationType,
    ObservedSeries,
    expected_observations,
    expected_seroprevalence,
    joint_log_likelihood,
    log_likelihood,
    pointwise_log_lik,
    sample_counts,
    seroprevalence_log_likelihood,
    simulate_observations,
)
from epirenew.renewal import InfectionPath

DELTA0 = DiscretePmf.delta(0)


def obs(family="neg_binomial", delay=DELTA0, alpha=1.0):
    return ObservationType("deaths", delay, family, alpha)


def test_identity_delay():
    y = expected_observations([100.0, 0.0, 0.0], 0.1, DELTA0)
    np.testing.assert_allclose(y, [10.0, 0.0, 0.0])


def test_pure_shift():
    i = np.zeros(10)
    i[3] = 7.0
    y = expected_observations(i, 1.0, DiscretePmf.delta(5, first_lag=0))
    assert y[8] == 7.0
    assert y.sum() == 7.0


def test_uniform_delay_on_constant_series():
    y = expected_observations(np.full(12, 100.0), 0.01, DiscretePmf(np.full(5, 0.2), first_lag=0))
    np.testing.assert_allclose(y[4:], 1.0)
    np.testing.assert_allclose(y[:4], [0.2, 0.4, 0.6, 0.8])


def test_infection_path_includes_seed_days():
    path = InfectionPath([50.0, 10.0], [0.0, 0.0, 0.0])
    y = expected_observations(path, 1.0, DiscretePmf([0.0, 0.5, 0.5], first_lag=0))
    # day 1 sees lag 1 from day 0 and lag 2 from day -1
    np.testing.assert_allclose(y, [5.0 + 25.0, 5.0, 0.0])


def test_matches_loop_oracle(rng):
    for _ in range(20):
        i = rng.uniform(0, 100, rng.integers(1, 60))
        w = rng.uniform(0, 1, rng.integers(1, 20))
        w /= w.sum()
        a = rng.uniform(0.01, 1.0)
        np.testing.assert_allclose(expected_observations(i, a, DiscretePmf(w, first_lag=0)),
                                   convolve_loop(i, w, a), rtol=1e-12)


def test_bad_alpha_and_delay():
    with pytest.raises(ValueError):
        expected_observations([1.0], 0.0, DELTA0)
    with pytest.raises(ValueError):
        expected_observations([1.0], 1.0, DiscretePmf.delta(1))
    with pytest.raises(ValueError):
        ObservationType("x", DiscretePmf.delta(1))


@given(seed=st.integers(0, 2**31), T=st.integers(1, 80), K=st.integers(1, 30))
def test_conservation(seed, T, K):
    r = np.random.default_rng(seed)
    i = r.uniform(0, 1000, T)
    w = r.uniform(0, 1, K)
    w /= w.sum()
    padded = np.concatenate([i, np.zeros(K)])
    y = expected_observations(padded, 1.0, DiscretePmf(w, first_lag=0))
    assert abs(y.sum() - i.sum()) <= 1e-9 * max(i.sum(), 1.0)


def test_poisson_log_pmf():
    lp = float(pointwise_log_lik("poisson", 3, 3.0))
    assert lp == pytest.approx(3 * math.log(3) - 3 - math.log(6), abs=1e-12)
    assert lp == pytest.approx(-1.4959226032237258, abs=1e-12)


def test_neg_binomial_matches_scipy():
    for k, mu, phi in [(0, 2.5, 0.7), (4, 2.5, 0.7), (30, 12.0, 5.0)]:
        want = stats.nbinom.logpmf(k, phi, phi / (phi + mu))
        assert float(pointwise_log_lik("neg_binomial", k, mu, phi)) == pytest.approx(want, rel=1e-10)


def test_quasi_poisson_matches_scipy():
    k, mu, phi = 7, 4.0, 3.0
    want = stats.nbinom.logpmf(k, mu / (phi - 1), 1 / phi)
    assert float(pointwise_log_lik("quasi_poisson", k, mu, phi)) == pytest.approx(want, rel=1e-10)


def test_neg_binomial_poisson_limit():
    a = float(pointwise_log_lik("neg_binomial", 2, 5.0, 1e8))
    b = float(pointwise_log_lik("poisson", 2, 5.0))
    assert abs(a - b) < 1e-6


def test_zero_mean():
    assert float(pointwise_log_lik("poisson", 0, 0.0)) == 0.0
    assert float(pointwise_log_lik("poisson", 1, 0.0)) == -np.inf


def test_masked_days_contribute_zero():
    series = ObservedSeries(obs(), [3, 500, 2], mask=[True, False, True])
    total, pw = log_likelihood(series, [3.0, 1.0, 2.0], phi=5.0)
    assert pw[1] == 0.0
    assert total == pytest.approx(pw[0] + pw[2])
    # the masked value is irrelevant
    series2 = ObservedSeries(obs(), [3, 0, 2], mask=[True, False, True])
    assert log_likelihood(series2, [3.0, 1.0, 2.0], phi=5.0)[0] == total


def test_joint_is_sum():
    s1 = ObservedSeries(obs("poisson"), [1, 2])
    s2 = ObservedSeries(ObservationType("cases", DELTA0, "neg_binomial"), [5, 9])
    a = log_likelihood(s1, [1.5, 2.5])[0] + log_likelihood(s2, [4.0, 10.0], 3.0)[0]
    assert joint_log_likelihood([(s1, [1.5, 2.5], None), (s2, [4.0, 10.0], 3.0)]) == pytest.approx(a)


def test_series_validation():
    with pytest.raises(ValueError):
        ObservedSeries(obs(), [1.5, 2])
    with pytest.raises(ValueError):
        ObservedSeries(obs(), [-1, 2])
    with pytest.raises(ValueError):
        log_likelihood(ObservedSeries(obs(), [1, 2]), [1.0, 1.0], phi=-1.0)
    with pytest.raises(ValueError):
        log_likelihood(ObservedSeries(obs("quasi_poisson"), [1, 2]), [1.0, 1.0], phi=1.0)
    # a masked missing value may be NaN
    ObservedSeries(obs(), [1, np.nan], mask=[True, False])


def test_zero_mean_draws_zero(rng):
    assert np.all(sample_counts(np.zeros(50), "poisson", None, rng) == 0)


@pytest.mark.parametrize("family,phi,var", [("poisson", None, 10.0), ("neg_binomial", 2.0, 60.0),
                                            ("quasi_poisson", 3.0, 30.0)])
def test_sampled_moments(family, phi, var):
    n = 100_000
    x = sample_counts(np.full(n, 10.0), family, phi, np.random.default_rng(7)).astype(float)
    assert abs(x.mean() - 10.0) < 4 * x.std() / math.sqrt(n)
    c = x - x.mean()
    se_var = math.sqrt((np.mean(c**4) - np.mean(c**2) ** 2) / n)
    assert abs(x.var(ddof=1) - var) < 4 * se_var


def test_simulate_observations_shapes(rng):
    path = InfectionPath([10.0], np.full(20, 100.0))
    s = simulate_observations(path, 0.5, obs(), 10.0, rng)
    assert s.T == 20 and s.counts.dtype == np.int64


def test_seroprevalence():
    pi = DiscretePmf([0.5, 0.5], first_lag=0)
    prev = expected_seroprevalence(np.full(4, 10.0), pi, 100.0)
    np.testing.assert_allclose(prev, [0.05, 0.15, 0.25, 0.35])
    total, pw = seroprevalence_log_likelihood([100, 100, 0, 0], [5, 15, 0, 0], np.full(4, 10.0), pi, 100.0)
    want = stats.binom.logpmf(5, 100, 0.05) + stats.binom.logpmf(15, 100, 0.15)
    assert total == pytest.approx(want)
    with pytest.raises(ValueError):
        seroprevalence_log_likelihood([1], [2], [1.0], pi, 10.0)
