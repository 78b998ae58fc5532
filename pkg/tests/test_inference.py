import math
import warnings

import jax.numpy as jnp
import numpy as np
import pytest
from scipy.special import logsumexp

from epirenew.analysis.synthetic import lockdown_epidemic, mediation_epidemic
from epirenew.data import RegionSeries
from epirenew.distributions import DiscretePmf
from epirenew.inference import (
    EpidemicModel,
    LatentSpec,
    PosteriorDraws,
    SamplerConfig,
    compare,
    diagnose,
    ess_bulk,
    fit,
    forecast,
    sample,
    split_rhat,
    summarize,
    waic,
)
from epirenew.observation import ObservedSeries, expected_observations, log_likelihood
from epirenew.regression import NormalPrior, RegressionSpec
from epirenew.renewal import SeedingConfig, latent_log_density, propagate_expected, InfectionPath


# --- WAIC and summaries ---------------------------------------------------------


def test_waic_brute_force():
    ll = np.array([[-1.0, -2.0], [-1.5, -0.5], [-0.7, -3.0]])
    S = ll.shape[0]
    elpd = 0.0
    p_total = 0.0
    for i in range(ll.shape[1]):
        col = ll[:, i]
        lppd = math.log(sum(math.exp(v) for v in col) / S)
        mean = sum(col) / S
        p = sum((v - mean) ** 2 for v in col) / (S - 1)
        elpd += lppd - p
        p_total += p
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        w = waic(ll)
    assert w.elpd == pytest.approx(elpd, rel=1e-12)
    assert w.p_waic == pytest.approx(p_total, rel=1e-12)
    assert w.waic == pytest.approx(-2 * elpd)


def test_waic_constant_log_lik():
    ll = np.full((50, 4), -1.3)
    w = waic(ll)
    assert w.p_waic == pytest.approx(0.0, abs=1e-25)
    assert w.elpd == pytest.approx(-5.2)


def test_waic_rejects_bad_input():
    with pytest.raises(ValueError):
        waic(np.zeros((1, 5)))
    with pytest.raises(ValueError):
        waic(np.array([[0.0, -np.inf], [0.0, 0.0]]))


def test_compare_identical_models(rng):
    ll = rng.normal(-2, 0.1, (200, 30))
    a = waic(ll)
    rows = compare({"x": a, "y": waic(ll.copy())})
    assert all(r.elpd_diff == 0.0 for r in rows)
    better = waic(ll + 0.05)
    rows = compare({"x": a, "better": better})
    assert rows[0].model == "better"
    assert rows[1].elpd_diff < 0


def test_summarize_median():
    s = summarize(np.arange(1, 101))
    assert float(s.q50) == 50.5
    assert float(s.mean) == 50.5
    assert s.covers(50.0)
    with pytest.raises(ValueError):
        summarize(np.zeros((0, 3)))


# --- diagnostics -------------------------------------------------------------------


def test_rhat_and_ess(rng):
    x = rng.standard_normal((4, 1000))
    assert abs(split_rhat(x) - 1.0) < 0.01
    assert ess_bulk(x) > 3000
    shifted = x + np.array([0.0, 0.0, 0.0, 3.0])[:, None]
    assert split_rhat(shifted) > 1.2
    ar = np.zeros((4, 1000))
    for t in range(1, 1000):
        ar[:, t] = 0.9 * ar[:, t - 1] + rng.standard_normal(4)
    # an AR(1) chain with rho = 0.9 has ESS near n (1 - rho) / (1 + rho)
    assert 100 < ess_bulk(ar) < 400


def test_diagnose_lines(rng):
    d = diagnose(rng.standard_normal((2, 100, 3)), ["a", "b", "c"])
    assert d.converged()
    assert any("R-hat" in line for line in d.lines())


# --- sampler -------------------------------------------------------------------------


def test_sampler_is_deterministic():
    f = lambda x: -0.5 * jnp.sum(x**2)  # noqa: E731
    cfg = SamplerConfig(n_chains=2, warmup=100, draws=100, seed=3)
    a = sample(f, np.zeros(3), cfg)
    b = sample(f, np.zeros(3), cfg)
    assert np.array_equal(a.draws, b.draws)
    c = sample(f, np.zeros(3), SamplerConfig(n_chains=2, warmup=100, draws=100, seed=4))
    assert not np.array_equal(a.draws, c.draws)


def test_sampler_recovers_gaussian():
    mu = jnp.array([1.0, -2.0])
    sd = jnp.array([0.5, 3.0])
    res = sample(lambda x: -0.5 * jnp.sum(((x - mu) / sd) ** 2), np.zeros(2),
                 SamplerConfig(n_chains=2, warmup=500, draws=1000, seed=1))
    x = res.draws.reshape(-1, 2)
    np.testing.assert_allclose(x.mean(0), [1.0, -2.0], atol=0.15)
    np.testing.assert_allclose(x.std(0), [0.5, 3.0], rtol=0.1)
    assert res.divergence_rate == 0.0


def test_metropolis_fallback():
    res = sample(lambda x: -0.5 * jnp.sum(x**2), np.zeros(2),
                 SamplerConfig(n_chains=2, warmup=2000, draws=4000, seed=2, algorithm="metropolis"))
    x = res.draws.reshape(-1, 2)
    np.testing.assert_allclose(x.mean(0), 0.0, atol=0.15)
    np.testing.assert_allclose(x.var(0), 1.0, rtol=0.2)


def test_sampler_config_validation():
    with pytest.raises(ValueError):
        SamplerConfig(algorithm="gibbs")
    with pytest.raises(ValueError):
        SamplerConfig(target_accept=1.0)
    with pytest.raises(ValueError):
        SamplerConfig(max_depth=0)


# --- epidemic model ----------------------------------------------------------------------


def small_model(latent=None, T=40, M=2, seed=0):
    ep = mediation_epidemic(np.random.default_rng(seed), "full", n_regions=M, T=T)
    spec = RegressionSpec(fixed=("lockdown",), grouped=("mobility",), intercept="pooled",
                          intercept_prior=NormalPrior(math.log(2.5), 0.5), binary=("lockdown",))
    model = EpidemicModel(ep.regions, spec, ep.g, [ep.observation], SeedingConfig(), latent=latent)
    return model, ep


def test_model_matches_numpy_modules(rng):
    model, ep = small_model()
    theta = model.initial_point() + rng.normal(0, 0.1, model.dim)
    q = model.quantities(theta)
    phi = float(q["phi.cases"])
    pw = model.pointwise_log_lik(theta)
    offset = 0
    for m, region in enumerate(ep.regions):
        path = propagate_expected(q["seeds"][m], q["R"][m], model.g)
        np.testing.assert_allclose(q["infections"][m], path.values, rtol=1e-10)
        y = expected_observations(path, ep.observation.ascertainment, ep.observation.delay)
        np.testing.assert_allclose(q["expected.cases"][m], y, rtol=1e-10)
        series = ObservedSeries(ep.observation, region.counts["cases"])
        _, lp = log_likelihood(series, y, phi)
        np.testing.assert_allclose(pw[offset: offset + region.T], lp, rtol=1e-9)
        offset += region.T


def test_latent_prior_matches_renewal_module(rng):
    model, ep = small_model(latent=LatentSpec(d=2.0), T=30)
    base = model.initial_point() + rng.normal(0, 0.05, model.dim)
    other = base.copy()
    sl = model.layout.slice("latent_u")
    other[sl] += rng.normal(0, 0.2, sl.stop - sl.start)

    def pieces(theta):
        q = model.quantities(theta)
        lat, ll = 0.0, 0.0
        for m, region in enumerate(ep.regions):
            path = InfectionPath(q["seeds"][m], q["infections"][m], "latent")
            lat += latent_log_density(path, q["R"][m], model.g, 2.0)
            series = ObservedSeries(ep.observation, region.counts["cases"])
            ll += log_likelihood(series, q["expected.cases"][m], float(q["phi.cases"]))[0]
        jac = float(np.sum(theta[sl]))
        return lat + ll + jac

    delta_model = model.log_posterior(other) - model.log_posterior(base)
    assert delta_model == pytest.approx(pieces(other) - pieces(base), rel=1e-8)


def test_masked_data_gives_prior():
    model, ep = small_model(T=20)
    masked = []
    for r in ep.regions:
        counts = {"cases": r.counts["cases"] * 7}
        masked.append(RegionSeries(r.region, r.start, r.T, None, dict(r.covariates), counts,
                                   {"cases": np.zeros(r.T, bool)}))
    a = EpidemicModel(masked, model.transmission.spec, model.g, model.observations, model.seeding)
    masked2 = [RegionSeries(r.region, r.start, r.T, None, dict(r.covariates), {"cases": np.zeros(r.T, int)},
                            {"cases": np.zeros(r.T, bool)}) for r in ep.regions]
    b = EpidemicModel(masked2, model.transmission.spec, model.g, model.observations, model.seeding)
    theta = a.initial_point() + 0.1
    assert a.n_observed == 0
    assert a.log_posterior(theta) == b.log_posterior(theta)
    assert a.pointwise_log_lik(theta).size == 0


def test_gradient_matches_finite_differences(rng):
    model, _ = small_model(latent=LatentSpec(), T=25)
    h = 1e-5
    for _ in range(3):
        theta = model.initial_point() + rng.normal(0, 0.1, model.dim)
        _, g = model.logp_and_grad(theta)
        fd = np.empty(model.dim)
        for k in range(model.dim):
            e = np.zeros(model.dim)
            e[k] = h
            fd[k] = (model.log_posterior(theta + e) - model.log_posterior(theta - e)) / (2 * h)
        err = np.max(np.abs(g - fd) / np.maximum(np.abs(fd), 1.0))
        assert err < 1e-4


def test_population_model_caps_infections(rng):
    ep = lockdown_epidemic(np.random.default_rng(1), n_regions=1, T=40)
    region = ep.regions[0]
    region.population = 5000.0
    spec = RegressionSpec(intercept="global", intercept_prior=NormalPrior(1.5, 0.1))
    model = EpidemicModel([region], spec, ep.g, [ep.observation], SeedingConfig(log_mean=3.0), use_population=True)
    q = model.quantities(model.initial_point())
    assert q["seeds"].sum() + q["infections"].sum() <= 5000.0 * (1 + 1e-12)


def test_forecast_declines_when_R_below_one():
    model, _ = small_model(T=30)
    theta = model.initial_point()
    params = model.constrained(theta)
    params["R.intercept"] = np.array([math.log(0.7)])
    params["R.group_z"] = np.zeros_like(params["R.group_z"])
    thetas = np.stack([model.layout.pack(params)] * 3)
    out = forecast(model, thetas, horizon=30, scenario={"lockdown": 0.0})
    inf = out["infections"]
    assert inf.shape == (3, 2, 30)
    # once the generation window has passed, infections shrink every day
    assert np.all(np.diff(inf[:, :, 15:], axis=2) < 0)
    with pytest.raises(KeyError):
        forecast(model, thetas, 5, scenario={"unknown": 1.0})


def test_fit_is_reproducible_and_round_trips(tmp_path):
    ep = lockdown_epidemic(np.random.default_rng(2), n_regions=1, T=50)
    spec = RegressionSpec(fixed=("lockdown",), intercept="global", binary=("lockdown",),
                          intercept_prior=NormalPrior(math.log(2.5), 0.5))
    model = EpidemicModel(ep.regions, spec, ep.g, [ep.observation])
    cfg = SamplerConfig(n_chains=2, warmup=150, draws=100, seed=9)
    a = fit(model, cfg)
    b = fit(model, cfg)
    assert np.array_equal(a.draws, b.draws)
    assert a.pointwise.shape == (200, model.n_observed)
    path = tmp_path / "draws.csv"
    a.to_csv(path)
    back = PosteriorDraws.from_csv(path)
    assert np.array_equal(back.draws, a.draws)
    assert back.names == a.names
    assert "seed/R_1 correlation [region1]" in a.diagnostics.extra


def test_posterior_draws_validation():
    with pytest.raises(ValueError):
        PosteriorDraws(np.zeros((2, 3)), ["a"])
    with pytest.raises(ValueError):
        PosteriorDraws(np.zeros((1, 2, 2)), ["a"])
