import math

import jax
import jax.numpy as jnp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from epirenew.params import Block, ParamLayout, corr_cholesky_constrain, corr_cholesky_unconstrain
from epirenew.regression import (
    LinkFunction,
    NormalPrior,
    PoolingPrior,
    RandomWalk,
    RegressionSpec,
    ShrinkagePrior,
    build_design,
    design_log_prior,
    inverse_link,
    lkj_cholesky_logpdf,
    lkj_corr_logpdf,
    pooled_normal_logpdf,
    walk_index,
)


def test_weekly_walk_index():
    idx = walk_index(21, 7)
    # brute force: day d (1-based) lies in week (d - 1) // 7
    assert [int(i) for i in idx] == [(d - 1) // 7 for d in range(1, 22)]
    spec = RegressionSpec(intercept="global", random_walk=RandomWalk("weekly", per_group=False))
    design = build_design(spec, [{}], T=21)
    # three weekly levels; the first is pinned at 0, leaving two free increments
    assert design.n_increments == 2
    assert design.layout.block("walk_z").shape == (1, 2)
    params = {"intercept": jnp.zeros(1), "walk_z": jnp.array([[1.0, 2.0]]), "walk_scale": jnp.array([0.5])}
    path = np.asarray(design.walk(params))[0]
    np.testing.assert_allclose(path, np.repeat([0.0, 0.5, 1.5], 7))


def test_daily_walk_layout():
    spec = RegressionSpec(intercept="global", random_walk=RandomWalk("daily", per_group=True))
    design = build_design(spec, [{}, {}], T=10)
    assert design.layout.block("walk_z").shape == (2, 9)


def test_scaled_logit():
    link = LinkFunction("scaled-logit", 6.0)
    assert float(inverse_link(link, 0.0)) == pytest.approx(3.0)
    x = np.linspace(-30, 30, 2001)
    r = np.asarray(link.inverse(x))
    assert np.all(np.diff(r) > 0)
    assert np.all((r > 0) & (r < 6))
    assert float(link.inverse(-700.0)) >= 0 and float(link.inverse(700.0)) <= 6.0
    z = np.linspace(-10, 10, 21)
    np.testing.assert_allclose(np.asarray(link(link.inverse(z))), z, atol=1e-8)
    assert LinkFunction("scaled_logit").K == 6.0


def test_log_link():
    link = LinkFunction()
    assert float(link.inverse(math.log(2.5))) == pytest.approx(2.5)
    with pytest.raises(ValueError):
        LinkFunction("probit")
    with pytest.raises(ValueError):
        LinkFunction("scaled_logit", -1.0)


def test_spec_validation():
    with pytest.raises(ValueError):
        RegressionSpec(fixed=("a",), grouped=("a",))
    with pytest.raises(ValueError):
        RegressionSpec(fixed=("a",), standardize=("b",))
    with pytest.raises(ValueError):
        RegressionSpec(fixed=("a",), standardize=("a",), binary=("a",))
    with pytest.raises(ValueError):
        RegressionSpec(intercept="random")
    with pytest.raises(ValueError):
        RandomWalk("monthly")


def test_design_errors():
    spec = RegressionSpec(fixed=("lockdown",), binary=("lockdown",))
    with pytest.raises(ValueError, match="missing covariate"):
        build_design(spec, [{"lockdown": np.zeros(5)}, {"other": np.zeros(5)}])
    with pytest.raises(ValueError, match="binary"):
        build_design(spec, [{"lockdown": np.full(5, 0.5)}])
    with pytest.raises(ValueError, match="non-finite"):
        build_design(spec, [{"lockdown": np.array([0, 1, np.nan])}])


def test_standardization():
    spec = RegressionSpec(fixed=("mob",), standardize=("mob",), intercept="none")
    data = [{"mob": np.array([1.0, 2.0, 3.0])}, {"mob": np.array([5.0, 6.0, 7.0])}]
    design = build_design(spec, data)
    allv = np.array([1, 2, 3, 5, 6, 7.0])
    assert design.standardization["mob"] == pytest.approx((allv.mean(), allv.std()))
    np.testing.assert_allclose(design.X_fixed[..., 0].ravel(), (allv - allv.mean()) / allv.std())


def _random_params(layout, rng):
    theta = rng.normal(0, 0.7, layout.size)
    return theta, layout.unpack(jnp.asarray(theta))[0]


def test_linpred_matches_loops(rng):
    M, T = 3, 16
    data = [{"a": rng.integers(0, 2, T).astype(float), "b": rng.normal(size=T), "c": rng.normal(size=T)}
            for _ in range(M)]
    spec = RegressionSpec(fixed=("a",), grouped=("b", "c"), intercept="pooled",
                          binary=("a",), random_walk=RandomWalk("weekly"))
    design = build_design(spec, data)
    _, p = _random_params(design.layout, rng)
    p = {k: np.asarray(v) for k, v in p.items()}
    got = np.asarray(design.linpred({k: jnp.asarray(v) for k, v in p.items()}))
    L = p["group_corr"]
    devs = (p["group_z"] @ L.T) * p["group_scale"]
    inc = p["walk_z"] * p["walk_scale"][0]
    for m in range(M):
        for t in range(T):
            x = p["intercept"][0] + devs[m, 0]
            x += data[m]["a"][t] * p["coef"][0]
            x += data[m]["b"][t] * (p["coef"][1] + devs[m, 1])
            x += data[m]["c"][t] * (p["coef"][2] + devs[m, 2])
            week = t // 7
            x += sum(inc[m, :week])
            assert got[m, t] == pytest.approx(x, rel=1e-12, abs=1e-12)


def test_independent_intercepts():
    spec = RegressionSpec(intercept="independent")
    design = build_design(spec, [{}, {}], T=4)
    x = np.asarray(design.linpred({"group_intercept": jnp.array([0.1, -0.2])}))
    np.testing.assert_allclose(x, [[0.1] * 4, [-0.2] * 4])


def test_lkj_uniform_normalization():
    # for eta = 1 the LKJ density is uniform: 1/2 on (-1, 1) and 2/pi^2 for 3x3 matrices
    assert lkj_corr_logpdf([[1, 0.3], [0.3, 1]], 1.0) == pytest.approx(-math.log(2))
    c = np.array([[1, 0.2, -0.1], [0.2, 1, 0.4], [-0.1, 0.4, 1]])
    assert lkj_corr_logpdf(c, 1.0) == pytest.approx(-math.log(math.pi**2 / 2))
    assert lkj_corr_logpdf([[1, 1.2], [1.2, 1]], 1.0) == -np.inf


def test_lkj_two_by_two_eta():
    # for q = 2, r = 2u - 1 with u ~ Beta(eta, eta)
    r, eta = 0.35, 2.5
    want = stats.beta.logpdf((r + 1) / 2, eta, eta) - math.log(2)
    assert lkj_corr_logpdf([[1, r], [r, 1]], eta) == pytest.approx(want)
    L = jnp.array([[1.0, 0.0], [r, math.sqrt(1 - r * r)]])
    # on the Cholesky factor the density picks up |dr/dL21| = 1
    assert float(lkj_cholesky_logpdf(L, eta)) == pytest.approx(want)


def test_corr_cholesky_jacobian(rng):
    q = 3
    y = jnp.asarray(rng.normal(size=3))

    def free(y):
        L, _ = corr_cholesky_constrain(y, q)
        return jnp.array([L[1, 0], L[2, 0], L[2, 1]])

    J = jax.jacfwd(free)(y)
    _, lj = corr_cholesky_constrain(y, q)
    assert float(lj) == pytest.approx(float(jnp.log(jnp.abs(jnp.linalg.det(J)))), rel=1e-10)


@given(seed=st.integers(0, 2**31), q=st.integers(2, 5))
def test_corr_cholesky_round_trip(seed, q):
    y = np.random.default_rng(seed).normal(0, 1, q * (q - 1) // 2)
    L, _ = corr_cholesky_constrain(jnp.asarray(y), q)
    L = np.asarray(L)
    np.testing.assert_allclose(np.diag(L @ L.T), 1.0, atol=1e-12)
    np.testing.assert_allclose(corr_cholesky_unconstrain(L), y, atol=1e-8)


def test_pooled_normal_matches_scipy(rng):
    scales = np.array([0.5, 1.5])
    corr = np.array([[1.0, -0.4], [-0.4, 1.0]])
    devs = rng.normal(size=(4, 2))
    cov = corr * np.outer(scales, scales)
    want = stats.multivariate_normal(np.zeros(2), cov).logpdf(devs).sum()
    assert pooled_normal_logpdf(devs, scales, corr) == pytest.approx(want)
    assert pooled_normal_logpdf(devs, scales, [[1, 2], [2, 1]]) == -np.inf


def test_layout_pack_unpack(rng):
    layout = ParamLayout([Block("a", (2, 3)), Block("s", (1,), "positive"), Block("L", (3, 3), "corr_cholesky")])
    assert layout.size == 6 + 1 + 3
    theta = rng.normal(size=layout.size)
    vals, _ = layout.unpack(jnp.asarray(theta))
    np.testing.assert_allclose(layout.pack({k: np.asarray(v) for k, v in vals.items()}), theta, atol=1e-10)
    assert len(layout.names()) == layout.size
    with pytest.raises(ValueError):
        layout.add(Block("a", (1,)))


@pytest.mark.parametrize("prior", [NormalPrior(0.0, 1.0), ShrinkagePrior()])
def test_log_prior_gradient(prior, rng):
    M, T = 3, 15
    data = [{"a": rng.normal(size=T), "b": rng.normal(size=T)} for _ in range(M)]
    spec = RegressionSpec(fixed=("a",), grouped=("b",), intercept="pooled", effect_prior=prior,
                          pooling=PoolingPrior(0.3, 2.0), random_walk=RandomWalk("weekly"))
    design = build_design(spec, data)
    f = design_log_prior(design)
    h = 1e-5
    for _ in range(5):
        theta = rng.normal(0, 0.5, design.layout.size)
        v, g = f(theta)
        fd = np.array([(f(theta + h * e)[0] - f(theta - h * e)[0]) / (2 * h) for e in np.eye(theta.size)])
        np.testing.assert_allclose(g, fd, rtol=1e-5, atol=1e-6)


def test_prior_median_packs():
    spec = RegressionSpec(fixed=("a",), grouped=("b",), effect_prior=ShrinkagePrior(),
                          random_walk=RandomWalk("weekly"))
    design = build_design(spec, [{"a": np.zeros(14), "b": np.ones(14)}] * 2)
    theta = design.layout.pack(design.prior_median())
    assert np.all(np.isfinite(theta))
    assert design.n_effect_params("a") == 1
    assert design.n_effect_params("b") == 3
