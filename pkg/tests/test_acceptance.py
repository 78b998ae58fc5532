"""
Acceptance suite. Each test prints one ``PASS``/``FAIL`` line with the
measured statistic and then asserts it, so ``pytest -v`` output doubles
as the acceptance report. The inference criteria run 20 full replications
and take most of the suite's wall time.
"""

import math
import time
import warnings

import jax
import jax.numpy as jnp
import numpy as np
import pytest

from epirenew import DiscretePmf, NormalPrior, RegressionSpec, SeedingConfig, propagate_expected
from epirenew.analysis import (
    MediationSettings,
    Stage1Settings,
    lockdown_epidemic,
    mediation,
    mediation_epidemic,
    npi_mobility_epidemic,
    two_stage,
)
from epirenew.ctsim import LEMMA_SETTINGS, dispersion_suite, population_lemma_suite
from epirenew.inference import EpidemicModel, LatentSpec, SamplerConfig, diagnose, fit, sample, summarize
from epirenew.observation import expected_observations
from epirenew.renewal import simulate_latent_batch

from oracles import random_renewal_instance, renewal_double_loop

N_REPS = 20
NEED = 18


@pytest.fixture
def report(capsys):
    def emit(criterion, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} [{criterion}] {detail}")
        assert ok, detail

    return emit


def _quiet(fn, *args, **kwargs):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return fn(*args, **kwargs)


def test_a1_renewal_recursion(report):
    g = DiscretePmf.delta(1)
    doubling = propagate_expected([1.0], np.full(20, 2.0), g).values
    exact = bool(np.array_equal(doubling, 2.0 ** np.arange(1, 21)))
    rng = np.random.default_rng(101)
    instances = [random_renewal_instance(rng, T_max=50) for _ in range(200)]
    t0 = time.perf_counter()
    paths = [propagate_expected(s, R, DiscretePmf(w)).values for s, R, w in instances]
    elapsed = time.perf_counter() - t0
    worst = 0.0
    for (s, R, w), got in zip(instances, paths):
        ref = renewal_double_loop(s, R, w)
        scale = np.maximum(np.abs(ref), np.finfo(float).tiny)
        worst = max(worst, float(np.max(np.abs(got - ref) / scale)))
    ok = exact and worst <= 1e-12 and elapsed < 1.0
    report("1 renewal", ok, f"2^t exact={exact}; max rel err {worst:.2e} over 200 instances; {elapsed:.3f} s")


def test_a2_population_lemma(report):
    sats = sorted({round(R_u * L / S0, 6) for S0, _, R_u, L in LEMMA_SETTINGS})
    t0 = time.perf_counter()
    checks = population_lemma_suite(100_000, np.random.default_rng(202))
    elapsed = time.perf_counter() - t0
    worst = max(abs(c.z) for c in checks)
    covered = all(s in sats for s in (0.1, 1.0, 10.0))
    ok = len(checks) == 10 and covered and worst < 4 and elapsed < 300
    report("2 population lemma", ok, f"{len(checks)} settings, saturations {sats}; max |z| {worst:.2f}; "
           f"{elapsed:.1f} s")


def test_a3_dispersion(report):
    t0 = time.perf_counter()
    checks = dispersion_suite(100_000, np.random.default_rng(303))
    elapsed = time.perf_counter() - t0
    worst = max(abs(c.z) for c in checks)
    ratios = ", ".join(f"{c.name}: {c.estimate:.3f}" for c in checks)
    ok = worst < 4 and elapsed < 300
    report("3 dispersion", ok, f"max |z| {worst:.2f} ({ratios}); {elapsed:.1f} s")


def test_a4_gradient(report):
    ep = mediation_epidemic(np.random.default_rng(404), "full", n_regions=2, T=30)
    spec = RegressionSpec(fixed=("lockdown",), grouped=("mobility",), intercept="pooled",
                          intercept_prior=NormalPrior(math.log(2.5), 0.5), binary=("lockdown",))
    model = EpidemicModel(ep.regions, spec, ep.g, [ep.observation], SeedingConfig(), latent=LatentSpec())
    rng = np.random.default_rng(405)
    h = 1e-5
    logp = jax.jit(jax.vmap(model.logdensity))
    eye = np.eye(model.dim) * h
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        theta = model.initial_point() + rng.normal(0, 0.1, model.dim)
        _, grad = model.logp_and_grad(theta)
        vals = np.asarray(logp(jnp.asarray(np.concatenate([theta + eye, theta - eye]))))
        fd = (vals[: model.dim] - vals[model.dim:]) / (2 * h)
        worst = max(worst, float(np.max(np.abs(grad - fd) / np.maximum(np.abs(fd), 1.0))))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-4 and elapsed < 60
    report("4 gradient", ok, f"dim {model.dim}; max rel err {worst:.2e} over 100 states; {elapsed:.1f} s")


def _lockdown_replication(seed):
    ep = lockdown_epidemic(np.random.default_rng(seed))
    spec = RegressionSpec(fixed=("lockdown",), intercept="independent",
                          intercept_prior=NormalPrior(math.log(2.5), 0.5), binary=("lockdown",))
    model = EpidemicModel(ep.regions, spec, ep.g, [ep.observation],
                          SeedingConfig(log_mean=math.log(100), log_sd=1.0))
    post = _quiet(fit, model, SamplerConfig(warmup=500, draws=500, seed=seed))
    q = model.batch("quantities", post.flat)
    beta = summarize(q["R.beta"][:, 0])
    covered = bool(beta.q2_5 <= ep.truth["beta"] <= beta.q97_5)
    med = np.median(q["R"], axis=0)
    rel = float(np.max(np.abs(med / ep.R - 1)[:, 10:90]))
    return covered, rel


def test_a5_lockdown_recovery(report):
    t0 = time.perf_counter()
    results = [_lockdown_replication(1000 + k) for k in range(N_REPS)]
    elapsed = time.perf_counter() - t0
    n_cov = sum(c for c, _ in results)
    rels = [r for _, r in results]
    n_rt = sum(r <= 0.15 for r in rels)
    ok = n_cov >= NEED and n_rt == N_REPS and elapsed < 1800
    report("5 lockdown", ok, f"beta covered {n_cov}/{N_REPS}; R_t within 15% on days 11-90 in "
           f"{n_rt}/{N_REPS} (worst {max(rels):.3f}); {elapsed:.0f} s")


def test_a6_two_stage_ranking(report):
    wins, diffs = 0, []
    cfg = SamplerConfig(warmup=300, draws=300)
    for k in range(N_REPS):
        seed = 2000 + k
        ep = npi_mobility_epidemic(np.random.default_rng(seed), n_regions=3, T=70, alpha=0.005)
        res = _quiet(two_stage, ep.regions, ep.g, [ep.observation], npis=("schools", "events", "lockdown"),
                     stage1=Stage1Settings(config=cfg), stage2_config=cfg, seed=seed)
        mob = res.elpd("Mobility_only")
        d = min(res.elpd("NPI_only"), res.elpd("NPI+Mobility")) - mob
        diffs.append(d)
        wins += d > 0
    ok = wins >= NEED
    report("6 two-stage", ok, f"NPI variants above Mobility_only in {wins}/{N_REPS}; "
           f"median margin {np.median(diffs):.1f} elpd")


@pytest.mark.parametrize("kind, want_exclude", [("full", True), ("none", False)])
def test_a7_mediation(kind, want_exclude, report):
    hits = 0
    settings = MediationSettings(config=SamplerConfig(warmup=300, draws=300))
    for k in range(N_REPS):
        seed = 3000 + k
        ep = mediation_epidemic(np.random.default_rng(seed), kind, n_regions=4, T=80)
        res = _quiet(mediation, ep.regions, ep.g, [ep.observation], settings=settings, seed=seed)
        hits += res.excludes_zero() == want_exclude
    verb = "excludes" if want_exclude else "includes"
    report(f"7 mediation {kind}", hits >= NEED, f"mediated CI {verb} 0 in {hits}/{N_REPS}")


def test_a8_conservation_and_cap(report):
    rng = np.random.default_rng(808)
    worst_cons = 0.0
    for _ in range(200):
        T = int(rng.integers(5, 60))
        inf = np.concatenate([rng.gamma(2.0, 50.0, T), np.zeros(40)])
        w = rng.dirichlet(np.ones(int(rng.integers(1, 40))))
        y = expected_observations(inf, 1.0, DiscretePmf(w, first_lag=0))
        worst_cons = max(worst_cons, abs(y.sum() - inf.sum()) / inf.sum())
    g = DiscretePmf(rng.dirichlet(np.ones(15)))
    over = 0
    for _ in range(10_000):
        S0 = float(10 ** rng.uniform(1, 7))
        seeds = rng.uniform(0, 0.05 * S0, int(rng.integers(1, 6)))
        R = rng.uniform(0, 20, int(rng.integers(10, 120)))
        cum = seeds.sum() + propagate_expected(seeds, R, g, population=S0).values.sum()
        over += cum > S0
    latent = simulate_latent_batch([50.0] * 3, np.full(80, 6.0), g, 2.0, 10_000, rng, population=5000.0)
    over_latent = int(np.sum(latent.sum(axis=1) + 150.0 > 5000.0))
    ok = worst_cons <= 1e-9 and over == 0 and over_latent == 0
    report("8 conservation", ok, f"max rel |sum y - sum i| {worst_cons:.1e}; paths above S0: "
           f"{over}/10000 expected, {over_latent}/10000 latent")


def test_a9_sampler(report):
    targets = {
        "standard normal": (lambda x: -0.5 * jnp.sum(x**2), np.zeros(1), np.zeros(1)),
        "bivariate rho=0.9": (
            lambda x: -0.5 * (x[0] ** 2 - 1.8 * x[0] * x[1] + x[1] ** 2) / 0.19, np.zeros(2), np.zeros(2)),
    }
    lines, ok = [], True
    t0 = time.perf_counter()
    for name, (logp, init, mean) in targets.items():
        res = sample(logp, init, SamplerConfig(n_chains=4, warmup=1000, draws=2000, seed=9))
        diag = diagnose(res.draws)
        err = float(np.max(np.abs(res.draws.reshape(-1, init.size).mean(0) - mean)))
        ess_pc = diag.min_ess_bulk / res.draws.shape[0]
        good = err < 0.05 and diag.max_rhat < 1.01 and ess_pc > 400
        ok &= good
        lines.append(f"{name}: mean err {err:.3f}, R-hat {diag.max_rhat:.4f}, ESS/chain {ess_pc:.0f}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 60
    report("9 sampler", ok, "; ".join(lines) + f"; {elapsed:.1f} s")
