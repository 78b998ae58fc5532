import math

import numpy as np
import pytest

from epirenew.ctsim import (
    EventCapExceeded,
    EventLog,
    IntensitySpec,
    ObservationProcess,
    ZCheck,
    exponential_renewal_mean,
    offspring_dispersion,
    per_infector_offspring,
    renewal_mean_quadrature,
    run_suites,
    simulate_exponential_batch,
    simulate_frozen_saturation,
    simulate_thinning,
    verify_observation_intensity,
    verify_population_lemma,
)
from epirenew.distributions import ContinuousLagDensity, discretize
from epirenew.renewal import propagate_expected

G = ContinuousLagDensity.gamma(2.0, 1.0)


def test_event_log_round_trip(tmp_path):
    log = EventLog(np.array([0.5, -1.0, 2.25]), ["infection", "seed", "deaths"])
    assert log.marks == ["seed", "infection", "deaths"]
    path = tmp_path / "events.csv"
    log.to_csv(path)
    back = EventLog.from_csv(path)
    assert np.array_equal(back.times, log.times)
    assert back.marks == log.marks
    assert np.array_equal(log.daily_counts(3), [1, 0, 0])
    assert np.array_equal(log.daily_counts(3, "deaths"), [0, 0, 1])


def test_zero_reproduction_number_gives_seeds_only(rng):
    log = simulate_thinning(IntensitySpec(0.0, G, seeds=(0.0, -1.0)), 10.0, rng)
    assert log.of("infection").size == 0
    assert log.of("seed").size == 2


def test_zero_load_lemma():
    check = verify_population_lemma(100, 10, 1.0, 0.0, 1000, np.random.default_rng(0))
    assert check.estimate == 0.0 and check.target == 0.0 and check.z == 0.0


def test_zcheck_zero_se():
    assert ZCheck("x", 1.0, 1.0, 0.0).z == 0.0
    assert ZCheck("x", 2.0, 1.0, 0.0).z == math.inf


def test_population_lemma_reference_setting():
    check = verify_population_lemma(1000, 100, 2.0, 50.0, 100_000, np.random.default_rng(1))
    assert check.target == pytest.approx(85.65, abs=5e-3)
    assert abs(check.z) < 3


def test_literal_thinning_agrees_with_batch():
    args = (60, 10, 2.0, 40.0)
    ogata = verify_population_lemma(*args, n_runs=3000, rng=np.random.default_rng(2), method="ogata")
    batch = verify_population_lemma(*args, n_runs=3000, rng=np.random.default_rng(3))
    assert abs(ogata.z) < 4 and abs(batch.z) < 4
    with pytest.raises(ValueError):
        simulate_frozen_saturation(10.5, 0, 1.0, 1.0, 10, np.random.default_rng(0))


def test_daily_alignment_matches_discrete_recursion():
    # with daily anchors the discrete recursion holds exactly in expectation
    spec = IntensitySpec(1.2, G, seeds=(0.0,) * 5, alignment="daily")
    n, T = 600, 5
    r = np.random.default_rng(4)
    counts = np.array([simulate_thinning(spec, T, r).daily_counts(T) for _ in range(n)], float)
    g = discretize(G, 40)
    want = propagate_expected([5.0], np.full(T, 1.2), g).values
    se = counts.std(axis=0, ddof=1) / math.sqrt(n)
    assert np.all(np.abs(counts.mean(0) - want) < 4 * se)


def test_exact_alignment_matches_quadrature():
    spec = IntensitySpec(1.1, G, seeds=(0.0,) * 4)
    n, T = 600, 4
    r = np.random.default_rng(5)
    totals = np.array([simulate_thinning(spec, T, r).infections().size for _ in range(n)], float)
    grid, EN = renewal_mean_quadrature(1.1, G, [0.0] * 4, T, h=0.005)
    assert abs(totals.mean() - EN[-1]) < 4 * totals.std(ddof=1) / math.sqrt(n)


def test_quadrature_against_exponential_closed_form():
    g = ContinuousLagDensity.gamma(1.0, 0.5)
    grid, EN = renewal_mean_quadrature(1.4, g, [0.0, 0.0], 6.0, h=0.002)
    assert EN[-1] == pytest.approx(float(exponential_renewal_mean(1.4, 0.5, 2, 6.0)), rel=1e-4)


def test_population_never_exceeded():
    spec = IntensitySpec(6.0, G, seeds=(0.0,) * 3, population=40)
    r = np.random.default_rng(6)
    for _ in range(50):
        assert simulate_thinning(spec, 30.0, r).infections().size <= 40


def test_event_cap():
    with pytest.raises(EventCapExceeded):
        simulate_thinning(IntensitySpec(5.0, G, seeds=(0.0,) * 5), 30.0, np.random.default_rng(0), max_events=200)


def test_observation_events_attach_to_infections():
    proc = ObservationProcess("deaths", 0.5, ContinuousLagDensity.gamma(3.0, 1.0))
    spec = IntensitySpec(0.0, G, seeds=(0.0,) * 200, observations=(proc,))
    log = simulate_thinning(spec, 60.0, np.random.default_rng(7))
    deaths = log.of("deaths")
    assert np.all(deaths > 0)
    assert abs(deaths.size - 100) < 4 * math.sqrt(100)
    with pytest.raises(ValueError):
        ObservationProcess("seed", 1.0, G)


def test_observation_intensity_check():
    check = verify_observation_intensity(0.3, ContinuousLagDensity.gamma(4.0, 0.5), 20_000, np.random.default_rng(8))
    assert abs(check.z) < 4


@pytest.mark.parametrize("rate", [None, 2.0])
def test_offspring_dispersion(rate):
    check = offspring_dispersion(2.0, G, 20_000, np.random.default_rng(9), gamma_rate=rate)
    assert abs(check.z) < 4


def test_per_infector_offspring_mean():
    g = discretize(G, 20)
    x = per_infector_offspring([3, 0, 5], 1.5, g, 2.0, 50_000, np.random.default_rng(10))
    # most recent day last: 5 infectors at lag 1, 3 at lag 3
    want = 1.5 * (5 * g(1) + 3 * g(3))
    assert abs(x.mean() - want) < 4 * x.std() / math.sqrt(x.size)


def test_exponential_batch_closed_form():
    n = 20_000
    x = simulate_exponential_batch(1.3, 0.4, 3, 6, n, np.random.default_rng(11)).sum(axis=1) + 3
    want = float(exponential_renewal_mean(1.3, 0.4, 3, 6))
    assert abs(x.mean() - want) < 4 * x.std() / math.sqrt(n)


def test_run_suites_small():
    checks = run_suites(n_runs=5000, seed=3)
    assert set(checks) == {"population_lemma", "dispersion", "renewal", "observation", "offspring"}
    for items in checks.values():
        for c in items:
            assert abs(c.z) < 4.5, c
    with pytest.raises(ValueError):
        run_suites(10, names=["nope"])
    a = run_suites(2000, seed=1, names=["renewal"])["renewal"]
    b = run_suites(2000, seed=1, names=["renewal", "dispersion"])["renewal"]
    assert [c.estimate for c in a] == [c.estimate for c in b]


def test_intensity_spec_validation():
    with pytest.raises(ValueError):
        IntensitySpec(-1.0, G)
    with pytest.raises(ValueError):
        IntensitySpec(1.0, G, seeds=(1.0,))
    with pytest.raises(ValueError):
        IntensitySpec(1.0, G, seeds=(0.0, 0.0), population=1)
