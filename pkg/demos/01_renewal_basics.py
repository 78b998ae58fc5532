"""
Renewal-equation building blocks.

Discretizes a generation interval, runs the expected recursion with and
without a finite population, draws latent infection paths around it and
turns infections into delayed, overdispersed observations.

Run with ``python demos/01_renewal_basics.py``.
"""

import numpy as np

from epirenew import (
    ContinuousLagDensity,
    DiscretePmf,
    ObservationType,
    discretize,
    expected_observations,
    propagate_expected,
    propagate_latent,
    simulate_observations,
)

rng = np.random.default_rng(1)

# A generation interval with mean 6.5 days and sd 4.3, binned by interval mass.
g = discretize(ContinuousLagDensity.from_mean_sd("gamma", 6.5, 4.3), 30)
print(f"generation pmf: mean {g.mean():.2f} days over lags {g.first_lag}..{g.max_lag}")

# With R = 2 and a one-day generation interval, infections double daily.
doubling = propagate_expected([1.0], np.full(10, 2.0), DiscretePmf.delta(1)).values
print("doubling:", doubling.astype(int))

# A lockdown on day 30 drops R from 2.5 to 0.8.
T = 80
R = np.where(np.arange(T) < 30, 2.5, 0.8)
free = propagate_expected([10.0] * 6, R, g)
capped = propagate_expected([10.0] * 6, R, g, population=20_000.0)
print(f"peak infections: {free.values.max():.0f} unbounded, {capped.values.max():.0f} with S0 = 20,000")
print(f"attack rate with S0 = 20,000: {(capped.values.sum() + 60) / 20_000:.1%}")

# Each latent step has variance d times its conditional mean; over a whole
# path the noise compounds, so the spread across paths is much wider.
draws = np.stack([propagate_latent([10.0] * 6, R, g, d=5.0, rng=rng).path.values for _ in range(200)])
day = 29
print(f"day {day + 1}: expected {free.values[day]:.0f}, latent mean {draws[:, day].mean():.0f}, "
      f"variance/mean across paths {draws[:, day].var() / draws[:, day].mean():.1f} (d = 5 per step)")

# Deaths: 1% of infections, delayed by infection-to-death time, negative binomial noise.
death_delay = discretize(ContinuousLagDensity.from_mean_sd("gamma", 23.0, 10.0), 60, kind="delay")
deaths = ObservationType("deaths", death_delay, "neg_binomial", ascertainment=0.01)
expected = expected_observations(free, 0.01, death_delay)
observed = simulate_observations(free, 0.01, deaths, phi=10.0, rng=rng)
for t in (30, 45, 60, 75):
    print(f"day {t}: expected deaths {expected[t - 1]:7.1f}, observed {observed.counts[t - 1]:5.0f}")
