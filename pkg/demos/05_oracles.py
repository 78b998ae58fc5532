"""
Checking the discrete model against continuous-time simulation.

Simulates the point processes that the discrete renewal model summarizes
and compares Monte-Carlo averages with their closed forms: the
saturation lemma behind the population adjustment, the variance law of
the latent process, the renewal mean, observation thinning and offspring
dispersion. Each line reports a z-score.

Run with ``python demos/05_oracles.py``.
"""

from epirenew.ctsim import run_suites

checks = run_suites(n_runs=20_000, seed=5)
for suite, items in checks.items():
    print(f"[{suite}]")
    for c in items:
        print(f"  {c.name:48s} estimate {c.estimate:12.4f} target {c.target:12.4f} z {c.z:+.2f}")
