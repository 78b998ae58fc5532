"""
Synthetic multi-region epidemics with known transmission effects.

Every generator draws region-level baselines, intervention dates and a
mobility series, builds the true ``R_t`` from a log-linear model, runs the
expected renewal recursion from random seeds and samples observed deaths.
The returned object carries the truth next to the data so recovery checks
can compare the two.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field

import numpy as np

from ..data import RegionSeries
from ..distributions import ContinuousLagDensity, DiscretePmf, discretize
from ..observation import ObservationType, simulate_observations
from ..renewal import SeedingConfig, propagate_expected

START = dt.date(2020, 2, 1)


def default_generation() -> DiscretePmf:
    """Gamma generation interval with mean 6.5 days and sd 4.3 days."""
    return discretize(ContinuousLagDensity.from_mean_sd("gamma", 6.5, 4.3), 30)


def default_death_delay() -> DiscretePmf:
    """Infection-to-death delay with mean 23 days and sd 10 days."""
    return discretize(ContinuousLagDensity.from_mean_sd("gamma", 23.0, 10.0), 60, kind="delay")


def default_case_delay() -> DiscretePmf:
    """Infection-to-report delay with mean 10 days and sd 5 days."""
    return discretize(ContinuousLagDensity.from_mean_sd("gamma", 10.0, 5.0), 30, kind="delay")


def case_observation(ascertainment: float = 0.1) -> ObservationType:
    """Negative binomial reported cases with :func:`default_case_delay`."""
    return ObservationType("cases", default_case_delay(), "neg_binomial", ascertainment)


@dataclass
class SyntheticEpidemic:
    """Simulated regions together with the values used to generate them."""

    regions: list
    R: np.ndarray
    infections: np.ndarray
    seeds: np.ndarray
    g: DiscretePmf
    observation: ObservationType
    seeding: SeedingConfig
    truth: dict = field(default_factory=dict)

    @property
    def region_ids(self) -> tuple:
        return tuple(r.region for r in self.regions)


def simulate_regions(
    R,
    covariates,
    rng,
    g: DiscretePmf | None = None,
    observation: ObservationType | None = None,
    alpha: float | None = None,
    phi: float = 20.0,
    seeding: SeedingConfig | None = None,
    truth: dict | None = None,
) -> SyntheticEpidemic:
    """Simulate observed counts for given ``R`` paths (``M x T``).

    Parameters
    ----------
    R : array_like, shape (M, T)
    covariates : list of dict
        Daily covariate arrays per region, stored on the returned regions.
    rng : numpy.random.Generator
    observation : ObservationType, optional
        Defaults to negative binomial deaths with :func:`default_death_delay`.
    alpha : float, optional
        Ascertainment used to simulate. Defaults to the observation's
        constant ascertainment, or an infection fatality ratio of 0.01 for
        the default deaths.
    phi : float
        Negative binomial overdispersion of the counts.
    """
    R = np.atleast_2d(np.asarray(R, dtype=float))
    M, T = R.shape
    g = g or default_generation()
    if observation is None:
        alpha = 0.01 if alpha is None else alpha
        observation = ObservationType("deaths", default_death_delay(), "neg_binomial", alpha)
    elif alpha is None:
        if not isinstance(observation.ascertainment, (int, float)):
            raise ValueError("alpha is required when ascertainment is a regression")
        alpha = float(observation.ascertainment)
    seeding = seeding or SeedingConfig(window=6, log_mean=np.log(100.0), log_sd=0.3, noise_sd=0.1)
    regions, infections, seeds = [], np.zeros((M, T)), np.zeros((M, seeding.window))
    for m in range(M):
        seeds[m] = seeding.sample(rng)
        path = propagate_expected(seeds[m], R[m], g)
        infections[m] = path.values
        counts = simulate_observations(path, alpha, observation, phi, rng).counts
        regions.append(
            RegionSeries(
                region=f"region{m + 1}",
                start=START,
                T=T,
                population=None,
                covariates={k: np.asarray(v, float) for k, v in covariates[m].items()},
                counts={observation.name: counts},
            )
        )
    info = {"alpha": alpha, "phi": phi}
    info.update(truth or {})
    return SyntheticEpidemic(regions, R, infections, seeds, g, observation, seeding, info)


def _step(T, day):
    return (np.arange(1, T + 1) >= day).astype(float)


def _mobility_shape(T, day, anticipation, early, rebound):
    """Noise-free mobility relative to baseline around a lockdown on ``day``."""
    t = np.arange(1, T + 1)
    pre = -early * np.clip((t - (day - anticipation)) / max(anticipation, 1), 0.0, 1.0)
    post = np.where(t >= day, -1.0 + np.minimum(rebound * (t - day), 0.5), 0.0)
    return pre + post


def _smooth_noise(rng, T, sd, rho=0.9):
    """Stationary AR(1) noise with marginal sd ``sd``."""
    e = rng.standard_normal(T) * sd * np.sqrt(1 - rho**2)
    out = np.empty(T)
    out[0] = rng.standard_normal() * sd
    for t in range(1, T):
        out[t] = rho * out[t - 1] + e[t]
    return out


def lockdown_epidemic(rng, n_regions: int = 3, T: int = 100, beta: float = -0.8,
                      R0: float = 2.2, R0_sd: float = 0.1, **kwargs) -> SyntheticEpidemic:
    """Regions whose ``log R_t`` drops by ``beta`` once lockdown starts.

    Lockdown begins between days 25 and 40; baselines are log-normal
    around ``R0``.
    """
    rng = np.random.default_rng(rng)
    R0_m = R0 * np.exp(R0_sd * rng.standard_normal(n_regions))
    days = rng.integers(25, 41, n_regions)
    covs, R = [], np.zeros((n_regions, T))
    for m in range(n_regions):
        lock = _step(T, days[m])
        covs.append({"lockdown": lock})
        R[m] = R0_m[m] * np.exp(beta * lock)
    truth = {"beta": beta, "R0": R0_m, "lockdown_day": days}
    return simulate_regions(R, covs, rng, truth=truth, **kwargs)


NPI_NAMES = ("schools", "events", "lockdown")


def npi_mobility_epidemic(rng, n_regions: int = 4, T: int = 100,
                          npi_effects=(-0.15, -0.15, -0.7), mobility_effect: float = 0.0,
                          R0: float = 2.6, R0_sd: float = 0.1, **kwargs) -> SyntheticEpidemic:
    """Regions with three staggered NPIs and a correlated mobility index.

    Mobility falls with each intervention (most with lockdown) plus smooth
    noise; it affects transmission only through ``mobility_effect``, which
    is zero by default.
    """
    rng = np.random.default_rng(rng)
    R0_m = R0 * np.exp(R0_sd * rng.standard_normal(n_regions))
    covs, R = [], np.zeros((n_regions, T))
    for m in range(n_regions):
        first = rng.integers(20, 31)
        offsets = np.sort(rng.integers(0, 11, 2))
        days = (first, first + offsets[0], first + offsets[1] + 2)
        cov = {name: _step(T, d) for name, d in zip(NPI_NAMES, days)}
        mob = -0.1 * cov["schools"] - 0.1 * cov["events"] - 0.4 * cov["lockdown"] + _smooth_noise(rng, T, 0.1)
        cov["mobility"] = mob
        covs.append(cov)
        logR = np.log(R0_m[m]) + sum(b * cov[n] for b, n in zip(npi_effects, NPI_NAMES))
        R[m] = np.exp(logR + mobility_effect * mob)
    truth = {"npi_effects": dict(zip(NPI_NAMES, npi_effects)), "mobility_effect": mobility_effect, "R0": R0_m}
    return simulate_regions(R, covs, rng, truth=truth, **kwargs)


def mediation_epidemic(rng, kind: str, n_regions: int = 4, T: int = 80, total: float = -0.8,
                       R0: float = 2.4, R0_sd: float = 0.1, mobility_drop: float = 1.0,
                       mobility_noise: float = 0.4, mobility_rho: float = 0.8, anticipation: int = 10,
                       anticipation_drop: float = 0.3, rebound: float = 0.01,
                       **kwargs) -> SyntheticEpidemic:
    """Lockdown and mobility data with a known mediation structure.

    Mobility declines voluntarily over the ``anticipation`` days before
    lockdown (to ``-anticipation_drop * mobility_drop``), drops by
    ``mobility_drop`` at lockdown, then recovers by ``rebound *
    mobility_drop`` per day (at most half the drop), plus AR(1) noise with
    marginal sd ``mobility_noise`` and lag-one correlation
    ``mobility_rho``. The noise is what separates mobility from the
    lockdown indicator once a random walk absorbs the slow shapes.

    Observations default to reported cases (:func:`case_observation`): the
    long death delay smooths away most of the mobility noise that
    identifies the partial effect.

    With ``kind="full"`` transmission depends on mobility alone, scaled so
    the total lockdown effect on ``log R_t`` is ``total``. With
    ``kind="none"`` transmission depends on lockdown alone and mobility has
    no causal role.
    """
    if kind not in ("full", "none"):
        raise ValueError("kind must be 'full' or 'none'")
    rng = np.random.default_rng(rng)
    R0_m = R0 * np.exp(R0_sd * rng.standard_normal(n_regions))
    days = rng.integers(25, 41, n_regions)
    covs, R = [], np.zeros((n_regions, T))
    gamma = -total / mobility_drop
    for m in range(n_regions):
        lock = _step(T, days[m])
        mob = mobility_drop * _mobility_shape(T, days[m], anticipation, anticipation_drop, rebound)
        mob = mob + _smooth_noise(rng, T, mobility_noise, mobility_rho)
        covs.append({"lockdown": lock, "mobility": mob})
        effect = gamma * mob if kind == "full" else total * lock
        R[m] = R0_m[m] * np.exp(effect)
    truth = {"kind": kind, "total": total, "mobility_coef": gamma if kind == "full" else 0.0,
             "mediated": total if kind == "full" else 0.0, "R0": R0_m}
    kwargs.setdefault("observation", case_observation())
    return simulate_regions(R, covs, rng, truth=truth, **kwargs)
