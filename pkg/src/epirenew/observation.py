"""
Observation model: from infections to expected counts and their likelihood.

Expected observations of a given type are ``y_t = alpha_t * sum_{s<=t} i_s
pi_{t-s}``. Counts are conditionally independent given ``y_t`` with a
Poisson, negative-binomial (variance ``y + y^2/phi``) or quasi-Poisson
(variance ``phi * y``, realized as a negative binomial, ``phi > 1``)
sampling distribution. Seroprevalence surveys use a binomial likelihood on
the expected cumulative seroconverted fraction.

Log-likelihood kernels are written with ``jax.numpy`` so the same code
serves the public API and the differentiable posterior.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import jax.numpy as jnp
import numpy as np
from jax.scipy.special import gammaln

from .distributions import DiscretePmf
from .renewal import InfectionPath

OBS_FAMILIES = ("poisson", "neg_binomial", "quasi_poisson", "seroprevalence")

_OBS_ALIASES = {
    "poisson": "poisson",
    "neg_binomial": "neg_binomial",
    "neg-binomial": "neg_binomial",
    "negative_binomial": "neg_binomial",
    "negbin": "neg_binomial",
    "quasi_poisson": "quasi_poisson",
    "quasi-poisson": "quasi_poisson",
    "seroprevalence": "seroprevalence",
    "binomial": "seroprevalence",
}


def canonical_obs_family(family: str) -> str:
    try:
        return _OBS_ALIASES[family.lower()]
    except (KeyError, AttributeError):
        raise ValueError(f"unknown observation family {family!r}") from None


@dataclass(frozen=True)
class ObservationType:
    """One kind of observed count (deaths, cases, ...).

    Parameters
    ----------
    name : str
        Identifier matching the ``type`` column of ingested data.
    delay : DiscretePmf
        Infection-to-observation delay, lags from 0.
    family : str
        ``"poisson"``, ``"neg_binomial"``, ``"quasi_poisson"`` or
        ``"seroprevalence"``. A seroprevalence series counts positive tests;
        the number tested per day is supplied alongside it and the
        likelihood is binomial against the cumulative delayed-infection
        fraction of the population.
    ascertainment : float or regression spec
        Constant ascertainment rate, or a :class:`~epirenew.regression.RegressionSpec`
        describing ``alpha_t`` through a link and design.
    aux_prior_sd : float
        Scale of the half-normal prior on the auxiliary parameter
        (``phi`` for the negative binomial, ``phi - 1`` for quasi-Poisson).
    """

    name: str
    delay: DiscretePmf
    family: str = "neg_binomial"
    ascertainment: Any = 1.0
    aux_prior_sd: float = 10.0

    def __post_init__(self):
        object.__setattr__(self, "family", canonical_obs_family(self.family))
        if self.delay.first_lag != 0:
            raise ValueError("observation delays are supported from lag 0")
        if isinstance(self.ascertainment, (int, float)) and self.ascertainment <= 0:
            raise ValueError("ascertainment rate must be positive")
        if self.aux_prior_sd <= 0:
            raise ValueError("aux_prior_sd must be positive")

    @property
    def has_aux(self) -> bool:
        return self.family in ("neg_binomial", "quasi_poisson")


@dataclass(frozen=True)
class ObservedSeries:
    """Daily counts for days ``1..T`` with a mask of observed days."""

    type: ObservationType
    counts: np.ndarray
    mask: np.ndarray = field(default=None)

    def __post_init__(self):
        raw = np.asarray(self.counts, dtype=float).ravel()
        mask = np.ones(raw.size, bool) if self.mask is None else np.asarray(self.mask, bool).ravel()
        if mask.size != raw.size:
            raise ValueError("mask and counts differ in length")
        obs = raw[mask]
        if not np.all(np.isfinite(obs)):
            raise ValueError("observed counts must be finite")
        if np.any(obs != np.round(obs)):
            raise ValueError("counts must be integers")
        if np.any(obs < 0):
            raise ValueError("counts must be nonnegative")
        counts = np.where(mask, np.nan_to_num(raw), 0).astype(np.int64)
        counts.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "mask", mask)

    @property
    def T(self) -> int:
        return self.counts.size


def _convolve(series: np.ndarray, pi: DiscretePmf) -> np.ndarray:
    return np.convolve(series, pi.full())[: series.size]


def expected_observations(infections, alpha, pi: DiscretePmf) -> np.ndarray:
    """Expected counts ``alpha_t * sum_{s<=t} i_s pi_{t-s}``.

    Parameters
    ----------
    infections : InfectionPath or array_like
        For an array, values on consecutive days; the output is aligned with
        it. For an :class:`InfectionPath` the output covers days ``1..T``,
        with seed days contributing through the delay.
    alpha : float or array_like
        Ascertainment rate(s), broadcast against the output days.
    pi : DiscretePmf
        Delay pmf starting at lag 0.
    """
    if pi.first_lag != 0:
        raise ValueError("observation delay must start at lag 0")
    if isinstance(infections, InfectionPath):
        conv = _convolve(infections.full, pi)[infections.seeds.size:]
    else:
        arr = np.asarray(infections, dtype=float).ravel()
        if np.any(arr < 0):
            raise ValueError("infections must be nonnegative")
        conv = _convolve(arr, pi)
    alpha = np.broadcast_to(np.asarray(alpha, dtype=float), conv.shape)
    if np.any(alpha <= 0):
        raise ValueError("ascertainment rates must be positive")
    return alpha * conv


def pointwise_log_lik(family: str, counts, mean, aux=None):
    """Elementwise log pmf of ``counts`` under ``family`` with the given means.

    Zero mean gives 0 for a zero count and ``-inf`` otherwise. Written with
    ``jax.numpy`` and differentiable in ``mean`` and ``aux``.
    """
    k = jnp.asarray(counts, dtype=jnp.float64)
    mu = jnp.asarray(mean, dtype=jnp.float64)
    zero = mu <= 0
    mu_safe = jnp.where(zero, 1.0, mu)
    if family == "poisson":
        lp = k * jnp.log(mu_safe) - mu_safe - gammaln(k + 1.0)
    else:
        if aux is None:
            raise ValueError(f"{family} needs an auxiliary parameter")
        phi = jnp.asarray(aux, dtype=jnp.float64)
        if family == "neg_binomial":
            r = phi * jnp.ones_like(mu_safe)
        elif family == "quasi_poisson":
            r = mu_safe / (phi - 1.0)
        else:
            raise ValueError(f"unknown observation family {family!r}")
        lp = (
            gammaln(k + r)
            - gammaln(r)
            - gammaln(k + 1.0)
            - r * jnp.log1p(mu_safe / r)
            + k * (jnp.log(mu_safe) - jnp.log(r + mu_safe))
        )
    return jnp.where(zero, jnp.where(k == 0, 0.0, -jnp.inf), lp)


def _validate_aux(family, phi):
    if family in ("poisson", "seroprevalence"):
        return None
    if phi is None:
        raise ValueError(f"{family} requires phi")
    if family == "neg_binomial" and not phi > 0:
        raise ValueError("neg-binomial phi must be positive")
    if family == "quasi_poisson" and not phi > 1:
        raise ValueError("quasi-Poisson phi must exceed 1")
    return float(phi)


def log_likelihood(series: ObservedSeries, y, phi: float | None = None):
    """Log-likelihood of a series given expected counts ``y``.

    Returns
    -------
    total : float
        Sum over observed (unmasked) days.
    pointwise : ndarray
        Per-day contributions; masked days are exactly 0.
    """
    family = series.type.family
    if family == "seroprevalence":
        raise ValueError("seroprevalence series use seroprevalence_log_likelihood")
    phi = _validate_aux(family, phi)
    y = np.asarray(y, dtype=float)
    if y.shape != series.counts.shape:
        raise ValueError("y and counts differ in length")
    lp = np.asarray(pointwise_log_lik(family, series.counts, y, phi))
    lp = np.where(series.mask, lp, 0.0)
    return float(lp.sum()), lp


def joint_log_likelihood(pairs) -> float:
    """Sum of per-type log-likelihoods for ``(series, y, phi)`` triples."""
    return float(sum(log_likelihood(s, y, phi)[0] for s, y, phi in pairs))


def sample_counts(y, family: str, phi: float | None, rng: np.random.Generator) -> np.ndarray:
    """Draw counts with means ``y`` from the observation family."""
    family = canonical_obs_family(family)
    if family == "seroprevalence":
        raise ValueError("seroprevalence counts need the number tested; draw them with rng.binomial")
    phi = _validate_aux(family, phi)
    y = np.asarray(y, dtype=float)
    out = np.zeros(y.shape, dtype=np.int64)
    pos = y > 0
    if family == "poisson":
        out[pos] = rng.poisson(y[pos])
    elif family == "neg_binomial":
        out[pos] = rng.negative_binomial(phi, phi / (phi + y[pos]))
    else:
        out[pos] = rng.negative_binomial(y[pos] / (phi - 1.0), 1.0 / phi)
    return out


def simulate_observations(
    path,
    alpha,
    obs_type: ObservationType,
    phi: float | None,
    rng: np.random.Generator,
    mask=None,
) -> ObservedSeries:
    """Forward-simulate an observed series from an infection path."""
    y = expected_observations(path, alpha, obs_type.delay)
    counts = sample_counts(y, obs_type.family, phi, rng)
    return ObservedSeries(obs_type, counts, mask)


# --- seroprevalence -------------------------------------------------------


def expected_seroprevalence(infections, pi: DiscretePmf, population: float) -> np.ndarray:
    """Expected fraction of the population seroconverted by each day.

    ``pi`` is the infection-to-seroconversion delay; the result is the
    cumulative sum of delayed infections over ``population``, capped at 1.
    """
    if isinstance(infections, InfectionPath):
        conv = _convolve(infections.full, pi)[infections.seeds.size:]
    else:
        conv = _convolve(np.asarray(infections, float), pi)
    return np.minimum(np.cumsum(conv) / population, 1.0)


def seroprevalence_log_lik(tested, positive, prevalence):
    """Binomial log-likelihood of survey results, elementwise (jax-compatible)."""
    n = jnp.asarray(tested, dtype=jnp.float64)
    k = jnp.asarray(positive, dtype=jnp.float64)
    p = jnp.clip(jnp.asarray(prevalence, dtype=jnp.float64), 1e-12, 1 - 1e-12)
    return (
        gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)
        + k * jnp.log(p) + (n - k) * jnp.log1p(-p)
    )


def seroprevalence_log_likelihood(tested, positive, infections, pi: DiscretePmf, population, mask=None):
    """Binomial log-likelihood of survey counts; returns ``(total, pointwise)``."""
    tested = np.asarray(tested)
    positive = np.asarray(positive)
    if np.any(positive > tested) or np.any(positive < 0):
        raise ValueError("positives must lie in [0, tested]")
    prev = expected_seroprevalence(infections, pi, population)
    lp = np.asarray(seroprevalence_log_lik(tested, positive, prev))
    if mask is not None:
        lp = np.where(mask, lp, 0.0)
    return float(lp.sum()), lp
