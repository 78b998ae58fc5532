"""
Discrete renewal propagation of infections.

Time is indexed by integer days. Seeds occupy days ``v..0`` (``v <= 0``) and
new infections are generated for days ``1..T`` by

    i_t = R_t * sum_{s<t} i_s g_{t-s}

in expected mode, or drawn from a continuous prior with that mean and
variance ``d`` times the mean in latent mode. With a finite initial
susceptible population ``S0`` the expected value is replaced by the
saturating form ``(S0 - C_{t-1}) * (1 - exp(-R_t L_t / S0))`` where
``C_{t-1}`` is the cumulative number of infections before day ``t``.

These are reference (numpy) implementations. The differentiable versions
used for inference live in :mod:`epirenew.inference.model` and are
cross-checked against the functions here.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import stats

from .distributions import DiscretePmf, canonical_family, match_moments


@dataclass(frozen=True)
class SeedingConfig:
    """Prior over the seed infections ``i_v, ..., i_0``.

    The default shares one log-normal level across the window and adds
    independent multiplicative day-level noise; ``mode="iid"`` gives every
    seed day its own independent log-normal level.
    """

    window: int = 6
    log_mean: float = np.log(100.0)
    log_sd: float = 1.0
    noise_sd: float = 0.1
    mode: str = "shared"

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("seed window must contain at least one day")
        if self.log_sd <= 0 or self.noise_sd < 0:
            raise ValueError("seed prior scales must be positive")
        if self.mode not in ("shared", "iid"):
            raise ValueError("seeding mode must be 'shared' or 'iid'")

    @property
    def v(self) -> int:
        """First seeded day (``<= 0``)."""
        return 1 - self.window

    def median_seeds(self) -> np.ndarray:
        return np.full(self.window, np.exp(self.log_mean))

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        if self.mode == "iid":
            return np.exp(rng.normal(self.log_mean, self.log_sd, self.window))
        level = rng.normal(self.log_mean, self.log_sd)
        return np.exp(level + self.noise_sd * rng.standard_normal(self.window))


@dataclass(frozen=True)
class InfectionPath:
    """Seeds on days ``v..0`` followed by infections on days ``1..T``."""

    seeds: np.ndarray
    values: np.ndarray
    mode: str = "expected"
    population: float | None = None

    def __post_init__(self):
        seeds = np.array(self.seeds, dtype=float).ravel()
        values = np.array(self.values, dtype=float).ravel()
        if seeds.size == 0:
            raise ValueError("at least one seed day is required")
        if np.any(seeds < 0) or np.any(values < 0):
            raise ValueError("infections must be nonnegative")
        if self.mode not in ("expected", "latent"):
            raise ValueError("mode must be 'expected' or 'latent'")
        if self.population is not None:
            if self.population <= 0:
                raise ValueError("population must be positive")
            total = np.cumsum(np.concatenate([seeds, values]))
            if np.any(total > self.population * (1 + 1e-12)):
                raise ValueError("cumulative infections exceed the population")
        seeds.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "seeds", seeds)
        object.__setattr__(self, "values", values)

    @property
    def v(self) -> int:
        return 1 - self.seeds.size

    @property
    def T(self) -> int:
        return self.values.size

    @property
    def full(self) -> np.ndarray:
        return np.concatenate([self.seeds, self.values])

    @property
    def days(self) -> np.ndarray:
        return np.arange(self.v, self.T + 1)

    def at(self, t: int) -> float:
        if t < self.v or t > self.T:
            raise IndexError(f"day {t} outside [{self.v}, {self.T}]")
        return float(self.full[t - self.v])

    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.full)

    def to_csv(self, path=None) -> str:
        """Write ``t,value`` rows covering seed and generated days."""
        buf = io.StringIO()
        buf.write("t,value\n")
        for t, x in zip(self.days, self.full):
            buf.write(f"{t},{float(x)!r}\n")
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, source, mode="expected", population=None) -> "InfectionPath":
        text = Path(source).read_text() if "\n" not in str(source) else source
        rows = [ln.split(",") for ln in text.strip().splitlines()[1:]]
        t = np.array([int(r[0]) for r in rows])
        x = np.array([float(r[1]) for r in rows])
        if np.any(np.diff(t) != 1):
            raise ValueError("days must be consecutive")
        n_seed = int(np.sum(t <= 0))
        return cls(x[:n_seed], x[n_seed:], mode=mode, population=population)


def _check_pmf_generation(g: DiscretePmf):
    if g.first_lag < 1 and g.weights[0] > 0:
        raise ValueError("generation pmf must put no mass on lag 0")


def case_load(path: InfectionPath, g: DiscretePmf, t: int) -> float:
    """Total infectiousness ``L_t = sum_{s<t} i_s g_{t-s}``.

    Days before the seed window contribute nothing.
    """
    if t < 1 or t > path.T + 1:
        raise IndexError(f"case load defined for 1 <= t <= {path.T + 1}, got {t}")
    _check_pmf_generation(g)
    full = path.full
    total = 0.0
    for lag in range(1, g.max_lag + 1):
        s = t - lag
        if s < path.v:
            break
        total += full[s - path.v] * g(lag)
    return total


def adjust_population(R_u, L, S0, cumulative):
    """Expected new infections under depletion of susceptibles.

    Returns ``(S0 - C) * (1 - exp(-R_u * L / S0))`` with ``C`` the cumulative
    infections so far. Works elementwise on arrays.
    """
    R_u = np.asarray(R_u, dtype=float)
    L = np.asarray(L, dtype=float)
    C = np.asarray(cumulative, dtype=float)
    S0 = np.asarray(S0, dtype=float)
    if np.any(S0 <= 0):
        raise ValueError("S0 must be positive")
    if np.any(C < 0) or np.any(C > S0 * (1 + 1e-12)):
        raise ValueError("cumulative infections must lie in [0, S0]")
    force = R_u * L / S0
    out = np.maximum(S0 - C, 0.0) * -np.expm1(-force)
    return out if out.ndim else float(out)


def naive_population_adjustment(R_u, L, S0, cumulative):
    """First-order (discrete logistic) adjustment ``(S0 - C)/S0 * R_u * L``.

    It can exceed the remaining susceptibles, so it is provided only for
    comparison in the small-force regime.
    """
    return (S0 - np.asarray(cumulative, float)) / S0 * np.asarray(R_u, float) * np.asarray(L, float)


def _prepare(seeds, R, g):
    seeds = np.asarray(seeds, dtype=float).ravel()
    R = np.asarray(R, dtype=float).ravel()
    if seeds.size == 0:
        raise ValueError("at least one seed day is required")
    if np.any(seeds < 0) or not np.all(np.isfinite(seeds)):
        raise ValueError("seeds must be finite and nonnegative")
    if np.any(R < 0) or not np.all(np.isfinite(R)):
        raise ValueError("reproduction numbers must be finite and nonnegative")
    _check_pmf_generation(g)
    return seeds, R, g.full()[1:]


def propagate_expected(seeds, R, g: DiscretePmf, population: float | None = None) -> InfectionPath:
    """Deterministic renewal recursion for expected infections.

    Parameters
    ----------
    seeds : array_like
        Infections on days ``v..0``.
    R : array_like
        Reproduction numbers for days ``1..T`` (unadjusted if ``population``
        is given).
    g : DiscretePmf
        Generation interval pmf on lags ``1..max_lag``.
    population : float, optional
        Initial susceptible population ``S0``; enables the saturating
        adjustment.
    """
    seeds, R, gw = _prepare(seeds, R, g)
    n_seed, T, K = seeds.size, R.size, gw.size
    full = np.concatenate([seeds, np.zeros(T)])
    cum = seeds.sum()
    if population is not None and cum > population:
        raise ValueError("seeds exceed the population")
    for k in range(T):
        pos = n_seed + k
        lo = max(0, pos - K)
        # full[pos - 1] pairs with lag 1
        L = np.dot(full[lo:pos][::-1], gw[: pos - lo])
        if population is None:
            i = R[k] * L
        else:
            i = max(population - cum, 0.0) * -np.expm1(-R[k] * L / population)
        full[pos] = i
        cum += i
    return InfectionPath(seeds, full[n_seed:], mode="expected", population=population)


_TINY = float(np.finfo(float).tiny)


def _family_logpdf(family, x, mean, d):
    m = match_moments(family, mean, d)
    if family == "gamma":
        return stats.gamma.logpdf(x, a=m.a, scale=1.0 / m.b)
    if family == "lognormal":
        return stats.lognorm.logpdf(x, s=m.b, scale=np.exp(m.a))
    return stats.weibull_min.logpdf(x, c=m.a, scale=m.b)


def _family_logcdf(family, x, mean, d):
    m = match_moments(family, mean, d)
    if family == "gamma":
        return stats.gamma.logcdf(x, a=m.a, scale=1.0 / m.b)
    if family == "lognormal":
        return stats.lognorm.logcdf(x, s=m.b, scale=np.exp(m.a))
    return stats.weibull_min.logcdf(x, c=m.a, scale=m.b)


def _negligible(mean, d) -> bool:
    return not mean / d >= _TINY


def latent_step_logpdf(x, mean, d, family="gamma", remaining=None) -> float:
    """Log prior density of one latent infection count.

    ``mean`` is the conditional expectation and ``d`` the dispersion. With
    ``remaining`` (susceptibles left) the density is truncated to
    ``[0, remaining]`` and renormalized.
    """
    family = canonical_family(family)
    if d <= 0:
        raise ValueError("dispersion must be positive")
    if x < 0:
        return -np.inf
    if remaining is not None and x > remaining:
        return -np.inf
    if _negligible(mean, d):
        # no infectiousness (or too little to represent): only a zero draw is possible
        return 0.0 if x == 0 else -np.inf
    lp = float(_family_logpdf(family, x, mean, d))
    if remaining is not None:
        lp -= float(_family_logcdf(family, remaining, mean, d))
    return lp


def truncate_latent_support(x, mean, d, S0, cumulative, family="gamma") -> float:
    """Truncated log density of a latent draw given ``S0 - cumulative`` susceptibles left."""
    return latent_step_logpdf(x, mean, d, family=family, remaining=S0 - cumulative)


def _step_means(path_full, n_seed, R, gw, t_index, population, cum):
    pos = n_seed + t_index
    K = gw.size
    lo = max(0, pos - K)
    L = np.dot(path_full[lo:pos][::-1], gw[: pos - lo])
    if population is None:
        return R[t_index] * L
    return max(population - cum, 0.0) * -np.expm1(-R[t_index] * L / population)


def latent_log_density(path: InfectionPath, R, g: DiscretePmf, d: float, family="gamma") -> float:
    """Log prior density of latent infections ``I_1..I_T`` given seeds and ``R``."""
    family = canonical_family(family)
    seeds, R, gw = _prepare(path.seeds, R, g)
    if R.size != path.T:
        raise ValueError("R must cover days 1..T")
    full = path.full
    n_seed = seeds.size
    cum = seeds.sum()
    total = 0.0
    for k in range(path.T):
        mean = _step_means(full, n_seed, R, gw, k, path.population, cum)
        rem = None if path.population is None else path.population - cum
        total += latent_step_logpdf(full[n_seed + k], mean, d, family, remaining=rem)
        if total == -np.inf:
            return total
        cum += full[n_seed + k]
    return total


def _sample_step(rng, mean, d, family, remaining):
    if _negligible(mean, d):
        return 0.0
    dist = match_moments(family, mean, d).density()._dist
    # tiny means give shapes whose draws underflow to 0, where the density is infinite
    if remaining is None:
        return max(float(dist.rvs(random_state=rng)), _TINY)
    if remaining <= 0:
        return 0.0
    upper = dist.cdf(remaining)
    u = rng.uniform(0.0, upper)
    x = float(dist.ppf(u))
    # the inverse cdf of a near-degenerate gamma can fail in the far left tail
    x = x if np.isfinite(x) else _TINY
    return min(max(x, _TINY), remaining)


@dataclass(frozen=True)
class LatentDraw:
    path: InfectionPath
    log_density: float


def propagate_latent(
    seeds,
    R,
    g: DiscretePmf,
    d: float,
    family: str = "gamma",
    rng: np.random.Generator | None = None,
    population: float | None = None,
) -> LatentDraw:
    """Forward-sample latent infections and return their log prior density.

    Each ``I_t`` is drawn from the moment-matched ``family`` with mean
    ``R_t L_t`` (or its population-adjusted version) and variance
    ``d`` times that mean, conditional on the realized history.
    """
    family = canonical_family(family)
    if d <= 0:
        raise ValueError("dispersion must be positive")
    rng = np.random.default_rng(rng)
    seeds, R, gw = _prepare(seeds, R, g)
    n_seed, T = seeds.size, R.size
    full = np.concatenate([seeds, np.zeros(T)])
    cum = seeds.sum()
    for k in range(T):
        mean = _step_means(full, n_seed, R, gw, k, population, cum)
        rem = None if population is None else population - cum
        x = _sample_step(rng, mean, d, family, rem)
        full[n_seed + k] = x
        cum += x
    path = InfectionPath(seeds, full[n_seed:], mode="latent", population=population)
    return LatentDraw(path, latent_log_density(path, R, g, d, family))


def simulate_latent_batch(
    seeds, R, g: DiscretePmf, d: float, n: int, rng: np.random.Generator, population=None
) -> np.ndarray:
    """Vectorized gamma-family latent forward simulation.

    Returns an ``(n, T)`` array of independent latent paths sharing the
    given seeds. With ``population`` the truncated draws use inverse-CDF
    sampling on ``[0, S0 - C_{t-1}]``.
    """
    seeds, R, gw = _prepare(seeds, R, g)
    n_seed, T, K = seeds.size, R.size, gw.size
    full = np.zeros((n, n_seed + T))
    full[:, :n_seed] = seeds
    cum = np.full(n, seeds.sum())
    for k in range(T):
        pos = n_seed + k
        lo = max(0, pos - K)
        L = full[:, lo:pos][:, ::-1] @ gw[: pos - lo]
        if population is None:
            mean = R[k] * L
        else:
            mean = np.maximum(population - cum, 0.0) * -np.expm1(-R[k] * L / population)
        shape = mean / d
        pos_mask = mean > 0
        x = np.zeros(n)
        if population is None:
            x[pos_mask] = rng.gamma(shape[pos_mask], d)
        else:
            rem = np.maximum(population - cum, 0.0)
            dist = stats.gamma(a=shape[pos_mask], scale=d)
            upper = dist.cdf(rem[pos_mask])
            u = rng.uniform(0.0, 1.0, pos_mask.sum()) * upper
            x[pos_mask] = np.minimum(dist.ppf(u), rem[pos_mask])
            x = np.nan_to_num(x, nan=0.0)
        full[:, pos] = x
        cum += x
    return full[:, n_seed:]
