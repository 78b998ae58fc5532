"""
Joint log-posterior of the renewal model, written in JAX.

The unconstrained parameter vector holds the regression blocks for ``R_t``
(and for any modeled ascertainment rate), the seed infections, the
observation auxiliaries, and in latent mode the dispersion ``d`` and one
latent coordinate per region and day.

Latent infections are reparameterized so the sampler never leaves the
support: ``I_t = exp(u_t)`` without a population, and with a population
``I_t = rem_t * sigmoid(u_t)`` where ``rem_t = S0 - C_{t-1}`` is the
number of susceptibles left. The Jacobian of that map is triangular, so
its log-determinant is the sum of ``log rem_t + log sigmoid(u_t) +
log(1 - sigmoid(u_t))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import jax
import jax.numpy as jnp
import numpy as np
from jax.scipy.special import gammainc, gammaln, log_ndtr

from ..distributions import DiscretePmf, canonical_family
from ..observation import ObservationType, pointwise_log_lik, seroprevalence_log_lik
from ..params import Block, ParamLayout
from ..regression import (
    Design,
    RegressionSpec,
    build_design,
    half_normal_logpdf,
    normal_logpdf,
)
from ..renewal import SeedingConfig

LOG_2PI = math.log(2 * math.pi)


@dataclass(frozen=True)
class LatentSpec:
    """Latent-infection settings.

    Parameters
    ----------
    family : str
        ``"gamma"`` or ``"lognormal"`` prior for each ``I_t``.
    d : float, optional
        Fixed dispersion. When omitted ``d`` is sampled with a log-normal
        prior of the given median and log-scale sd.
    """

    family: str = "gamma"
    d: float | None = None
    d_prior_median: float = 1.0
    d_prior_log_sd: float = 1.0

    def __post_init__(self):
        fam = canonical_family(self.family)
        if fam == "weibull":
            raise ValueError("the weibull family is not supported for sampled latent infections")
        object.__setattr__(self, "family", fam)
        if self.d is not None and self.d <= 0:
            raise ValueError("d must be positive")
        if self.d_prior_median <= 0 or self.d_prior_log_sd <= 0:
            raise ValueError("d prior parameters must be positive")


def _lag_matrix(pmf: DiscretePmf, n_seed: int, T: int) -> np.ndarray:
    """Rows map the full path (seeds then days 1..T) to a convolution at day t."""
    w = pmf.full()
    A = np.zeros((T, n_seed + T))
    for t in range(T):
        pos = n_seed + t
        for lag in range(pmf.first_lag, w.size):
            if pos - lag >= 0:
                A[t, pos - lag] = w[lag]
    return A


def latent_family_logpdf(family, x, mean, d):
    if family == "gamma":
        a = mean / d
        return -a * jnp.log(d) - gammaln(a) + (a - 1.0) * jnp.log(x) - x / d
    s2 = jnp.log1p(d / mean)
    mu = jnp.log(mean) - 0.5 * s2
    lx = jnp.log(x)
    return -lx - 0.5 * jnp.log(s2) - 0.5 * LOG_2PI - (lx - mu) ** 2 / (2 * s2)


def latent_family_logcdf(family, x, mean, d):
    if family == "gamma":
        return jnp.log(gammainc(mean / d, x / d))
    s2 = jnp.log1p(d / mean)
    mu = jnp.log(mean) - 0.5 * s2
    return log_ndtr((jnp.log(x) - mu) / jnp.sqrt(s2))


class EpidemicModel:
    """Posterior over transmission, seeding and observation parameters.

    Parameters
    ----------
    regions : sequence of RegionSeries
        Data per region; observed series are looked up by observation type
        name. Regions shorter than the longest one are padded with masked
        days.
    transmission : RegressionSpec
        Linear predictor for ``R_t``.
    g : DiscretePmf
        Generation interval (fixed, not sampled).
    observations : sequence of ObservationType
    seeding : SeedingConfig
    latent : LatentSpec, optional
        Enables latent infections; expected mode otherwise.
    use_population : bool
        Apply the susceptible-depletion adjustment using each region's
        population.
    """

    def __init__(
        self,
        regions,
        transmission: RegressionSpec,
        g: DiscretePmf,
        observations,
        seeding: SeedingConfig | None = None,
        latent: LatentSpec | None = None,
        use_population: bool = False,
    ):
        regions = list(regions)
        if not regions:
            raise ValueError("at least one region is required")
        if g.first_lag != 1:
            raise ValueError("the generation pmf must start at lag 1")
        self.regions = regions
        self.region_ids = tuple(r.region for r in regions)
        self.g = g
        self.observations = tuple(observations)
        if not self.observations:
            raise ValueError("at least one observation type is required")
        names = [o.name for o in self.observations]
        if len(set(names)) != len(names):
            raise ValueError("observation type names must be unique")
        self.seeding = seeding or SeedingConfig()
        self.latent = latent
        self.use_population = use_population
        M = len(regions)
        T = max(r.T for r in regions)
        self.M, self.T = M, T
        n_seed = self.seeding.window
        self.n_seed = n_seed

        if use_population or any(o.family == "seroprevalence" for o in self.observations):
            pops = [r.population for r in regions]
            if any(p is None for p in pops):
                raise ValueError("every region needs a population")
            self.S0 = np.asarray(pops, dtype=float)
        else:
            self.S0 = None

        self.layout = ParamLayout()
        self.transmission = build_design(transmission, regions, T=T, prefix="R.")
        self.layout.extend(self.transmission.layout)
        self.ascertainment: dict[str, Design] = {}
        for o in self.observations:
            if isinstance(o.ascertainment, RegressionSpec):
                des = build_design(o.ascertainment, regions, T=T, prefix=f"alpha.{o.name}.")
                self.ascertainment[o.name] = des
                self.layout.extend(des.layout)

        if self.seeding.mode == "shared":
            self.layout.add(Block("seed_level", (M,)))
            if self.seeding.noise_sd > 0:
                self.layout.add(Block("seed_noise", (M, n_seed)))
        else:
            self.layout.add(Block("seed_log", (M, n_seed)))
        for o in self.observations:
            if o.has_aux:
                self.layout.add(Block(f"aux.{o.name}", (1,), "positive"))
        if latent is not None:
            if latent.d is None:
                self.layout.add(Block("latent_d", (1,), "positive"))
            self.layout.add(Block("latent_u", (M, T)))

        # data arrays (M, T); absent series and padded days are masked
        self._counts, self._masks, self._tested = {}, {}, {}
        for o in self.observations:
            c = np.zeros((M, T), dtype=float)
            m = np.zeros((M, T), dtype=bool)
            n = np.zeros((M, T), dtype=float)
            for k, r in enumerate(regions):
                if o.name in r.counts:
                    cnt, msk = r.observed(o.name)
                    c[k, : r.T] = cnt
                    m[k, : r.T] = msk
                    if o.family == "seroprevalence":
                        key = f"{o.name}_tested"
                        if key not in r.counts:
                            raise ValueError(f"region {r.region!r} lacks the {key!r} series")
                        tested, tmask = r.observed(key)
                        if np.any(cnt[msk & tmask] > tested[msk & tmask]):
                            raise ValueError(f"{o.name}: positives exceed tested in {r.region!r}")
                        n[k, : r.T] = tested
                        m[k, : r.T] &= tmask
            self._counts[o.name], self._masks[o.name], self._tested[o.name] = c, m, n
        self.n_observed = int(sum(m.sum() for m in self._masks.values()))
        self.pointwise_index = [
            (self.region_ids[k], o.name, t + 1)
            for o in self.observations
            for k, t in zip(*np.nonzero(self._masks[o.name]))
        ]

        self._G = jnp.asarray(_lag_matrix(g, n_seed, T))
        self._Pi = {o.name: jnp.asarray(_lag_matrix(o.delay, n_seed, T)) for o in self.observations}

        self.logdensity = self._logp
        self._vg = jax.jit(jax.value_and_grad(self._logp))
        self._logp_jit = jax.jit(self._logp)
        self._pointwise_jit = jax.jit(self._pointwise)
        self._quantities_jit = jax.jit(self._quantities)

    # --- components -----------------------------------------------------

    @property
    def dim(self) -> int:
        return self.layout.size

    def _seeds(self, params):
        cfg = self.seeding
        if cfg.mode == "shared":
            level = params["seed_level"][:, None]
            if cfg.noise_sd > 0:
                return jnp.exp(level + cfg.noise_sd * params["seed_noise"])
            return jnp.exp(jnp.broadcast_to(level, (self.M, self.n_seed)))
        return jnp.exp(params["seed_log"])

    def _seed_log_prior(self, params):
        cfg = self.seeding
        if cfg.mode == "shared":
            lp = jnp.sum(normal_logpdf(params["seed_level"], cfg.log_mean, cfg.log_sd))
            if cfg.noise_sd > 0:
                lp = lp + jnp.sum(normal_logpdf(params["seed_noise"], 0.0, 1.0))
            return lp
        return jnp.sum(normal_logpdf(params["seed_log"], cfg.log_mean, cfg.log_sd))

    def _dispersion(self, params):
        if self.latent.d is not None:
            return jnp.asarray(self.latent.d, dtype=jnp.float64)
        return params["latent_d"][0]

    def _expected_path(self, seeds, R):
        n = self.n_seed
        K = self.g.max_lag
        g_rev = jnp.asarray(self.g.full()[1:][::-1])
        S0 = jnp.asarray(self.S0) if self.use_population else None
        # ring buffer of the last K days, oldest first
        buf0 = jnp.concatenate([jnp.zeros((self.M, max(K - n, 0))), seeds[:, -K:]], axis=1)

        def step(carry, r):
            buf, cum = carry
            L = buf @ g_rev
            if S0 is None:
                i = r * L
            else:
                i = jnp.maximum(S0 - cum, 0.0) * -jnp.expm1(-r * L / S0)
            return (jnp.concatenate([buf[:, 1:], i[:, None]], axis=1), cum + i), i

        _, ys = jax.lax.scan(step, (buf0, seeds.sum(axis=1)), R.T)
        return jnp.concatenate([seeds, ys.T], axis=1)

    def _latent_path(self, params, seeds, R):
        """Latent infections, their prior log density and the transform's log-Jacobian."""
        u = params["latent_u"]
        d = self._dispersion(params)
        fam = self.latent.family
        if self.use_population:
            S0 = jnp.asarray(self.S0)[:, None]
            log_rem1 = jnp.log(S0[:, 0] - seeds.sum(axis=1))[:, None]
            log_keep = -jax.nn.softplus(u)
            excl = jnp.cumsum(log_keep, axis=1) - log_keep
            log_rem = log_rem1 + excl
            rem = jnp.exp(log_rem)
            I = rem * jax.nn.sigmoid(u)
            log_jac = jnp.sum(log_rem - jax.nn.softplus(u) - jax.nn.softplus(-u))
            full = jnp.concatenate([seeds, I], axis=1)
            L = full @ self._G.T
            mean = rem * -jnp.expm1(-R * L / S0)
            lp = latent_family_logpdf(fam, I, mean, d) - latent_family_logcdf(fam, rem, mean, d)
        else:
            I = jnp.exp(u)
            log_jac = jnp.sum(u)
            full = jnp.concatenate([seeds, I], axis=1)
            mean = R * (full @ self._G.T)
            lp = latent_family_logpdf(fam, I, mean, d)
        return full, jnp.sum(lp), log_jac

    def _alpha(self, params, o: ObservationType):
        if o.name in self.ascertainment:
            return self.ascertainment[o.name].rates(params)
        return jnp.asarray(float(o.ascertainment))

    def _phi(self, params, o: ObservationType):
        if o.family == "neg_binomial":
            return params[f"aux.{o.name}"][0]
        if o.family == "quasi_poisson":
            return 1.0 + params[f"aux.{o.name}"][0]
        return None

    def _forward(self, theta):
        params, log_jac = self.layout.unpack(theta)
        R = self.transmission.rates(params)
        seeds = self._seeds(params)
        latent_lp = 0.0
        if self.latent is None:
            full = self._expected_path(seeds, R)
        else:
            full, latent_lp, lj = self._latent_path(params, seeds, R)
            log_jac = log_jac + lj
        return params, log_jac, R, seeds, full, latent_lp

    def _obs_terms(self, params, full):
        """Expected observations and masked pointwise log-likelihoods per type."""
        expected, pointwise = {}, {}
        for o in self.observations:
            conv = full @ self._Pi[o.name].T
            mask = self._masks[o.name]
            counts = self._counts[o.name]
            if o.family == "seroprevalence":
                prev = jnp.minimum(jnp.cumsum(conv, axis=1) / jnp.asarray(self.S0)[:, None], 1.0)
                expected[o.name] = prev
                lp = seroprevalence_log_lik(self._tested[o.name], counts, prev)
            else:
                y = self._alpha(params, o) * conv
                expected[o.name] = y
                lp = pointwise_log_lik(o.family, counts, y, self._phi(params, o))
            pointwise[o.name] = jnp.where(mask, lp, 0.0)
        return expected, pointwise

    def _log_prior(self, params):
        lp = self.transmission.log_prior(params)
        for des in self.ascertainment.values():
            lp = lp + des.log_prior(params)
        lp = lp + self._seed_log_prior(params)
        for o in self.observations:
            if o.has_aux:
                lp = lp + jnp.sum(half_normal_logpdf(params[f"aux.{o.name}"], o.aux_prior_sd))
        if self.latent is not None and self.latent.d is None:
            d = params["latent_d"]
            lat = self.latent
            lp = lp + jnp.sum(normal_logpdf(jnp.log(d), math.log(lat.d_prior_median), lat.d_prior_log_sd) - jnp.log(d))
        return lp

    def _logp(self, theta):
        params, log_jac, R, seeds, full, latent_lp = self._forward(theta)
        _, pointwise = self._obs_terms(params, full)
        ll = sum(jnp.sum(v) for v in pointwise.values())
        return self._log_prior(params) + latent_lp + ll + log_jac

    def _pointwise(self, theta):
        params, _, _, _, full, _ = self._forward(theta)
        _, pointwise = self._obs_terms(params, full)
        return jnp.concatenate([pointwise[o.name][self._masks[o.name]] for o in self.observations])

    def _quantities(self, theta):
        params, _, R, seeds, full, _ = self._forward(theta)
        expected, _ = self._obs_terms(params, full)
        out = {"R": R, "seeds": seeds, "infections": full[:, self.n_seed:]}
        for o in self.observations:
            out[f"expected.{o.name}"] = expected[o.name]
            if o.family != "seroprevalence":
                out[f"alpha.{o.name}"] = jnp.broadcast_to(self._alpha(params, o), (self.M, self.T))
            phi = self._phi(params, o)
            if phi is not None:
                out[f"phi.{o.name}"] = phi
        if self.latent is not None:
            out["d"] = self._dispersion(params)
        beta = self.transmission.coefficients(params)
        out["R.beta"] = beta
        devs = self.transmission.group_deviations(params)
        spec = self.transmission.spec
        if spec.grouped:
            off = int(spec.intercept == "pooled")
            pf = len(spec.fixed)
            out["R.beta_group"] = beta[pf:][None, :] + devs[:, off:]
        return out

    # --- public API ---------------------------------------------------

    def log_posterior(self, theta) -> float:
        """Unnormalized log posterior at an unconstrained point."""
        v = float(self._logp_jit(jnp.asarray(theta, dtype=jnp.float64)))
        return v if math.isfinite(v) else -math.inf

    def logp_and_grad(self, theta):
        """Value and exact gradient; ``(-inf, 0)`` outside the support."""
        v, g = self._vg(jnp.asarray(theta, dtype=jnp.float64))
        v = float(v)
        g = np.asarray(g)
        if not math.isfinite(v) or not np.all(np.isfinite(g)):
            return -math.inf, np.zeros(self.dim)
        return v, g

    __call__ = logp_and_grad

    def pointwise_log_lik(self, theta) -> np.ndarray:
        """Log-likelihood per observed (region, type, day), in ``pointwise_index`` order."""
        return np.asarray(self._pointwise_jit(jnp.asarray(theta, dtype=jnp.float64)))

    def quantities(self, theta) -> dict:
        """Derived quantities (``R``, infections, expected observations, ...) at one point."""
        q = self._quantities_jit(jnp.asarray(theta, dtype=jnp.float64))
        return {k: np.asarray(v) for k, v in q.items()}

    def batch(self, fn: str, thetas, chunk: int = 500):
        """Evaluate ``"quantities"`` or ``"pointwise"`` over rows of ``thetas``."""
        f = {"quantities": self._quantities, "pointwise": self._pointwise}[fn]
        vf = jax.jit(jax.vmap(f))
        thetas = np.asarray(thetas, dtype=float)
        parts = [jax.device_get(vf(jnp.asarray(thetas[i: i + chunk]))) for i in range(0, len(thetas), chunk)]
        if fn == "pointwise":
            return np.concatenate(parts)
        return {k: np.concatenate([p[k] for p in parts]) for k in parts[0]}

    def constrained(self, theta) -> dict:
        params, _ = self.layout.unpack(jnp.asarray(theta, dtype=jnp.float64))
        return {k: np.asarray(v) for k, v in params.items()}

    def effect_names(self) -> list[str]:
        return list(self.transmission.spec.covariates)

    def initial_point(self) -> np.ndarray:
        """Prior medians, with latent coordinates set from the expected path."""
        vals = {}
        vals.update(self.transmission.prior_median())
        for des in self.ascertainment.values():
            vals.update(des.prior_median())
        cfg = self.seeding
        M, n, T = self.M, self.n_seed, self.T
        if cfg.mode == "shared":
            vals["seed_level"] = np.full(M, cfg.log_mean)
            if cfg.noise_sd > 0:
                vals["seed_noise"] = np.zeros((M, n))
        else:
            vals["seed_log"] = np.full((M, n), cfg.log_mean)
        for o in self.observations:
            if o.has_aux:
                vals[f"aux.{o.name}"] = np.array([0.6745 * o.aux_prior_sd])
        if self.latent is not None:
            if self.latent.d is None:
                vals["latent_d"] = np.array([self.latent.d_prior_median])
            vals["latent_u"] = np.zeros((M, T))
        theta = self.layout.pack(vals)
        if self.latent is not None:
            theta = self.latent_from_expected(theta)
        return theta

    def latent_from_expected(self, theta) -> np.ndarray:
        """Replace the latent block of ``theta`` by the expected-mode path."""
        theta = np.array(theta, dtype=float)
        params, _ = self.layout.unpack(jnp.asarray(theta))
        R = self.transmission.rates(params)
        seeds = self._seeds(params)
        full = np.asarray(self._expected_path(seeds, R))
        I = np.maximum(full[:, self.n_seed:], 1e-8)
        if self.use_population:
            S0 = self.S0[:, None]
            cum = np.cumsum(full, axis=1)[:, self.n_seed - 1: -1]
            rem = np.maximum(S0 - cum, 1e-8)
            frac = np.clip(I / rem, 1e-10, 1 - 1e-10)
            u = np.log(frac) - np.log1p(-frac)
        else:
            u = np.log(I)
        theta[self.layout.slice("latent_u")] = u.ravel()
        return theta
