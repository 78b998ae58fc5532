"""
Regression parameterization of transmission and ascertainment rates.

A rate (``R_t`` per region, or an ascertainment rate ``alpha_t``) is the
inverse link of a linear predictor

    x_t^(m) = b0 + b0^(m) + X_fixed[m, t] . beta + X_grouped[m, t] . (beta_g + beta_g^(m)) + walk^(m)_t

Group-level deviations ``(b0^(m), beta_g^(m))`` are partially pooled through
a zero-mean multivariate normal whose covariance is decomposed into scales
(half-normal priors) and an LKJ correlation matrix. Shared coefficients get
either independent normal priors or a regularized horseshoe. Random walks
are daily or weekly step functions starting at 0 with non-centered increments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import jax
import jax.numpy as jnp
import numpy as np
from jax.scipy.special import gammaln

from .params import Block, ParamLayout

LOG_2PI = math.log(2 * math.pi)


# --- links ----------------------------------------------------------------


@dataclass(frozen=True)
class LinkFunction:
    """``log`` link or scaled logit with upper bound ``K``."""

    kind: str = "log"
    K: float | None = None

    def __post_init__(self):
        kind = self.kind.replace("-", "_").lower()
        if kind not in ("log", "scaled_logit"):
            raise ValueError(f"unknown link {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if kind == "scaled_logit":
            K = 6.0 if self.K is None else float(self.K)
            if not K > 0:
                raise ValueError("K must be positive")
            object.__setattr__(self, "K", K)

    def inverse(self, x):
        x = jnp.asarray(x, dtype=jnp.float64)
        if self.kind == "log":
            return jnp.exp(x)
        return self.K * jax.nn.sigmoid(x)

    def __call__(self, y):
        """The link itself (rate to linear predictor)."""
        y = jnp.asarray(y, dtype=jnp.float64)
        if self.kind == "log":
            return jnp.log(y)
        return jnp.log(y) - jnp.log(self.K - y)


def inverse_link(link: LinkFunction, x):
    return link.inverse(x)


# --- priors ---------------------------------------------------------------


@dataclass(frozen=True)
class NormalPrior:
    mean: float = 0.0
    sd: float = 1.0

    def __post_init__(self):
        if self.sd <= 0:
            raise ValueError("sd must be positive")


@dataclass(frozen=True)
class ShrinkagePrior:
    """Regularized horseshoe hyperparameters."""

    global_scale: float = 0.1
    slab_scale: float = 2.0
    slab_df: float = 4.0

    def __post_init__(self):
        if min(self.global_scale, self.slab_scale, self.slab_df) <= 0:
            raise ValueError("shrinkage hyperparameters must be positive")


@dataclass(frozen=True)
class PoolingPrior:
    """Group effects ``~ N(0, diag(tau) Omega diag(tau))``.

    ``tau`` has half-normal priors with scale ``scale_sd``; ``Omega`` an LKJ
    prior with shape ``eta``.
    """

    scale_sd: float = 0.5
    eta: float = 1.0

    def __post_init__(self):
        if self.scale_sd <= 0 or self.eta <= 0:
            raise ValueError("pooling hyperparameters must be positive")


@dataclass(frozen=True)
class RandomWalk:
    """Random walk on the linear predictor, one step per day or week.

    Increments are non-centered with a half-normal prior of scale
    ``scale_sd`` on their standard deviation.
    """

    timescale: str = "weekly"
    per_group: bool = True
    scale_sd: float = 0.1

    def __post_init__(self):
        if self.timescale not in ("daily", "weekly"):
            raise ValueError("timescale must be 'daily' or 'weekly'")
        if self.scale_sd <= 0:
            raise ValueError("scale_sd must be positive")

    @property
    def step(self) -> int:
        return 1 if self.timescale == "daily" else 7


INTERCEPT_MODES = ("none", "global", "pooled", "independent")


@dataclass(frozen=True)
class RegressionSpec:
    """Structure and priors of one linear predictor.

    Parameters
    ----------
    fixed : tuple of str
        Covariates with a single coefficient shared by all groups.
    grouped : tuple of str
        Covariates with a shared coefficient plus partially pooled
        per-group deviations.
    intercept : str
        ``"global"`` (one intercept), ``"pooled"`` (global plus pooled
        per-group deviations), ``"independent"`` (one unpooled intercept per
        group) or ``"none"``.
    standardize : tuple of str
        Continuous covariates centered and scaled with their pooled mean and
        standard deviation over the fit window.
    binary : tuple of str
        Covariates validated to take values in {0, 1}.
    """

    fixed: tuple = ()
    grouped: tuple = ()
    intercept: str = "pooled"
    link: LinkFunction = field(default_factory=LinkFunction)
    intercept_prior: NormalPrior = field(default_factory=NormalPrior)
    effect_prior: NormalPrior | ShrinkagePrior = field(default_factory=NormalPrior)
    pooling: PoolingPrior = field(default_factory=PoolingPrior)
    random_walk: RandomWalk | None = None
    standardize: tuple = ()
    binary: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "fixed", tuple(self.fixed))
        object.__setattr__(self, "grouped", tuple(self.grouped))
        object.__setattr__(self, "standardize", tuple(self.standardize))
        object.__setattr__(self, "binary", tuple(self.binary))
        if self.intercept not in INTERCEPT_MODES:
            raise ValueError(f"intercept must be one of {INTERCEPT_MODES}")
        names = self.fixed + self.grouped
        if len(set(names)) != len(names):
            raise ValueError("a covariate may appear only once")
        unknown = set(self.standardize + self.binary) - set(names)
        if unknown:
            raise ValueError(f"standardize/binary name unused covariates: {sorted(unknown)}")
        if set(self.standardize) & set(self.binary):
            raise ValueError("binary covariates are never standardized")

    @property
    def covariates(self) -> tuple:
        return self.fixed + self.grouped


DesignSpec = RegressionSpec


# --- densities ------------------------------------------------------------


def normal_logpdf(x, mean, sd):
    z = (x - mean) / sd
    return -0.5 * z**2 - jnp.log(sd) - 0.5 * LOG_2PI


def half_normal_logpdf(x, sd):
    return normal_logpdf(x, 0.0, sd) + math.log(2.0)


def half_cauchy_logpdf(x, scale):
    return math.log(2.0 / math.pi) - jnp.log(scale) - jnp.log1p((x / scale) ** 2)


def inv_gamma_logpdf(x, shape, scale):
    return shape * jnp.log(scale) - gammaln(shape) - (shape + 1) * jnp.log(x) - scale / x


def lkj_log_normalizer(q: int, eta: float) -> float:
    """Log of the integral of ``det(Omega)^(eta-1)`` over q-by-q correlation matrices."""
    total = 0.0
    for i in range(1, q):
        k = q - i
        a = eta + (k - 1) / 2
        total += (2 * eta - 2 + k) * k * math.log(2.0) + k * (
            math.lgamma(a) * 2 - math.lgamma(2 * a)
        )
    return total


def lkj_cholesky_logpdf(L, eta: float):
    """LKJ density expressed on the Cholesky factor of the correlation matrix."""
    q = L.shape[0]
    if q < 2:
        return 0.0
    log_diag = jnp.log(jnp.diagonal(L)[1:])
    expo = jnp.arange(q - 2, -1, -1) + 2.0 * eta - 2.0
    return jnp.sum(expo * log_diag) - lkj_log_normalizer(q, eta)


def lkj_corr_logpdf(corr, eta: float = 1.0) -> float:
    """LKJ log density of a correlation matrix; ``-inf`` if not positive definite."""
    corr = np.asarray(corr, dtype=float)
    q = corr.shape[0]
    if corr.shape != (q, q) or not np.allclose(corr, corr.T) or not np.allclose(np.diag(corr), 1.0):
        return -np.inf
    try:
        L = np.linalg.cholesky(corr)
    except np.linalg.LinAlgError:
        return -np.inf
    logdet = 2.0 * np.sum(np.log(np.diag(L)))
    return float((eta - 1.0) * logdet - lkj_log_normalizer(q, eta))


def pooled_normal_logpdf(devs, scales, corr) -> float:
    """Log density of group deviations ``devs`` (M x q) under ``N(0, Sigma)``.

    ``Sigma = diag(scales) corr diag(scales)``. A correlation proposal that is
    not positive definite yields ``-inf``.
    """
    devs = np.atleast_2d(np.asarray(devs, dtype=float))
    scales = np.asarray(scales, dtype=float)
    corr = np.asarray(corr, dtype=float)
    if np.any(scales <= 0):
        return -np.inf
    sigma = corr * np.outer(scales, scales)
    try:
        L = np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        return -np.inf
    if not np.allclose(corr, corr.T):
        return -np.inf
    q = scales.size
    sol = np.linalg.solve(L, devs.T)
    return float(
        -0.5 * np.sum(sol**2) - devs.shape[0] * (np.sum(np.log(np.diag(L))) + 0.5 * q * LOG_2PI)
    )


# --- design ---------------------------------------------------------------


def walk_index(T: int, step: int) -> np.ndarray:
    """Period index of each day ``1..T`` for a step-``step`` random walk (period 0 is fixed at 0)."""
    return np.arange(T) // step


@dataclass
class Design:
    """Covariate arrays and parameter layout for one linear predictor."""

    spec: RegressionSpec
    groups: tuple
    T: int
    X_fixed: np.ndarray
    X_grouped: np.ndarray
    standardization: dict
    layout: ParamLayout
    prefix: str = ""
    walk_idx: np.ndarray | None = None
    n_increments: int = 0

    @property
    def n_groups(self) -> int:
        return len(self.groups)

    @property
    def q(self) -> int:
        """Dimension of each group's pooled deviation vector."""
        return int(self.spec.intercept == "pooled") + len(self.spec.grouped)

    def _p(self, name):
        return self.prefix + name

    # parameter extraction --------------------------------------------

    def coefficients(self, params):
        """Shared coefficients, ordered as ``fixed + grouped``."""
        spec = self.spec
        p = len(spec.covariates)
        if p == 0:
            return jnp.zeros(0)
        if isinstance(spec.effect_prior, ShrinkagePrior):
            z = params[self._p("coef_z")]
            lam = params[self._p("hs_local")]
            tau = params[self._p("hs_global")][0]
            c2 = spec.effect_prior.slab_scale**2 * params[self._p("hs_slab")][0]
            lam_t = jnp.sqrt(c2 * lam**2 / (c2 + tau**2 * lam**2))
            return z * tau * lam_t
        return params[self._p("coef")]

    def group_deviations(self, params):
        """Per-group deviations (M x q): ``diag(tau) L z_m`` for each group."""
        if self.q == 0:
            return jnp.zeros((self.n_groups, 0))
        z = params[self._p("group_z")]
        tau = params[self._p("group_scale")]
        if self.q > 1:
            L = params[self._p("group_corr")]
            return (z @ L.T) * tau
        return z * tau

    def walk(self, params):
        """Random-walk contribution (M x T)."""
        rw = self.spec.random_walk
        if rw is None:
            return jnp.zeros((self.n_groups, self.T))
        inc = params[self._p("walk_z")] * params[self._p("walk_scale")][0]
        values = jnp.cumsum(inc, axis=-1)
        # the first period sits at 0 so the walk never duplicates the intercept
        zero = jnp.zeros(values.shape[:-1] + (1,))
        path = jnp.concatenate([zero, values], axis=-1)[..., self.walk_idx]
        if not rw.per_group:
            path = jnp.broadcast_to(path, (self.n_groups, self.T))
        return path

    def linpred(self, params):
        """Linear predictor for every group and day (M x T)."""
        spec = self.spec
        M, T = self.n_groups, self.T
        x = jnp.zeros((M, T))
        if spec.intercept in ("global", "pooled"):
            x = x + params[self._p("intercept")][0]
        elif spec.intercept == "independent":
            x = x + params[self._p("group_intercept")][:, None]
        beta = self.coefficients(params)
        pf = len(spec.fixed)
        if pf:
            x = x + jnp.einsum("mtk,k->mt", self.X_fixed, beta[:pf])
        devs = self.group_deviations(params)
        off = 0
        if spec.intercept == "pooled":
            x = x + devs[:, 0:1]
            off = 1
        if spec.grouped:
            coef = beta[pf:][None, :] + devs[:, off:]
            x = x + jnp.einsum("mtk,mk->mt", self.X_grouped, coef)
        return x + self.walk(params)

    def rates(self, params):
        return self.spec.link.inverse(self.linpred(params))

    def evaluate_linpred(self, params, t: int, m: int) -> float:
        """Linear predictor at day ``t`` (1-based) of group ``m`` (0-based)."""
        if not 1 <= t <= self.T:
            raise IndexError("t out of range")
        return float(self.linpred(params)[m, t - 1])

    # prior -------------------------------------------------------------

    def log_prior(self, params):
        """Sum of block log-densities on the sampled (non-centered) scale."""
        spec = self.spec
        lp = 0.0
        ip = spec.intercept_prior
        if spec.intercept in ("global", "pooled"):
            lp = lp + jnp.sum(normal_logpdf(params[self._p("intercept")], ip.mean, ip.sd))
        elif spec.intercept == "independent":
            lp = lp + jnp.sum(normal_logpdf(params[self._p("group_intercept")], ip.mean, ip.sd))
        if spec.covariates:
            ep = spec.effect_prior
            if isinstance(ep, ShrinkagePrior):
                lp = lp + jnp.sum(normal_logpdf(params[self._p("coef_z")], 0.0, 1.0))
                lp = lp + jnp.sum(half_cauchy_logpdf(params[self._p("hs_local")], 1.0))
                lp = lp + jnp.sum(half_cauchy_logpdf(params[self._p("hs_global")], ep.global_scale))
                nu = ep.slab_df
                lp = lp + jnp.sum(inv_gamma_logpdf(params[self._p("hs_slab")], nu / 2, nu / 2))
            else:
                lp = lp + jnp.sum(normal_logpdf(params[self._p("coef")], ep.mean, ep.sd))
        if self.q:
            lp = lp + jnp.sum(normal_logpdf(params[self._p("group_z")], 0.0, 1.0))
            lp = lp + jnp.sum(half_normal_logpdf(params[self._p("group_scale")], spec.pooling.scale_sd))
            if self.q > 1:
                lp = lp + lkj_cholesky_logpdf(params[self._p("group_corr")], spec.pooling.eta)
        if spec.random_walk is not None:
            lp = lp + jnp.sum(normal_logpdf(params[self._p("walk_z")], 0.0, 1.0))
            lp = lp + jnp.sum(half_normal_logpdf(params[self._p("walk_scale")], spec.random_walk.scale_sd))
        return lp

    def prior_median(self) -> dict:
        """Constrained parameter values at (approximate) prior medians."""
        spec = self.spec
        out = {}
        for b in self.layout.blocks:
            if not b.name.startswith(self.prefix):
                continue
            key = b.name[len(self.prefix):]
            if key in ("intercept", "group_intercept"):
                val = np.full(b.shape, spec.intercept_prior.mean)
            elif key == "coef":
                val = np.full(b.shape, spec.effect_prior.mean)
            elif key in ("coef_z", "group_z", "walk_z"):
                val = np.zeros(b.shape)
            elif key == "hs_local":
                val = np.ones(b.shape)
            elif key == "hs_global":
                val = np.full(b.shape, spec.effect_prior.global_scale)
            elif key == "hs_slab":
                val = np.ones(b.shape)
            elif key == "group_scale":
                val = np.full(b.shape, 0.6745 * spec.pooling.scale_sd)
            elif key == "walk_scale":
                val = np.full(b.shape, 0.6745 * spec.random_walk.scale_sd)
            elif key == "group_corr":
                val = np.eye(b.shape[0])
            else:  # pragma: no cover - layout and this table are built together
                raise KeyError(key)
            out[b.name] = val
        return out

    def n_effect_params(self, covariate: str) -> int:
        """Shared plus per-group coefficients attached to ``covariate``."""
        if covariate in self.spec.fixed:
            return 1
        if covariate in self.spec.grouped:
            return 1 + self.n_groups
        raise KeyError(covariate)


def _covariate_table(data):
    """Normalize regions to ``(group ids, list of {name: array})``."""
    groups, tables = [], []
    for k, item in enumerate(data):
        if hasattr(item, "covariates"):
            groups.append(getattr(item, "region", str(k)))
            tables.append(item.covariates)
        else:
            groups.append(str(k))
            tables.append(item)
    return tuple(groups), tables


def build_design(spec: RegressionSpec, data, T: int | None = None, prefix: str = "", groups=None) -> Design:
    """Assemble covariate arrays and the parameter layout.

    Parameters
    ----------
    spec : RegressionSpec
    data : sequence
        One entry per group: either an object with ``covariates`` (and
        ``region``) attributes, such as :class:`~epirenew.data.RegionSeries`,
        or a mapping from covariate name to a daily array.
    T : int, optional
        Number of modeled days; defaults to the longest covariate series.
        Shorter series are padded with their last value (padded days must be
        masked in any likelihood).
    prefix : str
        Prepended to every block name in the layout.
    """
    gid, tables = _covariate_table(data)
    if groups is not None:
        gid = tuple(groups)
    if len(gid) == 0:
        raise ValueError("at least one group is required")
    names = spec.covariates
    lengths = []
    for g, tab in zip(gid, tables):
        missing = [n for n in names if n not in tab]
        if missing:
            raise ValueError(f"group {g!r} is missing covariate column(s) {missing}")
        for n in names:
            col = np.asarray(tab[n], dtype=float)
            if not np.all(np.isfinite(col)):
                raise ValueError(f"covariate {n!r} has missing or non-finite values in group {g!r}")
            if n in spec.binary and not np.all(np.isin(col, (0.0, 1.0))):
                raise ValueError(f"binary covariate {n!r} has values outside {{0, 1}} in group {g!r}")
            lengths.append(col.size)
    if T is None:
        if lengths:
            T = max(lengths)
        else:
            raise ValueError("T is required when the design has no covariates")
    M = len(gid)

    def column(tab, n):
        col = np.asarray(tab[n], dtype=float)[:T]
        if col.size < T:
            col = np.concatenate([col, np.full(T - col.size, col[-1])])
        return col

    standardization = {}
    for n in spec.standardize:
        allv = np.concatenate([np.asarray(tab[n], float)[:T] for tab in tables])
        sd = allv.std()
        standardization[n] = (float(allv.mean()), float(sd if sd > 0 else 1.0))

    def stacked(cols):
        X = np.zeros((M, T, len(cols)))
        for m, tab in enumerate(tables):
            for k, n in enumerate(cols):
                col = column(tab, n)
                if n in standardization:
                    mu, sd = standardization[n]
                    col = (col - mu) / sd
                X[m, :, k] = col
        return X

    X_fixed = stacked(spec.fixed)
    X_grouped = stacked(spec.grouped)

    layout = ParamLayout()
    P = prefix
    if spec.intercept in ("global", "pooled"):
        layout.add(Block(P + "intercept", (1,)))
    elif spec.intercept == "independent":
        layout.add(Block(P + "group_intercept", (M,)))
    p = len(names)
    if p:
        if isinstance(spec.effect_prior, ShrinkagePrior):
            layout.add(Block(P + "coef_z", (p,)))
            layout.add(Block(P + "hs_local", (p,), "positive"))
            layout.add(Block(P + "hs_global", (1,), "positive"))
            layout.add(Block(P + "hs_slab", (1,), "positive"))
        else:
            layout.add(Block(P + "coef", (p,)))
    q = int(spec.intercept == "pooled") + len(spec.grouped)
    if q:
        layout.add(Block(P + "group_z", (M, q)))
        layout.add(Block(P + "group_scale", (q,), "positive"))
        if q > 1:
            layout.add(Block(P + "group_corr", (q, q), "corr_cholesky"))
    walk_idx, n_inc = None, 0
    rw = spec.random_walk
    if rw is not None:
        walk_idx = walk_index(T, rw.step)
        n_inc = int(walk_idx[-1])
        layout.add(Block(P + "walk_z", (M if rw.per_group else 1, n_inc)))
        layout.add(Block(P + "walk_scale", (1,), "positive"))
    return Design(
        spec=spec,
        groups=gid,
        T=int(T),
        X_fixed=X_fixed,
        X_grouped=X_grouped,
        standardization=standardization,
        layout=layout,
        prefix=prefix,
        walk_idx=walk_idx,
        n_increments=n_inc,
    )


def design_log_prior(design: Design):
    """``theta -> (log prior incl. Jacobian, gradient)`` on the design's own layout."""

    def f(theta):
        params, log_jac = design.layout.unpack(theta)
        return design.log_prior(params) + log_jac

    vg = jax.jit(jax.value_and_grad(f))

    def log_prior(theta):
        v, g = vg(jnp.asarray(theta, dtype=jnp.float64))
        return float(v), np.asarray(g)

    return log_prior
