"""
Markov chain Monte Carlo samplers.

``nuts`` is a dynamic Hamiltonian Monte Carlo sampler: trajectories double
in a random direction until a U-turn or a divergence, and the next state is
drawn from the trajectory with multinomial weights (biased progressive
sampling between subtrees, uniform progressive sampling inside them). Each
transition is a single jitted JAX call; subtrees are built iteratively with
momentum checkpoints for the U-turn checks rather than by recursion.

Warmup adapts the step size by dual averaging and the inverse mass matrix
over doubling windows (75 iteration initial buffer, first window 25, 50
iteration terminal buffer; scaled down for short warmups). The inverse
mass matrix is diagonal.

``metropolis`` is an adaptive random-walk Metropolis sampler for debugging.

Targets are JAX-traceable functions ``theta -> log density``. Chains draw
from independent streams derived from one seed, so runs are reproducible.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import jax
import jax.numpy as jnp
import numpy as np

log = logging.getLogger(__name__)

MAX_ENERGY_ERROR = 1000.0


class DivergenceWarning(UserWarning):
    """More than 10% of post-warmup transitions diverged."""


@dataclass(frozen=True)
class SamplerConfig:
    n_chains: int = 4
    warmup: int = 1000
    draws: int = 1000
    seed: int = 0
    algorithm: str = "nuts"
    target_accept: float = 0.8
    max_depth: int = 10
    init_jitter: float = 0.1

    def __post_init__(self):
        if self.algorithm not in ("nuts", "metropolis"):
            raise ValueError("algorithm must be 'nuts' or 'metropolis'")
        if self.n_chains < 1 or self.draws < 1 or self.warmup < 0:
            raise ValueError("chains and draws must be positive")
        if not 0 < self.target_accept < 1:
            raise ValueError("target_accept must lie in (0, 1)")
        if not 1 <= self.max_depth <= 15:
            raise ValueError("max_depth must lie in [1, 15]")


@dataclass
class ChainSamples:
    """Raw output of a multi-chain run (unconstrained coordinates)."""

    draws: np.ndarray  # (chains, draws, dim)
    stats: dict = field(default_factory=dict)  # name -> (chains, draws)
    step_size: np.ndarray = None
    inv_mass: np.ndarray = None
    config: SamplerConfig = None

    @property
    def n_chains(self) -> int:
        return self.draws.shape[0]

    @property
    def divergence_rate(self) -> float:
        div = self.stats.get("diverging")
        return float(np.mean(div)) if div is not None else 0.0


# --- adaptation -----------------------------------------------------------


class DualAveraging:
    def __init__(self, eps0, target, gamma=0.05, t0=10.0, kappa=0.75):
        self.target, self.gamma, self.t0, self.kappa = target, gamma, t0, kappa
        self.restart(eps0)

    def restart(self, eps0):
        self.mu = math.log(10 * eps0)
        self.h_bar = 0.0
        self.x_bar = 0.0
        self.m = 0

    def update(self, accept_stat) -> float:
        self.m += 1
        m = self.m
        w = 1.0 / (m + self.t0)
        self.h_bar = (1 - w) * self.h_bar + w * (self.target - accept_stat)
        x = self.mu - math.sqrt(m) / self.gamma * self.h_bar
        eta = m ** (-self.kappa)
        self.x_bar = eta * x + (1 - eta) * self.x_bar
        return math.exp(x)

    @property
    def final(self) -> float:
        return math.exp(self.x_bar)


def adaptation_windows(warmup: int):
    """Initial buffer length and the ends of the mass-matrix windows.

    No windows are used when warmup is below 20 iterations.
    """
    if warmup < 20:
        return warmup, []
    init_buf, term_buf, base = 75, 50, 25
    if init_buf + term_buf + base > warmup:
        init_buf = int(0.15 * warmup)
        term_buf = int(0.1 * warmup)
        base = warmup - init_buf - term_buf
    ends = []
    start, size = init_buf, base
    last = warmup - term_buf
    while start < last:
        end = start + size
        if end + 2 * size > last:
            end = last
        ends.append(end)
        start, size = end, size * 2
    return init_buf, ends


class Welford:
    """Running mean and variance; the estimate is shrunk toward ``1e-3`` like Stan."""

    def __init__(self, dim):
        self.n = 0
        self.mean = np.zeros(dim)
        self.m2 = np.zeros(dim)

    def add(self, x):
        self.n += 1
        d = x - self.mean
        self.mean += d / self.n
        self.m2 += d * (x - self.mean)

    def regularized(self):
        n = self.n
        var = self.m2 / (n - 1)
        return (n / (n + 5.0)) * var + 1e-3 * (5.0 / (n + 5.0))


# --- NUTS kernel ----------------------------------------------------------


class _Point(NamedTuple):
    theta: jax.Array
    p: jax.Array
    grad: jax.Array


class _Proposal(NamedTuple):
    theta: jax.Array
    lp: jax.Array
    grad: jax.Array


def _select(pred, a, b):
    return jax.tree_util.tree_map(lambda x, y: jnp.where(pred, x, y), a, b)


def _velocity(inv_mass, p):
    return inv_mass * p


def _draw_momentum(key, inv_mass, shape):
    return jax.random.normal(key, shape) / jnp.sqrt(inv_mass)


def _is_turning(inv_mass, p_left, p_right, p_sum):
    rho = p_sum - 0.5 * (p_left + p_right)
    return (jnp.dot(_velocity(inv_mass, p_left), rho) <= 0) | (jnp.dot(_velocity(inv_mass, p_right), rho) <= 0)


def _ckpt_idxs(n):
    """Checkpoint range to test when leaf ``n`` (0-based) of a subtree is added."""
    _, idx_max = jax.lax.while_loop(
        lambda c: c[0] > 0, lambda c: (c[0] >> 1, c[1] + (c[0] & 1)), (n >> 1, 0)
    )
    _, n_sub = jax.lax.while_loop(lambda c: (c[0] & 1) != 0, lambda c: (c[0] >> 1, c[1] + 1), (n, 0))
    return idx_max - n_sub + 1, idx_max


def make_nuts_kernel(logdensity, max_depth: int = 10):
    """Build a jitted NUTS transition for a JAX-traceable log density.

    Returns ``(kernel, energy_change, value_and_grad)``. ``kernel(key,
    theta, lp, grad, eps, inv_mass)`` gives ``(theta, lp, grad, info)``
    where ``info`` holds ``accept_stat``, ``n_leapfrog``, ``tree_depth``,
    ``diverging`` and ``energy``.
    """
    vg = jax.value_and_grad(logdensity)

    def safe_vg(theta):
        lp, g = vg(theta)
        ok = jnp.isfinite(lp) & jnp.all(jnp.isfinite(g))
        return jnp.where(ok, lp, -jnp.inf), jnp.where(ok, g, 0.0)

    def kinetic(p, inv_mass):
        return 0.5 * jnp.dot(p, _velocity(inv_mass, p))

    def leapfrog(pt, eps, inv_mass):
        p = pt.p + 0.5 * eps * pt.grad
        theta = pt.theta + eps * _velocity(inv_mass, p)
        lp, g = safe_vg(theta)
        p = p + 0.5 * eps * g
        return _Point(theta, p, g), lp

    def build_subtree(key, start, eps, depth, inv_mass, H0):
        dim = start.theta.shape[0]
        n_leaves = jnp.left_shift(1, depth)
        init = dict(
            n=jnp.asarray(0),
            cur=start,
            prop=_Proposal(start.theta, jnp.asarray(-jnp.inf), start.grad),
            log_w=jnp.asarray(-jnp.inf),
            p_sum=jnp.zeros(dim),
            ck_p=jnp.zeros((max_depth, dim)),
            ck_sum=jnp.zeros((max_depth, dim)),
            turning=jnp.asarray(False),
            diverging=jnp.asarray(False),
            sum_acc=jnp.asarray(0.0),
            key=key,
        )

        def cond(s):
            return (s["n"] < n_leaves) & ~s["turning"] & ~s["diverging"]

        def body(s):
            key, sub = jax.random.split(s["key"])
            pt, lp = leapfrog(s["cur"], eps, inv_mass)
            H = -lp + kinetic(pt.p, inv_mass)
            delta = jnp.where(jnp.isnan(H), jnp.inf, H - H0)
            log_w_leaf = -delta
            log_w = jnp.logaddexp(s["log_w"], log_w_leaf)
            take = jnp.log(jax.random.uniform(sub)) < log_w_leaf - log_w
            prop = _select(take, _Proposal(pt.theta, lp, pt.grad), s["prop"])
            p_sum = s["p_sum"] + pt.p
            n = s["n"]
            idx_min, idx_max = _ckpt_idxs(n)
            even = (n & 1) == 0
            ck_p = jnp.where(even, s["ck_p"].at[idx_max].set(pt.p), s["ck_p"])
            ck_sum = jnp.where(even, s["ck_sum"].at[idx_max].set(p_sum), s["ck_sum"])

            def check(c):
                i, _ = c
                sub_sum = p_sum - ck_sum[i] + ck_p[i]
                return i - 1, _is_turning(inv_mass, ck_p[i], pt.p, sub_sum)

            _, turning = jax.lax.while_loop(
                lambda c: (c[0] >= idx_min) & ~c[1], check, (idx_max, jnp.asarray(False))
            )
            return dict(
                n=n + 1,
                cur=pt,
                prop=prop,
                log_w=log_w,
                p_sum=p_sum,
                ck_p=ck_p,
                ck_sum=ck_sum,
                turning=turning & ~even,
                diverging=delta > MAX_ENERGY_ERROR,
                sum_acc=s["sum_acc"] + jnp.where(jnp.isfinite(delta), jnp.minimum(1.0, jnp.exp(-delta)), 0.0),
                key=key,
            )

        return jax.lax.while_loop(cond, body, init)

    def kernel(key, theta, lp, grad, eps, inv_mass):
        key, kp = jax.random.split(key)
        p0 = _draw_momentum(kp, inv_mass, theta.shape)
        H0 = -lp + kinetic(p0, inv_mass)
        start = _Point(theta, p0, grad)
        init = dict(
            left=start,
            right=start,
            prop=_Proposal(theta, lp, grad),
            log_w=jnp.asarray(0.0),
            p_sum=p0,
            depth=jnp.asarray(0),
            turning=jnp.asarray(False),
            diverging=jnp.asarray(False),
            sum_acc=jnp.asarray(0.0),
            n_leap=jnp.asarray(0),
            key=key,
        )

        def cond(s):
            return (s["depth"] < max_depth) & ~s["turning"] & ~s["diverging"]

        def body(s):
            key, kd, ks, ka = jax.random.split(s["key"], 4)
            right = jax.random.bernoulli(kd)
            start = _select(right, s["right"], s["left"])
            step = jnp.where(right, eps, -eps)
            sub = build_subtree(ks, start, step, s["depth"], inv_mass, H0)
            ok = ~sub["turning"] & ~sub["diverging"]
            take = ok & (jnp.log(jax.random.uniform(ka)) < sub["log_w"] - s["log_w"])
            prop = _select(take, sub["prop"], s["prop"])
            left = _select(ok & ~right, sub["cur"], s["left"])
            rightpt = _select(ok & right, sub["cur"], s["right"])
            p_sum = jnp.where(ok, s["p_sum"] + sub["p_sum"], s["p_sum"])
            turning = sub["turning"] | (ok & _is_turning(inv_mass, left.p, rightpt.p, p_sum))
            return dict(
                left=left,
                right=rightpt,
                prop=prop,
                log_w=jnp.where(ok, jnp.logaddexp(s["log_w"], sub["log_w"]), s["log_w"]),
                p_sum=p_sum,
                depth=s["depth"] + 1,
                turning=turning,
                diverging=sub["diverging"],
                sum_acc=s["sum_acc"] + sub["sum_acc"],
                n_leap=s["n_leap"] + sub["n"],
                key=key,
            )

        s = jax.lax.while_loop(cond, body, init)
        info = dict(
            accept_stat=s["sum_acc"] / jnp.maximum(s["n_leap"], 1),
            n_leapfrog=s["n_leap"],
            tree_depth=s["depth"],
            diverging=s["diverging"],
            energy=H0,
        )
        return s["prop"].theta, s["prop"].lp, s["prop"].grad, info

    def energy_change(key, theta, lp, grad, eps, inv_mass):
        p0 = _draw_momentum(key, inv_mass, theta.shape)
        pt, lp1 = leapfrog(_Point(theta, p0, grad), eps, inv_mass)
        dH = (-lp1 + kinetic(pt.p, inv_mass)) - (-lp + kinetic(p0, inv_mass))
        return jnp.where(jnp.isnan(dH), jnp.inf, dH)

    return jax.jit(kernel), jax.jit(energy_change), jax.jit(safe_vg)


def _find_step_size(energy_change, key, theta, lp, grad, inv_mass) -> float:
    """Double or halve from 1 until one leapfrog step crosses acceptance 0.8."""
    eps = 1.0
    target = math.log(0.8)
    lr = -float(energy_change(key, theta, lp, grad, eps, inv_mass))
    up = lr > target
    for _ in range(60):
        eps = eps * 2.0 if up else eps * 0.5
        lr = -float(energy_change(key, theta, lp, grad, eps, inv_mass))
        if (lr > target) != up:
            break
    return eps


def _chain_key(ss: np.random.SeedSequence):
    a, b = ss.generate_state(2, dtype=np.uint32)
    return jax.random.PRNGKey((int(a) << 32 | int(b)) & 0x7FFFFFFFFFFFFFFF)


def _run_nuts_chain(funcs, theta0, cfg: SamplerConfig, ss):
    kernel, energy_change, vg = funcs
    dim = theta0.size
    key = _chain_key(ss)
    theta = jnp.asarray(theta0)
    lp, grad = vg(theta)
    if not np.isfinite(float(lp)):
        raise ValueError("log density is not finite at the initial point")
    inv_mass = jnp.ones(dim)
    key, k = jax.random.split(key)
    eps = _find_step_size(energy_change, k, theta, lp, grad, inv_mass)
    da = DualAveraging(eps, cfg.target_accept)
    init_buf, ends = adaptation_windows(cfg.warmup)
    welford = Welford(dim)
    keys = ("accept_stat", "n_leapfrog", "tree_depth", "diverging", "energy", "lp")
    out = np.empty((cfg.draws, dim))
    stats = {k: np.empty(cfg.draws) for k in keys}
    for it in range(cfg.warmup + cfg.draws):
        key, k = jax.random.split(key)
        theta, lp, grad, info = kernel(k, theta, lp, grad, eps, inv_mass)
        if it < cfg.warmup:
            eps = da.update(float(info["accept_stat"]))
            if ends and init_buf <= it < ends[-1]:
                welford.add(np.asarray(theta))
                if it + 1 in ends:
                    inv_mass = jnp.asarray(welford.regularized())
                    welford = Welford(dim)
                    key, k = jax.random.split(key)
                    eps = _find_step_size(energy_change, k, theta, lp, grad, inv_mass)
                    da.restart(eps)
            if it + 1 == cfg.warmup:
                eps = da.final
        else:
            j = it - cfg.warmup
            out[j] = np.asarray(theta)
            info = jax.device_get(info)
            for name in keys[:-1]:
                stats[name][j] = info[name]
            stats["lp"][j] = float(lp)
    stats["diverging"] = stats["diverging"].astype(bool)
    return out, stats, eps, np.asarray(inv_mass)


# --- random-walk Metropolis ---------------------------------------------


def _run_metropolis_chain(logp, theta0, cfg: SamplerConfig, ss):
    rng = np.random.Generator(np.random.PCG64(ss))
    dim = theta0.size
    theta = theta0.copy()
    lp = float(logp(theta))
    if not math.isfinite(lp):
        raise ValueError("log density is not finite at the initial point")
    log_scale = math.log(2.38 / math.sqrt(dim))
    chol = np.eye(dim) * 0.1
    welford = Welford(dim)
    cov_sum = np.zeros((dim, dim))
    target = 0.234 if dim > 1 else 0.44
    out = np.empty((cfg.draws, dim))
    acc = np.empty(cfg.draws)
    lps = np.empty(cfg.draws)
    for it in range(cfg.warmup + cfg.draws):
        prop = theta + math.exp(log_scale) * (chol @ rng.standard_normal(dim))
        lp_prop = float(logp(prop))
        if not math.isfinite(lp_prop):
            lp_prop = -math.inf
        a = math.exp(min(0.0, lp_prop - lp)) if lp_prop > -math.inf else 0.0
        if rng.random() < a:
            theta, lp = prop, lp_prop
        if it < cfg.warmup:
            log_scale += (a - target) / (it + 1) ** 0.6
            mean_old = welford.mean.copy()
            welford.add(theta)
            cov_sum += np.outer(theta - mean_old, theta - welford.mean)
            if welford.n > 2 * dim + 10 and (it + 1) % 50 == 0:
                cov = cov_sum / (welford.n - 1) + 1e-8 * np.eye(dim)
                try:
                    chol = np.linalg.cholesky(cov)
                except np.linalg.LinAlgError:
                    pass
        else:
            j = it - cfg.warmup
            out[j] = theta
            acc[j] = a
            lps[j] = lp
    stats = {"accept_stat": acc, "lp": lps, "diverging": np.zeros(cfg.draws, bool)}
    return out, stats, math.exp(log_scale), np.diag(chol @ chol.T)


def _logdensity_of(target):
    return getattr(target, "logdensity", target)


def sample(target, init, config: SamplerConfig | None = None) -> ChainSamples:
    """Run ``config.n_chains`` chains and stack their post-warmup draws.

    Parameters
    ----------
    target : callable or model
        JAX-traceable ``theta -> log density``, or an object exposing such a
        function as ``logdensity``.
    init : array_like or callable
        Shared initial point, jittered per chain uniformly within
        ``init_jitter``; or ``rng -> theta``.
    config : SamplerConfig
    """
    cfg = config or SamplerConfig()
    logdensity = _logdensity_of(target)
    streams = np.random.SeedSequence(cfg.seed).spawn(cfg.n_chains)
    if cfg.algorithm == "nuts":
        funcs = make_nuts_kernel(logdensity, cfg.max_depth)
        runner = _run_nuts_chain
    else:
        jitted = jax.jit(logdensity)
        funcs = lambda th: float(jitted(jnp.asarray(th)))  # noqa: E731
        runner = _run_metropolis_chain
    draws, step, minv = [], [], []
    stats: dict = {}
    for c, ss in enumerate(streams):
        init_ss, run_ss = ss.spawn(2)
        rng = np.random.Generator(np.random.PCG64(init_ss))
        if callable(init):
            theta0 = np.asarray(init(rng), dtype=float)
        else:
            theta0 = np.asarray(init, dtype=float).copy()
            theta0 = theta0 + rng.uniform(-cfg.init_jitter, cfg.init_jitter, theta0.shape)
        out, st, eps, im = runner(funcs, theta0, cfg, run_ss)
        draws.append(out)
        step.append(eps)
        minv.append(im)
        for k, v in st.items():
            stats.setdefault(k, []).append(v)
        log.debug("chain %d done: step size %.3g", c, eps)
    res = ChainSamples(
        draws=np.stack(draws),
        stats={k: np.stack(v) for k, v in stats.items()},
        step_size=np.asarray(step),
        inv_mass=np.stack(minv),
        config=cfg,
    )
    if not np.all(np.isfinite(res.draws)):
        raise FloatingPointError("non-finite draws produced")
    if res.divergence_rate > 0.10:
        warnings.warn(
            f"{res.divergence_rate:.1%} of post-warmup transitions diverged",
            DivergenceWarning,
            stacklevel=2,
        )
    return res
