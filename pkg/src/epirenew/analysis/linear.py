"""
Bayesian linear regression on a regression design, for the second stage
and the lag scan.

The response ``y[m, t]`` is normal around the design's linear predictor
with standard deviation ``sqrt(sigma^2 + floor^2)``. ``sigma`` has a
half-normal prior; the small fixed ``floor`` keeps the posterior proper
when the design reproduces the response exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import jax
import jax.numpy as jnp
import numpy as np

from ..inference.diagnostics import diagnose
from ..inference.draws import PosteriorDraws
from ..inference.sampler import SamplerConfig, sample
from ..params import Block, ParamLayout
from ..regression import Design, half_normal_logpdf

LOG_2PI = math.log(2 * math.pi)


class LinearGaussianModel:
    """Posterior of ``y ~ N(linpred, sigma^2 + floor^2)`` over observed cells.

    Parameters
    ----------
    design : Design
        Built for the same groups and days as ``y``.
    y : array_like, shape (M, T)
    mask : array_like of bool, optional
        Cells entering the likelihood.
    sigma_prior_sd : float
    floor : float, optional
        Defaults to ``1e-3`` times the standard deviation of the observed
        response (or ``1e-6`` when it is constant).
    """

    def __init__(self, design: Design, y, mask=None, sigma_prior_sd: float = 1.0, floor: float | None = None):
        y = np.atleast_2d(np.asarray(y, dtype=float))
        if y.shape != (design.n_groups, design.T):
            raise ValueError(f"response shape {y.shape} does not match the design {(design.n_groups, design.T)}")
        mask = np.ones(y.shape, bool) if mask is None else np.asarray(mask, bool)
        if mask.shape != y.shape or mask.sum() < 2:
            raise ValueError("mask must match y and select at least 2 cells")
        if not np.all(np.isfinite(y[mask])):
            raise ValueError("response has non-finite observed values")
        self.design = design
        self.y = np.where(mask, y, 0.0)
        self.mask = mask
        self.sigma_prior_sd = float(sigma_prior_sd)
        if floor is None:
            s = float(np.std(y[mask]))
            floor = 1e-3 * s if s > 0 else 1e-6
        self.floor = float(floor)
        layout = ParamLayout()
        layout.extend(design.layout)
        layout.add(Block("sigma", (1,), "positive"))
        self.layout = layout
        self._idx = np.nonzero(mask)
        self.logdensity = self._logp
        self._pointwise_jit = jax.jit(self._pointwise)

    @property
    def dim(self) -> int:
        return self.layout.size

    def _pointwise(self, theta):
        params, _ = self.layout.unpack(theta)
        mu = self.design.linpred(params)
        s2 = params["sigma"][0] ** 2 + self.floor**2
        r = (self.y - mu)[self._idx]
        return -0.5 * (LOG_2PI + jnp.log(s2) + r**2 / s2)

    def _logp(self, theta):
        params, log_jac = self.layout.unpack(theta)
        lp = self.design.log_prior(params) + jnp.sum(half_normal_logpdf(params["sigma"], self.sigma_prior_sd))
        return lp + jnp.sum(self._pointwise(theta)) + log_jac

    def _quantities(self, theta):
        params, _ = self.layout.unpack(theta)
        d = self.design
        out = {"beta": d.coefficients(params), "sigma": params["sigma"][0], "mu": d.linpred(params)}
        spec = d.spec
        if spec.grouped:
            off = int(spec.intercept == "pooled")
            pf = len(spec.fixed)
            out["beta_group"] = out["beta"][pf:][None, :] + d.group_deviations(params)[:, off:]
        return out

    def initial_point(self) -> np.ndarray:
        vals = self.design.prior_median()
        vals["sigma"] = np.array([0.6745 * self.sigma_prior_sd])
        return self.layout.pack(vals)

    def batch(self, fn: str, thetas, chunk: int = 1000):
        f = {"quantities": self._quantities, "pointwise": self._pointwise}[fn]
        vf = jax.jit(jax.vmap(f))
        thetas = np.asarray(thetas, dtype=float)
        parts = [jax.device_get(vf(jnp.asarray(thetas[i: i + chunk]))) for i in range(0, len(thetas), chunk)]
        if fn == "pointwise":
            return np.concatenate(parts)
        return {k: np.concatenate([np.asarray(p[k]) for p in parts]) for k in parts[0]}


@dataclass
class LinearFit:
    """Draws of a linear model with derived coefficients."""

    model: LinearGaussianModel
    posterior: PosteriorDraws
    quantities: dict

    @property
    def covariates(self) -> tuple:
        return self.model.design.spec.covariates

    def coefficient(self, name: str) -> np.ndarray:
        """Draws of the shared coefficient of ``name``."""
        return self.quantities["beta"][:, self.covariates.index(name)]

    def fitted_mean(self) -> np.ndarray:
        return self.quantities["mu"].mean(axis=0)


def fit_linear(model: LinearGaussianModel, config: SamplerConfig) -> LinearFit:
    """Sample a :class:`LinearGaussianModel` and attach pointwise log-likelihoods."""
    res = sample(model, model.initial_point(), config)
    post = PosteriorDraws(res.draws, model.layout.names(), stats=res.stats, step_size=res.step_size, config=config)
    post.pointwise = model.batch("pointwise", post.flat)
    post.diagnostics = diagnose(res.draws, post.names, res.stats, res.step_size)
    return LinearFit(model, post, model.batch("quantities", post.flat))
