"""
Lag scan of a covariate-on-covariate regression.

For each lag ``l`` the target at day ``t`` is regressed on the covariates
at day ``t - l`` (positive lags look back), without intercept or pooling,
under a shrinkage prior on the coefficients. Fit quality is the mean
absolute error of the posterior-mean fitted values.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from ..inference.sampler import SamplerConfig
from ..inference.summary import summarize
from ..regression import RegressionSpec, ShrinkagePrior, build_design
from .linear import LinearGaussianModel, fit_linear


class LagSkipped(UserWarning):
    """A lag shifts the covariates off the data range."""


@dataclass(frozen=True)
class LagFit:
    lag: int
    mae: float
    n_points: int
    coefficients: dict

    def covers_zero(self, name: str) -> bool:
        return bool(self.coefficients[name].covers(0.0))


@dataclass
class LagScanResult:
    fits: list
    skipped: list = field(default_factory=list)

    @property
    def best(self) -> LagFit:
        return min(self.fits, key=lambda f: f.mae)

    @property
    def best_lag(self) -> int:
        return self.best.lag

    def rows(self):
        """``(lag, mae, covariate, mean, q2.5, q97.5)`` per lag and covariate."""
        for f in self.fits:
            for name, s in f.coefficients.items():
                yield f.lag, f.mae, name, float(s.mean), float(s.q2_5), float(s.q97_5)


def _as_2d(x):
    x = np.asarray(x, dtype=float)
    return x[None, :] if x.ndim == 1 else x


def lag_scan_regression(target, covariates: dict, lags, prior: ShrinkagePrior | None = None,
                        config: SamplerConfig | None = None, min_points: int | None = None) -> LagScanResult:
    """Fit ``target[t] ~ covariates[t - lag]`` for every lag in ``lags``.

    Parameters
    ----------
    target : array_like, shape (T,) or (M, T)
        Response series, one row per region.
    covariates : dict
        Name to array shaped like ``target``.
    lags : iterable of int
    prior : ShrinkagePrior, optional
    config : SamplerConfig, optional
    min_points : int, optional
        Lags leaving fewer usable days per region are skipped with a
        :class:`LagSkipped` warning. Defaults to ``number of covariates + 2``.
    """
    y = _as_2d(target)
    M, T = y.shape
    X = {k: _as_2d(v) for k, v in covariates.items()}
    if not X:
        raise ValueError("at least one covariate is required")
    for k, v in X.items():
        if v.shape != y.shape:
            raise ValueError(f"covariate {k!r} has shape {v.shape}, expected {y.shape}")
    names = tuple(X)
    prior = prior or ShrinkagePrior()
    config = config or SamplerConfig(n_chains=2, warmup=500, draws=500)
    min_points = len(names) + 2 if min_points is None else min_points
    spec = RegressionSpec(fixed=names, intercept="none", effect_prior=prior)
    fits, skipped = [], []
    for lag in lags:
        lag = int(lag)
        lo, hi = max(0, lag), min(T, T + lag)  # days t with 0 <= t - lag < T
        n = hi - lo
        if n < min_points:
            warnings.warn(f"lag {lag} leaves {max(n, 0)} usable days; skipped", LagSkipped, stacklevel=2)
            skipped.append(lag)
            continue
        tables = [{k: X[k][m, lo - lag: hi - lag] for k in names} for m in range(M)]
        design = build_design(spec, tables, T=n)
        model = LinearGaussianModel(design, y[:, lo:hi])
        res = fit_linear(model, config)
        mae = float(np.mean(np.abs(y[:, lo:hi] - res.fitted_mean())))
        coefs = {k: summarize(res.coefficient(k)) for k in names}
        fits.append(LagFit(lag, mae, M * n, coefs))
    if not fits:
        raise ValueError("every lag was skipped")
    return LagScanResult(fits, skipped)

