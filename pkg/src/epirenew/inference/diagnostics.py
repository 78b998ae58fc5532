"""
Convergence diagnostics: rank-normalized split-R-hat and effective sample size.

Draw arrays have shape ``(chains, draws)`` for one scalar quantity, or
``(chains, draws, k)`` for ``k`` quantities at once.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri
from scipy.stats import rankdata


def _split_chains(x: np.ndarray) -> np.ndarray:
    half = x.shape[1] // 2
    return np.concatenate([x[:, :half], x[:, -half:]], axis=0)


def _z_scale(x: np.ndarray) -> np.ndarray:
    r = rankdata(x, method="average").reshape(x.shape)
    return ndtri((r - 0.375) / (x.size + 0.25))


def _rhat(x: np.ndarray) -> float:
    n = x.shape[1]
    between = n * np.var(x.mean(axis=1), ddof=1)
    within = np.mean(np.var(x, axis=1, ddof=1))
    return float(np.sqrt((between / within + n - 1) / n))


def _autocov(x: np.ndarray) -> np.ndarray:
    """Biased autocovariance of each chain via FFT."""
    n = x.shape[1]
    xc = x - x.mean(axis=1, keepdims=True)
    m = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xc, n=m, axis=1)
    return np.fft.irfft(f * np.conj(f), n=m, axis=1)[:, :n] / n


def _ess(x: np.ndarray) -> float:
    """ESS with Geyer's initial positive and monotone sequence estimators."""
    chains, n = x.shape
    acov = _autocov(x)
    mean_var = np.mean(acov[:, 0]) * n / (n - 1.0)
    var_plus = mean_var * (n - 1.0) / n
    if chains > 1:
        var_plus += np.var(x.mean(axis=1), ddof=1)
    rho = np.zeros(n)
    rho_even = 1.0
    rho[0] = rho_even
    rho_odd = 1.0 - (mean_var - np.mean(acov[:, 1])) / var_plus
    rho[1] = rho_odd
    t = 1
    while t < n - 3 and rho_even + rho_odd > 0.0:
        rho_even = 1.0 - (mean_var - np.mean(acov[:, t + 1])) / var_plus
        rho_odd = 1.0 - (mean_var - np.mean(acov[:, t + 2])) / var_plus
        if rho_even + rho_odd >= 0:
            rho[t + 1] = rho_even
            rho[t + 2] = rho_odd
        t += 2
    max_t = t - 2
    if rho_even > 0:
        rho[max_t + 1] = rho_even
    t = 1
    while t <= max_t - 2:
        if rho[t + 1] + rho[t + 2] > rho[t - 1] + rho[t]:
            rho[t + 1] = (rho[t - 1] + rho[t]) / 2.0
            rho[t + 2] = rho[t + 1]
        t += 2
    total = chains * n
    tau = -1.0 + 2.0 * np.sum(rho[: max_t + 1]) + np.sum(rho[max_t + 1: max_t + 2])
    tau = max(tau, 1.0 / np.log10(total))
    return float(total / tau)


def _degenerate(x) -> bool:
    return not np.all(np.isfinite(x)) or np.ptp(x) == 0


def _vectorize(fn, x):
    x = np.asarray(x, dtype=float)
    if x.ndim == 2:
        return fn(x)
    if x.ndim != 3:
        raise ValueError("expected draws shaped (chains, draws) or (chains, draws, k)")
    return np.array([fn(x[..., k]) for k in range(x.shape[2])])


def split_rhat(x) -> float | np.ndarray:
    """Rank-normalized split-R-hat (maximum of the bulk and folded versions).

    Constant draws give ``nan``.
    """

    def one(a):
        if a.shape[1] < 4 or _degenerate(a):
            return np.nan
        bulk = _rhat(_z_scale(_split_chains(a)))
        folded = np.abs(a - np.median(a))
        tail = _rhat(_z_scale(_split_chains(folded))) if not _degenerate(folded) else bulk
        return max(bulk, tail)

    return _vectorize(one, x)


def ess_bulk(x) -> float | np.ndarray:
    """Bulk effective sample size (rank-normalized split chains)."""

    def one(a):
        if a.shape[1] < 4 or _degenerate(a):
            return np.nan
        return _ess(_z_scale(_split_chains(a)))

    return _vectorize(one, x)


def ess_tail(x) -> float | np.ndarray:
    """Minimum ESS of the 5% and 95% quantile indicators."""

    def one(a):
        if a.shape[1] < 4 or _degenerate(a):
            return np.nan
        out = []
        for q in (0.05, 0.95):
            ind = (a <= np.quantile(a, q)).astype(float)
            out.append(np.nan if _degenerate(ind) else _ess(_split_chains(ind)))
        return np.nanmin(out) if not np.all(np.isnan(out)) else np.nan

    return _vectorize(one, x)


@dataclass
class Diagnostics:
    """Per-parameter convergence statistics and sampler health."""

    names: list
    rhat: np.ndarray
    ess_bulk: np.ndarray
    ess_tail: np.ndarray
    n_chains: int
    n_draws: int
    divergences: int = 0
    step_size: np.ndarray = None
    mean_tree_depth: float = float("nan")
    extra: dict = field(default_factory=dict)

    @property
    def max_rhat(self) -> float:
        return float(np.nanmax(self.rhat)) if np.any(np.isfinite(self.rhat)) else float("nan")

    @property
    def min_ess_bulk(self) -> float:
        return float(np.nanmin(self.ess_bulk)) if np.any(np.isfinite(self.ess_bulk)) else float("nan")

    def converged(self, threshold: float = 1.05) -> bool:
        finite = np.isfinite(self.rhat)
        return bool(np.all(self.rhat[finite] < threshold))

    def rows(self):
        for k, name in enumerate(self.names):
            yield name, self.rhat[k], self.ess_bulk[k], self.ess_tail[k]

    def lines(self) -> list[str]:
        out = [
            f"chains: {self.n_chains}, draws per chain: {self.n_draws}",
            f"divergent transitions: {self.divergences}",
            f"max R-hat: {self.max_rhat:.4f}",
            f"min bulk ESS: {self.min_ess_bulk:.1f}",
        ]
        if self.step_size is not None:
            out.append("step sizes: " + ", ".join(f"{e:.4g}" for e in self.step_size))
        if np.isfinite(self.mean_tree_depth):
            out.append(f"mean tree depth: {self.mean_tree_depth:.2f}")
        for k, v in self.extra.items():
            out.append(f"{k}: {v}")
        return out


def diagnose(draws: np.ndarray, names=None, stats: dict | None = None, step_size=None) -> Diagnostics:
    """Diagnostics for ``draws`` shaped ``(chains, draws, dim)``."""
    draws = np.asarray(draws, dtype=float)
    if draws.ndim == 2:
        draws = draws[..., None]
    chains, n, dim = draws.shape
    names = list(names) if names is not None else [f"x[{k}]" for k in range(dim)]
    stats = stats or {}
    div = int(np.sum(stats["diverging"])) if "diverging" in stats else 0
    depth = float(np.mean(stats["tree_depth"])) if "tree_depth" in stats else float("nan")
    return Diagnostics(
        names=names,
        rhat=np.atleast_1d(split_rhat(draws)),
        ess_bulk=np.atleast_1d(ess_bulk(draws)),
        ess_tail=np.atleast_1d(ess_tail(draws)),
        n_chains=chains,
        n_draws=n,
        divergences=div,
        step_size=None if step_size is None else np.asarray(step_size),
        mean_tree_depth=depth,
    )
