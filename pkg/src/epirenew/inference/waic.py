"""
Widely applicable information criterion on the expected log predictive
density scale.

For a pointwise log-likelihood matrix ``ll`` of shape ``(draws, points)``

    elpd_i = log mean_s exp(ll[s, i]) - var_s(ll[s, i])

with the sample variance (``ddof=1``). ``elpd`` is the sum over points and its
standard error is ``sqrt(n * var_i(elpd_i))``. Higher ``elpd`` is better;
``waic = -2 * elpd`` is reported alongside for the deviance convention.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp


@dataclass(frozen=True)
class WAIC:
    elpd: float
    se: float
    p_waic: float
    pointwise: np.ndarray

    @property
    def waic(self) -> float:
        return -2.0 * self.elpd

    @property
    def waic_se(self) -> float:
        return 2.0 * self.se

    @property
    def n_points(self) -> int:
        return self.pointwise.size


def waic(ll) -> WAIC:
    """WAIC from a ``(draws, points)`` log-likelihood matrix."""
    ll = np.asarray(ll, dtype=float)
    if ll.ndim != 2:
        raise ValueError("log-likelihood matrix must be 2-D (draws, points)")
    S, n = ll.shape
    if S < 2 or n < 2:
        raise ValueError("WAIC needs at least 2 draws and 2 points")
    if not np.all(np.isfinite(ll)):
        raise ValueError("log-likelihood matrix has non-finite entries")
    lppd = logsumexp(ll, axis=0) - math.log(S)
    p = np.var(ll, axis=0, ddof=1)
    if np.any(p > 0.4):
        warnings.warn(
            f"{int(np.sum(p > 0.4))} points have a WAIC penalty above 0.4; the estimate may be unreliable",
            stacklevel=2,
        )
    elpd_i = lppd - p
    return WAIC(
        elpd=float(elpd_i.sum()),
        se=float(math.sqrt(n * np.var(elpd_i, ddof=1))),
        p_waic=float(p.sum()),
        pointwise=elpd_i,
    )


def elpd_difference(a: WAIC, b: WAIC):
    """``(elpd_a - elpd_b, se)`` paired by point."""
    if a.n_points != b.n_points:
        raise ValueError("models were evaluated on different numbers of points")
    d = a.pointwise - b.pointwise
    return float(d.sum()), float(math.sqrt(d.size * np.var(d, ddof=1)))


@dataclass(frozen=True)
class CompareRow:
    model: str
    elpd: float
    se: float
    p_waic: float
    elpd_diff: float
    se_diff: float


def compare(results: dict, baseline: str | None = None) -> list[CompareRow]:
    """Table of models ordered by ``elpd``.

    ``elpd_diff`` is each model's ``elpd`` minus the baseline's (the best
    model when ``baseline`` is omitted), so non-baseline rows are
    typically negative.
    """
    if not results:
        raise ValueError("no models to compare")
    order = sorted(results, key=lambda k: results[k].elpd, reverse=True)
    base = baseline if baseline is not None else order[0]
    rows = []
    for name in order:
        diff, se = elpd_difference(results[name], results[base])
        rows.append(CompareRow(name, results[name].elpd, results[name].se, results[name].p_waic, diff, se))
    return rows
