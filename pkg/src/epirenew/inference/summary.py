"""Posterior summaries, plot-ready series and scenario forecasts."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

QUANTILES = (2.5, 50.0, 97.5)


@dataclass(frozen=True)
class QuantitySummary:
    """Posterior mean, sd and 2.5/50/97.5 percentiles, elementwise."""

    mean: np.ndarray
    sd: np.ndarray
    q2_5: np.ndarray
    q50: np.ndarray
    q97_5: np.ndarray

    def covers(self, value) -> np.ndarray:
        """Whether ``value`` lies inside the 95% interval."""
        return (self.q2_5 <= value) & (value <= self.q97_5)


def summarize(values, transform=None) -> QuantitySummary:
    """Summarize draws along axis 0, after an optional elementwise transform.

    Examples
    --------
    >>> s = summarize(np.arange(1, 101))
    >>> float(s.q50)
    50.5
    """
    x = np.asarray(values, dtype=float)
    if x.shape[0] == 0:
        raise ValueError("no draws to summarize")
    if transform is not None:
        x = transform(x)
    q = np.percentile(x, QUANTILES, axis=0)
    sd = x.std(axis=0, ddof=1) if x.shape[0] > 1 else np.zeros(x.shape[1:])
    return QuantitySummary(x.mean(axis=0), sd, q[0], q[1], q[2])


def summarize_quantities(quantities: dict) -> dict:
    """Summaries of every entry of ``EpidemicModel.batch("quantities", ...)``."""
    return {k: summarize(v) for k, v in quantities.items()}


def series_rows(summaries: dict, region_ids, names=None):
    """Rows ``quantity,t,region,q2.5,q50,q97.5`` for region-by-day quantities."""
    rows = []
    for name in names or sorted(summaries):
        s = summaries[name]
        if np.ndim(s.q50) != 2:
            continue
        M, T = s.q50.shape
        for m in range(M):
            for t in range(T):
                rows.append((name, t + 1, region_ids[m], s.q2_5[m, t], s.q50[m, t], s.q97_5[m, t]))
    return rows


def write_series(rows, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["quantity", "t", "region", "q2.5", "q50", "q97.5"])
        for name, t, region, lo, mid, hi in rows:
            w.writerow([name, t, region, repr(float(lo)), repr(float(mid)), repr(float(hi))])


def _scenario_linpred(model, quantities, scenario, horizon):
    """Future linear predictor per draw when covariates move to ``scenario``."""
    design = model.transmission
    spec = design.spec
    link = spec.link
    R_last = quantities["R"][:, :, -1]
    x_last = np.asarray(link(R_last))
    S, M = R_last.shape
    x = np.repeat(x_last[:, :, None], horizon, axis=2)
    if not scenario:
        return x
    pf = len(spec.fixed)
    beta = quantities["R.beta"]
    for name, value in scenario.items():
        if name not in spec.covariates:
            raise KeyError(f"unknown covariate {name!r}")
        v = np.broadcast_to(np.asarray(value, dtype=float), (M, horizon))
        if name in design.standardization:
            mu, sd = design.standardization[name]
            v = (v - mu) / sd
        if name in spec.fixed:
            k = spec.fixed.index(name)
            delta = v - design.X_fixed[:, -1, k][:, None]
            x = x + beta[:, k][:, None, None] * delta[None]
        else:
            k = spec.grouped.index(name)
            delta = v - design.X_grouped[:, -1, k][:, None]
            coef = quantities["R.beta_group"][:, :, k] if "R.beta_group" in quantities else beta[:, pf + k][:, None]
            x = x + coef[:, :, None] * delta[None]
    return x


def forecast(model, posterior, horizon: int, scenario: dict | None = None, max_draws: int | None = None) -> dict:
    """Project expected infections and observations beyond the fit window.

    Each posterior draw's reproduction number is held at its last fitted
    value, or moved by the fitted effects to the covariate values in
    ``scenario`` (raw units; scalars or arrays over the horizon). The random
    walk stays at its final level and ascertainment at its last value. The
    projection is the expected renewal recursion seeded with the draw's
    fitted infection history, so it is a scenario rather than a prediction.

    Returns a dict of arrays shaped ``(draws, regions, horizon)``.
    """
    if horizon < 1:
        raise ValueError("horizon must be positive")
    # ndarrays have a ``flat`` attribute too, so test for the array first
    thetas = np.asarray(posterior, dtype=float) if isinstance(posterior, (np.ndarray, list)) else posterior.flat
    if max_draws is not None and thetas.shape[0] > max_draws:
        idx = np.linspace(0, thetas.shape[0] - 1, max_draws).round().astype(int)
        thetas = thetas[idx]
    q = model.batch("quantities", thetas)
    R_future = np.asarray(model.transmission.spec.link.inverse(_scenario_linpred(model, q, scenario, horizon)))
    full = np.concatenate([q["seeds"], q["infections"], np.zeros(R_future.shape)], axis=2)
    start = full.shape[2] - horizon
    gw = model.g.full()
    K = gw.size - 1
    S0 = model.S0[None, :] if model.use_population else None
    for j in range(horizon):
        pos = start + j
        lo = max(0, pos - K)
        L = np.einsum("smk,k->sm", full[:, :, lo:pos][:, :, ::-1], gw[1: pos - lo + 1])
        if S0 is None:
            i = R_future[:, :, j] * L
        else:
            cum = full[:, :, :pos].sum(axis=2)
            i = np.maximum(S0 - cum, 0.0) * -np.expm1(-R_future[:, :, j] * L / S0)
        full[:, :, pos] = i
    out = {"R": R_future, "infections": full[:, :, start:]}
    for o in model.observations:
        if o.family == "seroprevalence":
            continue
        w = o.delay.full()
        conv = np.zeros(R_future.shape)
        for j in range(horizon):
            pos = start + j
            lo = max(0, pos - (w.size - 1))
            conv[:, :, j] = np.einsum("smk,k->sm", full[:, :, lo: pos + 1][:, :, ::-1], w[: pos - lo + 1])
        alpha = q[f"alpha.{o.name}"][:, :, -1:]
        out[f"expected.{o.name}"] = alpha * conv
    return out
