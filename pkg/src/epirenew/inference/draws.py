"""Posterior draws container, persistence, and the model-fitting entry point."""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .diagnostics import Diagnostics, diagnose, split_rhat
from .sampler import SamplerConfig, sample
from .waic import WAIC, waic

log = logging.getLogger(__name__)


@dataclass
class PosteriorDraws:
    """Post-warmup draws of the unconstrained parameter vector.

    Attributes
    ----------
    draws : ndarray, shape (chains, draws, dim)
    names : list of str
        One name per coordinate of the parameter vector.
    pointwise : ndarray, shape (chains * draws, points), optional
        Pointwise log-likelihood of every observed data point, rows in
        chain-major order.
    stats : dict
        Per-transition sampler statistics, each shaped ``(chains, draws)``.
    """

    draws: np.ndarray
    names: list
    pointwise: np.ndarray | None = None
    stats: dict = field(default_factory=dict)
    step_size: np.ndarray | None = None
    config: SamplerConfig | None = None
    diagnostics: Diagnostics | None = None

    def __post_init__(self):
        self.draws = np.asarray(self.draws, dtype=float)
        if self.draws.ndim != 3:
            raise ValueError("draws must be shaped (chains, draws, dim)")
        if len(self.names) != self.draws.shape[2]:
            raise ValueError("one name per parameter coordinate is required")
        if np.any(np.isnan(self.draws)):
            raise ValueError("draws contain NaN")

    @property
    def n_chains(self) -> int:
        return self.draws.shape[0]

    @property
    def n_draws(self) -> int:
        return self.draws.shape[1]

    @property
    def flat(self) -> np.ndarray:
        """All draws stacked chain by chain, shape ``(chains * draws, dim)``."""
        return self.draws.reshape(-1, self.draws.shape[2])

    @property
    def chain_labels(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_chains), self.n_draws)

    def column(self, name: str) -> np.ndarray:
        """Draws of one named coordinate, shape ``(chains, draws)``."""
        return self.draws[:, :, self.names.index(name)]

    def waic(self) -> WAIC:
        if self.pointwise is None:
            raise ValueError("no pointwise log-likelihood stored")
        return waic(self.pointwise)

    def to_csv(self, path=None) -> str:
        """Long-format ``chain,draw,param,value`` text; values round-trip exactly."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["chain", "draw", "param", "value"])
        for c in range(self.n_chains):
            for d in range(self.n_draws):
                row = self.draws[c, d]
                for name, v in zip(self.names, row):
                    w.writerow([c, d, name, repr(float(v))])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, source) -> "PosteriorDraws":
        """Read draws written by :meth:`to_csv` (a path or the text itself)."""
        if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source):
            text = Path(source).read_text()
        else:
            text = source
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or rows[0] != ["chain", "draw", "param", "value"]:
            raise ValueError("expected header chain,draw,param,value")
        names: list = []
        seen = set()
        data = {}
        for c, d, p, v in rows[1:]:
            if p not in seen:
                seen.add(p)
                names.append(p)
            data[(int(c), int(d), p)] = float(v)
        chains = 1 + max(k[0] for k in data)
        n = 1 + max(k[1] for k in data)
        arr = np.empty((chains, n, len(names)))
        for (c, d, p), v in data.items():
            arr[c, d, names.index(p)] = v
        return cls(arr, names)


def seed_r0_correlation(model, posterior: PosteriorDraws, quantities: dict | None = None) -> dict:
    """Posterior correlation between log seed size and log ``R_1`` per region."""
    if quantities is None:
        quantities = model.batch("quantities", posterior.flat)
    seeds = np.log(quantities["seeds"].mean(axis=2))
    logR = np.log(quantities["R"][:, :, 0])
    out = {}
    for m, region in enumerate(model.region_ids):
        a, b = seeds[:, m], logR[:, m]
        out[region] = float(np.corrcoef(a, b)[0, 1]) if a.std() > 0 and b.std() > 0 else float("nan")
    return out


def fit(model, config: SamplerConfig | None = None, init=None) -> PosteriorDraws:
    """Sample the posterior of an :class:`~epirenew.inference.model.EpidemicModel`.

    Returns draws with pointwise log-likelihoods and diagnostics (including
    the seed versus ``R_1`` correlation per region).
    """
    cfg = config or SamplerConfig()
    start = model.initial_point() if init is None else init
    res = sample(model, start, cfg)
    post = PosteriorDraws(
        draws=res.draws,
        names=model.layout.names(),
        stats=res.stats,
        step_size=res.step_size,
        config=cfg,
    )
    post.pointwise = model.batch("pointwise", post.flat)
    diag = diagnose(res.draws, post.names, res.stats, res.step_size)
    q = model.batch("quantities", post.flat)
    R = q["R"].reshape(post.n_chains, post.n_draws, -1)
    diag.extra["max R-hat of R_t"] = f"{np.nanmax(split_rhat(R)):.4f}" if cfg.n_chains > 1 else "n/a"
    for region, r in seed_r0_correlation(model, post, q).items():
        diag.extra[f"seed/R_1 correlation [{region}]"] = f"{r:.3f}"
    post.diagnostics = diag
    if diag.divergences:
        log.info("%d divergent transitions", diag.divergences)
    return post
