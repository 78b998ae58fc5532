"""
Two-stage analysis: nonparametric ``R_t`` per region, then a regression of
the estimates on covariates.

Stage 1 fits each region on its own with a daily random walk on
``log R_t`` and no covariates. Stage 2 regresses the log posterior median
of ``R_t`` on covariate sets with region intercepts, pooled plus
region-specific effects, and a shrinkage prior, and compares the variants
by WAIC. Stage-1 uncertainty is not carried into stage 2.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from ..inference.diagnostics import Diagnostics, split_rhat
from ..inference.draws import fit
from ..inference.model import EpidemicModel
from ..inference.sampler import SamplerConfig
from ..inference.summary import QuantitySummary, summarize
from ..inference.waic import WAIC, CompareRow, compare
from ..regression import NormalPrior, RandomWalk, RegressionSpec, ShrinkagePrior, build_design
from ..renewal import SeedingConfig
from .linear import LinearFit, LinearGaussianModel, fit_linear

STAGE2_NOTE = "stage 2 uses the stage-1 posterior median of R_t; stage-1 uncertainty is not propagated"


class Stage1NotConverged(RuntimeError):
    """A stage-1 fit has R-hat at or above the threshold on its ``R_t`` path."""

    def __init__(self, region, rhat, diagnostics):
        super().__init__(f"stage-1 fit for {region!r} did not converge: max R-hat of R_t = {rhat:.3f}")
        self.region = region
        self.rhat = rhat
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class Stage1Settings:
    """Stage-1 model: intercept plus daily random walk on ``log R_t``."""

    intercept_prior: NormalPrior = NormalPrior(np.log(2.5), 0.5)
    walk_scale_sd: float = 0.05
    timescale: str = "daily"
    seeding: SeedingConfig = SeedingConfig()
    config: SamplerConfig = SamplerConfig()
    rhat_threshold: float = 1.05

    def spec(self) -> RegressionSpec:
        return RegressionSpec(
            intercept="global",
            intercept_prior=self.intercept_prior,
            random_walk=RandomWalk(self.timescale, per_group=True, scale_sd=self.walk_scale_sd),
        )


@dataclass
class Stage2Fit:
    variant: str
    covariates: tuple
    fit: LinearFit
    waic: WAIC
    coefficients: dict
    group_coefficients: dict


@dataclass
class TwoStageResult:
    """Stage-1 ``R_t`` summaries, stage-2 fits per variant and their WAIC table."""

    region_ids: tuple
    stage1: dict
    stage1_diagnostics: dict
    targets: np.ndarray
    fits: dict
    table: list
    notes: list = field(default_factory=lambda: [STAGE2_NOTE])

    def elpd(self, variant: str) -> float:
        return self.fits[variant].waic.elpd

    def waic_rows(self):
        """``(model, elpd, se, p_waic, elpd_diff, se_diff)``."""
        for r in self.table:
            yield r.model, r.elpd, r.se, r.p_waic, r.elpd_diff, r.se_diff

    def coefficient_rows(self):
        """``(variant, covariate, mean, sd, q2.5, q50, q97.5)`` for shared effects."""
        for v, f in self.fits.items():
            for name, s in f.coefficients.items():
                yield v, name, float(s.mean), float(s.sd), float(s.q2_5), float(s.q50), float(s.q97_5)


def default_variants(npis, mobility: str = "mobility") -> dict:
    npis = tuple(npis)
    return {"NPI_only": npis, "Mobility_only": (mobility,), "NPI+Mobility": npis + (mobility,)}


def fit_stage1(region, g, observations, settings: Stage1Settings, seed: int):
    """Random-walk-only fit of one region; returns ``(R summary, diagnostics)``."""
    model = EpidemicModel([region], settings.spec(), g, observations, settings.seeding)
    cfg = settings.config
    post = fit(model, replace(cfg, seed=seed))
    q = model.batch("quantities", post.flat)
    R = q["R"][:, 0, :]
    rhat = float(np.nanmax(split_rhat(R.reshape(post.n_chains, post.n_draws, -1)))) if post.n_chains > 1 else 1.0
    diag: Diagnostics = post.diagnostics
    if not rhat < settings.rhat_threshold:
        raise Stage1NotConverged(region.region, rhat, diag)
    return summarize(R), diag


def stage2(targets, regions, variants: dict, mask=None, prior: ShrinkagePrior | None = None,
           config: SamplerConfig | None = None, binary=(), standardize=()) -> dict:
    """Fit every stage-2 variant on the same ``(M, T)`` log ``R_t`` targets."""
    prior = prior or ShrinkagePrior()
    config = config or SamplerConfig()
    out = {}
    for name, covs in variants.items():
        covs = tuple(covs)
        spec = RegressionSpec(
            grouped=covs,
            intercept="independent",
            intercept_prior=NormalPrior(0.0, 1.0),
            effect_prior=prior,
            binary=tuple(c for c in covs if c in binary),
            standardize=tuple(c for c in covs if c in standardize),
        )
        design = build_design(spec, regions, T=targets.shape[1])
        model = LinearGaussianModel(design, targets, mask)
        res = fit_linear(model, config)
        coefs = {c: summarize(res.coefficient(c)) for c in covs}
        groups = {c: summarize(res.quantities["beta_group"][:, :, k]) for k, c in enumerate(covs)}
        out[name] = Stage2Fit(name, covs, res, res.posterior.waic(), coefs, groups)
    return out


def two_stage(regions, g, observations, npis=(), mobility: str = "mobility", variants: dict | None = None,
              stage1: Stage1Settings | None = None, stage2_config: SamplerConfig | None = None,
              prior: ShrinkagePrior | None = None, seed: int = 0, baseline: str | None = None,
              workers: int = 1) -> TwoStageResult:
    """Run both stages and compare the variants.

    Parameters
    ----------
    regions : sequence of RegionSeries
    g : DiscretePmf
    observations : sequence of ObservationType
    npis : sequence of str
        Binary intervention covariates.
    mobility : str
        Continuous covariate, standardized over the fit window.
    variants : dict, optional
        Name to covariate tuple; defaults to NPI_only, Mobility_only and
        NPI+Mobility.
    seed : int
        Stage-1 fit for region ``k`` uses ``seed + k``; stage 2 uses ``seed``.
    workers : int
        Stage-1 fits run on this many threads. Compiled sampling releases
        the interpreter lock, and each region has its own seed, so the
        result does not depend on ``workers``.

    Raises
    ------
    Stage1NotConverged
        If any region's ``R_t`` path has R-hat at or above the threshold.
    """
    regions = list(regions)
    settings = stage1 or Stage1Settings()
    variants = variants or default_variants(npis, mobility)
    jobs = [(region, seed + k) for k, region in enumerate(regions)]

    def run(job):
        return fit_stage1(job[0], g, observations, settings, job[1])

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(job) for job in jobs]
    summaries = {r.region: s for r, (s, _) in zip(regions, results)}
    diags = {r.region: d for r, (_, d) in zip(regions, results)}
    T = max(r.T for r in regions)
    targets = np.zeros((len(regions), T))
    mask = np.zeros((len(regions), T), bool)
    for m, r in enumerate(regions):
        targets[m, : r.T] = np.log(summaries[r.region].q50[: r.T])
        mask[m, : r.T] = True
    cfg2 = stage2_config or SamplerConfig(seed=seed)
    fits = stage2(targets, regions, variants, mask, prior, cfg2, binary=tuple(npis), standardize=(mobility,))
    table: list[CompareRow] = compare({k: f.waic for k, f in fits.items()}, baseline)
    return TwoStageResult(tuple(r.region for r in regions), summaries, diags, targets, fits, table)
