"""
Mediation of a binary treatment's effect on transmission through a
continuous mediator.

Two transmission models are fitted to the same data, each with region
baselines, pooled plus region-specific effects and a weekly random walk:

    log R_t = log R_m + (b1 + b1_m) L_t + walk                        (total)
    log R_t = log R_m + (b2 + b2_m) L_t + (c + c_m) M_t + walk        (partial)

The mediated effect is ``b1 - b2``. The fits are separate posteriors, so
its draws pair equal-index draws of the two fits; this treats them as
independent, which the result records as a caveat.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..inference.draws import PosteriorDraws, fit
from ..inference.model import EpidemicModel
from ..inference.sampler import SamplerConfig
from ..inference.summary import QuantitySummary, summarize
from ..regression import NormalPrior, PoolingPrior, RandomWalk, RegressionSpec
from ..renewal import SeedingConfig

PAIRING_CAVEAT = (
    "total and partial effects come from separately fitted models; mediated-effect draws pair "
    "equal-index draws and ignore any dependence between the fits"
)


class MediatorNotIdentified(ValueError):
    """The mediator is constant within a region."""


@dataclass(frozen=True)
class MediationSettings:
    intercept_prior: NormalPrior = NormalPrior(np.log(2.5), 0.5)
    effect_prior: NormalPrior = NormalPrior(0.0, 1.0)
    pooling: PoolingPrior = PoolingPrior(scale_sd=0.2)
    walk_scale_sd: float = 0.05
    seeding: SeedingConfig = SeedingConfig()
    config: SamplerConfig = SamplerConfig()


@dataclass
class MediationResult:
    """Posterior summaries of the total, partial and mediated effects (log ``R_t`` scale)."""

    treatment: str
    mediator: str
    total: QuantitySummary
    partial: QuantitySummary
    mediated: QuantitySummary
    percent_reduction: QuantitySummary
    prob_positive: float
    prob_reduction: float
    draws: dict
    paired: bool = False
    caveat: str = PAIRING_CAVEAT
    posteriors: dict = field(default_factory=dict)

    def excludes_zero(self) -> bool:
        return not bool(self.mediated.covers(0.0))

    def rows(self):
        """``(effect, mean, sd, q2.5, q50, q97.5)``."""
        for name in ("total", "partial", "mediated", "percent_reduction"):
            s = getattr(self, name)
            yield name, float(s.mean), float(s.sd), float(s.q2_5), float(s.q50), float(s.q97_5)


def _check_inputs(regions, treatment, mediator):
    for r in regions:
        for name in (treatment, mediator):
            if name not in r.covariates:
                raise ValueError(f"region {r.region!r} has no covariate {name!r}")
        tr = r.covariates[treatment]
        if not np.all(np.isin(tr, (0.0, 1.0))):
            raise ValueError(f"treatment {treatment!r} must be binary")
        if np.ptp(r.covariates[mediator]) == 0:
            raise MediatorNotIdentified(
                f"mediator {mediator!r} is constant in region {r.region!r}; the partial-effect model is not identified"
            )


def _spec(covs, settings: MediationSettings, binary, standardize) -> RegressionSpec:
    return RegressionSpec(
        grouped=covs,
        intercept="independent",
        intercept_prior=settings.intercept_prior,
        effect_prior=settings.effect_prior,
        pooling=settings.pooling,
        random_walk=RandomWalk("weekly", per_group=True, scale_sd=settings.walk_scale_sd),
        binary=binary,
        standardize=standardize,
    )


def mediation(regions, g, observations, treatment: str = "lockdown", mediator: str = "mobility",
              settings: MediationSettings | None = None, seed: int = 0) -> MediationResult:
    """Fit the total-effect and partial-effect models and form the mediated effect.

    The mediator enters on its raw scale so the partial effect of the
    treatment is measured at fixed mediator values.

    Raises
    ------
    MediatorNotIdentified
        If the mediator is constant in some region.
    """
    regions = list(regions)
    _check_inputs(regions, treatment, mediator)
    settings = settings or MediationSettings()
    cfg = settings.config
    posts, beta = {}, {}
    for k, (label, covs) in enumerate((("total", (treatment,)), ("partial", (treatment, mediator)))):
        spec = _spec(covs, settings, (treatment,), ())
        model = EpidemicModel(regions, spec, g, observations, settings.seeding)
        post: PosteriorDraws = fit(model, replace(cfg, seed=seed + k))
        q = model.batch("quantities", post.flat)
        beta[label] = q["R.beta"][:, 0]
        posts[label] = post
    n = min(beta["total"].size, beta["partial"].size)
    med = beta["total"][:n] - beta["partial"][:n]
    return MediationResult(
        treatment=treatment,
        mediator=mediator,
        total=summarize(beta["total"]),
        partial=summarize(beta["partial"]),
        mediated=summarize(med),
        percent_reduction=summarize(100.0 * -np.expm1(med)),
        prob_positive=float(np.mean(med > 0)),
        prob_reduction=float(np.mean(med < 0)),
        draws={"total": beta["total"], "partial": beta["partial"], "mediated": med},
        posteriors=posts,
    )
