"""
Run configuration: a JSON document validated against a schema before any
computation, merged over defaults, and turned into library objects.

Unknown keys are rejected at every level. A run manifest (which embeds the
resolved configuration) is accepted wherever a configuration is, so a run
can be repeated from its manifest.
"""

from __future__ import annotations

import copy
import json
from pathlib import Path

import jsonschema
import numpy as np

from .distributions import ContinuousLagDensity, DiscretePmf, discretize
from .inference.model import LatentSpec
from .inference.sampler import SamplerConfig
from .observation import ObservationType
from .regression import LinkFunction, NormalPrior, PoolingPrior, RandomWalk, RegressionSpec, ShrinkagePrior
from .renewal import SeedingConfig


class ConfigError(ValueError):
    """The configuration failed validation."""


def _obj(props: dict, required=()) -> dict:
    out = {"type": "object", "properties": props, "additionalProperties": False}
    if required:
        out["required"] = list(required)
    return out


_pos = {"type": "number", "exclusiveMinimum": 0}
_posint = {"type": "integer", "minimum": 1}
_names = {"type": "array", "items": {"type": "string"}, "uniqueItems": True}
_path = {"type": ["string", "null"]}

_DIST = {
    "oneOf": [
        _obj({"family": {"enum": ["gamma", "lognormal", "weibull"]}, "mean": _pos, "sd": _pos, "max_lag": _posint},
             ["family", "mean", "sd", "max_lag"]),
        _obj({"pmf": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1}}, ["pmf"]),
    ]
}
_NORMAL = _obj({"mean": {"type": "number"}, "sd": _pos})
_EFFECT = {
    "oneOf": [
        _obj({"type": {"const": "normal"}, "mean": {"type": "number"}, "sd": _pos}, ["type"]),
        _obj({"type": {"const": "shrinkage"}, "global_scale": _pos, "slab_scale": _pos, "slab_df": _pos}, ["type"]),
    ]
}
_SHRINKAGE = _obj({"global_scale": _pos, "slab_scale": _pos, "slab_df": _pos})
_POOLING = _obj({"scale_sd": _pos, "eta": _pos})
_WALK = {
    "oneOf": [
        {"type": "null"},
        _obj({"timescale": {"enum": ["daily", "weekly"]}, "per_group": {"type": "boolean"}, "scale_sd": _pos}),
    ]
}
_REGRESSION = _obj({
    "fixed": _names,
    "grouped": _names,
    "intercept": {"enum": ["none", "global", "pooled", "independent"]},
    "link": _obj({"kind": {"enum": ["log", "scaled_logit"]}, "K": {"type": ["number", "null"], "exclusiveMinimum": 0}}),
    "intercept_prior": _NORMAL,
    "effect_prior": _EFFECT,
    "pooling": _POOLING,
    "random_walk": _WALK,
    "standardize": _names,
    "binary": _names,
})
_OBSERVATION = _obj({
    "name": {"type": "string", "minLength": 1},
    "family": {"enum": ["poisson", "neg_binomial", "quasi_poisson"]},
    "delay": _DIST,
    "ascertainment": {"oneOf": [_pos, _REGRESSION]},
    "aux_prior_sd": _pos,
}, ["name", "delay"])
_SEEDING = _obj({
    "window": _posint, "log_mean": {"type": "number"}, "log_sd": _pos, "noise_sd": _pos,
    "mode": {"enum": ["shared", "iid"]},
})
_LATENT = {"oneOf": [{"type": "null"}, _obj({
    "family": {"enum": ["gamma", "lognormal"]}, "d": {"type": ["number", "null"], "exclusiveMinimum": 0},
    "d_prior_median": _pos, "d_prior_log_sd": _pos,
})]}
_SAMPLER = _obj({
    "chains": _posint, "warmup": {"type": "integer", "minimum": 0}, "draws": _posint,
    "algorithm": {"enum": ["nuts", "metropolis"]}, "target_accept": {"type": "number", "exclusiveMinimum": 0,
                                                                     "exclusiveMaximum": 1},
    "max_depth": _posint, "init_jitter": {"type": "number", "minimum": 0},
})
_SIM_REGION = _obj({
    "region": {"type": "string", "minLength": 1},
    "R": {"oneOf": [_pos, {"type": "array", "items": _pos, "minItems": 1}]},
    "seeds": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
    "population": {"type": ["number", "null"], "exclusiveMinimum": 0},
    "covariates": {"type": "object", "additionalProperties": {"type": "array", "items": {"type": "number"}}},
}, ["region", "R", "seeds"])
_SIMULATE = _obj({
    "T": _posint,
    "phi": _pos,
    "latent_d": {"type": ["number", "null"], "exclusiveMinimum": 0},
    "regions": {"type": "array", "items": _SIM_REGION},
    "synthetic": {"oneOf": [{"type": "null"}, _obj({
        "generator": {"enum": ["lockdown", "npi_mobility", "mediation_full", "mediation_none"]},
        "n_regions": _posint,
        "T": _posint,
        "alpha": _pos,
    }, ["generator"])]},
})
_STAGE1 = _obj({
    "intercept_prior": _NORMAL, "walk_scale_sd": _pos, "timescale": {"enum": ["daily", "weekly"]},
    "rhat_threshold": {"type": "number", "exclusiveMinimum": 1}, "sampler": _SAMPLER,
})

SCHEMA = _obj({
    "seed": {"type": "integer", "minimum": 0},
    "data": _obj({"observations": _path, "covariates": _path, "populations": _path}),
    "generation": _DIST,
    "observations": {"type": "array", "items": _OBSERVATION, "minItems": 1},
    "transmission": _REGRESSION,
    "seeding": _SEEDING,
    "latent": _LATENT,
    "population": {"type": "boolean"},
    "sampler": _SAMPLER,
    "simulate": _SIMULATE,
    "fit": _obj({"forecast_horizon": {"type": "integer", "minimum": 0},
                 "scenario": {"type": "object", "additionalProperties": {"type": "number"}}}),
    "twostage": _obj({"npis": _names, "mobility": {"type": "string"}, "stage1": _STAGE1,
                      "stage2_sampler": _SAMPLER, "prior": _SHRINKAGE, "workers": _posint}),
    "mediate": _obj({"treatment": {"type": "string"}, "mediator": {"type": "string"}, "intercept_prior": _NORMAL,
                     "effect_prior": _NORMAL, "pooling": _POOLING, "walk_scale_sd": _pos}),
    "oracles": _obj({"replications": _posint, "suites": _names}),
})

DEFAULTS = {
    "seed": 0,
    "data": {"observations": None, "covariates": None, "populations": None},
    "generation": {"family": "gamma", "mean": 6.5, "sd": 4.3, "max_lag": 30},
    "observations": [{
        "name": "deaths", "family": "neg_binomial",
        "delay": {"family": "gamma", "mean": 23.0, "sd": 10.0, "max_lag": 60},
        "ascertainment": 0.01, "aux_prior_sd": 10.0,
    }],
    "transmission": {
        "fixed": [], "grouped": [], "intercept": "global", "link": {"kind": "log", "K": None},
        "intercept_prior": {"mean": 0.9163, "sd": 0.5}, "effect_prior": {"type": "normal", "mean": 0.0, "sd": 1.0},
        "pooling": {"scale_sd": 0.5, "eta": 1.0}, "random_walk": None, "standardize": [], "binary": [],
    },
    "seeding": {"window": 6, "log_mean": 4.6052, "log_sd": 1.0, "noise_sd": 0.1, "mode": "shared"},
    "latent": None,
    "population": False,
    "sampler": {"chains": 4, "warmup": 1000, "draws": 1000, "algorithm": "nuts", "target_accept": 0.8,
                "max_depth": 10, "init_jitter": 0.1},
    "simulate": {"T": 100, "phi": 20.0, "latent_d": None, "regions": [], "synthetic": None},
    "fit": {"forecast_horizon": 0, "scenario": {}},
    "twostage": {
        "npis": [], "mobility": "mobility",
        "stage1": {"intercept_prior": {"mean": 0.9163, "sd": 0.5}, "walk_scale_sd": 0.05, "timescale": "daily",
                   "rhat_threshold": 1.05,
                   "sampler": {"chains": 4, "warmup": 500, "draws": 500}},
        "stage2_sampler": {"chains": 4, "warmup": 1000, "draws": 1000},
        "prior": {"global_scale": 0.1, "slab_scale": 2.0, "slab_df": 4.0},
        "workers": 1,
    },
    "mediate": {
        "treatment": "lockdown", "mediator": "mobility", "intercept_prior": {"mean": 0.9163, "sd": 0.5},
        "effect_prior": {"mean": 0.0, "sd": 1.0}, "pooling": {"scale_sd": 0.2, "eta": 1.0}, "walk_scale_sd": 0.05,
    },
    "oracles": {"replications": 100_000, "suites": ["population_lemma", "dispersion", "renewal", "observation",
                                                   "offspring"]},
}

_VALIDATOR = jsonschema.Draft202012Validator(SCHEMA)


def _merge(base, over):
    if isinstance(base, dict) and isinstance(over, dict):
        out = dict(base)
        for k, v in over.items():
            out[k] = _merge(base.get(k), v) if k in base else copy.deepcopy(v)
        return out
    return copy.deepcopy(over)


def validate(config: dict) -> None:
    """Raise :class:`ConfigError` listing every schema violation."""
    errors = sorted(_VALIDATOR.iter_errors(config), key=lambda e: list(e.absolute_path))
    if errors:
        lines = []
        for e in errors:
            where = "/".join(str(p) for p in e.absolute_path) or "<root>"
            lines.append(f"{where}: {e.message}")
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(lines))


def resolve(config: dict | None = None, overrides: dict | None = None) -> dict:
    """Validate ``config``, apply ``overrides`` and fill in defaults.

    Effect priors and random walks merge with their defaults only when the
    configuration leaves them out; a given ``effect_prior`` or
    ``random_walk`` replaces the default whole.
    """
    config = copy.deepcopy(config or {})
    if "manifest_version" in config:
        config = copy.deepcopy(config["config"])
    validate(config)
    merged = _merge(DEFAULTS, config)
    for section in ("transmission",):
        user = config.get(section, {})
        for key in ("effect_prior", "random_walk"):
            if key in user:
                merged[section][key] = copy.deepcopy(user[key])
    if overrides:
        merged = _merge(merged, overrides)
    validate(merged)
    return merged


def load(path, overrides: dict | None = None) -> dict:
    """Read a JSON configuration (or run manifest) and resolve it."""
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: the top level must be an object")
    return resolve(raw, overrides)


# --- builders -------------------------------------------------------------------


def build_pmf(spec: dict, kind: str) -> DiscretePmf:
    """Generation interval (``kind="generation"``) or delay pmf from a config entry."""
    if "pmf" in spec:
        return DiscretePmf(np.asarray(spec["pmf"], float), first_lag=1 if kind == "generation" else 0)
    density = ContinuousLagDensity.from_mean_sd(spec["family"], spec["mean"], spec["sd"])
    return discretize(density, spec["max_lag"], kind=kind)


def build_normal(spec: dict) -> NormalPrior:
    return NormalPrior(spec.get("mean", 0.0), spec.get("sd", 1.0))


def build_regression(spec: dict) -> RegressionSpec:
    ep = dict(spec.get("effect_prior", {"type": "normal"}))
    kind = ep.pop("type", "normal")
    effect = ShrinkagePrior(**ep) if kind == "shrinkage" else NormalPrior(**ep)
    rw = spec.get("random_walk")
    link = spec.get("link", {})
    return RegressionSpec(
        fixed=tuple(spec.get("fixed", ())),
        grouped=tuple(spec.get("grouped", ())),
        intercept=spec.get("intercept", "pooled"),
        link=LinkFunction(link.get("kind", "log"), link.get("K")),
        intercept_prior=build_normal(spec.get("intercept_prior", {})),
        effect_prior=effect,
        pooling=PoolingPrior(**spec.get("pooling", {})),
        random_walk=None if rw is None else RandomWalk(**rw),
        standardize=tuple(spec.get("standardize", ())),
        binary=tuple(spec.get("binary", ())),
    )


def build_observation(spec: dict) -> ObservationType:
    asc = spec.get("ascertainment", 1.0)
    if isinstance(asc, dict):
        asc = build_regression(asc)
    return ObservationType(
        spec["name"], build_pmf(spec["delay"], "delay"), spec.get("family", "neg_binomial"), asc,
        spec.get("aux_prior_sd", 10.0),
    )


def build_seeding(spec: dict) -> SeedingConfig:
    return SeedingConfig(**spec)


def build_latent(spec: dict | None) -> LatentSpec | None:
    return None if spec is None else LatentSpec(**spec)


def build_sampler(spec: dict, seed: int) -> SamplerConfig:
    base = DEFAULTS["sampler"]
    s = {**base, **spec}
    return SamplerConfig(
        n_chains=s["chains"], warmup=s["warmup"], draws=s["draws"], seed=seed, algorithm=s["algorithm"],
        target_accept=s["target_accept"], max_depth=s["max_depth"], init_jitter=s["init_jitter"],
    )
