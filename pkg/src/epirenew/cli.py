"""
Command-line entry point.

    epirenew simulate|fit|twostage|mediate|verify-oracles
        --config <path> --seed <u64> --out <dir> [--chains N] [--draws N]

Every run writes its outputs and a ``manifest.json`` into ``--out``. Flags
override the matching configuration keys. The thread count of the numeric
backend follows ``EPIRENEW_NUM_THREADS`` when it is set before start-up.

Exit status: 0 on success, 1 when a run fails (sampler failure, stage-1
non-convergence, an oracle with ``|z| > 4``), 2 on invalid input.
"""

from __future__ import annotations

import argparse
import datetime as dt
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import reports
from .data import IngestError, RegionSeries, ingest, write_covariates, write_observations, write_populations

log = logging.getLogger("epirenew")

COMMANDS = ("simulate", "fit", "twostage", "mediate", "verify-oracles")
START = dt.date(2020, 2, 1)
Z_LIMIT = 4.0


class RunFailed(RuntimeError):
    """A run finished but its result is a failure (reported with exit status 1)."""


def _overrides(args) -> dict:
    out: dict = {}
    if args.seed is not None:
        out["seed"] = args.seed
    samp = {}
    if args.chains is not None:
        samp["chains"] = args.chains
    if args.draws is not None:
        samp["draws"] = args.draws
    if samp:
        out["sampler"] = dict(samp)
        out["twostage"] = {"stage1": {"sampler": dict(samp)}, "stage2_sampler": dict(samp)}
    return out


def _data_paths(config) -> list:
    return [Path(p) for p in config["data"].values() if p is not None]


def _load_regions(config, out_dir):
    data = config["data"]
    if data["observations"] is None:
        raise cfgmod.ConfigError("data.observations is required for this command")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        regions, report = ingest(data["observations"], data["covariates"], data["populations"])
    lines = report.lines() + [f"warning: {w.message}" for w in caught]
    path = reports.write_lines(out_dir / "ingest_report.txt", lines)
    return regions, path


def _model_parts(config):
    g = cfgmod.build_pmf(config["generation"], "generation")
    observations = [cfgmod.build_observation(o) for o in config["observations"]]
    return g, observations


# --- simulate ---------------------------------------------------------------------


def _simulate(config, out_dir, rng):
    from .analysis import synthetic
    from .observation import simulate_observations
    from .renewal import propagate_expected, propagate_latent

    sim = config["simulate"]
    files = []
    if sim["synthetic"] is not None:
        s = sim["synthetic"]
        kw = {"n_regions": s.get("n_regions", 3), "T": s.get("T", sim["T"]), "phi": sim["phi"]}
        if "alpha" in s:
            kw["alpha"] = s["alpha"]
        gen = s["generator"]
        if gen == "lockdown":
            ep = synthetic.lockdown_epidemic(rng, **kw)
        elif gen == "npi_mobility":
            ep = synthetic.npi_mobility_epidemic(rng, **kw)
        else:
            if "alpha" in kw:
                kw["observation"] = synthetic.case_observation(kw["alpha"])
            ep = synthetic.mediation_epidemic(rng, gen.split("_")[1], **kw)
        regions, R, infections = ep.regions, ep.R, ep.infections
        truth = {k: (np.asarray(v).tolist() if isinstance(v, np.ndarray) else v) for k, v in ep.truth.items()}
        truth["observation"] = ep.observation.name
        files.append(out_dir / "truth.json")
        files[-1].write_text(json.dumps(truth, indent=2, sort_keys=True) + "\n")
    else:
        if not sim["regions"]:
            raise cfgmod.ConfigError("simulate needs simulate.regions or simulate.synthetic")
        g, observations = _model_parts(config)
        T = sim["T"]
        regions, R, infections = [], [], []
        for spec in sim["regions"]:
            r = np.asarray(spec["R"], float)
            r = np.full(T, float(r)) if r.ndim == 0 else r
            if r.size != T:
                raise cfgmod.ConfigError(f"region {spec['region']!r}: R has {r.size} values, expected {T}")
            pop = spec.get("population")
            if sim["latent_d"] is None:
                path = propagate_expected(spec["seeds"], r, g, population=pop)
            else:
                path = propagate_latent(spec["seeds"], r, g, sim["latent_d"], rng=rng, population=pop).path
            counts = {}
            for o in observations:
                if not isinstance(o.ascertainment, (int, float)):
                    raise cfgmod.ConfigError("simulate needs a constant ascertainment per observation type")
                counts[o.name] = simulate_observations(path, float(o.ascertainment), o, sim["phi"], rng).counts
            covs = {k: np.asarray(v, float) for k, v in spec.get("covariates", {}).items()}
            regions.append(RegionSeries(spec["region"], START, T, pop, covs, counts))
            R.append(r)
            infections.append(path.values)
        R, infections = np.asarray(R), np.asarray(infections)

    obs_path = out_dir / "observations.csv"
    write_observations(regions, obs_path)
    files.append(obs_path)
    if any(r.covariates for r in regions):
        files.append(out_dir / "covariates.csv")
        write_covariates(regions, files[-1])
    if all(r.population is not None for r in regions):
        files.append(out_dir / "populations.csv")
        write_populations(regions, files[-1])
    rows = []
    for m, reg in enumerate(regions):
        for t in range(reg.T):
            rows.append((reg.region, t + 1, reg.dates[t].isoformat(), float(R[m, t]), float(infections[m, t])))
    files.append(reports.write_table(out_dir / "infections.csv", ("region", "t", "date", "R", "infections"), rows))
    return files, {}


# --- fit ----------------------------------------------------------------------------


def _fit(config, out_dir, rng):
    from .inference import EpidemicModel, fit, forecast, series_rows, summarize, summarize_quantities
    from .inference.summary import write_series

    regions, ingest_file = _load_regions(config, out_dir)
    g, observations = _model_parts(config)
    model = EpidemicModel(
        regions, cfgmod.build_regression(config["transmission"]), g, observations,
        cfgmod.build_seeding(config["seeding"]), cfgmod.build_latent(config["latent"]), config["population"],
    )
    post = fit(model, cfgmod.build_sampler(config["sampler"], config["seed"]))
    files = [ingest_file, reports.write_lines(out_dir / "diagnostics.txt", post.diagnostics.lines())]
    files.append(out_dir / "draws.csv")
    post.to_csv(files[-1])
    q = model.batch("quantities", post.flat)
    summaries = summarize_quantities(q)
    files.append(out_dir / "series.csv")
    write_series(series_rows(summaries, model.region_ids), files[-1])
    spec = model.transmission.spec
    if "R.beta" in q:
        names = list(spec.fixed) + list(spec.grouped)
        rows = []
        for k, name in enumerate(names):
            s = summarize(q["R.beta"][:, k])
            rows.append((name, s.mean, s.sd, s.q2_5, s.q50, s.q97_5))
        files.append(reports.write_table(out_dir / "coefficients.csv", ("covariate",) + reports.SUMMARY_HEADER, rows))
    w = post.waic()
    files.append(reports.write_table(out_dir / "waic.csv", ("elpd", "se", "p_waic", "waic", "n_points"),
                                     [(w.elpd, w.se, w.p_waic, w.waic, w.n_points)]))
    horizon = config["fit"]["forecast_horizon"]
    if horizon:
        fc = forecast(model, post, horizon, config["fit"]["scenario"] or None)
        fsum = {k: summarize(v) for k, v in fc.items()}
        files.append(out_dir / "forecast.csv")
        write_series(series_rows(fsum, model.region_ids), files[-1])
    status = "ok" if post.diagnostics.divergences == 0 else "ok (divergences)"
    return files, {"status_detail": status}


# --- analyses ----------------------------------------------------------------------


def _twostage(config, out_dir, rng):
    from .analysis import Stage1NotConverged, Stage1Settings, two_stage
    from .regression import ShrinkagePrior

    regions, ingest_file = _load_regions(config, out_dir)
    g, observations = _model_parts(config)
    ts = config["twostage"]
    st1 = ts["stage1"]
    settings = Stage1Settings(
        intercept_prior=cfgmod.build_normal(st1["intercept_prior"]),
        walk_scale_sd=st1["walk_scale_sd"],
        timescale=st1["timescale"],
        seeding=cfgmod.build_seeding(config["seeding"]),
        config=cfgmod.build_sampler(st1["sampler"], config["seed"]),
        rhat_threshold=st1["rhat_threshold"],
    )
    try:
        result = two_stage(
            regions, g, observations, npis=ts["npis"], mobility=ts["mobility"], stage1=settings,
            stage2_config=cfgmod.build_sampler(ts["stage2_sampler"], config["seed"]),
            prior=ShrinkagePrior(**ts["prior"]), seed=config["seed"], workers=ts["workers"],
        )
    except Stage1NotConverged as exc:
        path = reports.write_lines(out_dir / "stage1_diagnostics.txt",
                                   [f"[{exc.region}]"] + exc.diagnostics.lines() + [str(exc)])
        raise RunFailed(str(exc), [ingest_file, path]) from None
    return [ingest_file] + reports.write_twostage(result, out_dir), {}


def _mediate(config, out_dir, rng):
    from .analysis import MediationSettings, mediation
    from .regression import PoolingPrior

    regions, ingest_file = _load_regions(config, out_dir)
    g, observations = _model_parts(config)
    md = config["mediate"]
    settings = MediationSettings(
        intercept_prior=cfgmod.build_normal(md["intercept_prior"]),
        effect_prior=cfgmod.build_normal(md["effect_prior"]),
        pooling=PoolingPrior(**md["pooling"]),
        walk_scale_sd=md["walk_scale_sd"],
        seeding=cfgmod.build_seeding(config["seeding"]),
        config=cfgmod.build_sampler(config["sampler"], config["seed"]),
    )
    result = mediation(regions, g, observations, md["treatment"], md["mediator"], settings, seed=config["seed"])
    return [ingest_file] + reports.write_mediation(result, out_dir), {}


def _verify(config, out_dir, rng):
    from .ctsim import run_suites

    oc = config["oracles"]
    checks = run_suites(oc["replications"], config["seed"], oc["suites"])
    path = reports.write_checks(checks, out_dir / "oracles.csv")
    worst = max(abs(c.z) for items in checks.values() for c in items)
    for suite, items in checks.items():
        for c in items:
            flag = "ok" if abs(c.z) <= Z_LIMIT else "FAIL"
            print(f"{flag:4s} {suite:17s} {c.name:48s} z={c.z:+.2f}")
    if not worst <= Z_LIMIT:
        raise RunFailed(f"an oracle check has |z| = {worst:.2f} > {Z_LIMIT}", [path])
    return [path], {"max_abs_z": worst}


HANDLERS = {"simulate": _simulate, "fit": _fit, "twostage": _twostage, "mediate": _mediate,
            "verify-oracles": _verify}


# --- entry point -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="epirenew", description="Renewal-equation epidemic models.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", type=Path, help="JSON configuration or a previous run's manifest.json")
    p.add_argument("--seed", type=int, help="random seed (overrides the configuration)")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--chains", type=int, help="number of chains")
    p.add_argument("--draws", type=int, help="post-warmup draws per chain")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return 2
    for flag in ("chains", "draws"):
        v = getattr(args, flag)
        if v is not None and v < 1:
            print(f"error: --{flag} must be positive", file=sys.stderr)
            return 2
    try:
        overrides = _overrides(args)
        config = cfgmod.load(args.config, overrides) if args.config else cfgmod.resolve({}, overrides)
    except (cfgmod.ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out_dir = args.out
    out_dir.mkdir(parents=True, exist_ok=True)
    inputs = _data_paths(config) if args.command != "simulate" else []
    if args.config:
        inputs = [args.config] + inputs
    rng = np.random.default_rng(config["seed"])
    handler = HANDLERS[args.command]
    try:
        files, extra = handler(config, out_dir, rng)
    except RunFailed as exc:
        files = exc.args[1] if len(exc.args) > 1 else []
        reports.write_manifest(out_dir, args.command, config, config["seed"], files, inputs, status="failed",
                               extra={"error": exc.args[0]})
        print(f"failed: {exc.args[0]}", file=sys.stderr)
        return 1
    except (cfgmod.ConfigError, IngestError, ValueError, KeyError) as exc:
        reports.write_manifest(out_dir, args.command, config, config["seed"], [], inputs, status="invalid",
                               extra={"error": str(exc)})
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # sampler or numerical failure
        reports.write_manifest(out_dir, args.command, config, config["seed"], [], inputs, status="failed",
                               extra={"error": f"{type(exc).__name__}: {exc}"})
        print(f"failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    reports.write_manifest(out_dir, args.command, config, config["seed"], files, inputs, extra=extra or None)
    print(f"wrote {len(files)} file(s) and manifest.json to {out_dir}")
    return 0


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
