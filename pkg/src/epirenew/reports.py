"""
Delimited report tables and run manifests.

Tables are comma-separated with a header row and floats written with
``repr`` so they round-trip exactly. A manifest records what produced a
directory of outputs: the resolved configuration and its hash, the seed,
package versions, and SHA-256 digests of every input and output file. It
carries no timestamps, so reruns from the same manifest produce the same
bytes.
"""

from __future__ import annotations

import csv
import hashlib
import json
import platform
from pathlib import Path

import numpy as np

MANIFEST_VERSION = 1


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return int(v)
    return v


def write_table(path, header, rows) -> Path:
    """Write ``rows`` under ``header`` as CSV."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])
    return path


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(config: dict) -> str:
    """SHA-256 of the canonical JSON form of ``config``."""
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()


def file_digest(path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def versions() -> dict:
    import jax
    import scipy

    from . import __version__

    return {
        "epirenew": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "jax": jax.__version__,
    }


def write_manifest(out_dir, command: str, config: dict, seed: int, outputs, inputs=(), status: str = "ok",
                   extra: dict | None = None) -> Path:
    """Write ``manifest.json`` describing a run.

    Parameters
    ----------
    out_dir : path
        Directory holding the outputs; file names are stored relative to it.
    config : dict
        Fully resolved configuration (flags already applied).
    outputs, inputs : sequence of path
        Files to fingerprint.
    """
    out_dir = Path(out_dir)
    manifest = {
        "manifest_version": MANIFEST_VERSION,
        "command": command,
        "seed": int(seed),
        "status": status,
        "config_sha256": config_hash(config),
        "config": config,
        "versions": versions(),
        "inputs": {str(p): file_digest(p) for p in inputs},
        "outputs": {Path(p).name: file_digest(p) for p in sorted(outputs, key=lambda p: Path(p).name)},
    }
    if extra:
        manifest["extra"] = extra
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def write_lines(path, lines) -> Path:
    path = Path(path)
    path.write_text("".join(f"{line}\n" for line in lines))
    return path


# --- analysis reports ---------------------------------------------------------

SERIES_HEADER = ("quantity", "t", "region", "q2.5", "q50", "q97.5")
SUMMARY_HEADER = ("mean", "sd", "q2.5", "q50", "q97.5")


def write_twostage(result, out_dir) -> list[Path]:
    """``waic.csv``, ``coefficients.csv``, ``stage1_series.csv`` and ``notes.txt``."""
    out_dir = Path(out_dir)
    files = [
        write_table(out_dir / "waic.csv", ("model", "elpd", "se", "p_waic", "elpd_diff", "se_diff"),
                    result.waic_rows()),
        write_table(out_dir / "coefficients.csv", ("variant", "covariate") + SUMMARY_HEADER,
                    result.coefficient_rows()),
    ]
    rows = []
    for region in result.region_ids:
        s = result.stage1[region]
        for t in range(s.q50.shape[0]):
            rows.append(("R", t + 1, region, s.q2_5[t], s.q50[t], s.q97_5[t]))
    files.append(write_table(out_dir / "stage1_series.csv", SERIES_HEADER, rows))
    diag = []
    for region, d in result.stage1_diagnostics.items():
        diag.append(f"[{region}]")
        diag.extend(d.lines())
    files.append(write_lines(out_dir / "stage1_diagnostics.txt", diag))
    files.append(write_lines(out_dir / "notes.txt", result.notes))
    return files


def write_mediation(result, out_dir) -> list[Path]:
    """``mediation.csv`` (effects on the log scale plus percent reduction) and ``notes.txt``."""
    out_dir = Path(out_dir)
    files = [write_table(out_dir / "mediation.csv", ("effect",) + SUMMARY_HEADER, result.rows())]
    files.append(write_table(
        out_dir / "mediation_probabilities.csv", ("quantity", "value"),
        [("P(mediated > 0)", result.prob_positive), ("P(mediated < 0)", result.prob_reduction),
         ("paired_draws", int(result.paired))],
    ))
    files.append(write_table(
        out_dir / "mediation_draws.csv", ("draw", "total", "partial", "mediated"),
        ((k, a, b, c) for k, (a, b, c) in
         enumerate(zip(result.draws["total"], result.draws["partial"], result.draws["mediated"]))),
    ))
    notes = [f"treatment: {result.treatment}", f"mediator: {result.mediator}", result.caveat]
    for label, post in result.posteriors.items():
        notes.append(f"[{label} model]")
        notes.extend(post.diagnostics.lines())
    files.append(write_lines(out_dir / "notes.txt", notes))
    return files


def write_lagscan(result, out_dir) -> list[Path]:
    """``lagscan.csv`` with one row per lag and covariate."""
    out_dir = Path(out_dir)
    rows = []
    for f in result.fits:
        for name, s in f.coefficients.items():
            rows.append((f.lag, f.mae, f.n_points, name, float(s.mean), float(s.sd), float(s.q2_5),
                         float(s.q50), float(s.q97_5)))
    return [write_table(out_dir / "lagscan.csv", ("lag", "mae", "n_points", "covariate") + SUMMARY_HEADER, rows)]


def write_checks(checks: dict, path) -> Path:
    """Oracle z-scores, one row per check."""
    rows = []
    for suite, items in checks.items():
        for c in items:
            rows.append((suite, c.name, c.estimate, c.target, c.se, c.z))
    return write_table(path, ("suite", "check", "estimate", "target", "se", "z"), rows)
