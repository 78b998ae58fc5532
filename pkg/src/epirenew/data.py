"""
Region data and delimited-text ingestion.

File formats (comma separated, header row required, ISO-8601 dates):

* observations: ``region,date,type,value`` with nonnegative integer values;
  one row per region/date/type, missing rows are masked days.
* covariates: ``region,date,covariate,value``; every region must provide the
  same covariates for every day of its window.
* populations: ``region,population``.
"""

from __future__ import annotations

import csv
import datetime as dt
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class IngestError(ValueError):
    """Input files violate the documented schema."""


class GapWarning(UserWarning):
    """Observation days are missing and will be masked."""


@dataclass
class RegionSeries:
    """Daily data for one region, days ``1..T`` starting at ``start``."""

    region: str
    start: dt.date
    T: int
    population: float | None = None
    covariates: dict = field(default_factory=dict)
    counts: dict = field(default_factory=dict)
    masks: dict = field(default_factory=dict)

    def __post_init__(self):
        for name, col in self.covariates.items():
            col = np.asarray(col, dtype=float)
            if col.shape != (self.T,):
                raise ValueError(f"covariate {name!r} must have length T={self.T}")
            self.covariates[name] = col
        for name, c in self.counts.items():
            c = np.asarray(c)
            if c.shape != (self.T,):
                raise ValueError(f"series {name!r} must have length T={self.T}")
            mask = np.asarray(self.masks.get(name, np.ones(self.T, bool)), bool)
            obs = c[mask]
            if np.any(obs < 0):
                raise ValueError(f"negative counts in {name!r}")
            self.counts[name] = np.where(mask, c, 0).astype(np.int64)
            self.masks[name] = mask

    @property
    def dates(self) -> list:
        return [self.start + dt.timedelta(days=k) for k in range(self.T)]

    def observed(self, name):
        return self.counts[name], self.masks[name]


@dataclass
class IngestReport:
    rows_read: int = 0
    regions: tuple = ()
    masked_days: dict = field(default_factory=dict)

    def lines(self) -> list[str]:
        out = [f"rows read: {self.rows_read}", f"regions: {', '.join(self.regions)}"]
        for key, n in sorted(self.masked_days.items()):
            out.append(f"masked days {key}: {n}")
        return out


def _parse_date(text, where):
    try:
        return dt.date.fromisoformat(text.strip())
    except ValueError:
        raise IngestError(f"{where}: bad ISO-8601 date {text!r}") from None


def _read_rows(path, header):
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            head = next(reader)
        except StopIteration:
            raise IngestError(f"{path}: no rows") from None
        head = [h.strip() for h in head]
        if head != list(header):
            raise IngestError(f"{path}: expected header {','.join(header)}, got {','.join(head)}")
        rows = [r for r in reader if any(x.strip() for x in r)]
    if not rows:
        raise IngestError(f"{path}: no rows")
    for k, r in enumerate(rows, start=2):
        if len(r) != len(header):
            raise IngestError(f"{path}:{k}: expected {len(header)} fields, got {len(r)}")
    return rows


def _parse_count(text, where):
    try:
        val = float(text)
    except ValueError:
        raise IngestError(f"{where}: value {text!r} is not a number") from None
    if not np.isfinite(val) or val != round(val):
        raise IngestError(f"{where}: count {text!r} is not an integer")
    if val < 0:
        raise IngestError(f"{where}: negative count {text!r}")
    return int(val)


def ingest(observations, covariates=None, populations=None):
    """Read and validate region data.

    Returns
    -------
    regions : list of RegionSeries
        Sorted by region id. Each region's window runs from its first to its
        last observation date.
    report : IngestReport
    """
    obs_rows = _read_rows(observations, ("region", "date", "type", "value"))
    report = IngestReport(rows_read=len(obs_rows))
    table: dict = {}
    for k, (region, date, typ, value) in enumerate(obs_rows, start=2):
        where = f"{observations}:{k}"
        region, typ = region.strip(), typ.strip()
        d = _parse_date(date, where)
        key = (region, d, typ)
        if key in table:
            raise IngestError(f"{where}: duplicate row for region={region} date={d} type={typ}")
        table[key] = _parse_count(value, where)

    regions = sorted({r for r, _, _ in table})
    types = sorted({t for _, _, t in table})
    windows = {}
    for r in regions:
        ds = [d for (rr, d, _) in table if rr == r]
        windows[r] = (min(ds), max(ds))

    cov = {r: {} for r in regions}
    if covariates is not None:
        cov_rows = _read_rows(covariates, ("region", "date", "covariate", "value"))
        report.rows_read += len(cov_rows)
        for k, (region, date, name, value) in enumerate(cov_rows, start=2):
            where = f"{covariates}:{k}"
            region, name = region.strip(), name.strip()
            if region not in cov:
                continue
            d = _parse_date(date, where)
            slot = cov[region].setdefault(name, {})
            if d in slot:
                raise IngestError(f"{where}: duplicate covariate row {region}/{d}/{name}")
            try:
                slot[d] = float(value)
            except ValueError:
                raise IngestError(f"{where}: covariate value {value!r} is not a number") from None
        schemas = {r: set(cov[r]) for r in regions}
        all_names = set().union(*schemas.values()) if schemas else set()
        for r in regions:
            missing = sorted(all_names - schemas[r])
            if missing:
                raise IngestError(f"region {r!r} is missing covariate column(s): {', '.join(missing)}")

    pops = {}
    if populations is not None:
        for k, (region, pop) in enumerate(_read_rows(populations, ("region", "population")), start=2):
            try:
                val = float(pop)
            except ValueError:
                raise IngestError(f"{populations}:{k}: population {pop!r} is not a number") from None
            if not val > 0:
                raise IngestError(f"{populations}:{k}: population must be positive")
            pops[region.strip()] = val
        report.rows_read += len(pops)

    out = []
    for r in regions:
        start, end = windows[r]
        T = (end - start).days + 1
        days = [start + dt.timedelta(days=k) for k in range(T)]
        counts, masks = {}, {}
        for typ in types:
            present = [(r, d, typ) in table for d in days]
            if not any(present):
                continue
            c = np.array([table.get((r, d, typ), 0) for d in days], dtype=np.int64)
            m = np.array(present, bool)
            n_missing = int((~m).sum())
            if n_missing:
                warnings.warn(f"region {r}: {n_missing} missing {typ} day(s) masked", GapWarning, stacklevel=2)
                report.masked_days[f"{r}/{typ}"] = n_missing
            counts[typ], masks[typ] = c, m
        cdict = {}
        for name, slot in sorted(cov[r].items()):
            missing = [d for d in days if d not in slot]
            if missing:
                raise IngestError(
                    f"region {r!r}: covariate {name!r} missing on {len(missing)} day(s), first {missing[0]}"
                )
            cdict[name] = np.array([slot[d] for d in days])
        out.append(RegionSeries(r, start, T, pops.get(r), cdict, counts, masks))
    report.regions = tuple(regions)
    return out, report


def write_observations(regions, path, types=None) -> None:
    """Write observed (unmasked) counts as ``region,date,type,value`` rows."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["region", "date", "type", "value"])
        for reg in regions:
            for typ in sorted(reg.counts):
                if types is not None and typ not in types:
                    continue
                c, m = reg.observed(typ)
                for d, x, keep in zip(reg.dates, c, m):
                    if keep:
                        w.writerow([reg.region, d.isoformat(), typ, int(x)])


def write_covariates(regions, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["region", "date", "covariate", "value"])
        for reg in regions:
            for name in sorted(reg.covariates):
                for d, x in zip(reg.dates, reg.covariates[name]):
                    w.writerow([reg.region, d.isoformat(), name, repr(float(x))])


def write_populations(regions, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["region", "population"])
        for reg in regions:
            if reg.population is not None:
                w.writerow([reg.region, repr(float(reg.population))])
