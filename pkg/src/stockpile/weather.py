"""Weather series handling and the monthly sampling lattice.

Reads timestamped tables of capacity factors and demand, averages them
to block resolution, slices them into July-to-June weather years
stratified by calendar month, and checks the month-to-month
independence assumption with a de-seasonalized autocorrelation
estimate.

Table schema: a ``timestamp`` column (ISO datetimes, uniform spacing)
followed by one column per series. Columns named ``cf_<generator>``
are capacity factors in [0, 1] and feed the matching weather-driven
generator; ``demand`` and ``heat_demand`` are energy per period (GWh);
``cop`` is the heat pump coefficient of performance. Missing
``heat_demand`` defaults to zero and missing ``cop`` to one.

Synthetic lattices assembled directly from weather vectors are
first-class: :meth:`SamplingLattice.from_vectors` skips ingestion
entirely, which is how small test systems are built.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import datetime

import numpy as np

from .errors import (
    DataError,
    GapDetected,
    IndivisibleBlock,
    OutOfRange,
    ParseError,
    PartialYear,
    ZeroVariance,
)
from .model import WeatherVector

CAPACITY_FACTOR_PREFIX = "cf_"
DEMAND_COLUMN = "demand"
HEAT_COLUMN = "heat_demand"
COP_COLUMN = "cop"


@dataclass(frozen=True)
class SeriesTable:
    """Uniformly spaced timestamped series, one array per column."""

    timestamps: np.ndarray
    columns: dict[str, np.ndarray]
    stride_hours: float

    @property
    def n_rows(self) -> int:
        return len(self.timestamps)


def ingest_series(source) -> SeriesTable:
    """Read and validate a delimited series table.

    ``source`` is a path or an open text file. Timestamps must be
    uniformly spaced with no gaps; capacity-factor columns must lie in
    [0, 1] up to 1e-9 slack and are clamped to the interval.
    """
    if hasattr(source, "read"):
        rows = list(csv.reader(source))
    else:
        with open(source, newline="") as fh:
            rows = list(csv.reader(fh))
    if not rows:
        raise ParseError("empty table")
    header = [h.strip() for h in rows[0]]
    if not header or header[0] != "timestamp":
        raise ParseError("first column must be 'timestamp'")
    names = header[1:]
    if len(set(names)) != len(names) or not names:
        raise ParseError("column names must be unique and at least one")
    stamps = []
    data = [[] for _ in names]
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise ParseError(f"row {lineno}: expected {len(header)} fields, "
                             f"got {len(row)}")
        try:
            stamps.append(np.datetime64(row[0].strip().replace(" ", "T"), "s"))
        except ValueError:
            raise ParseError(f"row {lineno}: bad timestamp {row[0]!r}") from None
        for j, cell in enumerate(row[1:]):
            try:
                data[j].append(float(cell))
            except ValueError:
                raise ParseError(
                    f"row {lineno}: bad number {cell!r} in column "
                    f"{names[j]!r}") from None
    if len(stamps) < 2:
        raise ParseError("need at least two rows")
    ts = np.array(stamps, dtype="datetime64[s]")
    diffs = np.diff(ts).astype("timedelta64[s]").astype(np.int64)
    if np.any(diffs <= 0):
        bad = int(np.argmax(diffs <= 0))
        raise GapDetected(f"timestamps not increasing at {ts[bad + 1]}")
    if np.any(diffs != diffs[0]):
        bad = int(np.argmax(diffs != diffs[0]))
        raise GapDetected(
            f"gap between {ts[bad]} and {ts[bad + 1]}: expected stride "
            f"{diffs[0]} s, found {diffs[bad]} s")
    columns = {}
    for name, vals in zip(names, data):
        arr = np.asarray(vals, dtype=float)
        if not np.all(np.isfinite(arr)):
            raise OutOfRange(f"column {name!r} contains non-finite values")
        if name.startswith(CAPACITY_FACTOR_PREFIX):
            if np.any(arr < -1e-9) or np.any(arr > 1 + 1e-9):
                bad = int(np.argmax((arr < -1e-9) | (arr > 1 + 1e-9)))
                raise OutOfRange(
                    f"column {name!r} row {bad + 2}: capacity factor "
                    f"{arr[bad]} outside [0, 1]")
            arr = np.clip(arr, 0.0, 1.0)
        arr.setflags(write=False)
        columns[name] = arr
    return SeriesTable(timestamps=ts, columns=columns,
                       stride_hours=float(diffs[0]) / 3600.0)


def aggregate(table: SeriesTable, block: int) -> SeriesTable:
    """Average consecutive blocks of ``block`` rows into single rows.

    The block must divide the number of samples per day so that block
    boundaries never straddle midnight, and the row count must be a
    whole number of blocks.
    """
    if block < 1:
        raise IndivisibleBlock("block must be >= 1")
    if block == 1:
        return table
    per_day = 24.0 / table.stride_hours
    if abs(per_day - round(per_day)) > 1e-9 or round(per_day) % block != 0:
        raise IndivisibleBlock(
            f"block of {block} does not divide {per_day:g} samples per day")
    if table.n_rows % block != 0:
        raise IndivisibleBlock(
            f"{table.n_rows} rows is not a whole number of {block}-blocks")
    n_out = table.n_rows // block
    columns = {}
    for name, arr in table.columns.items():
        out = arr.reshape(n_out, block).mean(axis=1)
        out.setflags(write=False)
        columns[name] = out
    return SeriesTable(timestamps=table.timestamps[::block].copy(),
                       columns=columns,
                       stride_hours=table.stride_hours * block)


@dataclass(frozen=True)
class SamplingLattice:
    """Per-stage finite sample spaces of weather vectors.

    ``stages[t - 1]`` holds the equiprobable realizations of stage
    ``t``. All realizations of a stage share one period count. Year
    labels, when present, identify which historical year each
    realization came from, aligned across stages.
    """

    stages: tuple
    year_labels: tuple | None = None

    def __post_init__(self):
        stages = tuple(tuple(entry) for entry in self.stages)
        object.__setattr__(self, "stages", stages)
        if not stages:
            raise DataError("lattice needs at least one stage")
        for t, entries in enumerate(stages, start=1):
            if not entries:
                raise DataError(f"stage {t} has no realizations")
            lengths = {v.n_periods for v in entries}
            if len(lengths) != 1:
                raise DataError(
                    f"stage {t} mixes period counts {sorted(lengths)}")
        if self.year_labels is not None:
            labels = tuple(tuple(lab) for lab in self.year_labels)
            object.__setattr__(self, "year_labels", labels)
            if len(labels) != len(stages):
                raise DataError("year labels must cover every stage")
            for t, (entries, labs) in enumerate(zip(stages, labels), start=1):
                if len(labs) != len(entries):
                    raise DataError(f"stage {t} label count mismatch")

    @classmethod
    def from_vectors(cls, stages, year_labels=None) -> "SamplingLattice":
        """Build a lattice straight from per-stage weather vectors."""
        return cls(stages=tuple(tuple(s) for s in stages),
                   year_labels=year_labels)

    @property
    def n_stages(self) -> int:
        return len(self.stages)

    @property
    def path_count(self) -> int:
        """Exact number of distinct sample paths."""
        return math.prod(len(entries) for entries in self.stages)

    def branch_count(self, t: int) -> int:
        return len(self.stages[t - 1])

    def realizations(self, t: int) -> tuple:
        """The sample space of stage ``t`` (1-based)."""
        return self.stages[t - 1]

    def periods(self, t: int) -> int:
        return self.stages[t - 1][0].n_periods


@dataclass(frozen=True)
class WeatherPath:
    """One realization per stage, with its lattice node indices."""

    vectors: tuple
    node_indices: tuple
    year_labels: tuple | None = None

    @property
    def n_stages(self) -> int:
        return len(self.vectors)


def sample_path(lattice: SamplingLattice, rng) -> WeatherPath:
    """Draw one path, one independent uniform node per stage.

    ``rng`` is a :class:`numpy.random.Generator` or a seed for one.
    """
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    idx = tuple(int(rng.integers(len(entries))) for entries in lattice.stages)
    vectors = tuple(lattice.stages[t][i] for t, i in enumerate(idx))
    labels = None
    if lattice.year_labels is not None:
        labels = tuple(lattice.year_labels[t][i] for t, i in enumerate(idx))
    return WeatherPath(vectors=vectors, node_indices=idx, year_labels=labels)


def historical_paths(lattice: SamplingLattice) -> list:
    """All chronological year paths, one per historical year label."""
    if lattice.year_labels is None:
        raise DataError("lattice has no year labels")
    order = list(dict.fromkeys(lattice.year_labels[0]))
    paths = []
    for year in order:
        idx = []
        for t, labs in enumerate(lattice.year_labels, start=1):
            matches = [i for i, lab in enumerate(labs) if lab == year]
            if len(matches) != 1:
                raise DataError(
                    f"year {year!r} has {len(matches)} nodes in stage {t}")
            idx.append(matches[0])
        vectors = tuple(lattice.stages[t][i] for t, i in enumerate(idx))
        paths.append(WeatherPath(vectors=vectors, node_indices=tuple(idx),
                                 year_labels=tuple([year] * len(idx))))
    return paths


def _calendar(table: SeriesTable):
    return [ts.astype("datetime64[s]").item() for ts in table.timestamps]


def build_lattice(table: SeriesTable, first_month: int = 7) -> SamplingLattice:
    """Slice a series table into a month-stratified lattice.

    Weather years run from ``first_month`` (default July) through the
    following June-equivalent; leap days are dropped first so that all
    realizations of a stage share one period count. The table must
    cover each of its years completely.
    """
    cal = _calendar(table)
    keep = [i for i, d in enumerate(cal) if not (d.month == 2 and d.day == 29)]
    cal = [cal[i] for i in keep]
    columns = {name: arr[keep] for name, arr in table.columns.items()}
    if DEMAND_COLUMN not in columns:
        raise DataError(f"table has no {DEMAND_COLUMN!r} column")

    def weather_year(d: datetime) -> int:
        return d.year if d.month >= first_month else d.year - 1

    def stage_of(d: datetime) -> int:
        return (d.month - first_month) % 12

    years = sorted({weather_year(d) for d in cal})
    rows_by = {}
    for i, d in enumerate(cal):
        rows_by.setdefault((weather_year(d), stage_of(d)), []).append(i)
    per_day = round(24.0 / table.stride_hours)
    stages = []
    labels = []
    for s in range(12):
        month = (first_month - 1 + s) % 12 + 1
        entries = []
        labs = []
        expected = None
        for y in years:
            rows = rows_by.get((y, s))
            if rows is None:
                raise PartialYear(
                    f"weather year {y} is missing month {month}")
            days = _month_days(month) * per_day
            if len(rows) != days:
                raise PartialYear(
                    f"weather year {y} month {month} has {len(rows)} rows, "
                    f"expected {days}")
            if expected is None:
                expected = len(rows)
            entries.append(_vector_from_rows(columns, rows,
                                             table.stride_hours))
            labs.append(f"{y}/{(y + 1) % 100:02d}")
        stages.append(tuple(entries))
        labels.append(tuple(labs))
    return SamplingLattice(stages=tuple(stages), year_labels=tuple(labels))


def _month_days(month: int) -> int:
    return (31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31)[month - 1]


def _vector_from_rows(columns, rows, stride_hours) -> WeatherVector:
    idx = np.asarray(rows, dtype=np.intp)
    cf = {name[len(CAPACITY_FACTOR_PREFIX):]: arr[idx]
          for name, arr in columns.items()
          if name.startswith(CAPACITY_FACTOR_PREFIX)}
    n = len(idx)
    heat = columns.get(HEAT_COLUMN)
    cop = columns.get(COP_COLUMN)
    return WeatherVector(
        capacity_factors=cf,
        demand=columns[DEMAND_COLUMN][idx],
        heat_demand=heat[idx] if heat is not None else np.zeros(n),
        heat_pump_cop=cop[idx] if cop is not None else np.ones(n),
        period_hours=stride_hours)


def autocorrelation(values, max_lag: int) -> np.ndarray:
    """Lag-1..max_lag autocorrelations of a single series.

    The lag-k covariance is normalized by (n - k + 1) and divided by
    the full-sample variance.
    """
    x = np.asarray(values, dtype=float)
    x = x - x.mean()
    n = len(x)
    var = float(np.mean(x * x))
    if var <= 0.0:
        raise ZeroVariance("series has zero variance")
    rho = np.empty(max_lag)
    for k in range(1, max_lag + 1):
        if k >= n:
            rho[k - 1] = 0.0
            continue
        rho[k - 1] = float(np.dot(x[k:], x[:-k])) / (n - k + 1) / var
    return rho


@dataclass(frozen=True)
class AcfReport:
    """De-seasonalized autocorrelations per input variable."""

    lags: np.ndarray
    correlations: dict[str, np.ndarray]
    sigma: dict[str, float]
    n_samples: int
    band: float

    def to_table(self) -> str:
        """Render as delimited text: variable, lag, rho, band."""
        lines = ["variable,lag,rho,band"]
        for name, rho in self.correlations.items():
            for k, r in zip(self.lags, rho):
                lines.append(f"{name},{int(k)},{r:.6f},{self.band:.6f}")
        return "\n".join(lines) + "\n"


def stage_means(table: SeriesTable, stage_length: str = "month",
                first_month: int = 7):
    """Per-(year, stage) mean of every column, de-seasonalized.

    Stages are calendar months or consecutive 7-day blocks of the
    weather year (the last block absorbs the remainder days). The
    cross-year mean of each stage is subtracted, so the result is the
    deviation from the seasonal norm, ordered chronologically.

    Returns ``(keys, deviations)`` where keys are (year, stage) pairs.
    """
    if stage_length not in ("month", "week"):
        raise ValueError(f"unknown stage length {stage_length!r}")
    full = _calendar(table)
    keep = [i for i, d in enumerate(full)
            if not (d.month == 2 and d.day == 29)]
    cal = [full[i] for i in keep]
    columns = {name: arr[keep] for name, arr in table.columns.items()}

    def weather_year(d: datetime) -> int:
        return d.year if d.month >= first_month else d.year - 1

    groups = {}
    for i, d in enumerate(cal):
        y = weather_year(d)
        if stage_length == "month":
            s = (d.month - first_month) % 12
        else:
            start = datetime(y, first_month, 1)
            s = min((d - start).days // 7, 51)
        groups.setdefault((y, s), []).append(i)
    years = sorted({y for y, _ in groups})
    if len(years) < 3:
        raise PartialYear("need at least three weather years")
    keys = sorted(groups)
    means = {name: np.array([arr[groups[k]].mean() for k in keys])
             for name, arr in columns.items()}
    n_stage = max(s for _, s in keys) + 1
    deviations = {}
    for name, vals in means.items():
        out = vals.copy()
        for s in range(n_stage):
            mask = np.array([k[1] == s for k in keys])
            if mask.any():
                out[mask] -= out[mask].mean()
        deviations[name] = out
    return keys, deviations


def acf_test(table: SeriesTable, stage_length: str = "month",
             max_lag: int = 12, first_month: int = 7) -> AcfReport:
    """Autocorrelation of de-seasonalized stage means per variable.

    Small values inside the ±2/sqrt(n) band support treating stages as
    independent draws.
    """
    keys, deviations = stage_means(table, stage_length, first_month)
    n = len(keys)
    correlations = {}
    sigma = {}
    for name, vals in deviations.items():
        sd = float(np.std(vals))
        if sd <= 0.0:
            raise ZeroVariance(f"column {name!r} has zero variance")
        correlations[name] = autocorrelation(vals, max_lag)
        sigma[name] = sd
    return AcfReport(lags=np.arange(1, max_lag + 1),
                     correlations=correlations, sigma=sigma, n_samples=n,
                     band=2.0 / math.sqrt(n))
