"""
GEFCom-style CSV ingestion, zone statistics and the sensitivity catalog.

Wide files carry one row per entity-day::

    zone_id,year,month,day,h1,...,h24        (loads, kW)
    station_id,year,month,day,h1,...,h24     (temperatures)

Column ``h1`` is the hour starting at 00:00.  Numbers may be quoted and use
comma thousands separators (``"3,417"``); a blank cell is a missing reading.
The canonical long format written back out is ``entity_id,timestamp_iso8601,value``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from privload.errors import DomainError, OrderingError, ParseError
from privload.series import LoadSeries, TemperatureSeries, as_hours, station_sort_key

HOUR_COLUMNS = [f"h{i}" for i in range(1, 25)]
ID_COLUMN = {"load": "zone_id", "temperature": "station_id"}
LONG_HEADER = ["entity_id", "timestamp_iso8601", "value"]


def _parse_number(cell: str) -> float:
    text = cell.strip().replace(",", "")
    if text == "":
        return math.nan
    value = float(text)
    if not math.isfinite(value):
        raise ValueError(f"non-finite value {cell!r}")
    return value


def _expected_header(kind: str) -> list[str]:
    return [ID_COLUMN[kind], "year", "month", "day", *HOUR_COLUMNS]


def parse_wide_csv(path, kind: str = "load"):
    """Unpivot a wide GEFCom-style CSV into hourly series.

    Parameters
    ----------
    path : path-like
        The CSV file.
    kind : {"load", "temperature"}
        Selects the id column name and the returned series type.

    Returns
    -------
    list of LoadSeries or TemperatureSeries
        One per entity, ordered by entity id (numeric ids numerically).

    Raises
    ------
    ParseError
        Bad header or malformed row, with the 1-based line number.
    OrderingError
        An entity's dates are not strictly increasing in file order.
    """
    if kind not in ID_COLUMN:
        raise DomainError(f"kind must be 'load' or 'temperature', got {kind!r}")
    path = Path(path)
    expected = _expected_header(kind)
    per_entity: dict[str, tuple[list, list]] = {}
    last_date: dict[str, np.datetime64] = {}

    with path.open(newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("file is empty, header row missing", path, 1) from None
        header = [h.strip() for h in header]
        if header != expected:
            raise ParseError(
                f"unexpected header; want {','.join(expected[:5])},...,h24", path, 1
            )
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(expected):
                raise ParseError(f"expected {len(expected)} fields, got {len(row)}", path, line)
            entity = row[0].strip()
            if not entity:
                raise ParseError("empty entity id", path, line)
            try:
                y, m, d = (int(c.strip()) for c in row[1:4])
                day = np.datetime64(f"{y:04d}-{m:02d}-{d:02d}", "D")
            except ValueError as exc:
                raise ParseError(f"bad date fields: {exc}", path, line) from None
            if day.astype(object).month != m or day.astype(object).day != d:
                raise ParseError(f"invalid calendar date {y}-{m}-{d}", path, line)
            try:
                values = [_parse_number(c) for c in row[4:]]
            except ValueError as exc:
                raise ParseError(f"bad hourly value: {exc}", path, line) from None
            prev = last_date.get(entity)
            if prev is not None and day <= prev:
                raise OrderingError(
                    f"{ID_COLUMN[kind]} {entity}: date {day} does not follow {prev}", path, line
                )
            last_date[entity] = day
            days, vals = per_entity.setdefault(entity, ([], []))
            days.append(day)
            vals.append(values)

    out = []
    for entity in sorted(per_entity, key=station_sort_key):
        days, vals = per_entity[entity]
        start = np.array(days, dtype="datetime64[D]").astype("datetime64[h]")
        ts = (start[:, None] + np.arange(24).astype("timedelta64[h]")).ravel()
        flat = np.asarray(vals, dtype=float).ravel()
        if kind == "load":
            out.append(LoadSeries(entity, ts, flat))
        else:
            out.append(TemperatureSeries(entity, ts, flat))
    return out


def pivot_wide(series) -> tuple[list[tuple[str, int, int, int]], np.ndarray]:
    """Re-pivot hourly series to ``(keys, matrix)`` with one 24-column row per day.

    Hours absent from a series become NaN in the matrix.
    """
    keys, rows = [], []
    for s in series:
        days = s.timestamps.astype("datetime64[D]")
        hours = (s.timestamps - days.astype("datetime64[h]")).astype(int)
        uniq, inverse = np.unique(days, return_inverse=True)
        block = np.full((len(uniq), 24), np.nan)
        block[inverse, hours] = s.values
        for day, row in zip(uniq, block):
            dt = day.astype(object)
            keys.append((s.entity_id, dt.year, dt.month, dt.day))
            rows.append(row)
    return keys, np.asarray(rows).reshape(-1, 24)


def _format_value(v: float) -> str:
    return "" if math.isnan(v) else repr(float(v))


def write_wide_csv(series, path, kind: str = "load") -> None:
    keys, matrix = pivot_wide(series)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(_expected_header(kind))
        for (entity, y, m, d), row in zip(keys, matrix):
            w.writerow([entity, y, m, d, *(_format_value(v) for v in row)])


def write_long_csv(series, path) -> None:
    """Write series in the canonical long format; missing readings are blank."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LONG_HEADER)
        for s in series:
            for t, v in zip(s.timestamps, s.values):
                w.writerow([s.entity_id, f"{t.astype('datetime64[s]')}", _format_value(v)])


def read_long_csv(path, kind: str = "load"):
    """Read the canonical long format back into series (entity order preserved)."""
    path = Path(path)
    grouped: dict[str, tuple[list, list]] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != LONG_HEADER:
            raise ParseError(f"expected header {','.join(LONG_HEADER)}", path, 1)
        for row in reader:
            if not row:
                continue
            if len(row) != 3:
                raise ParseError(f"expected 3 fields, got {len(row)}", path, reader.line_num)
            try:
                ts = np.datetime64(row[1].strip(), "h")
                val = _parse_number(row[2])
            except ValueError as exc:
                raise ParseError(str(exc), path, reader.line_num) from None
            t_list, v_list = grouped.setdefault(row[0].strip(), ([], []))
            t_list.append(ts)
            v_list.append(val)
    cls = LoadSeries if kind == "load" else TemperatureSeries
    out = []
    for entity, (t_list, v_list) in grouped.items():
        try:
            out.append(cls(entity, np.array(t_list, dtype="datetime64[h]"), v_list))
        except ValueError as exc:
            raise OrderingError(str(exc), path, None) from None
    return out


def read_series(path, kind: str = "load"):
    """Read either layout, choosing by the header row."""
    with Path(path).open(encoding="utf-8-sig") as fh:
        first = fh.readline()
    if first.strip().startswith("entity_id"):
        return read_long_csv(path, kind)
    return parse_wide_csv(path, kind)


# ---------------------------------------------------------------------------
# Statistics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ZoneStatistics:
    entity_id: str
    count: int
    gaps: int
    mean: float
    minimum: float
    q1: float
    median: float
    q3: float
    maximum: float
    outliers: int
    outlier_floor: float | None

    def as_row(self) -> dict:
        return {
            "entity_id": self.entity_id,
            "count": self.count,
            "gaps": self.gaps,
            "mean": self.mean,
            "min": self.minimum,
            "q1": self.q1,
            "median": self.median,
            "q3": self.q3,
            "max": self.maximum,
            "outliers": self.outliers,
            "outlier_floor": "" if self.outlier_floor is None else self.outlier_floor,
        }


def zone_statistics(series: LoadSeries, outlier_floor: float | None = None) -> ZoneStatistics:
    """Five-number summary plus mean, ignoring missing readings.

    Quartiles interpolate linearly between order statistics.  Readings strictly
    below ``outlier_floor`` are counted as outliers (e.g. metering dropouts).
    """
    observed = series.values[~series.gaps]
    if observed.size == 0:
        raise DomainError(f"{series.entity_id}: no readings to summarise")
    q1, med, q3 = np.percentile(observed, [25, 50, 75], method="linear")
    outliers = 0 if outlier_floor is None else int(np.sum(observed < outlier_floor))
    return ZoneStatistics(
        entity_id=series.entity_id,
        count=int(observed.size),
        gaps=int(series.gaps.sum()),
        mean=float(observed.mean()),
        minimum=float(observed.min()),
        q1=float(q1),
        median=float(med),
        q3=float(q3),
        maximum=float(observed.max()),
        outliers=outliers,
        outlier_floor=outlier_floor,
    )


def write_statistics_csv(stats: Iterable[ZoneStatistics], path) -> None:
    stats = list(stats)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(ZoneStatistics.as_row(stats[0]).keys()) if stats
                           else ["entity_id"], lineterminator="\n")
        w.writeheader()
        for s in stats:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in s.as_row().items()})


# ---------------------------------------------------------------------------
# Sensitivities
# ---------------------------------------------------------------------------


def fused_peak_power_kw(
    voltage: float = 230.0, overvoltage: float = 1.10, fuse_current: float = 63.0, phases: int = 3
) -> float:
    """Peak power a fused residential connection can draw, in kW.

    The German default (230 V, +10 %, 63 A, three phases) gives 47.817 kW,
    which the catalog rounds to 48 kW.
    """
    return voltage * overvoltage * fuse_current * phases / 1000.0


@dataclass(frozen=True)
class SensitivityEntry:
    delta_f: float
    label: str
    rationale: str


@dataclass(frozen=True)
class SensitivityCatalog:
    entries: tuple[SensitivityEntry, ...]

    def __post_init__(self):
        labels = [e.label for e in self.entries]
        if len(set(labels)) != len(labels):
            raise DomainError("sensitivity labels must be unique")
        if any(not e.delta_f > 0 for e in self.entries):
            raise DomainError("sensitivities must be positive")

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)

    @property
    def values(self) -> list[float]:
        return [e.delta_f for e in self.entries]

    def by_label(self, label: str) -> SensitivityEntry:
        for e in self.entries:
            if e.label == label:
                return e
        raise KeyError(label)


_CATALOG = SensitivityCatalog(
    (
        SensitivityEntry(7.57, "90th percentile hourly peak",
                         "90th percentile of the highest hourly power demand per household (CER data)"),
        SensitivityEntry(10.05, "99th percentile hourly peak",
                         "99th percentile of the highest hourly power demand per household (CER data)"),
        SensitivityEntry(15.36, "highest recorded hourly demand",
                         "highest hourly power demand in the whole CER data set"),
        SensitivityEntry(48.00, "German fused maximum",
                         "230 V x 1.10 x 63 A x 3 phases, rounded to 48 kW"),
    )
)


def sensitivity_catalog() -> SensitivityCatalog:
    """The four household sensitivities (kW) used for privacy accounting."""
    return _CATALOG


def entity_ids(series: Sequence) -> list[str]:
    return [s.entity_id for s in series]


__all__ = [
    "HOUR_COLUMNS",
    "SensitivityCatalog",
    "SensitivityEntry",
    "ZoneStatistics",
    "as_hours",
    "entity_ids",
    "fused_peak_power_kw",
    "parse_wide_csv",
    "pivot_wide",
    "read_long_csv",
    "read_series",
    "sensitivity_catalog",
    "write_long_csv",
    "write_statistics_csv",
    "write_wide_csv",
    "zone_statistics",
]
