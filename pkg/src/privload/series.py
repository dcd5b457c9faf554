"""Hourly series containers: loads (kW) and temperatures."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

HOUR = np.timedelta64(1, "h")


def as_hours(timestamps) -> np.ndarray:
    """Coerce timestamps to ``datetime64[h]``, rejecting sub-hour components."""
    raw = np.asarray(timestamps)
    if raw.dtype.kind != "M":
        raw = raw.astype("datetime64[s]")
    hours = raw.astype("datetime64[h]")
    if raw.size and not np.array_equal(hours.astype(raw.dtype), raw):
        raise ValueError("timestamps must fall on whole hours")
    return hours


def _validate(entity, timestamps, values):
    if timestamps.ndim != 1 or values.ndim != 1:
        raise ValueError(f"{entity}: timestamps and values must be one-dimensional")
    if timestamps.shape != values.shape:
        raise ValueError(
            f"{entity}: {len(timestamps)} timestamps but {len(values)} values"
        )
    if timestamps.size > 1 and not np.all(np.diff(timestamps) > np.timedelta64(0, "h")):
        raise ValueError(f"{entity}: timestamps must be strictly increasing")


@dataclass(frozen=True, eq=False)
class LoadSeries:
    """Hourly load readings in kW for one household, zone or region.

    NaN marks a missing reading. Perturbed series may be negative.
    """

    entity_id: str
    timestamps: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        ts = as_hours(self.timestamps)
        vals = np.asarray(self.values, dtype=float)
        _validate(self.entity_id, ts, vals)
        object.__setattr__(self, "entity_id", str(self.entity_id))
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return len(self.values)

    @property
    def gaps(self) -> np.ndarray:
        return np.isnan(self.values)

    def with_values(self, values, entity_id=None) -> "LoadSeries":
        return LoadSeries(entity_id or self.entity_id, self.timestamps, values)

    def window(self, start=None, end=None) -> "LoadSeries":
        """Sub-series with ``start <= t < end`` (either bound optional)."""
        mask = np.ones(len(self), dtype=bool)
        if start is not None:
            mask &= self.timestamps >= np.datetime64(start, "h")
        if end is not None:
            mask &= self.timestamps < np.datetime64(end, "h")
        return LoadSeries(self.entity_id, self.timestamps[mask], self.values[mask])


@dataclass(frozen=True, eq=False)
class TemperatureSeries:
    """Hourly temperature readings for one weather station, unit carried as given."""

    station_id: str
    timestamps: np.ndarray
    values: np.ndarray
    unit: str = "F"

    def __post_init__(self):
        ts = as_hours(self.timestamps)
        vals = np.asarray(self.values, dtype=float)
        _validate(self.station_id, ts, vals)
        object.__setattr__(self, "station_id", str(self.station_id))
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return len(self.values)

    @property
    def entity_id(self) -> str:
        return self.station_id

    def lookup(self, timestamps) -> np.ndarray:
        """Values at ``timestamps``; NaN where the station has no reading."""
        ts = as_hours(timestamps)
        idx = np.searchsorted(self.timestamps, ts)
        idx_clipped = np.minimum(idx, max(len(self.timestamps) - 1, 0))
        out = np.full(ts.shape, np.nan)
        if len(self.timestamps):
            hit = self.timestamps[idx_clipped] == ts
            out[hit] = self.values[idx_clipped[hit]]
        return out


def station_sort_key(station_id: str):
    """Numeric ids sort numerically ("2" < "10"); others lexicographically after them."""
    try:
        return (0, int(station_id), "")
    except ValueError:
        return (1, 0, station_id)
