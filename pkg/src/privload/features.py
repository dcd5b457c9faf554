"""
Calendar and temperature regressors.

Benchmark recipe (vanilla GEFCom 2012 linear model), dummy-coded with one
reference level dropped per class.  Column groups, in order:

    trend                         1   days since the model origin
    month          (ref Jan)     11
    day of week    (ref Mon)      6
    hour           (ref 00)      23
    day x hour     (ref Mon 00) 167   7 * 24 cells minus the reference
    T, T^2, T^3                   3
    T^j x month    (ref Jan)     33
    T^j x hour     (ref 00)      69
                                ---
                                313

Day-of-week and hour main effects are kept next to the full day x hour
interaction.  They lie in its span, so the matrix has rank 285 with the
intercept; the count of 313 explanatory columns is what the benchmark is
specified by, and the minimum-norm least-squares fit absorbs the redundancy
without changing any prediction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from privload.errors import CoverageError
from privload.series import TemperatureSeries, as_hours

BENCHMARK_COLUMNS = 313

GROUPS = (
    "trend",
    "month",
    "dow",
    "hour",
    "dow_x_hour",
    "temp_poly",
    "temp_x_month",
    "temp_x_hour",
)


@dataclass(frozen=True)
class FeatureRecipe:
    name: str
    groups: tuple[str, ...]

    def __post_init__(self):
        unknown = set(self.groups) - set(GROUPS)
        if unknown:
            raise ValueError(f"unknown feature groups: {sorted(unknown)}")

    @property
    def n_columns(self) -> int:
        return len(column_names(self))

    @property
    def uses_temperature(self) -> bool:
        return any(g.startswith("temp") for g in self.groups)


BENCHMARK = FeatureRecipe("gefcom2012-benchmark", GROUPS)
CONSTANT = FeatureRecipe("constant", ())

RECIPES = {r.name: r for r in (BENCHMARK, CONSTANT)}


def calendar_parts(timestamps) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(month 1-12, day of week with Monday=0, hour 0-23) for each timestamp."""
    ts = as_hours(timestamps)
    days = ts.astype("datetime64[D]")
    hour = (ts - days.astype("datetime64[h]")).astype(int)
    # 1970-01-01 was a Thursday
    dow = (days.astype(np.int64) + 3) % 7
    month = days.astype("datetime64[M]").astype(np.int64) % 12 + 1
    return month, dow, hour


def column_names(recipe: FeatureRecipe) -> list[str]:
    names: list[str] = []
    for g in recipe.groups:
        if g == "trend":
            names.append("trend")
        elif g == "month":
            names += [f"month[{m}]" for m in range(2, 13)]
        elif g == "dow":
            names += [f"dow[{d}]" for d in range(1, 7)]
        elif g == "hour":
            names += [f"hour[{h}]" for h in range(1, 24)]
        elif g == "dow_x_hour":
            names += [f"dow[{d}]:hour[{h}]" for d in range(7) for h in range(24) if (d, h) != (0, 0)]
        elif g == "temp_poly":
            names += ["T", "T^2", "T^3"]
        elif g == "temp_x_month":
            names += [f"T^{j}:month[{m}]" for j in (1, 2, 3) for m in range(2, 13)]
        elif g == "temp_x_hour":
            names += [f"T^{j}:hour[{h}]" for j in (1, 2, 3) for h in range(1, 24)]
    return names


def _dummies(codes: np.ndarray, levels: int) -> np.ndarray:
    out = np.zeros((codes.size, levels))
    out[np.arange(codes.size), codes] = 1.0
    return out[:, 1:]


def temperature_values(timestamps, temperature) -> np.ndarray:
    """Temperatures aligned to ``timestamps``; a gap anywhere raises CoverageError."""
    ts = as_hours(timestamps)
    if isinstance(temperature, TemperatureSeries):
        values = temperature.lookup(ts)
        label = f"station {temperature.station_id}"
    else:
        values = np.asarray(temperature, dtype=float)
        label = "temperature array"
        if values.shape != ts.shape:
            raise CoverageError(f"{label} has {values.size} values for {ts.size} timestamps")
    missing = np.isnan(values)
    if missing.any():
        first = ts[np.argmax(missing)]
        raise CoverageError(f"{label} has no reading for {int(missing.sum())} timestamps (first {first})")
    return values


def build_features(timestamps, temperature, recipe: FeatureRecipe = BENCHMARK, origin=None) -> np.ndarray:
    """Design matrix (rows = timestamps, no intercept column) for ``recipe``.

    ``origin`` anchors the trend (days since origin); defaults to the first
    timestamp.  ``temperature`` is a TemperatureSeries or an aligned array and
    may be ``None`` for recipes without temperature groups.
    """
    ts = as_hours(timestamps)
    month, dow, hour = calendar_parts(ts)
    temp = temperature_values(ts, temperature) if recipe.uses_temperature else None
    if origin is None:
        origin = ts[0] if ts.size else np.datetime64("1970-01-01T00", "h")
    origin = np.datetime64(origin, "h")

    blocks = []
    powers = None
    if temp is not None:
        powers = np.stack([temp, temp**2, temp**3], axis=1)
    for g in recipe.groups:
        if g == "trend":
            blocks.append(((ts - origin).astype(np.int64) / 24.0)[:, None])
        elif g == "month":
            blocks.append(_dummies(month - 1, 12))
        elif g == "dow":
            blocks.append(_dummies(dow, 7))
        elif g == "hour":
            blocks.append(_dummies(hour, 24))
        elif g == "dow_x_hour":
            blocks.append(_dummies(dow * 24 + hour, 168))
        elif g == "temp_poly":
            blocks.append(powers)
        elif g == "temp_x_month":
            m = _dummies(month - 1, 12)
            blocks.append(np.hstack([m * powers[:, [j]] for j in range(3)]))
        elif g == "temp_x_hour":
            h = _dummies(hour, 24)
            blocks.append(np.hstack([h * powers[:, [j]] for j in range(3)]))
    if not blocks:
        return np.zeros((ts.size, 0))
    return np.hstack(blocks)
