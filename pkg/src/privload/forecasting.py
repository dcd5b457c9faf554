"""
Load forecasting: the GEFCom 2012 benchmark regression, the segmented
(hour x season x day-type) regression, temperature forecasting, weather-station
selection, and direct vs. hierarchical regional forecasts.
"""

from __future__ import annotations

import datetime as dt
import json
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from privload.errors import CoverageError, DomainError
from privload.features import (
    BENCHMARK,
    RECIPES,
    FeatureRecipe,
    build_features,
    calendar_parts,
    temperature_values,
)
from privload.series import LoadSeries, TemperatureSeries, as_hours, station_sort_key

logger = logging.getLogger(__name__)

_warned: set[str] = set()
_warned_lock = threading.Lock()


def _warn_once(message: str) -> None:
    # sweeps refit the same zone many times; repeat identical warnings at debug level
    with _warned_lock:
        first = message not in _warned
        _warned.add(message)
    logger.log(logging.WARNING if first else logging.DEBUG, "%s", message)

METHODS = ("benchmark", "segmented")
MODEL_FORMAT = "privload/forecast-model"
MODEL_VERSION = 1
SEGMENT_PARAMETERS = 9
REGION = "REGION"


# ---------------------------------------------------------------------------
# Least squares
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OLSFit:
    coefficients: np.ndarray
    rank: int


def fit_ols(X, y) -> np.ndarray:
    """Minimum-norm least-squares coefficients of ``y ~ X``.

    Uses a thin SVD with numpy's default singular-value cutoff, followed by one
    step of iterative refinement on the residual.  The refinement step lies in
    the row space of ``X``, so the minimum-norm property is kept.
    """
    return _ols(X, y).coefficients


def _ols(X, y) -> OLSFit:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0 or X.shape[1] == 0:
        raise DomainError(f"design matrix must be non-empty 2-D, got shape {X.shape}")
    if y.shape != (X.shape[0],):
        raise DomainError(f"targets have shape {y.shape}, design has {X.shape[0]} rows")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise DomainError("design matrix and targets must be finite")
    U, s, Vt = np.linalg.svd(X, full_matrices=False)
    cutoff = np.finfo(float).eps * max(X.shape) * (s[0] if s.size else 0.0)
    keep = s > cutoff
    inv = np.zeros_like(s)
    inv[keep] = 1.0 / s[keep]

    def solve(rhs):
        return Vt.T @ (inv * (U.T @ rhs))

    beta = solve(y)
    beta = beta + solve(y - X @ beta)
    return OLSFit(beta, int(keep.sum()))


# ---------------------------------------------------------------------------
# Segmentation for the segmented model
# ---------------------------------------------------------------------------

# meteorological quarters: 1 = Dec-Feb, 2 = Mar-May, 3 = Jun-Aug, 4 = Sep-Nov
METEOROLOGICAL_SEASONS = (1, 1, 2, 2, 2, 3, 3, 3, 4, 4, 4, 1)
WEEKEND = (5, 6)


@dataclass(frozen=True)
class Segmentation:
    season_of_month: tuple[int, ...] = METEOROLOGICAL_SEASONS
    weekend_days: tuple[int, ...] = WEEKEND

    def __post_init__(self):
        if len(self.season_of_month) != 12:
            raise DomainError("season_of_month needs one entry per month")

    @property
    def seasons(self) -> tuple[int, ...]:
        return tuple(sorted(set(self.season_of_month)))

    def labels(self) -> list[str]:
        return [
            segment_label(h, s, w)
            for h in range(24)
            for s in self.seasons
            for w in ("weekday", "weekend")
        ]

    def assign(self, timestamps) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(hour, season, is_weekend) for each timestamp."""
        month, dow, hour = calendar_parts(timestamps)
        season = np.asarray(self.season_of_month)[month - 1]
        weekend = np.isin(dow, self.weekend_days)
        return hour, season, weekend

    def season_start(self, day: np.datetime64) -> np.datetime64:
        """First day of the season containing ``day`` (may be in the previous year)."""
        month = day.astype("datetime64[M]")
        season = self.season_of_month[int(month.astype(np.int64) % 12)]
        for _ in range(11):
            prev = month - np.timedelta64(1, "M")
            if self.season_of_month[int(prev.astype(np.int64) % 12)] != season:
                break
            month = prev
        return month.astype("datetime64[D]")


def segment_label(hour: int, season: int, weekend) -> str:
    daytype = weekend if isinstance(weekend, str) else ("weekend" if weekend else "weekday")
    return f"h{int(hour):02d}-s{int(season)}-{daytype}"


def segmented_regressors(timestamps, temperature, origin, segmentation: Segmentation) -> np.ndarray:
    """Nine columns: 1, T, T^2, T^3, d, d^2, d_s, d_s*T, d_s*T^2.

    ``d`` is the day index since ``origin``; ``d_s`` the day index within the
    current season.
    """
    ts = as_hours(timestamps)
    temp = np.asarray(temperature, dtype=float)
    days = ts.astype("datetime64[D]")
    d = (days - np.datetime64(origin, "D")).astype(np.int64).astype(float)
    uniq, inverse = np.unique(days, return_inverse=True)
    starts = np.array([segmentation.season_start(u) for u in uniq], dtype="datetime64[D]")
    d_s = (days - starts[inverse]).astype(np.int64).astype(float)
    return np.column_stack(
        [np.ones(ts.size), temp, temp**2, temp**3, d, d**2, d_s, d_s * temp, d_s * temp**2]
    )


# ---------------------------------------------------------------------------
# Models
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ForecastModel:
    """A fitted per-entity regression.

    ``coefficients`` maps a sub-model label to its vector: the benchmark has a
    single entry ``"all"`` (intercept first), the segmented model one entry per
    (hour, season, day-type) segment.  Segments too small to fit are listed in
    ``fallbacks`` with the constant they predict.
    """

    zone_id: str
    kind: str
    coefficients: dict[str, np.ndarray]
    chosen_station: str | None
    origin: np.datetime64
    recipe: FeatureRecipe = BENCHMARK
    segmentation: Segmentation = field(default_factory=Segmentation)
    fallbacks: dict[str, float] = field(default_factory=dict)
    training_mean: float = 0.0
    training_abs_error: float = 0.0

    @property
    def segment_count(self) -> int:
        return len(self.coefficients) + len(self.fallbacks)

    def predict(self, timestamps, temperature) -> np.ndarray:
        """Point forecasts for ``timestamps`` given aligned temperatures (array or series)."""
        ts = as_hours(timestamps)
        if self.kind == "benchmark":
            X = build_features(ts, temperature, self.recipe, origin=self.origin)
            return self.coefficients["all"][0] + X @ self.coefficients["all"][1:]
        temp = temperature_values(ts, temperature)
        Z = segmented_regressors(ts, temp, self.origin, self.segmentation)
        labels = _segment_labels(self.segmentation, ts)
        out = np.empty(ts.size)
        for label in np.unique(labels):
            rows = labels == label
            beta = self.coefficients.get(label)
            if beta is not None:
                out[rows] = Z[rows] @ beta
            else:
                out[rows] = self.fallbacks.get(label, self.training_mean)
        return out


def _training_rows(loads: LoadSeries) -> tuple[np.ndarray, np.ndarray]:
    keep = ~loads.gaps
    if not keep.any():
        raise DomainError(f"{loads.entity_id}: no training readings")
    return loads.timestamps[keep], loads.values[keep]


def _fit_benchmark_on(loads, temperature, recipe, station_id) -> ForecastModel:
    ts, y = _training_rows(loads)
    origin = ts[0]
    X = build_features(ts, temperature, recipe, origin=origin)
    A = np.hstack([np.ones((ts.size, 1)), X])
    beta = fit_ols(A, y)
    resid = y - A @ beta
    return ForecastModel(
        zone_id=loads.entity_id,
        kind="benchmark",
        coefficients={"all": beta},
        chosen_station=station_id,
        origin=origin,
        recipe=recipe,
        training_mean=float(y.mean()),
        training_abs_error=float(np.abs(resid).sum()),
    )


def _segment_labels(segmentation: Segmentation, timestamps) -> np.ndarray:
    hour, season, weekend = segmentation.assign(timestamps)
    codes = (hour * 100 + season) * 2 + weekend
    uniq, inverse = np.unique(codes, return_inverse=True)
    names = np.array([segment_label(c // 200, (c // 2) % 100, c % 2) for c in uniq])
    return names[inverse]


def _fit_segmented_on(loads, temperature, segmentation, station_id) -> ForecastModel:
    ts, y = _training_rows(loads)
    temp = temperature_values(ts, temperature)
    origin = ts[0]
    Z = segmented_regressors(ts, temp, origin, segmentation)
    labels = _segment_labels(segmentation, ts)
    overall = float(y.mean())
    coefficients: dict[str, np.ndarray] = {}
    fallbacks: dict[str, float] = {}
    abs_error = 0.0
    for label in segmentation.labels():
        rows = labels == label
        count = int(rows.sum())
        if count < SEGMENT_PARAMETERS:
            value = float(y[rows].mean()) if count else overall
            fallbacks[label] = value
            abs_error += float(np.abs(y[rows] - value).sum())
            continue
        beta = fit_ols(Z[rows], y[rows])
        coefficients[label] = beta
        abs_error += float(np.abs(y[rows] - Z[rows] @ beta).sum())
    if fallbacks:
        _warn_once(
            f"{loads.entity_id} (station {station_id}): {len(fallbacks)} of "
            f"{len(segmentation.labels())} segments have fewer than {SEGMENT_PARAMETERS} "
            f"training rows and predict their training mean (e.g. {next(iter(fallbacks))})"
        )
    return ForecastModel(
        zone_id=loads.entity_id,
        kind="segmented",
        coefficients=coefficients,
        chosen_station=station_id,
        origin=origin,
        recipe=BENCHMARK,
        segmentation=segmentation,
        fallbacks=fallbacks,
        training_mean=overall,
        training_abs_error=abs_error,
    )


def _fit_on(method, loads, station: TemperatureSeries | None, recipe, segmentation) -> ForecastModel:
    sid = station.station_id if station is not None else None
    if method == "benchmark":
        return _fit_benchmark_on(loads, station, recipe, sid)
    if method == "segmented":
        if station is None:
            raise CoverageError("the segmented model needs a temperature station")
        return _fit_segmented_on(loads, station, segmentation, sid)
    raise DomainError(f"unknown method {method!r}; choose from {METHODS}")


def _select(method, loads, stations, recipe, segmentation) -> ForecastModel:
    stations = sorted(stations, key=lambda s: station_sort_key(s.station_id))
    if method == "benchmark" and not recipe.uses_temperature:
        return _fit_on(method, loads, None, recipe, segmentation)
    if not stations:
        raise DomainError("at least one candidate station is required")
    best = None
    for st in stations:
        model = _fit_on(method, loads, st, recipe, segmentation)
        # strict < keeps the lowest id on ties
        if best is None or model.training_abs_error < best.training_abs_error:
            best = model
    logger.info("%s: selected station %s for %s", loads.entity_id, best.chosen_station, method)
    return best


def select_station(loads: LoadSeries, stations: Sequence[TemperatureSeries],
                   recipe: FeatureRecipe = BENCHMARK, method: str = "benchmark") -> str:
    """Station whose fitted model has the smallest sum of absolute training residuals.

    Ties go to the lowest station id.
    """
    return _select(method, loads, stations, recipe, Segmentation()).chosen_station


def fit_benchmark(loads: LoadSeries, temperatures: Sequence[TemperatureSeries],
                  recipe: FeatureRecipe = BENCHMARK) -> ForecastModel:
    """One benchmark regression for a zone, on its best-fitting weather station."""
    return _select("benchmark", loads, temperatures, recipe, Segmentation())


def fit_segmented(loads: LoadSeries, temperatures: Sequence[TemperatureSeries],
                  segmentation: Segmentation | None = None) -> ForecastModel:
    """One nine-parameter regression per (hour, season, day-type) segment.

    The weather station is selected by the same training-error rule as the
    benchmark.
    """
    return _select("segmented", loads, temperatures, BENCHMARK, segmentation or Segmentation())


def fit_model(method: str, loads: LoadSeries, temperatures: Sequence[TemperatureSeries],
              recipe: FeatureRecipe = BENCHMARK, segmentation: Segmentation | None = None) -> ForecastModel:
    if method == "benchmark":
        return fit_benchmark(loads, temperatures, recipe)
    if method == "segmented":
        return fit_segmented(loads, temperatures, segmentation)
    raise DomainError(f"unknown method {method!r}; choose from {METHODS}")


# ---------------------------------------------------------------------------
# Temperature forecasting
# ---------------------------------------------------------------------------


def forecast_temperature(history: TemperatureSeries, horizon, years: int = 4) -> TemperatureSeries:
    """Average of the same (month, day, hour) over the preceding ``years`` years.

    Fewer available samples are averaged as they are; Feb 29 only matches
    earlier Feb 29 readings.  No sample at all raises CoverageError.
    """
    ts = as_hours(horizon)
    out = np.empty(ts.size)
    for i, t in enumerate(ts):
        moment = t.astype(dt.datetime)
        samples = []
        for back in range(1, years + 1):
            try:
                past = moment.replace(year=moment.year - back)
            except ValueError:  # Feb 29 in a non-leap year
                continue
            samples.append(np.datetime64(past, "h"))
        vals = history.lookup(np.array(samples, dtype="datetime64[h]")) if samples else np.array([])
        vals = vals[~np.isnan(vals)]
        if vals.size == 0:
            raise CoverageError(
                f"station {history.station_id}: no readings at {moment:%m-%d %H}:00 in the "
                f"{years} years before {t}"
            )
        out[i] = vals.mean()
    return TemperatureSeries(history.station_id, ts, out, history.unit)


def horizon_temperature(model: ForecastModel, temperatures: Sequence[TemperatureSeries],
                        horizon, mode: str = "forecast"):
    """Temperatures the model should see over ``horizon``.

    ``"forecast"`` averages past years from history strictly before the horizon;
    ``"observed"`` uses the recorded values (e.g. for backtesting with known weather).
    """
    ts = as_hours(horizon)
    if model.chosen_station is None:
        return None
    station = next((s for s in temperatures if s.station_id == model.chosen_station), None)
    if station is None:
        raise CoverageError(f"station {model.chosen_station} not among the supplied temperatures")
    if mode == "observed":
        return station
    if mode == "forecast":
        past = station.timestamps < ts.min()
        history = TemperatureSeries(station.station_id, station.timestamps[past],
                                    station.values[past], station.unit)
        return forecast_temperature(history, ts).values
    raise DomainError(f"temperature mode must be 'forecast' or 'observed', got {mode!r}")


# ---------------------------------------------------------------------------
# Direct and hierarchical regional forecasts
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ForecastResult:
    entity_id: str
    timestamps: np.ndarray
    values: np.ndarray
    mode: str
    method: str
    lam: float = 0.0
    components: dict[str, np.ndarray] = field(default_factory=dict)
    models: dict[str, ForecastModel] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.values) != len(self.timestamps):
            raise ValueError("forecast values and horizon differ in length")


def forecast_zone(loads: LoadSeries, temperatures, horizon, method: str,
                  temperature_mode: str = "forecast", recipe: FeatureRecipe = BENCHMARK,
                  segmentation: Segmentation | None = None) -> tuple[ForecastModel, np.ndarray]:
    model = fit_model(method, loads, temperatures, recipe, segmentation)
    temp = horizon_temperature(model, temperatures, horizon, temperature_mode)
    return model, model.predict(horizon, temp)


def forecast_direct(regional_history: LoadSeries, temperatures, horizon, method: str,
                    temperature_mode: str = "forecast", recipe: FeatureRecipe = BENCHMARK,
                    segmentation: Segmentation | None = None) -> ForecastResult:
    """Fit ``method`` on the regional aggregate itself and forecast the horizon."""
    ts = as_hours(horizon)
    model, values = forecast_zone(regional_history, temperatures, ts, method,
                                  temperature_mode, recipe, segmentation)
    return ForecastResult(regional_history.entity_id, ts, values, "direct", method,
                          models={model.zone_id: model})


def forecast_hierarchical(zone_histories: Sequence[LoadSeries], temperatures, horizon, method: str,
                          lam: float = 0.0, temperature_mode: str = "forecast",
                          recipe: FeatureRecipe = BENCHMARK,
                          segmentation: Segmentation | None = None,
                          jobs: int = 1, region_id: str = REGION) -> ForecastResult:
    """Forecast every zone separately and add the zone forecasts.

    The sum is folded in zone-id order so the result is reproducible bit for
    bit.  ``lam`` records the noise scale of the training data.
    """
    ts = as_hours(horizon)
    zones = sorted(zone_histories, key=lambda z: station_sort_key(z.entity_id))
    if not zones:
        raise DomainError("hierarchical forecasting needs at least one zone")

    def run(z):
        return forecast_zone(z, temperatures, ts, method, temperature_mode, recipe, segmentation)

    if jobs > 1 and len(zones) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run, zones))
    else:
        results = [run(z) for z in zones]

    components = {}
    models = {}
    total = None
    for z, (model, values) in zip(zones, results):
        components[z.entity_id] = values
        models[z.entity_id] = model
        total = values.copy() if total is None else total + values
    return ForecastResult(region_id, ts, total, "hierarchical", method, float(lam),
                          components=components, models=models)


# ---------------------------------------------------------------------------
# Serialisation
# ---------------------------------------------------------------------------


def model_to_dict(model: ForecastModel) -> dict:
    return {
        "zone_id": model.zone_id,
        "kind": model.kind,
        "recipe": {"name": model.recipe.name, "groups": list(model.recipe.groups)},
        "segmentation": {
            "season_of_month": list(model.segmentation.season_of_month),
            "weekend_days": list(model.segmentation.weekend_days),
        },
        "origin": str(model.origin),
        "chosen_station": model.chosen_station,
        "coefficients": {k: [float(x) for x in v] for k, v in model.coefficients.items()},
        "fallbacks": dict(model.fallbacks),
        "training_mean": model.training_mean,
        "training_abs_error": model.training_abs_error,
    }


def model_from_dict(doc: dict) -> ForecastModel:
    recipe = doc["recipe"]
    known = RECIPES.get(recipe["name"])
    if known is None or list(known.groups) != list(recipe["groups"]):
        known = FeatureRecipe(recipe["name"], tuple(recipe["groups"]))
    seg = doc.get("segmentation") or {}
    return ForecastModel(
        zone_id=doc["zone_id"],
        kind=doc["kind"],
        coefficients={k: np.asarray(v, dtype=float) for k, v in doc["coefficients"].items()},
        chosen_station=doc.get("chosen_station"),
        origin=np.datetime64(doc["origin"], "h"),
        recipe=known,
        segmentation=Segmentation(
            tuple(seg.get("season_of_month", METEOROLOGICAL_SEASONS)),
            tuple(seg.get("weekend_days", WEEKEND)),
        ),
        fallbacks={k: float(v) for k, v in doc.get("fallbacks", {}).items()},
        training_mean=float(doc.get("training_mean", 0.0)),
        training_abs_error=float(doc.get("training_abs_error", 0.0)),
    )


def save_models(models: Sequence[ForecastModel], path) -> None:
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "models": [model_to_dict(m) for m in models],
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


def load_models(path) -> list[ForecastModel]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != MODEL_FORMAT:
        raise ValueError(f"{path}: not a forecast-model document")
    if doc.get("version") != MODEL_VERSION:
        raise ValueError(f"{path}: unsupported model version {doc.get('version')!r}")
    return [model_from_dict(m) for m in doc["models"]]
