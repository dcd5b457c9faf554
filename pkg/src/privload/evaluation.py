"""
Forecast error metrics, utility of perturbed hierarchical forecasting, and the
privacy-utility sweep.

A sweep fits a direct forecast on the unperturbed regional aggregate once per
method, then for every noise scale and seed perturbs the zone training data,
fits the hierarchical forecast, and scores it against the held-out horizon.
Privacy columns come from :mod:`privload.privacy` and depend only on
(lambda, delta_f, k, delta_tilde).
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from privload.errors import AlignmentError, DomainError
from privload.forecasting import METHODS, forecast_direct, forecast_hierarchical
from privload.ingest import sensitivity_catalog
from privload.metering import aggregate_region, perturb_zones
from privload.privacy import DEFAULT_DELTA_TILDE, PrivacyParams, compose_k_fold
from privload.series import LoadSeries, as_hours

logger = logging.getLogger(__name__)

DEFAULT_LAMBDAS = (0.0, 1e4, 10**4.75, 1e5)
UTILITY_LIMIT_KW = 12_000.0
REPORT_FORMAT = "privload/sweep-report"
REPORT_VERSION = 1


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ErrorReport:
    mae: float
    mape: float
    horizon: int


def _aligned(forecast, actual) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
    f_ts = getattr(forecast, "timestamps", None)
    a_ts = getattr(actual, "timestamps", None)
    f = np.asarray(getattr(forecast, "values", forecast), dtype=float)
    a = np.asarray(getattr(actual, "values", actual), dtype=float)
    if f.shape != a.shape:
        raise AlignmentError(f"forecast has {f.size} points, actual has {a.size}")
    if f_ts is not None and a_ts is not None and not np.array_equal(as_hours(f_ts), as_hours(a_ts)):
        raise AlignmentError("forecast and actual horizons differ",
                             getattr(actual, "entity_id", None))
    if f.size == 0:
        raise DomainError("cannot score an empty horizon")
    ts = as_hours(a_ts) if a_ts is not None else None
    if np.isnan(a).any():
        where = ts[np.argmax(np.isnan(a))] if ts is not None else int(np.argmax(np.isnan(a)))
        raise DomainError(f"actual load missing at {where}")
    return f, a, ts


def mae(forecast, actual) -> float:
    """Mean absolute error in the units of the load (kW)."""
    f, a, _ = _aligned(forecast, actual)
    return float(np.mean(np.abs(f - a)))


def mape(forecast, actual) -> float:
    """Mean absolute percentage error as a fraction; a zero actual is an error."""
    f, a, ts = _aligned(forecast, actual)
    zero = a == 0
    if zero.any():
        where = ts[np.argmax(zero)] if ts is not None else int(np.argmax(zero))
        raise ZeroDivisionError(f"MAPE undefined: actual load is zero at {where}")
    return float(np.mean(np.abs((f - a) / a)))


def error_report(forecast, actual) -> ErrorReport:
    return ErrorReport(mae(forecast, actual), mape(forecast, actual), len(np.atleast_1d(
        getattr(actual, "values", actual))))


def utility(mae_direct: float, mae_lambda: float) -> float:
    """Relative MAE gain of the (perturbed) hierarchical forecast over the direct one.

    Negative when the hierarchical forecast is worse.
    """
    if not mae_direct > 0:
        raise DomainError(f"direct MAE must be positive, got {mae_direct!r}")
    return (mae_direct - mae_lambda) / mae_direct


# ---------------------------------------------------------------------------
# Privacy table
# ---------------------------------------------------------------------------


def privacy_columns(lam: float, delta_f: float, k: int, delta_tilde: float = DEFAULT_DELTA_TILDE,
                    delta: float = 0.0) -> dict:
    params = PrivacyParams(lam, delta_f, delta)
    g = compose_k_fold(params.epsilon, delta, k, delta_tilde)
    return {
        "epsilon": params.epsilon,
        "epsilon_tilde": g.epsilon_tilde,
        "rho": g.rho,
        "delta_total": g.delta_total,
    }


def privacy_table(lambdas: Sequence[float], delta_fs: Sequence[float], k: int,
                  delta_tilde: float = DEFAULT_DELTA_TILDE, delta: float = 0.0) -> list[dict]:
    """Privacy rows for every positive lambda x delta_f, sorted by (lambda, delta_f)."""
    rows = []
    for lam in sorted(set(lambdas)):
        if lam == 0:
            continue
        for df in sorted(set(delta_fs)):
            rows.append({"lambda": lam, "delta_f": df, "k": k,
                         **privacy_columns(lam, df, k, delta_tilde, delta)})
    return rows


# ---------------------------------------------------------------------------
# Sweep
# ---------------------------------------------------------------------------


@dataclass
class SweepConfig:
    lambdas: Sequence[float] = DEFAULT_LAMBDAS
    delta_fs: Sequence[float] = field(default_factory=lambda: sensitivity_catalog().values)
    methods: Sequence[str] = ("benchmark",)
    seeds: Sequence[int] = (0,)
    horizon_hours: int = 168
    horizon_start: str | None = None
    k: int | None = None
    delta: float = 0.0
    delta_tilde: float = DEFAULT_DELTA_TILDE
    temperature_mode: str = "forecast"
    utility_limit_kw: float | None = UTILITY_LIMIT_KW
    jobs: int = 1

    def __post_init__(self):
        self.lambdas = [float(x) for x in self.lambdas]
        self.delta_fs = [float(x) for x in self.delta_fs]
        self.methods = list(self.methods)
        self.seeds = [int(s) for s in self.seeds]
        if not self.lambdas or not self.delta_fs or not self.methods or not self.seeds:
            raise DomainError("lambdas, delta_fs, methods and seeds must all be non-empty")
        if any(x < 0 for x in self.lambdas):
            raise DomainError("noise scales must be >= 0")
        if any(not x > 0 for x in self.delta_fs):
            raise DomainError("sensitivities must be > 0")
        bad = set(self.methods) - set(METHODS)
        if bad:
            raise DomainError(f"unknown methods {sorted(bad)}; choose from {METHODS}")
        if not 0 < self.delta_tilde <= 1:
            raise DomainError("delta_tilde must lie in (0, 1]")
        if self.horizon_hours < 1:
            raise DomainError("horizon_hours must be >= 1")
        if self.k is not None and self.k < 1:
            raise DomainError("k must be >= 1")


@dataclass
class SweepReport:
    rows: list[dict]
    methods: list[str]
    k: int
    train_hours: int
    horizon: list[str]
    config: dict
    failed_cells: int = 0
    total_cells: int = 0

    # -- columns ----------------------------------------------------------

    def columns(self) -> list[str]:
        cols = ["lambda", "delta_f", "epsilon", "epsilon_tilde", "rho", "delta_total", "k", "seeds"]
        for m in self.methods:
            cols += [f"{m}_mae_direct", f"{m}_mae_mean", f"{m}_mae_median", f"{m}_mae_min",
                     f"{m}_mae_max", f"{m}_mape_mean", f"{m}_utility"]
        return cols + ["errors"]

    # -- serialisation ----------------------------------------------------

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = self.columns()
        w.writerow(cols)
        for row in self.rows:
            w.writerow([_csv_cell(row.get(c)) for c in cols])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "format": REPORT_FORMAT,
            "version": REPORT_VERSION,
            "methods": self.methods,
            "k": self.k,
            "train_hours": self.train_hours,
            "horizon": self.horizon,
            "failed_cells": self.failed_cells,
            "total_cells": self.total_cells,
            "config": self.config,
            "rows": self.rows,
        }

    def to_json(self) -> str:
        return json.dumps(_json_safe(self.to_dict()), indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, doc: dict) -> "SweepReport":
        if doc.get("format") != REPORT_FORMAT:
            raise ValueError("not a sweep report document")
        return cls(rows=doc["rows"], methods=doc["methods"], k=doc["k"],
                   train_hours=doc["train_hours"], horizon=doc["horizon"], config=doc["config"],
                   failed_cells=doc.get("failed_cells", 0), total_cells=doc.get("total_cells", 0))

    def plot_data(self) -> str:
        """Long-format ``series,x,y`` rows (x = lambda) for external plotting."""
        points: dict[tuple[str, float], float] = {}
        limit = self.config.get("utility_limit_kw")
        baseline = {m: None for m in self.methods}
        for row in self.rows:
            if row["lambda"] == 0:
                for m in self.methods:
                    baseline[m] = row.get(f"{m}_mae_mean")
        for row in self.rows:
            lam = row["lambda"]
            for m in self.methods:
                for key, series in ((f"{m}_mae_mean", f"mae_hierarchical:{m}"),
                                    (f"{m}_mae_direct", f"mae_direct:{m}"),
                                    (f"{m}_utility", f"utility:{m}")):
                    if row.get(key) is not None:
                        points[(series, lam)] = row[key]
                if limit is not None and baseline[m] is not None:
                    points[(f"utility_limit:{m}", lam)] = baseline[m] + limit
            if row.get("rho") is not None:
                points[(f"rho:delta_f={row['delta_f']!r}", lam)] = row["rho"]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["series", "x", "y"])
        for (series, x), y in sorted(points.items()):
            w.writerow([series, repr(float(x)), repr(float(y))])
        return buf.getvalue()

    def write(self, out_dir) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {"csv": out / "sweep.csv", "json": out / "sweep.json", "plot": out / "plot_data.csv"}
        paths["csv"].write_text(self.to_csv(), encoding="utf-8")
        paths["json"].write_text(self.to_json(), encoding="utf-8")
        paths["plot"].write_text(self.plot_data(), encoding="utf-8")
        return paths


def _csv_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, list):
        return "; ".join(str(x) for x in v)
    return str(v)


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def split_horizon(zones: Sequence[LoadSeries], config: SweepConfig):
    """(training zones, horizon timestamps) from the configured horizon."""
    region = aggregate_region(zones)
    ts = region.timestamps
    if config.horizon_start is not None:
        start = np.datetime64(config.horizon_start, "h")
        horizon = ts[(ts >= start)][: config.horizon_hours]
        if horizon.size < config.horizon_hours:
            raise DomainError(f"data ends before {config.horizon_hours} horizon hours from {start}")
    else:
        if ts.size <= config.horizon_hours:
            raise DomainError("not enough data for the requested horizon")
        horizon = ts[-config.horizon_hours:]
    train = [z.window(end=horizon[0]) for z in zones]
    return train, horizon, region


def _fmt_lambda(lam: float) -> str:
    return f"{lam:g}"


def run_sweep(config: SweepConfig, zones: Sequence[LoadSeries], temperatures) -> SweepReport:
    """Privacy-utility sweep over ``config.lambdas`` x ``config.seeds`` x ``config.methods``.

    Every (lambda > 0, seed, method) cell is an independent job; a failing cell
    is recorded in its rows' ``errors`` column and the sweep carries on.
    """
    zones = sorted(zones, key=lambda z: z.entity_id)
    train, horizon, region = split_horizon(zones, config)
    actual = region.values[np.isin(region.timestamps, horizon)]
    actual_series = LoadSeries(region.entity_id, horizon, actual)
    region_train = region.window(end=horizon[0])
    train_hours = int((~region_train.gaps).sum())
    k = config.k if config.k is not None else train_hours

    def hierarchical(method, lam, seed):
        data = perturb_zones(train, lam, seed)
        result = forecast_hierarchical(data, temperatures, horizon, method, lam=lam,
                                       temperature_mode=config.temperature_mode)
        return mae(result, actual_series), mape(result, actual_series)

    direct: dict[str, float | None] = {}
    direct_errors: dict[str, str] = {}
    for m in config.methods:
        try:
            res = forecast_direct(region_train, temperatures, horizon, m,
                                  temperature_mode=config.temperature_mode)
            direct[m] = mae(res, actual_series)
        except Exception as exc:  # noqa: BLE001 - recorded per row
            logger.error("direct %s forecast failed: %s", m, exc)
            direct[m], direct_errors[m] = None, f"direct {m}: {exc}"

    cells = [(m, 0.0, None) for m in config.methods]
    cells += [(m, lam, s) for lam in sorted(set(config.lambdas)) if lam > 0
              for s in config.seeds for m in config.methods]

    def run_cell(cell):
        m, lam, seed = cell
        try:
            return cell, hierarchical(m, lam, 0 if seed is None else seed), None
        except Exception as exc:  # noqa: BLE001 - recorded per row
            logger.error("cell method=%s lambda=%g seed=%s failed: %s", m, lam, seed, exc)
            return cell, None, f"{m} lambda={_fmt_lambda(lam)} seed={seed}: {exc}"

    if config.jobs > 1:
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            outcomes = list(pool.map(run_cell, cells))
    else:
        outcomes = [run_cell(c) for c in cells]

    scores: dict[tuple[str, float], list[tuple[float, float]]] = {}
    errors: dict[float, list[str]] = {}
    for (m, lam, _seed), score, err in outcomes:
        if err is not None:
            errors.setdefault(lam, []).append(err)
        else:
            scores.setdefault((m, lam), []).append(score)
    failed = sum(1 for *_x, err in outcomes if err is not None)

    lam_values = [0.0] + [lam for lam in sorted(set(config.lambdas)) if lam > 0]
    rows = []
    for lam in lam_values:
        method_cols = {}
        for m in config.methods:
            got = scores.get((m, lam), [])
            maes = np.array([s[0] for s in got])
            mean = float(maes.mean()) if got else None
            method_cols.update({
                f"{m}_mae_direct": direct[m],
                f"{m}_mae_mean": mean,
                f"{m}_mae_median": float(np.median(maes)) if got else None,
                f"{m}_mae_min": float(maes.min()) if got else None,
                f"{m}_mae_max": float(maes.max()) if got else None,
                f"{m}_mape_mean": float(np.mean([s[1] for s in got])) if got else None,
                f"{m}_utility": (utility(direct[m], mean)
                                 if got and direct[m] not in (None, 0.0) else None),
            })
        row_errors = list(direct_errors.values()) + errors.get(lam, [])
        seeds_used = 1 if lam == 0 else len(config.seeds)
        if lam == 0:
            rows.append({"lambda": 0.0, "delta_f": None, "epsilon": None, "epsilon_tilde": None,
                         "rho": None, "delta_total": None, "k": k, "seeds": seeds_used,
                         **method_cols, "errors": row_errors})
            continue
        for df in sorted(set(config.delta_fs)):
            rows.append({"lambda": lam, "delta_f": df, "k": k, "seeds": seeds_used,
                         **privacy_columns(lam, df, k, config.delta_tilde, config.delta),
                         **method_cols, "errors": row_errors})

    cfg = asdict(config)
    cfg.pop("jobs")  # execution detail; must not change report bytes
    return SweepReport(rows=rows, methods=list(config.methods), k=k, train_hours=train_hours,
                       horizon=[str(t) for t in horizon], config=_json_safe(cfg),
                       failed_cells=failed + len(direct_errors), total_cells=len(cells) + len(config.methods))


# ---------------------------------------------------------------------------
# Presentation
# ---------------------------------------------------------------------------


def _fixed(v, digits: int) -> str:
    return "—" if v is None else f"{v:.{digits}f}"


def render_table(report: SweepReport) -> str:
    """Plain-text privacy-utility table.

    epsilon is shown to 5 decimals, epsilon-tilde and rho to 2, utility in
    percent to 2; stored values keep full precision.
    """
    header = ["lambda", "delta_f [kW]", "epsilon", "eps_tilde", "rho"]
    header += [f"u {m} [%]" for m in report.methods]
    lines = [header]
    for row in report.rows:
        cells = [
            f"{row['lambda']:,.0f}",
            _fixed(row.get("delta_f"), 2),
            _fixed(row.get("epsilon"), 5),
            _fixed(row.get("epsilon_tilde"), 2),
            _fixed(row.get("rho"), 2),
        ]
        for m in report.methods:
            u = row.get(f"{m}_utility")
            cells.append(_fixed(None if u is None else 100.0 * u, 2))
        lines.append(cells)
    widths = [max(len(r[i]) for r in lines) for i in range(len(header))]
    out = ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in lines]
    out.insert(1, "  ".join("-" * w for w in widths))
    note = f"k = {report.k:,} releases; utility is independent of delta_f and repeats per lambda."
    return "\n".join(out + ["", note]) + "\n"
