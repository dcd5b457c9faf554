"""
Command-line interface.

Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.
Log lines go to stderr; data goes to stdout or files.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from privload import ingest
from privload.config import ConfigError, load_config, resolve_data_path
from privload.errors import AlignmentError, CoverageError, DomainError, ParseError
from privload.evaluation import SweepReport, privacy_columns, render_table, run_sweep
from privload.forecasting import (
    METHODS,
    REGION,
    fit_model,
    horizon_temperature,
    load_models,
    save_models,
)
from privload.metering import aggregate_region, perturb_zones
from privload.privacy import DEFAULT_DELTA_TILDE

logger = logging.getLogger("privload.cli")

USAGE_ERRORS = (DomainError, ParseError, AlignmentError, CoverageError, ConfigError)


class UsageError(Exception):
    pass


def _setup_logging(verbosity: int) -> None:
    level = logging.WARNING - 10 * verbosity
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("level=%(levelname)s module=%(name)s msg=%(message)s"))
    root = logging.getLogger("privload")
    root.handlers[:] = [handler]
    root.setLevel(max(level, logging.DEBUG))
    root.propagate = False


def _path(raw: str) -> Path:
    return resolve_data_path(raw)


def _load_zones(path):
    return ingest.read_series(_path(path), "load")


def _load_temps(path):
    return ingest.read_series(_path(path), "temperature")


def _select_zones(zones, wanted):
    if not wanted:
        return zones
    by_id = {z.entity_id: z for z in zones}
    missing = [w for w in wanted if w not in by_id]
    if missing:
        raise UsageError(f"unknown zone ids: {', '.join(missing)}")
    return [by_id[w] for w in wanted]


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_ingest(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    zones = ingest.parse_wide_csv(_path(args.loads), "load")
    ingest.write_long_csv(zones, out / "loads_long.csv")
    stats = [ingest.zone_statistics(z, args.outlier_floor) for z in zones]
    ingest.write_statistics_csv(stats, out / "zone_statistics.csv")
    written = ["loads_long.csv", "zone_statistics.csv"]
    if args.temperatures:
        temps = ingest.parse_wide_csv(_path(args.temperatures), "temperature")
        ingest.write_long_csv(temps, out / "temperatures_long.csv")
        written.append("temperatures_long.csv")
    for name in written:
        print(out / name)
    return 0


def cmd_stats(args) -> int:
    zones = _select_zones(_load_zones(args.loads), args.zone)
    series = list(zones)
    if args.region:
        series.append(aggregate_region(zones))
    rows = [ingest.zone_statistics(s, args.outlier_floor).as_row() for s in series]
    w = csv.DictWriter(sys.stdout, fieldnames=list(rows[0].keys()), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return 0


def cmd_fit(args) -> int:
    zones = _select_zones(_load_zones(args.loads), args.zone)
    temps = _load_temps(args.temperatures)
    if args.train_end:
        zones = [z.window(end=args.train_end) for z in zones]
    targets = [aggregate_region(zones)] if args.direct else zones
    models = []
    for z in targets:
        logger.info("fitting %s model for %s", args.method, z.entity_id)
        models.append(fit_model(args.method, z, temps))
    save_models(models, args.out)
    for m in models:
        print(f"{m.zone_id}\t{m.kind}\tstation={m.chosen_station}\tsegments={m.segment_count}")
    return 0


def cmd_perturb(args) -> int:
    zones = _select_zones(_load_zones(args.loads), args.zone)
    noisy = perturb_zones(zones, args.lam, args.seed)
    ingest.write_long_csv(noisy, args.out)
    print(args.out)
    return 0


def cmd_forecast(args) -> int:
    models = load_models(_path(args.model))
    temps = _load_temps(args.temperatures)
    start = np.datetime64(args.start, "h")
    horizon = start + np.arange(args.hours).astype("timedelta64[h]")
    rows = []
    total = None
    for m in models:
        temp = horizon_temperature(m, temps, horizon, args.temperature_mode)
        values = m.predict(horizon, temp)
        rows.append((m.zone_id, values))
        total = values.copy() if total is None else total + values
    if args.hierarchical and len(models) > 1:
        rows.append((REGION, total))
    out = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(ingest.LONG_HEADER)
        for entity, values in rows:
            for t, v in zip(horizon, values):
                w.writerow([entity, str(t.astype("datetime64[s]")), repr(float(v))])
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_account(args) -> int:
    cols = privacy_columns(args.lam, args.delta_f, args.k, args.delta_tilde, args.delta)
    row = {"lambda": args.lam, "delta_f": args.delta_f, "k": args.k,
           "delta_tilde": args.delta_tilde, **cols}
    if args.json:
        print(json.dumps(row, sort_keys=True))
        return 0
    if args.precise:
        shown = {k: repr(v) if isinstance(v, float) else str(v) for k, v in row.items()}
    else:
        shown = {
            "lambda": f"{args.lam:g}",
            "delta_f": f"{args.delta_f:.2f}",
            "k": str(args.k),
            "delta_tilde": f"{args.delta_tilde:g}",
            "epsilon": f"{cols['epsilon']:.5f}",
            "epsilon_tilde": f"{cols['epsilon_tilde']:.2f}",
            "rho": f"{cols['rho']:.2f}",
            "delta_total": f"{cols['delta_total']:.3g}",
        }
    print(",".join(shown))
    print(",".join(shown.values()))
    return 0


def cmd_sweep(args) -> int:
    overrides = {
        "seeds": args.seed,
        "methods": args.method,
        "lambdas": args.lam,
        "delta_fs": args.delta_f,
        "k": args.k,
        "jobs": args.jobs,
        "horizon_hours": args.horizon_hours,
    }
    cfg = load_config(args.config, overrides)
    out = Path(args.out) if args.out else (cfg.output or Path("sweep-out"))
    zones = ingest.read_series(cfg.loads, "load")
    temps = ingest.read_series(cfg.temperatures, "temperature")
    report = run_sweep(cfg.sweep, zones, temps)
    paths = report.write(out)
    for p in paths.values():
        print(p)
    if report.total_cells and report.failed_cells == report.total_cells:
        logger.error("every sweep cell failed")
        return 1
    return 0


def cmd_report(args) -> int:
    doc = json.loads(Path(args.input).read_text(encoding="utf-8"))
    report = SweepReport.from_dict(doc)
    if args.format == "csv":
        sys.stdout.write(report.to_csv())
    elif args.format == "plot":
        sys.stdout.write(report.plot_data())
    else:
        sys.stdout.write(render_table(report))
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _positive_float(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {text}")
    return v


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {text}")
    return v


def _seed(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"seed must be >= 0, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="privload", description=__doc__.strip().splitlines()[0])
    p.add_argument("-v", "--verbose", action="count", default=0, help="more log output (repeatable)")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("ingest", help="convert wide GEFCom CSVs to canonical long CSVs + statistics")
    s.add_argument("--loads", required=True)
    s.add_argument("--temperatures")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--outlier-floor", type=float)
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("stats", help="zone statistics (mean, quartiles, outliers)")
    s.add_argument("--loads", required=True)
    s.add_argument("--zone", action="append")
    s.add_argument("--region", action="store_true", help="also summarise the regional sum")
    s.add_argument("--outlier-floor", type=float)
    s.set_defaults(func=cmd_stats)

    s = sub.add_parser("fit", help="fit per-zone (or direct regional) forecast models")
    s.add_argument("--loads", required=True)
    s.add_argument("--temperatures", required=True)
    s.add_argument("--method", choices=METHODS, default="benchmark")
    s.add_argument("--zone", action="append")
    s.add_argument("--train-end", help="exclusive end of the training window (ISO timestamp)")
    s.add_argument("--direct", action="store_true", help="fit one model on the regional sum")
    s.add_argument("--out", required=True, help="model JSON path")
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("perturb", help="add zone-level Laplace noise (sum of household gamma shares)")
    s.add_argument("--loads", required=True)
    s.add_argument("--lambda", dest="lam", type=_positive_float, required=True)
    s.add_argument("--seed", type=_seed, required=True)
    s.add_argument("--zone", action="append")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_perturb)

    s = sub.add_parser("forecast", help="forecast a horizon from fitted models")
    s.add_argument("--model", required=True)
    s.add_argument("--temperatures", required=True)
    s.add_argument("--start", required=True, help="first horizon hour (ISO)")
    s.add_argument("--hours", type=_positive_int, default=168)
    s.add_argument("--temperature-mode", choices=("forecast", "observed"), default="forecast")
    s.add_argument("--hierarchical", action="store_true", help="also emit the REGION sum")
    s.add_argument("--out")
    s.set_defaults(func=cmd_forecast)

    s = sub.add_parser("account", help="privacy accounting for one (lambda, delta_f, k)")
    s.add_argument("--lambda", dest="lam", type=_positive_float, required=True)
    s.add_argument("--delta-f", type=_positive_float, required=True)
    s.add_argument("--k", type=_positive_int, required=True)
    s.add_argument("--delta-tilde", type=float, default=DEFAULT_DELTA_TILDE)
    s.add_argument("--delta", type=float, default=0.0)
    s.add_argument("--precise", action="store_true", help="print full precision")
    s.add_argument("--json", action="store_true")
    s.set_defaults(func=cmd_account)

    s = sub.add_parser("sweep", help="privacy-utility sweep from a config file")
    s.add_argument("--config", required=True)
    s.add_argument("--out")
    s.add_argument("--seed", type=_seed, action="append")
    s.add_argument("--method", choices=METHODS, action="append")
    s.add_argument("--lambda", dest="lam", type=float, action="append")
    s.add_argument("--delta-f", type=_positive_float, action="append")
    s.add_argument("--k", type=_positive_int)
    s.add_argument("--horizon-hours", type=_positive_int)
    s.add_argument("--jobs", type=_positive_int, default=None,
                   help="worker threads (default: config value or CPU count)")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("report", help="render a sweep report")
    s.add_argument("--input", required=True, help="sweep.json")
    s.add_argument("--format", choices=("table", "csv", "plot"), default="table")
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _setup_logging(args.verbose)
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"privload: error: {exc}", file=sys.stderr)
        return 2
    except (UsageError, *USAGE_ERRORS) as exc:
        print(f"privload: error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"privload: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        logger.exception("unexpected failure")
        print(f"privload: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
