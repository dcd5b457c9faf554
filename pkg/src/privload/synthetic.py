"""Small GEFCom-shaped synthetic data sets with a known signal and noise level."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from privload.features import calendar_parts
from privload.ingest import write_wide_csv
from privload.series import LoadSeries, TemperatureSeries


def synthetic_dataset(
    zones: int = 3,
    days: int = 60,
    stations: int = 2,
    start: str = "2005-01-01",
    base_kw: float = 1_000.0,
    noise_kw: float = 10.0,
    seed: int = 0,
) -> tuple[list[LoadSeries], list[TemperatureSeries]]:
    """Hourly zone loads driven by temperature and calendar, plus station temperatures.

    Zone ``z`` (ids "1".."zones") follows station ``(z - 1) % stations + 1`` with a
    zone-specific scale around ``base_kw``; ``noise_kw`` is the standard
    deviation of i.i.d. Gaussian load noise, so the signal-to-noise ratio is
    roughly ``base_kw / noise_kw``.
    """
    rng = np.random.default_rng(seed)
    t0 = np.datetime64(start, "h")
    ts = t0 + np.arange(days * 24).astype("timedelta64[h]")
    month, dow, hour = calendar_parts(ts)
    day_index = np.arange(ts.size) / 24.0

    temps = []
    for s in range(stations):
        seasonal = 55 + 20 * np.sin(2 * np.pi * (day_index - 100 + 7 * s) / 365.25)
        daily = 8 * np.sin(2 * np.pi * (hour - 9) / 24)
        temps.append(TemperatureSeries(str(s + 1), ts, seasonal + daily + rng.normal(0, 2, ts.size)))

    profile = 1 + 0.25 * np.sin(2 * np.pi * (hour - 12) / 24) - 0.1 * (dow >= 5)
    loads = []
    for z in range(zones):
        temp = temps[z % stations].values
        scale = base_kw * (1 + 0.5 * z)
        signal = scale * profile * (1 + 0.0004 * (temp - 62) ** 2)
        loads.append(LoadSeries(str(z + 1), ts, signal + rng.normal(0, noise_kw, ts.size)))
    return loads, temps


def write_synthetic(out_dir, **kwargs) -> tuple[Path, Path]:
    """Write a synthetic data set as wide ``Load_history.csv`` / ``temperature_history.csv``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    loads, temps = synthetic_dataset(**kwargs)
    load_path, temp_path = out / "Load_history.csv", out / "temperature_history.csv"
    write_wide_csv(loads, load_path, "load")
    write_wide_csv(temps, temp_path, "temperature")
    return load_path, temp_path
