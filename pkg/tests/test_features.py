import datetime as dt

import numpy as np
import pytest

from privload.errors import CoverageError
from privload.features import (
    BENCHMARK,
    CONSTANT,
    FeatureRecipe,
    build_features,
    calendar_parts,
    column_names,
)
from privload.series import TemperatureSeries


def hours(start, count):
    return np.datetime64(start, "h") + np.arange(count).astype("timedelta64[h]")


def station(ts, values, sid="1"):
    return TemperatureSeries(sid, ts, np.asarray(values, dtype=float))


def test_benchmark_has_313_columns():
    for count in (1, 24, 500):
        ts = hours("2005-03-01T00", count)
        X = build_features(ts, station(ts, np.linspace(20, 90, count)))
        assert X.shape == (count, 313)
    assert BENCHMARK.n_columns == 313 == len(column_names(BENCHMARK))
    assert len(set(column_names(BENCHMARK))) == 313


def test_calendar_parts_against_datetime():
    ts = hours("2003-12-29T00", 24 * 400 + 7)[::13]
    month, dow, hour = calendar_parts(ts)
    for t, m, d, h in zip(ts, month, dow, hour):
        py = t.astype(dt.datetime)
        assert (m, d, h) == (py.month, py.weekday(), py.hour)


def test_zero_temperature_zeroes_only_temperature_columns():
    ts = hours("2005-06-01T00", 24 * 14)
    hot = build_features(ts, station(ts, np.full(ts.size, 71.0)))
    cold = build_features(ts, station(ts, np.zeros(ts.size)))
    names = column_names(BENCHMARK)
    temp_cols = np.array([n.startswith("T") for n in names])
    assert np.all(cold[:, temp_cols] == 0)
    assert np.array_equal(cold[:, ~temp_cols], hot[:, ~temp_cols])
    assert np.any(hot[:, temp_cols] != 0)


def test_single_row_matches_hand_expansion():
    # Wednesday 2005-03-09 14:00, 50 F, trend origin two days earlier at midnight
    t = np.datetime64("2005-03-09T14", "h")
    X = build_features(np.array([t]), np.array([50.0]), origin="2005-03-07T00")
    expected = {
        "trend": 2 + 14 / 24,
        "month[3]": 1, "dow[2]": 1, "hour[14]": 1, "dow[2]:hour[14]": 1,
        "T": 50, "T^2": 2500, "T^3": 125000,
        "T^1:month[3]": 50, "T^2:month[3]": 2500, "T^3:month[3]": 125000,
        "T^1:hour[14]": 50, "T^2:hour[14]": 2500, "T^3:hour[14]": 125000,
    }
    row = dict(zip(column_names(BENCHMARK), X[0]))
    for name, value in row.items():
        assert value == pytest.approx(expected.get(name, 0.0), abs=0, rel=1e-15), name


def test_reference_level_row_has_no_dummies():
    # Monday January midnight is the all-zero reference level
    t = np.datetime64("2007-01-01T00", "h")
    X = build_features(np.array([t]), np.array([1.0]), origin=t)
    row = dict(zip(column_names(BENCHMARK), X[0]))
    assert {n for n, v in row.items() if v != 0} == {"T", "T^2", "T^3"}


def test_design_rank_with_intercept():
    # main effects are spanned by the interactions; 313 + intercept columns carry rank 285
    ts = hours("2005-01-01T00", 24 * 366)
    rng = np.random.default_rng(0)
    X = build_features(ts, station(ts, 50 + 20 * rng.standard_normal(ts.size)))
    A = np.hstack([np.ones((ts.size, 1)), X / np.abs(X).max(axis=0)])
    assert np.linalg.matrix_rank(A) == 285


def test_temperature_gap_raises():
    ts = hours("2005-01-01T00", 5)
    with pytest.raises(CoverageError):
        build_features(ts, station(ts[:4], [1, 2, 3, 4]))
    with pytest.raises(CoverageError):
        build_features(ts, station(ts, [1, np.nan, 3, 4, 5]))
    with pytest.raises(CoverageError):
        build_features(ts, np.ones(3))


def test_recipes_without_temperature():
    ts = hours("2005-01-01T00", 30)
    assert build_features(ts, None, CONSTANT).shape == (30, 0)
    trend = FeatureRecipe("trend", ("trend",))
    np.testing.assert_allclose(build_features(ts, None, trend)[:, 0], np.arange(30) / 24)
    with pytest.raises(ValueError):
        FeatureRecipe("bad", ("humidity",))
