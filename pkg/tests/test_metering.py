import numpy as np
import pytest
from scipy import stats

from privload.errors import AlignmentError, DomainError
from privload.metering import (
    Zone,
    aggregate_region,
    aggregate_zone,
    perturb_household,
    perturb_zone_aggregate,
    perturb_zones,
    simulate_zone,
)
from privload.series import LoadSeries

T0 = np.datetime64("2005-01-01T00", "h")


def series(entity, values, start=T0):
    values = np.asarray(values, dtype=float)
    return LoadSeries(entity, start + np.arange(values.size).astype("timedelta64[h]"), values)


def test_vanishing_noise_leaves_series_unchanged(rng):
    raw = series("h1", np.linspace(0, 5, 500))
    out = perturb_household(raw, 10, 1e-12, rng)
    assert np.max(np.abs(out.values - raw.values)) < 1e-6
    assert np.array_equal(out.timestamps, raw.timestamps)
    assert out.entity_id == "h1"


def test_single_household_noise_is_zero_mean():
    raw = series("h", np.full(100_000, 500.0))
    out = perturb_household(raw, 1, 1_000, np.random.default_rng(1))
    assert abs(out.values.mean() - 500) < 20


def test_household_noise_variance_for_group_of_four():
    # a share is G1 - G2 with shape 1/4 and scale 1: variance 2 * (1/4) * 1 = 0.5;
    # four such shares add up to Laplace(1), whose variance is 2
    raw = series("h", np.zeros(100_000))
    out = perturb_household(raw, 4, 1.0, np.random.default_rng(2))
    assert out.values.var() == pytest.approx(0.5, rel=0.05)


def test_perturbation_never_clamps():
    raw = series("h", np.zeros(10_000))
    out = perturb_household(raw, 1, 5.0, np.random.default_rng(3))
    assert (out.values < 0).any()


def test_perturbation_keeps_gaps(rng):
    raw = series("h", [1.0, np.nan, 3.0])
    out = perturb_household(raw, 2, 1.0, rng)
    assert np.isnan(out.values[1]) and not np.isnan(out.values[[0, 2]]).any()


def test_perturbation_rejects_empty_and_negative(rng):
    empty = LoadSeries("e", np.array([], dtype="datetime64[h]"), np.array([]))
    with pytest.raises(DomainError):
        perturb_household(empty, 1, 1.0, rng)
    with pytest.raises(DomainError):
        perturb_household(series("n", [1.0, -0.5]), 1, 1.0, rng)
    with pytest.raises(DomainError):
        perturb_household(series("ok", [1.0]), 0, 1.0, rng)
    with pytest.raises(DomainError):
        perturb_zone_aggregate(empty, 1.0, rng)


def test_aggregate_zone_examples():
    total = aggregate_zone([series("a", [1, 2, 3]), series("b", [4, 5, 6])], "z")
    assert total.values.tolist() == [5, 7, 9]
    assert total.entity_id == "z"
    single = series("a", [1.5, 2.5])
    assert aggregate_zone([single]).values.tolist() == [1.5, 2.5]


def test_aggregate_region_examples():
    zones = [series(str(i), np.ones(5)) for i in range(20)]
    assert aggregate_region(zones).values.tolist() == [20.0] * 5
    three = [series("1", [1, 1]), series("2", [2, 2]), series("3", [3, 3])]
    assert aggregate_region(three).values.tolist() == [6, 6]


def test_misaligned_series_names_entity():
    a = series("a", [1, 2, 3])
    shifted = series("late", [1, 2, 3], start=T0 + np.timedelta64(1, "h"))
    with pytest.raises(AlignmentError) as info:
        aggregate_zone([a, shifted])
    assert info.value.entity_id == "late" and "late" in str(info.value)
    with pytest.raises(AlignmentError):
        aggregate_region([a, series("short", [1, 2])])


def test_aggregation_propagates_missing_readings():
    total = aggregate_zone([series("a", [1, np.nan]), series("b", [1, 1])])
    assert total.values[0] == 2 and np.isnan(total.values[1])


def test_region_of_zones_equals_sum_of_households_without_noise():
    rng = np.random.default_rng(4)
    raw = {f"h{i}": series(f"h{i}", rng.uniform(0, 3, 48)) for i in range(12)}
    zones = [Zone("1", ["h0", "h1", "h2", "h3"]), Zone("2", ["h4", "h5"]),
             Zone("3", [f"h{i}" for i in range(6, 12)])]
    region = aggregate_region([simulate_zone(z, raw, 1e-12, seed=0) for z in zones])
    oracle = np.zeros(48)
    for s in raw.values():
        oracle = oracle + s.values
    assert np.max(np.abs(region.values - oracle)) < 1e-6


def test_zone_of_many_households_carries_laplace_noise():
    # sum of 50 perturbed households minus the raw sum is Laplace(lam)
    n, lam, hours = 50, 2.0, 10_000
    ids = [f"h{i}" for i in range(n)]
    raw = {h: series(h, np.zeros(hours)) for h in ids}
    noisy = simulate_zone(Zone("z", ids), raw, lam, seed=5)
    assert stats.kstest(noisy.values, stats.laplace(scale=lam).cdf).pvalue > 0.01


def test_noisy_zone_aggregate_preserves_expectation():
    rng = np.random.default_rng(6)
    raw = {f"h{i}": series(f"h{i}", rng.uniform(100, 300, 4)) for i in range(5)}
    zone = Zone("z", list(raw))
    truth = aggregate_zone(list(raw.values())).values
    reps = np.array([simulate_zone(zone, raw, 100.0, seed=s).values for s in range(10_000)])
    assert np.all(np.abs(reps.mean(axis=0) - truth) <= 0.01 * truth)


def test_simulation_is_deterministic_and_order_free():
    rng = np.random.default_rng(7)
    raw = {f"h{i}": series(f"h{i}", rng.uniform(0, 2, 24)) for i in range(4)}
    forward = simulate_zone(Zone("z", ["h0", "h1", "h2", "h3"]), raw, 3.0, seed=11)
    backward = simulate_zone(Zone("z", ["h3", "h2", "h1", "h0"]), dict(reversed(raw.items())), 3.0, seed=11)
    assert forward.values.tobytes() == backward.values.tobytes()
    other = simulate_zone(Zone("z", ["h0", "h1", "h2", "h3"]), raw, 3.0, seed=12)
    assert not np.array_equal(forward.values, other.values)


def test_zone_definition_checks():
    with pytest.raises(DomainError):
        Zone("z", [])
    with pytest.raises(DomainError):
        Zone("z", ["a", "a"])
    with pytest.raises(DomainError):
        simulate_zone(Zone("z", ["missing"]), {}, 1.0, seed=0)


def test_zone_level_perturbation():
    zones = [series("1", np.full(1000, 50.0)), series("2", np.full(1000, 80.0))]
    assert perturb_zones(zones, 0, seed=1) == zones
    a = perturb_zones(zones, 10.0, seed=1)
    b = perturb_zones(zones, 10.0, seed=1)
    assert all(x.values.tobytes() == y.values.tobytes() for x, y in zip(a, b))
    # common random numbers: noise scales linearly with lambda
    c = perturb_zones(zones, 20.0, seed=1)
    np.testing.assert_allclose(c[0].values - 50, 2 * (a[0].values - 50), rtol=1e-12)
    assert not np.array_equal(a[0].values - 50, a[1].values - 80)
