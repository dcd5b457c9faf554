import csv
import io
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from privload import evaluation
from privload.errors import AlignmentError, DomainError
from privload.evaluation import (
    SweepConfig,
    SweepReport,
    error_report,
    mae,
    mape,
    privacy_columns,
    privacy_table,
    render_table,
    run_sweep,
    split_horizon,
    utility,
)
from privload.forecasting import forecast_direct, forecast_hierarchical
from privload.privacy import PrivacyParams, compose_k_fold
from privload.series import LoadSeries
from reference_values import DELTA_TILDE, K_RELEASES, PRIVACY_ROWS


def at(values, start="2005-01-01T00"):
    values = np.asarray(values, dtype=float)
    return LoadSeries("R", np.datetime64(start, "h") + np.arange(values.size).astype("timedelta64[h]"), values)


# -- metrics ------------------------------------------------------------------


def test_mae_examples():
    assert mae([3.0, 4.0], [3.0, 4.0]) == 0
    assert mae([1, 2], [2, 4]) == 1.5
    assert mae(at([1, 2]), at([2, 4])) == 1.5


def test_mae_and_mape_match_naive_loops():
    rng = np.random.default_rng(0)
    f, a = rng.normal(1000, 50, 100), rng.normal(1000, 50, 100)
    abs_sum = pct_sum = 0.0
    for fi, ai in zip(f, a):
        abs_sum += abs(fi - ai)
        pct_sum += abs((fi - ai) / ai)
    assert mae(f, a) == pytest.approx(abs_sum / 100, abs=1e-12)
    assert mape(f, a) == pytest.approx(pct_sum / 100, abs=1e-12)


def test_mape_examples():
    assert mape([5, 6], [5, 6]) == 0
    assert mape([110], [100]) == pytest.approx(0.10, rel=1e-15)


def test_mape_zero_actual_names_timestamp():
    with pytest.raises(ZeroDivisionError, match="2005-01-01T01"):
        mape(at([1, 1]), at([1, 0]))


def test_metric_alignment_checks():
    with pytest.raises(AlignmentError):
        mae([1, 2, 3], [1, 2])
    with pytest.raises(AlignmentError):
        mae(at([1, 2]), at([1, 2], start="2005-01-01T01"))
    with pytest.raises(DomainError):
        mae([], [])
    with pytest.raises(DomainError):
        mae([1, 2], [1, np.nan])


def test_error_report_bundles_metrics():
    r = error_report([110, 90], [100, 100])
    assert (r.mae, r.mape, r.horizon) == (10, pytest.approx(0.1), 2)


def test_utility_examples():
    assert utility(100, 100) == 0
    assert utility(100, 92.2) == pytest.approx(0.078)
    assert utility(100, 150) == pytest.approx(-0.5)
    for bad in (0, -1):
        with pytest.raises(DomainError):
            utility(bad, 1)


@given(st.floats(min_value=1e-6, max_value=1e9), st.floats(min_value=0, max_value=1e9))
def test_utility_algebra(direct, perturbed):
    u = utility(direct, perturbed)
    assert u <= 1
    assert u == pytest.approx(1 - perturbed / direct, rel=1e-9, abs=1e-12)
    assert utility(direct, direct) == 0


# -- privacy columns ---------------------------------------------------------------


def test_privacy_table_reproduces_published_rows():
    rows = privacy_table([0, 10_000, 56_234, 100_000], [7.57, 10.05, 15.36, 48.0], K_RELEASES, DELTA_TILDE)
    assert len(rows) == 12
    for row in rows:
        eps, eps_t, rho = PRIVACY_ROWS[(row["lambda"], row["delta_f"])]
        assert row["epsilon"] == pytest.approx(eps, abs=1e-5)
        assert row["epsilon_tilde"] == pytest.approx(eps_t, abs=0.01)
        assert row["rho"] == pytest.approx(rho, abs=0.01)


def test_privacy_columns_are_core_values():
    cols = privacy_columns(56_234, 15.36, K_RELEASES, DELTA_TILDE)
    eps = PrivacyParams(56_234, 15.36).epsilon
    g = compose_k_fold(eps, 0.0, K_RELEASES, DELTA_TILDE)
    assert cols == {"epsilon": eps, "epsilon_tilde": g.epsilon_tilde, "rho": g.rho,
                    "delta_total": g.delta_total}


# -- sweep --------------------------------------------------------------------------


@pytest.fixture(scope="module")
def sweep_report(small_dataset):
    loads, temps = small_dataset
    config = SweepConfig(lambdas=[0, 100, 10_000], delta_fs=[7.57, 48.0], methods=["benchmark", "segmented"],
                         seeds=[0, 1, 2], horizon_hours=48, temperature_mode="observed", k=K_RELEASES)
    return config, run_sweep(config, loads, temps)


def test_sweep_row_layout(sweep_report):
    config, report = sweep_report
    assert [(r["lambda"], r["delta_f"]) for r in report.rows] == [
        (0.0, None), (100.0, 7.57), (100.0, 48.0), (10_000.0, 7.57), (10_000.0, 48.0)]
    assert report.failed_cells == 0 and report.total_cells == 2 + 2 + 2 * 2 * 3
    zero = report.rows[0]
    assert all(zero[c] is None for c in ("epsilon", "epsilon_tilde", "rho", "delta_total"))
    assert zero["seeds"] == 1 and report.rows[1]["seeds"] == 3
    for row in report.rows:
        assert not row["errors"]
        for m in config.methods:
            assert row[f"{m}_mae_min"] <= row[f"{m}_mae_median"] <= row[f"{m}_mae_max"]
            assert row[f"{m}_utility"] == pytest.approx(
                utility(row[f"{m}_mae_direct"], row[f"{m}_mae_mean"]), rel=1e-15)


def test_sweep_privacy_columns_match_core(sweep_report):
    _, report = sweep_report
    for row in report.rows[1:]:
        assert row["epsilon_tilde"] == privacy_columns(row["lambda"], row["delta_f"], K_RELEASES)["epsilon_tilde"]
    # utility does not depend on delta_f
    assert report.rows[1]["benchmark_utility"] == report.rows[2]["benchmark_utility"]


def test_zero_noise_row_is_unperturbed_hierarchy(sweep_report, small_dataset):
    config, report = sweep_report
    loads, temps = small_dataset
    train, horizon, region = split_horizon(sorted(loads, key=lambda z: z.entity_id), config)
    actual = LoadSeries("REGION", horizon, region.values[-48:])
    hier = forecast_hierarchical(train, temps, horizon, "benchmark", temperature_mode="observed")
    direct = forecast_direct(region.window(end=horizon[0]), temps, horizon, "benchmark",
                             temperature_mode="observed")
    expected = utility(mae(direct, actual), mae(hier, actual))
    assert report.rows[0]["benchmark_utility"] == expected


def test_sweep_is_repeatable(small_dataset, sweep_report):
    config, report = sweep_report
    loads, temps = small_dataset
    again = run_sweep(SweepConfig(**{**config.__dict__, "jobs": 4}), loads, temps)
    assert again.to_csv() == report.to_csv()
    assert again.to_json() == report.to_json()


def test_failing_cell_is_recorded(monkeypatch, small_dataset):
    loads, temps = small_dataset
    real = evaluation.forecast_hierarchical

    def flaky(*args, lam=0.0, **kwargs):
        if lam == 500:
            raise RuntimeError("solver exploded")
        return real(*args, lam=lam, **kwargs)

    monkeypatch.setattr(evaluation, "forecast_hierarchical", flaky)
    config = SweepConfig(lambdas=[0, 500, 1000], delta_fs=[10.05], seeds=[3], horizon_hours=24,
                         temperature_mode="observed")
    report = run_sweep(config, loads, temps)
    by_lam = {r["lambda"]: r for r in report.rows}
    assert report.failed_cells == 1
    assert by_lam[500.0]["benchmark_mae_mean"] is None and "solver exploded" in by_lam[500.0]["errors"][0]
    assert by_lam[1000.0]["benchmark_mae_mean"] is not None and not by_lam[1000.0]["errors"]


def test_report_serialisations(sweep_report, tmp_path):
    _, report = sweep_report
    paths = report.write(tmp_path)
    rows = list(csv.DictReader(io.StringIO(paths["csv"].read_text())))
    assert len(rows) == len(report.rows) and rows[0]["epsilon"] == ""
    assert list(rows[0]) == report.columns()
    assert float(rows[1]["benchmark_mae_mean"]) == report.rows[1]["benchmark_mae_mean"]
    back = SweepReport.from_dict(json.loads(paths["json"].read_text()))
    assert back.to_csv() == report.to_csv()
    plot = paths["plot"].read_text().splitlines()
    assert plot[0] == "series,x,y"
    assert any(line.startswith("utility_limit:benchmark,") for line in plot)
    assert any(line.startswith("rho:delta_f=48.0,") for line in plot)


def test_rendered_table(sweep_report):
    _, report = sweep_report
    text = render_table(report)
    lines = text.splitlines()
    assert "—" in lines[2]
    # epsilon at 5 decimals: 7.57 / 100 and 48 / 10,000
    assert "0.07570" in lines[3] and "0.00480" in lines[6]
    assert "k = 38,070" in text


@pytest.mark.parametrize("bad", [
    dict(lambdas=[-1]), dict(delta_fs=[0]), dict(methods=["arima"]), dict(seeds=[]),
    dict(delta_tilde=0), dict(horizon_hours=0), dict(k=0)])
def test_sweep_config_validation(bad):
    with pytest.raises(DomainError):
        SweepConfig(**bad)


def test_horizon_beyond_data(small_dataset):
    loads, temps = small_dataset
    with pytest.raises(DomainError):
        split_horizon(loads, SweepConfig(horizon_hours=10**6))
    with pytest.raises(DomainError):
        split_horizon(loads, SweepConfig(horizon_start="2005-02-28T12", horizon_hours=48))
