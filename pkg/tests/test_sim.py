import math
from fractions import Fraction

import numpy as np
import pytest

from rialign.errors import CapExceeded, ConfigError
from rialign.netmodel import make_config
from rialign.sim import (
    CSV_COLUMNS,
    ExperimentPlan,
    finite_n_prediction,
    ic_finite_n_predictions,
    run_link_experiment,
    slope_estimate,
)


def test_finite_n_formula():
    assert finite_n_prediction(1, 4, 9) == Fraction(2, 7)
    assert finite_n_prediction(1, 9, 16) == Fraction(9, 26)
    assert finite_n_prediction(1, 1, 4) == Fraction(1, 6)


def test_predictions_increase_toward_half(ic2):
    vals = ic_finite_n_predictions(ic2, range(1, 7))
    assert all(a < b < Fraction(1, 2) for a, b in zip(vals, vals[1:]))


def test_exact_slope_fit():
    P = [1e2, 1e4, 1e6, 1e8]
    rates = [0.3 * 0.5 * math.log(p) for p in P]
    fit = slope_estimate(rates, P, [0.0] * 4)
    assert fit.status == "ok" and fit.slope == pytest.approx(0.3) and fit.stderr == pytest.approx(0, abs=1e-12)


def test_unreliable_row_excluded():
    P = [1e2, 1e4, 1e6, 1e8]
    rates = [0.3 * 0.5 * math.log(p) for p in P]
    rates[0] = 50.0
    fit = slope_estimate(rates, P, [0.5, 0.0, 0.0, 0.0])
    assert fit.n_rows == 3 and fit.slope == pytest.approx(0.3)


def test_too_few_rows_inconclusive():
    fit = slope_estimate([1.0, 2.0, 3.0], [1e2, 1e4, 1e6], [0.0, 0.2, 0.0])
    assert fit.status == "inconclusive" and fit.slope is None


def test_plan_validation(ic2):
    with pytest.raises(ConfigError):
        ExperimentPlan(ic2, 1, p0_grid=(1e3, 1e2))
    with pytest.raises(ConfigError):
        ExperimentPlan(ic2, 1, trials=0)


def test_caps_checked_before_running(ic2):
    plan = ExperimentPlan(ic2, 2, p0_grid=(1e2, 1e30), decode_cap=10**4)
    with pytest.raises(CapExceeded, match="decoding cap"):
        run_link_experiment(plan)


@pytest.fixture(scope="module")
def small_report():
    cfg = make_config("ic", 2, 2, [1, 1], [1, 1])
    return run_link_experiment(ExperimentPlan(cfg, 1, seed=3, p0_grid=(1e2, 1e4, 1e6, 1e8), trials=400))


def test_rate_accounting(small_report):
    for r in small_report.rows:
        assert r.rate == pytest.approx(r.n_useful * math.log(2 * r.Q + 1))
        assert r.slope_P0 == pytest.approx(r.rate / (0.5 * math.log(r.P0)))
        assert math.isfinite(r.slope_P) and r.P == pytest.approx(r.P0 * r.nu2)


def test_report_predictions(small_report):
    assert small_report.finite_n == {0: Fraction(1, 6), 1: Fraction(1, 6)}
    assert small_report.asymptotic == {0: Fraction(1, 2), 1: Fraction(1, 2)}


def test_error_falls_with_power(small_report):
    for j in (0, 1):
        errs = [r.block_error for r in small_report.rows if r.receiver == j]
        # smooth adjacent pairs before comparing
        smooth = np.convolve(errs, [0.5, 0.5], mode="valid")
        assert all(b <= a + 0.02 for a, b in zip(smooth, smooth[1:]))
        assert errs[-1] <= errs[0]


def test_report_is_deterministic(small_report):
    cfg = make_config("ic", 2, 2, [1, 1], [1, 1])
    again = run_link_experiment(
        ExperimentPlan(cfg, 1, seed=3, p0_grid=(1e2, 1e4, 1e6, 1e8), trials=400, threads=3)
    )
    assert again.to_csv() == small_report.to_csv()
    assert again.to_json() == small_report.to_json()


def test_csv_layout(small_report):
    lines = small_report.to_csv().splitlines()
    assert lines[0].startswith("# config_hash=") and "seed=3" in lines[0]
    assert lines[1].split(",") == list(CSV_COLUMNS)
    assert len(lines) == 2 + 8
    assert lines[2].split(",")[2] == "1"


def test_x_network_sweep(xnet):
    rep = run_link_experiment(ExperimentPlan(xnet, 1, p0_grid=(1e3, 1e5), trials=100))
    assert {r.receiver for r in rep.rows} == {0, 1}
    assert all(r.n_useful == 2 for r in rep.rows)
