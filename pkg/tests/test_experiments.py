import csv

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from builders import flat, single_bus, unit
from seasonplan.demand import ClimatologyProfile
from seasonplan.experiments import (BASE, COMPARISON_HEADER, COMPARISONS, ESOM_PF, ESOM_PFML,
                                    METRICS, UCM_PF, UCM_PFML, MonthlyMetrics, ScenarioFailure,
                                    ScenarioId, compare, fuel_totals, run_scenario, run_study)
from seasonplan.system import FUELS
from seasonplan.ucm import InfeasibleError

H = 720


def metrics(cost, month=1, scenario=UCM_PF, gas=0.0) -> MonthlyMetrics:
    fuels = {f: 0.0 for f in FUELS}
    fuels["gas"] = gas
    return MonthlyMetrics(month, scenario, cost, 0.0, 0.0, cost, fuels, 0.0, 0.0)


def cost_row(rows):
    (row,) = [r for r in rows if r.metric == "cost"]
    return row


def test_compare_examples():
    assert cost_row(compare(metrics(102), metrics(100), metrics(102))).pct_diff == pytest.approx(
        1.9607843, abs=1e-6)
    assert cost_row(compare(metrics(100), metrics(100), metrics(100))).pct_diff == 0
    assert cost_row(compare(metrics(99), metrics(100), metrics(100))).pct_diff == pytest.approx(-1.0)


def test_zero_base_is_undefined():
    rows = compare(metrics(5, gas=3), metrics(5, gas=1), metrics(5, gas=0))
    gas = next(r for r in rows if r.metric == "gas")
    assert not gas.defined and gas.csv_row()[-1] == "undefined"
    assert [r.metric for r in rows] == list(METRICS)


def test_month_mismatch():
    with pytest.raises(ValueError):
        compare(metrics(1, month=1), metrics(1, month=2), metrics(1, month=1))


@given(st.floats(1, 1e9), st.floats(1, 1e9), st.floats(1, 1e9), st.floats(0.1, 100))
def test_pct_antisymmetric_and_scale_free(a, b, base, k):
    ab = cost_row(compare(metrics(a), metrics(b), metrics(base))).pct_diff
    ba = cost_row(compare(metrics(b), metrics(a), metrics(base))).pct_diff
    assert ab == pytest.approx(-ba, rel=1e-12, abs=1e-12)
    scaled = cost_row(compare(metrics(a * k), metrics(b * k), metrics(base * k))).pct_diff
    assert scaled == pytest.approx(ab, rel=1e-9, abs=1e-9)


def test_comparison_table():
    assert COMPARISONS == {"C1a": (UCM_PF, ESOM_PF), "C1b": (UCM_PFML, ESOM_PFML),
                           "C2a": (UCM_PF, UCM_PFML), "C2b": (ESOM_PF, ESOM_PFML),
                           "C3": (UCM_PF, ESOM_PFML)}
    assert BASE == UCM_PF


def test_scenario_ids():
    assert ScenarioId.parse("esom-pfml") == ESOM_PFML
    assert str(UCM_PF) == "UCM-PF"
    for bad in (("LP", "PF"), ("UCM", "ML")):
        with pytest.raises(ValueError):
            ScenarioId(*bad)


def toy_case():
    return single_bus(unit(p_min=10, p_max=100, fixed_cost=5, startup_cost=50, blocks=[(100, 20)]))


def test_ucm_pf_toy_month():
    case = toy_case()
    obs = flat(case, 50, H)
    m = run_scenario(case, obs, obs, UCM_PF, 1)
    assert m.total_cost == pytest.approx(H * 5 + 50 + H * 50 * 20)
    assert m.generation_by_fuel["gas"] == pytest.approx(50 * H)
    assert m.demand_mwh == pytest.approx(50 * H)


def test_esom_forecasts_agree_on_flat_demand():
    case = toy_case()
    obs = flat(case, 50, H)
    pf = run_scenario(case, obs, obs, ESOM_PF, 1)
    pfml = run_scenario(case, obs, obs, ESOM_PFML, 1)
    assert pf.total_cost == pytest.approx(pfml.total_cost, rel=1e-12)
    assert pf.cost_startup == 0
    assert pf.total_cost == pytest.approx(H * 5 + H * 50 * 20)


def test_pfml_keeps_monthly_energy():
    case = toy_case()
    rng = np.random.default_rng(8)
    obs = flat(case, rng.uniform(20, 90, 2 * H), 2 * H)
    clim = ClimatologyProfile.from_history(obs)
    for month in (1, 2):
        pf = run_scenario(case, obs, None, ESOM_PF, month)
        pfml = run_scenario(case, obs, None, ESOM_PFML, month, climatology=clim)
        assert pfml.demand_mwh == pytest.approx(pf.demand_mwh, rel=1e-12)
        assert sum(pfml.generation_by_fuel.values()) == pytest.approx(pf.demand_mwh, rel=1e-9)


def test_pfml_needs_history():
    case = toy_case()
    with pytest.raises(ScenarioFailure) as info:
        run_scenario(case, flat(case, 50, H), None, UCM_PFML, 1)
    assert info.value.month == 1 and info.value.scenario == UCM_PFML


def test_fuel_totals_group_units():
    case = single_bus(unit("A", fuel="coal"), unit("B", fuel="coal"), unit("C", fuel="hydro"))
    totals = fuel_totals(case, {"A": 1.5, "B": 2.5, "C": 4.0})
    assert totals == {"nuclear": 0.0, "hydro": 4.0, "coal": 4.0, "gas": 0.0}


def read(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_toy_study_report(tmp_path):
    case = toy_case()
    obs = flat(case, 50, 2 * H)
    report = run_study(case, obs, obs, [1, 2], tmp_path / "a")
    assert len(report.metrics) == 8 and not report.failures
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert names == ["c1a.csv", "c1b.csv", "c2a.csv", "c2b.csv", "c3.csv", "failures.csv",
                     "metrics.csv", "runtime.csv"]
    c1a = read(tmp_path / "a" / "c1a.csv")
    assert ",".join(c1a[0]) == COMPARISON_HEADER
    assert len(c1a) == 1 + 2 * len(METRICS)
    # UCM pays one start per month that ESOM never sees
    assert float(c1a[1][-1]) == pytest.approx(50 / (H * 5 + 50 + H * 50 * 20) * 100, abs=1e-6)
    # flat demand: forecasts agree
    assert all(float(r[-1]) == 0 for r in read(tmp_path / "a" / "c2b.csv")[1:] if r[-1] != "undefined")
    assert len(read(tmp_path / "a" / "metrics.csv")) == 9

    again = run_study(case, obs, obs, [1, 2], tmp_path / "b")
    for name in ("c1a.csv", "c1b.csv", "c2a.csv", "c2b.csv", "c3.csv"):
        assert report.files[name].read_bytes() == again.files[name].read_bytes()


def test_failed_month_is_logged_and_skipped(tmp_path):
    case = toy_case()
    load = np.full(2 * H, 50.0)
    load[H + 30] = 150.0
    obs = flat(case, load, 2 * H)
    report = run_study(case, obs, obs, [1, 2], tmp_path)
    failed = {(f.scenario, f.month) for f in report.failures}
    assert (UCM_PF, 2) in failed and (ESOM_PF, 2) in failed
    assert all(isinstance(f.cause, InfeasibleError) for f in report.failures)
    assert {r.month for r in report.comparisons["C1a"]} == {1}
    rows = read(tmp_path / "failures.csv")
    assert rows[0] == ["scenario", "month", "error"]
    assert any(r[:2] == ["UCM-PF", "2"] for r in rows[1:])


def test_runtime_summary():
    case = toy_case()
    obs = flat(case, 50, H)
    report = run_study(case, obs, obs, [1])
    assert set(report.runtime()) == {"UCM", "ESOM"}
    mean, total = report.runtime()["ESOM"]
    assert total == pytest.approx(2 * mean)
    assert report.files == {}


def test_empty_month_list():
    case = toy_case()
    with pytest.raises(ValueError):
        run_study(case, flat(case, 50, H), flat(case, 50, H), [])
