import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from builders import brute_force_ucm, cold, flat, random_two_unit, single_bus, triangle, unit
from seasonplan.demand import load_demand
from seasonplan.solver import build_and_solve, relax_integrality
from seasonplan.system import UnitState, bundled_case, bundled_path
from seasonplan.ucm import (InfeasibleError, UcmConfig, audit_solution, build_ucm, cold_start,
                            dc_power_flow, emit_solution, parse_solution, solve_ucm)

EXACT = UcmConfig(mip_gap=1e-9)


def test_variable_count_single_unit():
    case = single_bus(unit(blocks=[(60, 20), (40, 25)]))
    built = build_ucm(case, flat(case, 50, 2), 2, cold(case), UcmConfig())
    assert built.model.num_integer == 3 * 2
    assert built.model.num_vars == 3 * 2 + 2 * 2 + 2


def test_remaining_down_time_forces_off():
    case = single_bus(unit(min_down=3))
    built = build_ucm(case, flat(case, 0, 4), 4, {"A": UnitState(0, 0.0, 0, 1)}, UcmConfig())
    assert [built.model.upper[j] for j in built.u[0]] == [0, 0, 1, 1]


def test_remaining_up_time_forces_on():
    case = single_bus(unit(min_up=4))
    built = build_ucm(case, flat(case, 50, 4), 4, {"A": UnitState(1, 50.0, 1, 0)}, UcmConfig())
    assert [built.model.lower[j] for j in built.u[0]] == [1, 1, 1, 0]


def test_bundled_window_binary_count():
    case = bundled_case()
    demand = load_demand(bundled_path("demand_observed.csv"), case).month(1)
    built = build_ucm(case, demand, 216, cold_start(case), UcmConfig())
    assert built.model.num_integer == 3 * len(case.units) * 216


def test_hand_example_4070():
    case = single_bus(unit(p_min=10, p_max=100, fixed_cost=5, startup_cost=50,
                           blocks=[(100, 20)]))
    sol = solve_ucm(case, flat(case, 50, 4), 4, cold(case), EXACT)
    assert sol.cost_total == pytest.approx(4 * 5 + 50 + 4 * 50 * 20)
    assert sol.u.tolist() == [[1, 1, 1, 1]]
    assert (sol.cost_fixed, sol.cost_startup) == (20, 50)


@pytest.mark.parametrize("seed", range(6))
def test_matches_brute_force(seed):
    case, demand = random_two_unit(np.random.default_rng(1000 + seed))
    expected = brute_force_ucm(case, demand, cold(case))
    d = flat(case, demand, len(demand))
    if np.isinf(expected):
        with pytest.raises(InfeasibleError):
            solve_ucm(case, d, len(demand), cold(case), EXACT)
        return
    sol = solve_ucm(case, d, len(demand), cold(case), EXACT)
    assert sol.cost_total == pytest.approx(expected, abs=1e-6)


def test_demand_above_capacity_is_infeasible_with_hour():
    case = single_bus(unit(p_min=0, p_max=100))
    with pytest.raises(InfeasibleError) as info:
        solve_ucm(case, flat(case, [50, 80, 130, 60], 4), 4, cold(case))
    assert info.value.hour == 2


def test_shedding_mode_serves_what_it_can():
    case = single_bus(unit(p_min=0, p_max=100, blocks=[(100, 20)]))
    sol = solve_ucm(case, flat(case, [50, 130], 2), 2, cold(case),
                    UcmConfig(shed_penalty=1000.0, mip_gap=1e-9))
    assert sol.shed.sum() == pytest.approx(30)
    assert sol.cost_shed == pytest.approx(30 * 1000)


def test_zero_demand_costs_nothing():
    case = bundled_case()
    case = dataclasses.replace(case, initial={})
    demand = load_demand(bundled_path("demand_observed.csv"), case).slice(0, 24).scaled(0.0)
    sol = solve_ucm(case, demand, 24, cold_start(case))
    assert sol.cost_total == 0 and sol.u.sum() == 0


def test_fractional_commitment_relaxation_strictly_lower():
    case = single_bus(unit(p_min=0, p_max=100, fixed_cost=1000, blocks=[(100, 20)]))
    built = build_ucm(case, flat(case, 10, 3), 3, cold(case), EXACT)
    milp = build_and_solve(built.model, EXACT.options())
    lp = build_and_solve(relax_integrality(built.model), EXACT.options())
    assert lp.objective < milp.objective - 1.0


def test_audit_clean_then_flags_ramp_jump():
    case = single_bus(unit(p_min=20, p_max=100, ramp_up=30, ramp_down=30, blocks=[(100, 20)]))
    demand = flat(case, [20, 50, 80, 80], 4)
    sol = solve_ucm(case, demand, 4, cold(case), EXACT)
    assert audit_solution(case, demand, sol, cold(case)) == []
    bad = dataclasses.replace(sol, g=sol.g.copy())
    bad.g[0, 2] = bad.g[0, 1] + 31  # RU + 1 MW
    ramp = [p for p in audit_solution(case, demand, bad, cold(case)) if "ramp" in p]
    assert len(ramp) == 1 and "A" in ramp[0] and "hour 2" in ramp[0]


def test_audit_flags_short_run():
    case = single_bus(unit(p_min=0, min_up=3, blocks=[(100, 20)]))
    demand = flat(case, [10, 0, 0, 0], 4)
    sol = solve_ucm(case, demand, 4, cold(case), EXACT)
    bad = dataclasses.replace(sol, u=np.array([[1, 0, 0, 0]]), v=np.array([[1, 0, 0, 0]]),
                              w=np.array([[0, 1, 0, 0]]), g=np.array([[10.0, 0, 0, 0]]))
    assert any("minimum up" in p for p in audit_solution(case, demand, bad, cold(case)))


def test_congested_triangle_ptdf_matches_angles():
    case = triangle(capacity=60.0)
    demand = flat(case, [150, 220, 90], 3)
    lazy = solve_ucm(case, demand, 3, cold(case), EXACT)
    full = solve_ucm(case, demand, 3, cold(case), dataclasses.replace(EXACT, network="angles"))
    assert lazy.cost_total == pytest.approx(full.cost_total, rel=1e-9)
    np.testing.assert_allclose(lazy.flow, full.flow, atol=1e-6)
    assert np.abs(lazy.flow[2]).max() == pytest.approx(60.0)
    # the congested line forces the dear unit on
    assert lazy.g[1].sum() > 0
    for sol in (lazy, full):
        assert audit_solution(case, demand, sol, cold(case)) == []


def test_flows_follow_angles():
    case = bundled_case()
    demand = load_demand(bundled_path("demand_observed.csv"), case).slice(0, 24)
    sol = solve_ucm(case, demand, 24, cold_start(case))
    pos = case.bus_position()
    for l, ln in enumerate(case.lines):
        expect = case.base_mva * ln.susceptance * (sol.angle[pos[ln.from_bus]] - sol.angle[pos[ln.to_bus]])
        np.testing.assert_allclose(sol.flow[l], expect, atol=1e-6)
    assert audit_solution(case, demand, sol, cold_start(case)) == []


def test_dc_power_flow_balances():
    case = triangle()
    inj = np.array([[100.0], [0.0], [-100.0]])
    angle, flow = dc_power_flow(case, inj)
    assert angle[0, 0] == 0
    # net outflow at each bus equals its injection
    out = np.zeros(3)
    for l, ln in enumerate(case.lines):
        out[ln.from_bus - 1] += flow[l, 0]
        out[ln.to_bus - 1] -= flow[l, 0]
    np.testing.assert_allclose(out, inj[:, 0], atol=1e-9)


def test_reserve_requirement_held():
    case = single_bus(unit("A", p_min=0, p_max=100, blocks=[(100, 10)]),
                      unit("B", p_min=0, p_max=100, fixed_cost=50, blocks=[(100, 30)]))
    demand = flat(case, [90, 90], 2)
    cfg = UcmConfig(reserve_fraction=0.2, mip_gap=1e-9)
    sol = solve_ucm(case, demand, 2, cold(case), cfg)
    assert sol.u[1].tolist() == [1, 1]
    assert audit_solution(case, demand, sol, cold(case), cfg) == []


def test_window_energy_cap_binds():
    case = single_bus(unit("H", fuel="hydro", p_min=0, p_max=100, blocks=[(100, 1)]),
                      unit("G", p_min=0, p_max=100, blocks=[(100, 30)]))
    cfg = UcmConfig(window_energy_caps={"H": 120.0}, mip_gap=1e-9)
    sol = solve_ucm(case, flat(case, 80, 3), 3, cold(case), cfg)
    assert sol.g[0].sum() == pytest.approx(120.0)


def test_config_checks():
    case = single_bus(unit())
    for cfg in (UcmConfig(reserve_fraction=0.7), UcmConfig(shed_penalty=5.0),
                UcmConfig(network="ac")):
        with pytest.raises(ValueError):
            cfg.check(case)


def test_window_longer_than_demand():
    case = single_bus(unit())
    with pytest.raises(ValueError):
        build_ucm(case, flat(case, 10, 3), 4, cold(case), UcmConfig())


def test_archive_round_trip():
    case = triangle(capacity=60.0)
    demand = flat(case, [150, 220, 90], 3)
    sol = solve_ucm(case, demand, 3, cold(case), EXACT)
    again = parse_solution(emit_solution(sol), case)
    np.testing.assert_array_equal(again.u, sol.u)
    np.testing.assert_array_equal(again.g, sol.g)
    np.testing.assert_array_equal(again.flow, sol.flow)
    assert again.cost_total == sol.cost_total
    assert audit_solution(case, demand, again, cold(case)) == []


@settings(max_examples=15)
@given(st.integers(0, 10_000))
def test_random_instances_logic_and_oracle(seed):
    case, demand = random_two_unit(np.random.default_rng(seed), hours=3)
    d = flat(case, demand, 3)
    expected = brute_force_ucm(case, demand, cold(case))
    if np.isinf(expected):
        return
    sol = solve_ucm(case, d, 3, cold(case), EXACT)
    assert sol.cost_total == pytest.approx(expected, abs=1e-6)
    prev = np.zeros((2, 1), dtype=int)
    assert (np.diff(np.hstack([prev, sol.u]), axis=1) == sol.v - sol.w).all()
    assert not ((sol.v == 1) & (sol.w == 1)).any()
    assert sol.cost_total == pytest.approx(sol.cost_fixed + sol.cost_startup + sol.cost_variable)
    assert audit_solution(case, d, sol, cold(case)) == []
