import numpy as np
import pytest

from evplan.errors import OracleSizeError
from evplan.oracle import brute_force_oracle
from evplan.solution import recompute_counts, soc_series
from evplan.verify import verify_solution

from helpers import tiny_instance


def test_refuses_oversized_instances():
    inst = tiny_instance(seed=55)
    with pytest.raises(OracleSizeError):
        brute_force_oracle(inst, max_free_binaries=3)


def test_deterministic():
    inst = tiny_instance(seed=60)
    a = brute_force_oracle(inst, max_free_binaries=40)
    b = brute_force_oracle(inst, max_free_binaries=40)
    assert a.status == b.status
    assert a.objective == b.objective
    if a.assignment is not None:
        assert np.array_equal(a.assignment.slow_charge, b.assignment.slow_charge)


def test_zero_demand_costs_nothing():
    inst = tiny_instance(seed=61)
    inst.schedule.discharge_kw[:] = 0.0
    res = brute_force_oracle(inst, max_free_binaries=40)
    assert res.status == "optimal"
    assert res.objective == 0.0
    assert res.assignment.slow_plug.sum() == 0


def test_all_parked_vehicle_costs_nothing():
    # A vehicle that never drives needs no charging: nothing forces a plug.
    from dataclasses import replace

    import numpy as np

    from evplan.bnb import SolverConfig, solve_bnb
    from evplan.builder import build_plan_model
    from evplan.fleet import FleetSchedule
    from evplan.solution import solution_from_result

    base = tiny_instance(seed=61)
    T = base.horizon
    parked = np.zeros((1, T, len(base.schedule.node_ids)), dtype=bool)
    parked[0, :, 0] = True
    schedule = FleetSchedule(
        node_ids=base.schedule.node_ids,
        parked=parked,
        discharge_kw=np.zeros((1, T)),
        stay_bounds=np.full((1, 4), -1, dtype=int),
    )
    for scenario in ("A", "B"):
        inst = replace(
            base, schedule=schedule, vehicles=base.vehicles[:1], scenario=scenario
        )
        orc = brute_force_oracle(inst, max_free_binaries=4 * T)
        assert orc.status == "optimal"
        assert orc.objective == 0.0
        model = build_plan_model(inst)
        sol = solution_from_result(
            inst, model, solve_bnb(model, SolverConfig(gap=0.0, abs_gap=1e-9))
        )
        assert sol.status == "optimal"
        assert sol.objective == 0.0


def test_single_vehicle_minimal_kit():
    # One vehicle needing some charge: exactly one slow charger + plug.
    inst = None
    for seed in range(80, 120):
        cand = tiny_instance(seed=seed)
        if cand.n_vehicles == 1 and cand.schedule.discharge_kw.sum() > 0:
            res = brute_force_oracle(cand, max_free_binaries=40)
            if res.status == "optimal" and res.objective > 0:
                inst, result = cand, res
                break
    assert inst is not None
    counts = recompute_counts(inst, result.assignment)
    total_units = sum(int(v.sum()) for v in counts.values())
    cat = inst.catalog
    cheapest = cat.slow_charger_cost + cat.slow_plug_cost
    assert result.objective >= cheapest
    # The optimum uses a single charger somewhere unless grid rows block it.
    assert counts["slow_chargers"].sum() + counts["fast_chargers"].sum() >= 1


def test_oracle_solutions_verify_clean():
    checked = 0
    for seed in range(300, 312):
        inst = tiny_instance(seed=seed, scenario="A", chargers="mpc")
        res = brute_force_oracle(inst, max_free_binaries=40)
        if res.status != "optimal":
            continue
        counts = recompute_counts(inst, res.assignment)
        report = verify_solution(inst, res.assignment, counts=counts, spot_checks=1)
        assert report.ok, report.violations[:3]
        soc = soc_series(inst, res.assignment)
        for v, veh in enumerate(inst.vehicles):
            assert soc[v].min() >= veh.soc_min - 1e-9
            assert soc[v].max() <= veh.soc_max + 1e-9
            assert soc[v, -1] >= soc[v, 0] - 1e-9
        checked += 1
    assert checked >= 6


def test_scenario_b_never_costs_more():
    for seed in (400, 401, 402, 403):
        a = tiny_instance(seed=seed, scenario="A", chargers="spc")
        b = tiny_instance(seed=seed, scenario="B", chargers="spc")
        ra = brute_force_oracle(a, max_free_binaries=40)
        rb = brute_force_oracle(b, max_free_binaries=40)
        if ra.status == "optimal":
            assert rb.status == "optimal"
            assert rb.objective <= ra.objective + 1e-9


def test_mpc_never_costs_more():
    for seed in (410, 411, 412, 413):
        s = tiny_instance(seed=seed, scenario="A", chargers="spc")
        m = tiny_instance(seed=seed, scenario="A", chargers="mpc")
        rs = brute_force_oracle(s, max_free_binaries=40)
        rm = brute_force_oracle(m, max_free_binaries=40)
        if rs.status == "optimal":
            assert rm.status == "optimal"
            assert rm.objective <= rs.objective + 1e-9
