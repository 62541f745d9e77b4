import json

import pytest

from evplan.cli import main
from evplan.fleet_io import dump_fleet
from evplan.network import dump_network

from helpers import tiny_instance


@pytest.fixture(scope="module")
def tiny_files(tmp_path_factory):
    """CLI inputs for a tiny seeded case (grid JSON, demand CSV, fleet)."""
    out = tmp_path_factory.mktemp("cli")
    inst = tiny_instance(seed=202, scenario="A", chargers="spc")
    dump_network(inst.network, out / "grid.json")
    from evplan.demand import dump_demand

    dump_demand(inst.demand, out / "demand.csv")
    dump_fleet(inst.schedule, inst.vehicles, out / "fleet.json")
    return out, inst


def run_cli(*args):
    return main([str(a) for a in args])


def test_generate_is_byte_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run_cli("generate", "--vehicles", 8, "--seed", 7, "--out", a) == 0
    assert run_cli("generate", "--vehicles", 8, "--seed", 7, "--out", b) == 0
    assert (a / "fleet.json").read_bytes() == (b / "fleet.json").read_bytes()
    assert (a / "schedule.csv").read_bytes() == (b / "schedule.csv").read_bytes()


def test_generate_default_is_thousand_vehicles(tmp_path):
    assert run_cli("generate", "--out", tmp_path) == 0
    doc = json.loads((tmp_path / "fleet.json").read_text())
    assert len(doc["vehicles"]) == 1000
    assert all(v["battery_kwh"] == 16.0 for v in doc["vehicles"])


def test_missing_grid_file_exits_2(tmp_path):
    rc = run_cli("generate", "--grid", tmp_path / "nope.json", "--out", tmp_path)
    assert rc == 2


def test_config_file_keys_and_flag_overrides(tmp_path):
    (tmp_path / "cfg.json").write_text(json.dumps({"vehicles": 5, "seed": 9}))
    assert run_cli("generate", "--config", tmp_path / "cfg.json", "--out", tmp_path) == 0
    doc = json.loads((tmp_path / "fleet.json").read_text())
    assert len(doc["vehicles"]) == 5
    assert run_cli(
        "generate", "--config", tmp_path / "cfg.json", "--vehicles", 3,
        "--out", tmp_path,
    ) == 0
    doc = json.loads((tmp_path / "fleet.json").read_text())
    assert len(doc["vehicles"]) == 3


def test_build_writes_mps_and_sidecar(tiny_files, tmp_path):
    src, inst = tiny_files
    rc = run_cli(
        "build", "--grid", src / "grid.json", "--demand", src / "demand.csv",
        "--fleet", src / "fleet.json", "--scenario", "A", "--chargers", "spc",
        "--out", tmp_path,
    )
    assert rc == 0
    assert (tmp_path / "model.mps").exists()
    sidecar = json.loads((tmp_path / "model.mps.columns.json").read_text())
    V, T = inst.n_vehicles, inst.horizon
    binaries = [c for c in sidecar["columns"].values() if c["family"] in (
        "fast_charge", "slow_charge", "fast_plug", "slow_plug",
        "fast_connect", "fast_disconnect", "slow_connect", "slow_disconnect")]
    assert len(binaries) == 8 * V * T


def test_bad_scenario_tag_exits_2(tiny_files, tmp_path):
    src, _ = tiny_files
    with pytest.raises(SystemExit) as err:
        run_cli(
            "build", "--grid", src / "grid.json", "--demand", src / "demand.csv",
            "--fleet", src / "fleet.json", "--scenario", "Z", "--out", tmp_path,
        )
    assert err.value.code == 2


def test_solve_and_import_round_trip(tiny_files, tmp_path):
    src, inst = tiny_files
    rc = run_cli(
        "solve", "--grid", src / "grid.json", "--demand", src / "demand.csv",
        "--fleet", src / "fleet.json", "--scenario", "A", "--chargers", "spc",
        "--gap", 0, "--out", tmp_path,
    )
    assert rc == 0
    doc = json.loads((tmp_path / "solution_spc-A.json").read_text())
    assert doc["status"] == "optimal"
    assert doc["verification"]["ok"] is True

    from evplan.oracle import brute_force_oracle

    orc = brute_force_oracle(inst, max_free_binaries=40)
    assert doc["objective"] == pytest.approx(orc.objective)

    rc = run_cli(
        "solve", "--grid", src / "grid.json", "--demand", src / "demand.csv",
        "--fleet", src / "fleet.json", "--scenario", "A", "--chargers", "spc",
        "--import", tmp_path / "solution_spc-A.txt", "--out", tmp_path / "imp",
    )
    assert rc == 0
    doc2 = json.loads((tmp_path / "imp" / "solution_spc-A.json").read_text())
    assert doc2["objective"] == pytest.approx(doc["objective"], abs=1e-6)


def test_infeasible_exits_3(tiny_files, tmp_path):
    src, inst = tiny_files
    # Inflate the driving demand far beyond what parked hours can recharge.
    from evplan.fleet import FleetSchedule

    sched = inst.schedule
    bloated = FleetSchedule(
        node_ids=sched.node_ids,
        parked=sched.parked,
        discharge_kw=sched.discharge_kw * 200.0,
        stay_bounds=sched.stay_bounds,
        ts_hours=sched.ts_hours,
    )
    work = tmp_path / "inf"
    work.mkdir()
    dump_fleet(bloated, inst.vehicles, work / "fleet.json")
    rc = run_cli(
        "solve", "--grid", src / "grid.json", "--demand", src / "demand.csv",
        "--fleet", work / "fleet.json", "--scenario", "A", "--chargers", "spc",
        "--gap", 0, "--out", work,
    )
    assert rc == 3


def test_limit_exits_4(tiny_files, tmp_path):
    src, _ = tiny_files
    rc = run_cli(
        "solve", "--grid", src / "grid.json", "--demand", src / "demand.csv",
        "--fleet", src / "fleet.json", "--scenario", "B", "--chargers", "spc",
        "--gap", 0, "--node-limit", 1, "--out", tmp_path / "lim",
    )
    assert rc == 4


def test_report_outputs(tiny_files, tmp_path):
    src, _ = tiny_files
    outs = []
    for chargers in ("spc", "mpc"):
        for scen in ("A", "B"):
            d = tmp_path / f"{chargers}{scen}"
            rc = run_cli(
                "solve", "--grid", src / "grid.json", "--demand", src / "demand.csv",
                "--fleet", src / "fleet.json", "--scenario", scen,
                "--chargers", chargers, "--gap", 0, "--out", d,
            )
            assert rc == 0
            outs.append(d / f"solution_{chargers}-{scen}.json")
    rep = tmp_path / "rep"
    rc = run_cli(
        "report", "--grid", src / "grid.json", "--demand", src / "demand.csv",
        "--fleet", src / "fleet.json", "--solutions", *outs, "--out", rep,
    )
    assert rc == 0
    lines = (rep / "costs.csv").read_text().splitlines()
    assert len(lines) == 5  # header + four cases
    assert (rep / "charger_table.csv").exists()
    assert (rep / "injections.csv").read_text().startswith("case,node,t,value")


def test_report_missing_solution_exits_2(tiny_files, tmp_path):
    src, _ = tiny_files
    rc = run_cli(
        "report", "--grid", src / "grid.json", "--demand", src / "demand.csv",
        "--fleet", src / "fleet.json", "--solutions", tmp_path / "ghost.json",
        "--out", tmp_path,
    )
    assert rc == 2


def test_sweep_csv(tiny_files, tmp_path):
    src, _ = tiny_files
    rc = run_cli(
        "sweep", "--grid", src / "grid.json", "--demand", src / "demand.csv",
        "--fleet", src / "fleet.json", "--scenario", "A", "--chargers", "mpc",
        "--sweep", "1.0,1.2", "--gap", 0, "--out", tmp_path,
    )
    assert rc == 0
    lines = (tmp_path / "sweep.csv").read_text().splitlines()
    assert len(lines) == 3
    assert lines[0].startswith("multiplier,slow_chargers")
