"""Command-line pipeline: generate, build, solve, report, sweep.

Exit codes: 0 success, 2 usage or input error, 3 infeasible instance,
4 solver stopped at a limit without meeting its gap.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import data_path
from .analysis import StudyCase, build_report, demand_sweep, write_csv
from .bnb import SolverConfig
from .builder import build_plan_model
from .demand import load_demand
from .errors import EvPlanError
from .fleet import ChargerCatalog, CommuteParams, generate_commute_fleet
from .fleet_io import dump_fleet, load_fleet
from .instance import prepare_instance
from .linear_grid import GridLimits
from .mps_io import export_mps, import_solution, write_solution_file
from .network import load_network
from .solution import (
    PlanSolution,
    assignment_from_columns,
    plan_objective,
    recompute_counts,
    soc_series,
    solve_plan,
)
from .verify import verify_solution

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3
EXIT_LIMIT = 4


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except EvPlanError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="evplan",
        description="Cost-optimal siting and sizing of EV chargers in an MV grid.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, fleet=True):
        p.add_argument("--config", type=Path, help="JSON config; flags override its keys")
        p.add_argument("--grid", type=Path, help="grid JSON (default: bundled 14-bus)")
        p.add_argument("--demand", type=Path, help="net demand CSV (default: bundled)")
        if fleet:
            p.add_argument("--fleet", type=Path, help="fleet.json from 'generate'")
        p.add_argument("--scenario", choices=["A", "B"])
        p.add_argument("--chargers", choices=["spc", "mpc"])
        p.add_argument("--mpc-slow-literal", action="store_true")
        p.add_argument("--v-min", type=float)
        p.add_argument("--v-max", type=float)
        p.add_argument("--seed", type=int)
        p.add_argument("--out", type=Path)

    p = sub.add_parser("generate", help="synthesize a commuting fleet")
    p.add_argument("--config", type=Path)
    p.add_argument("--grid", type=Path)
    p.add_argument("--vehicles", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--daily-kwh", type=float)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("build", help="assemble the MILP and export MPS")
    common(p)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("solve", help="solve internally or import a solution")
    common(p)
    p.add_argument("--gap", type=float)
    p.add_argument("--time-limit", type=float)
    p.add_argument("--node-limit", type=int)
    p.add_argument("--import", dest="import_path", type=Path,
                   help="solution file (column value lines) instead of solving")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("report", help="tables and profiles from solved cases")
    p.add_argument("--config", type=Path)
    p.add_argument("--grid", type=Path)
    p.add_argument("--demand", type=Path)
    p.add_argument("--fleet", type=Path)
    p.add_argument("--solutions", type=Path, nargs="+", required=True,
                   help="solution JSON files written by 'solve'")
    p.add_argument("--gap", type=float)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("sweep", help="re-solve under scaled driving demand")
    common(p)
    p.add_argument("--sweep", type=str,
                   help="comma-separated demand multipliers (default 1.1,1.2,1.3,1.4)")
    p.add_argument("--gap", type=float)
    p.add_argument("--time-limit", type=float)
    p.add_argument("--node-limit", type=int)
    p.set_defaults(func=cmd_sweep)
    return parser


def _load_config(args):
    cfg = {}
    if getattr(args, "config", None):
        cfg = json.loads(Path(args.config).read_text())
    return cfg


def _arg(args, cfg, key, default=None):
    val = getattr(args, key.replace("-", "_"), None)
    if val is not None and val is not False:
        return val
    return cfg.get(key, default)


def _resolve_inputs(args, cfg, need_fleet=True):
    grid = _arg(args, cfg, "grid") or data_path("cigre_mv_14bus.json")
    demand = _arg(args, cfg, "demand") or data_path("demand_24h.csv")
    network = load_network(grid)
    profile = load_demand(demand, network)
    if not need_fleet:
        return network, profile, None, None
    fleet = _arg(args, cfg, "fleet")
    if fleet is None:
        raise EvPlanError("--fleet is required (run 'evplan generate' first)")
    schedule, vehicles = load_fleet(fleet)
    return network, profile, schedule, vehicles


def _catalog_from(cfg) -> ChargerCatalog:
    kw = {k: cfg[k] for k in (
        "fast_kva", "slow_kva", "fast_pf", "slow_pf",
        "fast_charger_cost", "slow_charger_cost",
        "fast_plug_cost", "slow_plug_cost",
    ) if k in cfg}
    return ChargerCatalog(**kw)


def _instance_from(args, cfg):
    network, profile, schedule, vehicles = _resolve_inputs(args, cfg)
    return prepare_instance(
        network,
        profile,
        schedule,
        vehicles,
        catalog=_catalog_from(cfg),
        scenario=_arg(args, cfg, "scenario", "A"),
        chargers=_arg(args, cfg, "chargers", "spc"),
        limits=GridLimits(
            v_min_pu=float(_arg(args, cfg, "v-min", 0.97)),
            v_max_pu=float(_arg(args, cfg, "v-max", 1.03)),
        ),
        mpc_slow_literal=bool(_arg(args, cfg, "mpc-slow-literal", False)),
    )


def cmd_generate(args) -> int:
    cfg = _load_config(args)
    grid = _arg(args, cfg, "grid") or data_path("cigre_mv_14bus.json")
    network = load_network(grid)
    homes = network.cluster_nodes(1)
    work = network.cluster_nodes(2)
    if not homes or not work:
        print("error: grid defines no EV clusters", file=sys.stderr)
        return EXIT_USAGE
    params = CommuteParams(daily_energy_kwh=float(_arg(args, cfg, "daily-kwh", 4.8)))
    schedule, vehicles = generate_commute_fleet(
        homes, work, int(_arg(args, cfg, "vehicles", 1000)),
        seed=int(_arg(args, cfg, "seed", 42)), params=params,
    )
    out = Path(_arg(args, cfg, "out", "."))
    out.mkdir(parents=True, exist_ok=True)
    dump_fleet(schedule, vehicles, out / "fleet.json")
    print(f"wrote {out / 'fleet.json'} and {out / 'schedule.csv'} "
          f"({len(vehicles)} vehicles)")
    return EXIT_OK


def cmd_build(args) -> int:
    cfg = _load_config(args)
    instance = _instance_from(args, cfg)
    model = build_plan_model(instance)
    out = Path(_arg(args, cfg, "out", "."))
    out.mkdir(parents=True, exist_ok=True)
    mps = out / "model.mps"
    sidecar = export_mps(model, mps)
    print(
        f"wrote {mps} ({model.n_rows} rows, {model.n_cols} columns, "
        f"{model.n_binary} binary) and {sidecar}"
    )
    return EXIT_OK


def _solution_payload(instance, solution: PlanSolution, label: str) -> dict:
    report = None
    if solution.feasible:
        report = verify_solution(
            instance, solution.assignment, counts=solution.counts
        ).as_dict()
    return {
        "label": label,
        "status": solution.status,
        "objective": solution.objective,
        "bound": solution.bound,
        "gap": solution.gap,
        "nodes": solution.nodes,
        "counts": {k: [int(x) for x in v] for k, v in (solution.counts or {}).items()},
        "node_ids": list(instance.node_ids),
        "soc_start": (
            [float(s) for s in solution.assignment.soc_start] if solution.feasible else None
        ),
        "columns": (
            {
                fam: solution.assignment.__getattribute__(fam).tolist()
                for fam in ("fast_charge", "slow_charge", "fast_plug", "slow_plug")
            }
            if solution.feasible
            else None
        ),
        "verification": report,
    }


def cmd_solve(args) -> int:
    cfg = _load_config(args)
    instance = _instance_from(args, cfg)
    model = build_plan_model(instance)
    label = f"{instance.chargers}-{instance.scenario}"
    out = Path(_arg(args, cfg, "out", "."))
    out.mkdir(parents=True, exist_ok=True)

    if args.import_path:
        x = import_solution(model, args.import_path)
        assignment = assignment_from_columns(model, x)
        counts = recompute_counts(instance, assignment)
        solution = PlanSolution(
            status="imported",
            objective=plan_objective(instance, counts),
            bound=float("-inf"),
            gap=None,
            assignment=assignment,
            column_values=x,
            counts=counts,
            soc=soc_series(instance, assignment),
        )
    else:
        config = SolverConfig(
            gap=float(_arg(args, cfg, "gap", 0.10)),
            node_limit=_arg(args, cfg, "node-limit"),
            time_limit_s=_arg(args, cfg, "time-limit"),
            seed=int(_arg(args, cfg, "seed", 42)),
            log_interval_s=10.0 if args.verbose else None,
        )
        solution = solve_plan(instance, config, model=model)

    payload = _solution_payload(instance, solution, label)
    sol_path = out / f"solution_{label}.json"
    sol_path.write_text(json.dumps(payload, indent=1) + "\n")
    if solution.feasible:
        write_solution_file(model, solution.column_values, out / f"solution_{label}.txt")
    print(
        f"{label}: status={solution.status} objective={solution.objective} "
        f"bound={solution.bound:.2f} gap={solution.gap} -> {sol_path}"
    )
    if solution.status == "infeasible":
        return EXIT_INFEASIBLE
    if solution.status == "limit":
        return EXIT_LIMIT
    return EXIT_OK


def _case_from_payload(path: Path, base_args, cfg) -> StudyCase:
    doc = json.loads(Path(path).read_text())
    label = doc["label"]
    chargers, scenario = label.split("-")
    args2 = argparse.Namespace(**vars(base_args))
    args2.scenario = scenario
    args2.chargers = chargers
    if not hasattr(args2, "v_min"):
        args2.v_min, args2.v_max = 0.97, 1.03
    instance = _instance_from(args2, cfg)
    cols = doc["columns"]
    assignment = assignment_from_columns_dict(cols, doc["soc_start"])
    counts = recompute_counts(instance, assignment)
    solution = PlanSolution(
        status=doc["status"],
        objective=doc["objective"],
        bound=doc["bound"],
        gap=doc["gap"],
        assignment=assignment,
        column_values=None,
        counts=counts,
        soc=soc_series(instance, assignment),
    )
    return StudyCase(label=label, instance=instance, solution=solution)


def assignment_from_columns_dict(cols: dict, soc_start):
    from .solution import PlanAssignment

    return PlanAssignment(
        fast_charge=np.asarray(cols["fast_charge"], dtype=int),
        slow_charge=np.asarray(cols["slow_charge"], dtype=int),
        fast_plug=np.asarray(cols["fast_plug"], dtype=int),
        slow_plug=np.asarray(cols["slow_plug"], dtype=int),
        soc_start=np.asarray(soc_start, dtype=float),
    )


def cmd_report(args) -> int:
    cfg = _load_config(args)
    cases = []
    for path in args.solutions:
        if not Path(path).exists():
            print(f"error: missing solution file {path}", file=sys.stderr)
            return EXIT_USAGE
        cases.append(_case_from_payload(path, args, cfg))
    report = build_report(cases, gap=float(_arg(args, cfg, "gap", 0.10)))
    out = Path(_arg(args, cfg, "out", "."))
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "charger_table.csv", report.charger_rows)
    write_csv(out / "costs.csv", report.costs)
    write_csv(out / "injections.csv", report.injection_rows,
              columns=["case", "node", "t", "value"])
    report.write_json(out / "study_report.json")
    print(f"wrote charger_table.csv, costs.csv, injections.csv, study_report.json in {out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    try:
        multipliers = [
            float(x)
            for x in str(_arg(args, cfg, "sweep", "1.1,1.2,1.3,1.4")).split(",")
            if x
        ]
    except ValueError:
        print("error: --sweep expects comma-separated numbers", file=sys.stderr)
        return EXIT_USAGE
    if not multipliers:
        print("error: empty sweep list", file=sys.stderr)
        return EXIT_USAGE
    instance = _instance_from(args, cfg)
    config = SolverConfig(
        gap=float(_arg(args, cfg, "gap", 0.10)),
        node_limit=_arg(args, cfg, "node-limit"),
        time_limit_s=_arg(args, cfg, "time-limit"),
    )
    rows = demand_sweep(instance, multipliers, config)
    out = Path(_arg(args, cfg, "out", "."))
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "sweep.csv", rows)
    print(f"wrote {out / 'sweep.csv'} ({len(rows)} rows)")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
