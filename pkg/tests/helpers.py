"""Shared test machinery: tiny seeded instances and independent oracles."""

from __future__ import annotations

import numpy as np

from evplan.demand import NetDemandProfile
from evplan.fleet import ChargerCatalog, FleetSchedule, Vehicle
from evplan.instance import PlanInstance, prepare_instance
from evplan.linear_grid import GridLimits
from evplan.network import Bus, BusNetwork, Line

# Small fast charger so tiny batteries can actually use both types.
TINY_CATALOG = ChargerCatalog(
    fast_kva=7.2,
    slow_kva=2.4,
    fast_pf=0.9,
    slow_pf=0.9,
    fast_charger_cost=3000.0,
    slow_charger_cost=800.0,
    fast_plug_cost=450.0,
    slow_plug_cost=120.0,
)


def two_bus_network(r_ohm=4.0, x_ohm=8.0, base_kva=1000.0, base_kv=20.0,
                    slack_v=1.0, ampacity=500.0) -> BusNetwork:
    return BusNetwork(
        buses=(Bus(0, base_kv), Bus(1, base_kv, 500.0, 0.95, 1)),
        lines=(Line(0, 1, r_ohm, x_ohm, 0.0, ampacity),),
        slack_bus=0,
        slack_voltage_pu=slack_v,
        transformer_kva=base_kva,
        base_kva=base_kva,
        base_kv=base_kv,
    )


def two_bus_exact_voltage(network: BusNetwork, p_kw: float, q_kvar: float) -> float:
    """Closed-form |V2| of the two-bus feeder (demand-positive load).

    With v = |V2|^2, the power-flow equation collapses to a quadratic
    v^2 + (2(Pr+Qx) - V1^2) v + (P^2+Q^2)|z|^2 = 0; the high-voltage root
    is the operating solution.
    """
    line = network.lines[0]
    zb = network.z_base_ohm
    r, x = line.r_ohm / zb, line.x_ohm / zb
    p = p_kw / network.base_kva
    q = q_kvar / network.base_kva
    v1 = network.slack_voltage_pu
    a = v1**2 / 2.0 - (p * r + q * x)
    disc = a**2 - (p**2 + q**2) * (r**2 + x**2)
    if disc < 0:
        raise ValueError("load beyond maximum transfer")
    return float(np.sqrt(a + np.sqrt(disc)))


def two_bus_exact_dv_dp(network: BusNetwork, p_kw: float, q_kvar: float) -> float:
    """Analytic derivative of the closed-form |V2| w.r.t. demand in kW."""
    line = network.lines[0]
    zb = network.z_base_ohm
    r, x = line.r_ohm / zb, line.x_ohm / zb
    p = p_kw / network.base_kva
    q = q_kvar / network.base_kva
    v1 = network.slack_voltage_pu
    z2 = r**2 + x**2
    a = v1**2 / 2.0 - (p * r + q * x)
    da = -r
    disc = a**2 - (p**2 + q**2) * z2
    ddisc = 2 * a * da - 2 * p * z2
    v = a + np.sqrt(disc)
    dv = da + ddisc / (2 * np.sqrt(disc))
    dvm_dp_pu = dv / (2 * np.sqrt(v))
    return float(dvm_dp_pu / network.base_kva)


def tiny_network(n_nodes: int, rng: np.random.Generator) -> BusNetwork:
    """Chain grid with one slack and 2..3 rated nodes."""
    buses = [Bus(0, 20.0)]
    clusters = [1, 2, 2]
    for k in range(n_nodes):
        rating = float(rng.integers(15, 50))
        buses.append(Bus(k + 1, 20.0, rating, 0.95, clusters[k]))
    lines = []
    prev = 0
    for k in range(n_nodes):
        lines.append(
            Line(prev, k + 1, float(rng.uniform(0.3, 1.2)), float(rng.uniform(0.4, 1.4)),
                 0.0, float(rng.uniform(4.0, 12.0)))
        )
        prev = k + 1
    return BusNetwork(
        buses=tuple(buses),
        lines=tuple(lines),
        slack_bus=0,
        slack_voltage_pu=1.0,
        transformer_kva=float(rng.integers(120, 300)),
        base_kva=1000.0,
        base_kv=20.0,
    )


def tiny_instance(
    seed: int,
    scenario: str = "A",
    chargers: str = "spc",
    mpc_slow_literal: bool = False,
    max_parked_slots: int = 7,
) -> PlanInstance:
    """Small seeded commute case an exhaustive oracle can certify.

    The grid, demand, stays and driving energies are randomized; limits are
    drawn tight enough that grid rows bind on some draws and some draws are
    outright infeasible.
    """
    rng = np.random.default_rng(seed)
    n_nodes = int(rng.integers(2, 4))
    net = tiny_network(n_nodes, rng)
    T = int(rng.integers(5, 7))
    node_ids = tuple(net.node_ids)

    shape = rng.uniform(0.2, 0.6, size=T)
    p = np.zeros((len(node_ids), T))
    q = np.zeros_like(p)
    for r, node in enumerate(node_ids):
        bus = net.buses[net.bus_index(node)]
        p[r] = bus.rating_kva * bus.power_factor * shape
        q[r] = p[r] * np.tan(np.arccos(bus.power_factor))
    demand = NetDemandProfile(node_ids=node_ids, p_kw=p, q_kvar=q)

    homes = [n for n in node_ids if net.buses[net.bus_index(n)].cluster == 1] or [node_ids[0]]
    works = [n for n in node_ids if net.buses[net.bus_index(n)].cluster == 2] or [node_ids[-1]]

    V = int(rng.integers(1, 4))
    while V * 3 > max_parked_slots:
        V -= 1
    V = max(V, 1)

    parked = np.zeros((V, T, len(node_ids)), dtype=bool)
    discharge = np.zeros((V, T))
    bounds = np.zeros((V, 4), dtype=int)
    vehicles = []
    col = {n: i for i, n in enumerate(node_ids)}
    for v in range(V):
        home = homes[int(rng.integers(0, len(homes)))]
        work = works[int(rng.integers(0, len(works)))]
        dep_home = 1
        arr_work = 2
        dep_work = T - 3 if T >= 6 else T - 2
        arr_home = T - 1
        parked[v, :dep_home, col[home]] = True
        parked[v, arr_work:dep_work, col[work]] = True
        parked[v, arr_home:, col[home]] = True
        leg = float(rng.uniform(0.4, 1.6))
        discharge[v, dep_home:arr_work] = leg / (arr_work - dep_home)
        discharge[v, dep_work:arr_home] = leg / (arr_home - dep_work)
        bounds[v] = (arr_home, dep_home, arr_work, dep_work)
        vehicles.append(
            Vehicle(
                id=v,
                battery_kwh=float(rng.uniform(10.0, 16.0)),
                efficiency=float(rng.uniform(0.85, 0.95)),
                soc_min=0.1,
                soc_max=0.9,
                home_node=home,
                work_node=work,
                stay_bounds=tuple(int(x) for x in bounds[v]),
            )
        )
    schedule = FleetSchedule(
        node_ids=node_ids,
        parked=parked,
        discharge_kw=discharge,
        stay_bounds=bounds,
        ts_hours=1.0,
    )
    return prepare_instance(
        net,
        demand,
        schedule,
        vehicles,
        catalog=TINY_CATALOG,
        scenario=scenario,
        chargers=chargers,
        limits=GridLimits(0.97, 1.03),
        mpc_slow_literal=mpc_slow_literal,
    )
