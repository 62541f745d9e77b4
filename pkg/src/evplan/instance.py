"""A fully specified planning case: grid, demand, fleet, catalog, scenario.

``prepare_instance`` performs the per-interval linearization (one load flow
plus finite-difference sensitivities per time step, computed once on the
EV-free net demand and reused for all candidate EV injections).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .demand import NetDemandProfile
from .errors import ParameterError
from .fleet import ChargerCatalog, FleetSchedule, Vehicle
from .linear_grid import GridLimits, LinearInequality, linear_grid_constraints
from .loadflow import solve_load_flow
from .network import BusNetwork
from .sensitivity import DEFAULT_EPS_PU, SensitivityCoefficients, compute_sensitivities

SCENARIOS = ("A", "B")
CHARGER_CONFIGS = ("spc", "mpc")


@dataclass
class PlanInstance:
    network: BusNetwork
    demand: NetDemandProfile
    schedule: FleetSchedule
    vehicles: list[Vehicle]
    catalog: ChargerCatalog
    scenario: str
    chargers: str
    limits: GridLimits
    linearizations: list[SensitivityCoefficients]
    mpc_slow_literal: bool = False

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ParameterError(f"unknown scenario {self.scenario!r}")
        if self.chargers not in CHARGER_CONFIGS:
            raise ParameterError(f"unknown charger configuration {self.chargers!r}")
        if self.schedule.n_vehicles != len(self.vehicles):
            raise ParameterError("schedule and vehicle list disagree on fleet size")
        if self.demand.horizon != self.schedule.horizon:
            raise ParameterError("demand and schedule horizons differ")
        known = set(self.network.node_ids)
        for n in self.schedule.node_ids:
            if n not in known:
                raise ParameterError(f"schedule references node {n} outside the grid")

    @property
    def horizon(self) -> int:
        return self.schedule.horizon

    @property
    def n_vehicles(self) -> int:
        return self.schedule.n_vehicles

    @property
    def node_ids(self) -> list[int]:
        return self.network.node_ids

    @cached_property
    def grid_rows(self) -> list[list[LinearInequality]]:
        if len(self.linearizations) != self.horizon:
            raise ParameterError(
                f"missing sensitivity sets: have {len(self.linearizations)}, "
                f"need {self.horizon}"
            )
        return [
            linear_grid_constraints(sens, self.network, self.limits)
            for sens in self.linearizations
        ]

    @cached_property
    def parked_col(self) -> np.ndarray:
        """(V, T) index of the parked node into node_ids, -1 while driving."""
        order = {n: k for k, n in enumerate(self.node_ids)}
        out = np.full((self.n_vehicles, self.horizon), -1, dtype=np.int32)
        for v in range(self.n_vehicles):
            for t in range(self.horizon):
                node = self.schedule.node_at(v, t)
                if node is not None:
                    out[v, t] = order[node]
        return out

    def ev_injections(self, fast_charge: np.ndarray, slow_charge: np.ndarray):
        """Nodal (P, Q) pulled by the chargers, shape (n_nodes, T), from a
        complete charge assignment."""
        n = len(self.node_ids)
        p = np.zeros((n, self.horizon))
        q = np.zeros((n, self.horizon))
        cat = self.catalog
        for v in range(self.n_vehicles):
            for t in range(self.horizon):
                col = self.parked_col[v, t]
                if col < 0:
                    continue
                p[col, t] += cat.fast_kw * fast_charge[v, t] + cat.slow_kw * slow_charge[v, t]
                q[col, t] += cat.fast_kvar * fast_charge[v, t] + cat.slow_kvar * slow_charge[v, t]
        return p, q


def prepare_instance(
    network: BusNetwork,
    demand: NetDemandProfile,
    schedule: FleetSchedule,
    vehicles: list[Vehicle],
    catalog: ChargerCatalog | None = None,
    scenario: str = "A",
    chargers: str = "spc",
    limits: GridLimits | None = None,
    eps_pu: float = DEFAULT_EPS_PU,
    mpc_slow_literal: bool = False,
) -> PlanInstance:
    """Solve the EV-free load flow and linearize once per time step."""
    linearizations = []
    for t in range(demand.horizon):
        p, q = demand.demand_at(network, t)
        point = solve_load_flow(network, p, q)
        linearizations.append(compute_sensitivities(network, point, eps_pu=eps_pu))
    return PlanInstance(
        network=network,
        demand=demand,
        schedule=schedule,
        vehicles=vehicles,
        catalog=catalog or ChargerCatalog(),
        scenario=scenario,
        chargers=chargers,
        limits=limits or GridLimits(),
        linearizations=linearizations,
        mpc_slow_literal=mpc_slow_literal,
    )
