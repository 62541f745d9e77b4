"""Assemble the charger planning MILP from a PlanInstance.

Variable families, in column order:

    fast_charge, slow_charge    (V, T) binary   charging states
    fast_plug, slow_plug        (V, T) binary   connection states
    soc_start                   (V,)   cont.    free initial SOC
    fast_connect/disconnect,
    slow_connect/disconnect     (V, T) binary   plug-state edges
    fast_chargers, slow_chargers,
    fast_plugs, slow_plugs      (N,)   cont.    per-node equipment counts

Count variables stay continuous: their lower bounds are integer sums of
binaries and their costs are positive, so they are integral at any optimum
(the verifier asserts this post-hoc).

Driver-flexibility restrictions that pin a single connect/disconnect
variable to zero are applied as upper-bound fixes rather than explicit
rows; the feasible set is identical and the LP stays smaller.
"""

from __future__ import annotations

import numpy as np

from .errors import BuildError, ScheduleError
from .fleet import validate_schedule
from .instance import PlanInstance
from .milp import BINARY, CONTINUOUS, SENSE_EQ, SENSE_GE, SENSE_LE, MilpModel

VT_FAMILIES = (
    "fast_charge",
    "slow_charge",
    "fast_plug",
    "slow_plug",
)
EDGE_FAMILIES = (
    "fast_connect",
    "fast_disconnect",
    "slow_connect",
    "slow_disconnect",
)
COUNT_FAMILIES = ("fast_chargers", "slow_chargers", "fast_plugs", "slow_plugs")


class PlanModelBuilder:
    """Stateful assembly; call the add_* steps then ``build()``."""

    def __init__(self, instance: PlanInstance):
        issues = validate_schedule(instance.schedule)
        if issues:
            raise ScheduleError("invalid schedule: " + "; ".join(issues[:5]))
        self.instance = instance
        self.model = MilpModel()
        self._steps: set[str] = set()
        V, T = instance.n_vehicles, instance.horizon
        N = len(instance.node_ids)
        for fam in VT_FAMILIES:
            self.model.add_family(fam, (V, T), BINARY)
        z = self.model.add_family("soc_start", (V,), CONTINUOUS, lb=0.0, ub=1.0)
        for v, veh in enumerate(instance.vehicles):
            self.model.set_bounds(int(z[v]), veh.soc_min, veh.soc_max)
        for fam in EDGE_FAMILIES:
            self.model.add_family(fam, (V, T), BINARY)
        for fam in COUNT_FAMILIES:
            self.model.add_family(fam, (N,), CONTINUOUS, lb=0.0, ub=np.inf)
        self._parked = instance.schedule.parked.any(axis=2)

    def _mark(self, step: str):
        if step in self._steps:
            raise BuildError(f"step {step} applied twice")
        self._steps.add(step)

    # -- constraint families --------------------------------------------

    def add_plug_logic(self):
        """Plugged only while parked; charging only while plugged."""
        self._mark("plug_logic")
        m = self.model
        fc, sc = m.family("fast_charge"), m.family("slow_charge")
        fp, sp = m.family("fast_plug"), m.family("slow_plug")
        V, T = fc.shape
        for v in range(V):
            for t in range(T):
                m.add_row(
                    f"plug_cap[{v},{t}]",
                    [(fp[v, t], 1.0), (sp[v, t], 1.0)],
                    SENSE_LE,
                    1.0 if self._parked[v, t] else 0.0,
                    meta=("plug_cap", v, t),
                )
                m.add_row(
                    f"fast_chg_le[{v},{t}]",
                    [(fc[v, t], 1.0), (fp[v, t], -1.0)],
                    SENSE_LE,
                    0.0,
                    meta=("chg_le", v, t),
                )
                m.add_row(
                    f"slow_chg_le[{v},{t}]",
                    [(sc[v, t], 1.0), (sp[v, t], -1.0)],
                    SENSE_LE,
                    0.0,
                    meta=("chg_le", v, t),
                )

    def add_soc_constraints(self):
        """Battery bounds at every interval plus the no-free-energy rule
        (final SOC at least the initial one). The SOC is substituted as an
        affine expression of the charge binaries and the initial SOC."""
        self._mark("soc")
        m = self.model
        inst = self.instance
        fc, sc = m.family("fast_charge"), m.family("slow_charge")
        z = m.family("soc_start")
        ts = inst.schedule.ts_hours
        cat = inst.catalog
        V, T = fc.shape
        for v, veh in enumerate(inst.vehicles):
            kf = veh.efficiency * ts * cat.fast_kw / veh.battery_kwh
            ks = veh.efficiency * ts * cat.slow_kw / veh.battery_kwh
            dis = ts / veh.battery_kwh * np.cumsum(inst.schedule.discharge_kw[v])
            coeffs = [(int(z[v]), 1.0)]
            for t in range(1, T + 1):
                coeffs = coeffs + [(int(fc[v, t - 1]), kf), (int(sc[v, t - 1]), ks)]
                m.add_row(
                    f"soc_lo[{v},{t}]",
                    list(coeffs),
                    SENSE_GE,
                    veh.soc_min + dis[t - 1],
                    meta=("soc_lo", v, t),
                )
                m.add_row(
                    f"soc_hi[{v},{t}]",
                    list(coeffs),
                    SENSE_LE,
                    veh.soc_max + dis[t - 1],
                    meta=("soc_hi", v, t),
                )
            m.add_row(
                f"soc_final[{v}]",
                [(j, a) for j, a in coeffs if j != int(z[v])],
                SENSE_GE,
                dis[T - 1],
                meta=("soc_final", v),
            )

    def add_grid_coupling(self):
        """Linearized voltage/current/transformer rows plus nodal apparent
        power boxes, instantiated per interval with the EV charging power as
        the injection increment."""
        self._mark("grid")
        m = self.model
        inst = self.instance
        if len(inst.linearizations) != inst.horizon:
            raise BuildError(
                f"missing sensitivities: {len(inst.linearizations)} sets for "
                f"{inst.horizon} intervals"
            )
        fc, sc = m.family("fast_charge"), m.family("slow_charge")
        cat = inst.catalog
        V, T = fc.shape
        parked_col = inst.parked_col
        for t in range(T):
            at_t = [(v, parked_col[v, t]) for v in range(V) if parked_col[v, t] >= 0]
            for k, row in enumerate(inst.grid_rows[t]):
                coeffs = []
                for v, col in at_t:
                    a_f = row.p_coef[col] * cat.fast_kw + row.q_coef[col] * cat.fast_kvar
                    a_s = row.p_coef[col] * cat.slow_kw + row.q_coef[col] * cat.slow_kvar
                    coeffs.append((int(fc[v, t]), a_f))
                    coeffs.append((int(sc[v, t]), a_s))
                m.add_row(
                    f"grid[{t}]:{row.kind}[{row.subject}]",
                    coeffs,
                    SENSE_LE,
                    row.rhs,
                    meta=("grid", t, row.kind, row.subject),
                )

    def _count_rows(self, count_family: str, state_family: str, label: str):
        m = self.model
        inst = self.instance
        counts = m.family(count_family)
        states = m.family(state_family)
        V, T = states.shape
        parked_col = inst.parked_col
        for n_idx, node in enumerate(inst.node_ids):
            for t in range(T):
                present = [v for v in range(V) if parked_col[v, t] == n_idx]
                if not present:
                    continue
                coeffs = [(int(counts[n_idx]), 1.0)]
                coeffs += [(int(states[v, t]), -1.0) for v in present]
                m.add_row(
                    f"{label}[{node},{t}]",
                    coeffs,
                    SENSE_GE,
                    0.0,
                    meta=(label, node, t),
                )

    def add_counts_spc(self):
        """Single-port: chargers track simultaneous connections; plug counts
        equal charger counts."""
        self._mark("counts")
        self._count_rows("fast_chargers", "fast_plug", "spc_fast")
        self._count_rows("slow_chargers", "slow_plug", "spc_slow")
        m = self.model
        for n_idx, node in enumerate(self.instance.node_ids):
            m.add_row(
                f"spc_fast_tie[{node}]",
                [(m.column_of("fast_plugs", n_idx), 1.0), (m.column_of("fast_chargers", n_idx), -1.0)],
                SENSE_EQ,
                0.0,
                meta=("spc_tie", node),
            )
            m.add_row(
                f"spc_slow_tie[{node}]",
                [(m.column_of("slow_plugs", n_idx), 1.0), (m.column_of("slow_chargers", n_idx), -1.0)],
                SENSE_EQ,
                0.0,
                meta=("spc_tie", node),
            )

    def add_counts_mpc(self):
        """Multi-port: charger conversion stages track simultaneous charging,
        plugs track simultaneous connections. Slow chargers count charging
        states by default; the literal variant counts connections."""
        self._mark("counts")
        self._count_rows("fast_chargers", "fast_charge", "mpc_fast_chargers")
        slow_source = "slow_plug" if self.instance.mpc_slow_literal else "slow_charge"
        self._count_rows("slow_chargers", slow_source, "mpc_slow_chargers")
        self._count_rows("fast_plugs", "fast_plug", "mpc_fast_plugs")
        self._count_rows("slow_plugs", "slow_plug", "mpc_slow_plugs")

    def add_cost_objective(self):
        self._mark("objective")
        m = self.model
        cat = self.instance.catalog
        coeffs = []
        prices = {
            "fast_chargers": cat.fast_charger_cost,
            "slow_chargers": cat.slow_charger_cost,
            "fast_plugs": cat.fast_plug_cost,
            "slow_plugs": cat.slow_plug_cost,
        }
        for fam, price in prices.items():
            for j in m.family(fam).ravel():
                coeffs.append((int(j), price))
        m.set_objective(coeffs)

    def add_edge_detection(self):
        """Connection/disconnection indicators from plug-state edges; the
        fleet starts unplugged at the horizon boundary."""
        self._mark("edges")
        m = self.model
        V, T = m.family("fast_plug").shape
        pairs = (
            ("fast_connect", "fast_disconnect", "fast_plug"),
            ("slow_connect", "slow_disconnect", "slow_plug"),
        )
        for conn_f, disc_f, plug_f in pairs:
            conn, disc, plug = m.family(conn_f), m.family(disc_f), m.family(plug_f)
            for v in range(V):
                for t in range(T):
                    rise = [(int(conn[v, t]), 1.0), (int(plug[v, t]), -1.0)]
                    fall = [(int(disc[v, t]), 1.0), (int(plug[v, t]), 1.0)]
                    if t > 0:
                        rise.append((int(plug[v, t - 1]), 1.0))
                        fall.append((int(plug[v, t - 1]), -1.0))
                    m.add_row(f"{conn_f}[{v},{t}]", rise, SENSE_GE, 0.0, meta=("edge", v, t))
                    m.add_row(f"{disc_f}[{v},{t}]", fall, SENSE_GE, 0.0, meta=("edge", v, t))

    def add_scenario(self):
        """Driver-flexibility rules.

        A (stiff): connect only on arriving at a stay, disconnect only when
        leaving it. B (flexible): overnight stays as in A, but connections
        are free during the midday stay with at most one disconnection
        there. A vehicle already parked at t=0 may start plugged without the
        event counting against the rules.
        """
        self._mark("scenario")
        m = self.model
        inst = self.instance
        V, T = m.family("fast_plug").shape
        for v in range(V):
            tau = inst.schedule.stay_bounds[v]
            single_stay = bool(np.all(tau < 0))
            if single_stay:
                # No driving legs: one stay covering the horizon, so the only
                # connection opportunity is the start of the day.
                allowed_c: set[int] = set()
                allowed_d: set[int] = set() if inst.scenario == "A" else set(range(T))
            elif np.any(tau < 0):
                raise BuildError(f"vehicle {v}: scenario constraints need stay bounds")
            else:
                arr_home, dep_home, arr_work, dep_work = (int(x) for x in tau)
                allowed_c = {arr_home}
                if inst.scenario == "A":
                    allowed_c.add(arr_work)
                    allowed_d = {dep_home, dep_work}
                else:
                    allowed_c.update(range(arr_work, dep_work))
                    allowed_d = set(range(T))
            if inst.schedule.is_parked(v, 0):
                allowed_c.add(0)
            for fam, allowed in (
                ("fast_connect", allowed_c),
                ("slow_connect", allowed_c),
                ("fast_disconnect", allowed_d),
                ("slow_disconnect", allowed_d),
            ):
                cols = m.family(fam)
                for t in range(T):
                    if t not in allowed:
                        m.set_bounds(int(cols[v, t]), 0.0, 0.0)
            if inst.scenario == "B" and not single_stay:
                window = range(arr_work, min(dep_work, T - 1) + 1)
                for fam, label in (("fast_disconnect", "fast"), ("slow_disconnect", "slow")):
                    cols = m.family(fam)
                    m.add_row(
                        f"midday_budget_{label}[{v}]",
                        [(int(cols[v, t]), 1.0) for t in window],
                        SENSE_LE,
                        1.0,
                        meta=("midday_budget", v),
                    )

    # -- finalize --------------------------------------------------------

    REQUIRED = ("plug_logic", "soc", "grid", "counts", "objective", "edges", "scenario")

    def build(self) -> MilpModel:
        missing = [s for s in self.REQUIRED if s not in self._steps]
        if missing:
            raise BuildError(f"model incomplete, missing step(s): {', '.join(missing)}")
        return self.model.freeze()


def build_plan_model(instance: PlanInstance) -> MilpModel:
    """Run all assembly steps in canonical order."""
    b = PlanModelBuilder(instance)
    b.add_plug_logic()
    b.add_soc_constraints()
    b.add_grid_coupling()
    if instance.chargers == "spc":
        b.add_counts_spc()
    else:
        b.add_counts_mpc()
    b.add_cost_objective()
    b.add_edge_detection()
    b.add_scenario()
    return b.build()
