"""Linearized operating constraints built from sensitivity coefficients.

Every constraint is canonicalized as

    sum_m p_coef[m] * dP_m + sum_m q_coef[m] * dQ_m  <=  rhs

where (dP, dQ) are demand increments in kW/kVAr at the non-slack nodes,
relative to the linearization point. The base-point value is folded into
``rhs``, so a zero increment satisfies every row of a feasible point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleBasePointError, LoadFlowDivergenceError, ParameterError
from .loadflow import solve_load_flow
from .network import BusNetwork
from .sensitivity import SensitivityCoefficients

BASE_POINT_TOL = 1e-9


@dataclass(frozen=True)
class GridLimits:
    v_min_pu: float = 0.97
    v_max_pu: float = 1.03

    def __post_init__(self):
        if self.v_min_pu <= 0 or self.v_max_pu <= 0:
            raise ParameterError("voltage limits must be positive")
        if self.v_min_pu >= self.v_max_pu:
            raise ParameterError("lower voltage limit must be below the upper one")


@dataclass(frozen=True)
class LinearInequality:
    kind: str  # v_lo / v_hi / i_hi / s0_hi / box_lo / box_hi
    subject: int  # bus id or line index
    p_coef: np.ndarray
    q_coef: np.ndarray
    rhs: float

    def margin(self, dp: np.ndarray, dq: np.ndarray) -> float:
        """rhs minus lhs; negative means violated."""
        return float(self.rhs - self.p_coef @ dp - self.q_coef @ dq)


def apparent_power_box(rating_kva: float, cos_phi_lb: float) -> tuple[float, float]:
    """Linear active-power bounds implied by a nodal apparent-power limit.

    Bounding the reactive power by rating * sin(phi) leaves |P| <= rating *
    cos(phi), which is conservative w.r.t. the original quadratic limit.
    """
    if rating_kva <= 0:
        raise ParameterError("node rating must be positive")
    if not 0 < cos_phi_lb <= 1:
        raise ParameterError("power factor lower bound must lie in (0, 1]")
    bound = rating_kva * cos_phi_lb
    return -bound, bound


def linear_grid_constraints(
    sens: SensitivityCoefficients,
    network: BusNetwork,
    limits: GridLimits,
) -> list[LinearInequality]:
    """Inequalities for one linearization point, ordered voltage rows (lo, hi
    per node), current rows, slack row, then box rows (lo, hi per rated node).

    Raises InfeasibleBasePointError when the point itself violates a limit.
    """
    point = sens.point
    m = len(sens.node_ids)
    rows: list[LinearInequality] = []
    zeros = np.zeros(m)

    for bus_id in network.node_ids:
        i = network.bus_index(bus_id)
        v0 = point.voltage_pu[i]
        # v_lo:  v_min <= v0 + dv . d  ->  -dv . d <= v0 - v_min
        rows.append(
            LinearInequality("v_lo", bus_id, -sens.dv_dp[i], -sens.dv_dq[i], v0 - limits.v_min_pu)
        )
        rows.append(
            LinearInequality("v_hi", bus_id, sens.dv_dp[i].copy(), sens.dv_dq[i].copy(), limits.v_max_pu - v0)
        )

    for k, ln in enumerate(network.lines):
        rows.append(
            LinearInequality(
                "i_hi", k, sens.di_dp[k].copy(), sens.di_dq[k].copy(), ln.ampacity_a - point.current_a[k]
            )
        )

    rows.append(
        LinearInequality(
            "s0_hi", network.slack_bus, sens.ds0_dp.copy(), sens.ds0_dq.copy(),
            network.transformer_kva - point.slack_kva,
        )
    )

    for bus_id in network.node_ids:
        bus = network.buses[network.bus_index(bus_id)]
        if bus.rating_kva is None:
            continue
        lo, hi = apparent_power_box(bus.rating_kva, bus.power_factor)
        p0 = point.p_kw[network.bus_index(bus_id)]
        col = sens.node_ids.index(bus_id)
        ep = zeros.copy()
        ep[col] = 1.0
        # lo <= p0 + dP_n <= hi
        rows.append(LinearInequality("box_lo", bus_id, -ep, zeros.copy(), p0 - lo))
        rows.append(LinearInequality("box_hi", bus_id, ep, zeros.copy(), hi - p0))

    violated = [(r.kind, r.subject, r.rhs) for r in rows if r.rhs < -BASE_POINT_TOL]
    if violated:
        raise InfeasibleBasePointError(
            f"linearization point violates {len(violated)} operating limit(s)",
            violations=violated,
        )
    return rows


@dataclass(frozen=True)
class LinearizationCheck:
    scenario: int
    converged: bool
    max_voltage_error_pu: float = float("nan")
    max_current_error_a: float = float("nan")
    slack_error_kva: float = float("nan")


def validate_linearization(
    network: BusNetwork,
    sens: SensitivityCoefficients,
    increments: list[tuple[np.ndarray, np.ndarray]],
) -> list[LinearizationCheck]:
    """Exact-vs-linear errors for a list of (dP, dQ) increment scenarios.

    Scenarios whose exact load flow diverges are flagged instead of failing
    the whole report.
    """
    point = sens.point
    out: list[LinearizationCheck] = []
    node_idx = [network.bus_index(b) for b in sens.node_ids]
    for k, (dp, dq) in enumerate(increments):
        p = point.p_kw.copy()
        q = point.q_kvar.copy()
        for col, i in enumerate(node_idx):
            p[i] += dp[col]
            q[i] += dq[col]
        try:
            exact = solve_load_flow(network, p, q)
        except LoadFlowDivergenceError:
            out.append(LinearizationCheck(scenario=k, converged=False))
            continue
        v_lin = point.voltage_pu + sens.dv_dp @ dp + sens.dv_dq @ dq
        i_lin = point.current_a + sens.di_dp @ dp + sens.di_dq @ dq
        s0_lin = point.slack_kva + sens.ds0_dp @ dp + sens.ds0_dq @ dq
        out.append(
            LinearizationCheck(
                scenario=k,
                converged=True,
                max_voltage_error_pu=float(np.max(np.abs(v_lin - exact.voltage_pu))),
                max_current_error_a=float(np.max(np.abs(i_lin - exact.current_a)))
                if network.n_lines
                else 0.0,
                slack_error_kva=float(abs(s0_lin - exact.slack_kva)),
            )
        )
    return out
