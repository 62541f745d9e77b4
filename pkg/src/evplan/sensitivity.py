"""Sensitivity coefficients of grid quantities w.r.t. nodal injections.

Central finite differences around a converged operating point: each
non-slack node's active and reactive demand is perturbed by +/- eps of the
network base power and the load flow re-solved. Coefficients are stored per
kW (per kVAr) of demand increase.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LoadFlowDivergenceError, SensitivityError
from .loadflow import OperatingPoint, solve_load_flow
from .network import BusNetwork

DEFAULT_EPS_PU = 1e-4


@dataclass(frozen=True)
class SensitivityCoefficients:
    """Partial derivatives at a linearization point.

    Shapes: voltage blocks are (n_buses, n_nodes), current blocks
    (n_lines, n_nodes), slack blocks (n_nodes,), where nodes are the
    non-slack buses in network order. Units: pu/kW, A/kW, kVA/kW and the
    kVAr analogues.
    """

    node_ids: tuple[int, ...]
    dv_dp: np.ndarray
    dv_dq: np.ndarray
    di_dp: np.ndarray
    di_dq: np.ndarray
    ds0_dp: np.ndarray
    ds0_dq: np.ndarray
    point: OperatingPoint

    def __post_init__(self):
        for arr in (self.dv_dp, self.dv_dq, self.di_dp, self.di_dq, self.ds0_dp, self.ds0_dq):
            if not np.all(np.isfinite(arr)):
                raise SensitivityError("non-finite sensitivity coefficient")


def compute_sensitivities(
    network: BusNetwork,
    point: OperatingPoint,
    eps_pu: float = DEFAULT_EPS_PU,
) -> SensitivityCoefficients:
    """Finite-difference coefficients; two load flows per node and quantity."""
    node_ids = tuple(network.node_ids)
    m = len(node_ids)
    n = network.n_buses
    l = network.n_lines
    eps_kw = eps_pu * network.base_kva

    dv_dp = np.zeros((n, m))
    dv_dq = np.zeros((n, m))
    di_dp = np.zeros((l, m))
    di_dq = np.zeros((l, m))
    ds0_dp = np.zeros(m)
    ds0_dq = np.zeros(m)

    base_p = point.p_kw.copy()
    base_q = point.q_kvar.copy()

    for col, bus_id in enumerate(node_ids):
        idx = network.bus_index(bus_id)
        for react in (False, True):
            p_hi, q_hi = base_p.copy(), base_q.copy()
            p_lo, q_lo = base_p.copy(), base_q.copy()
            if react:
                q_hi[idx] += eps_kw
                q_lo[idx] -= eps_kw
            else:
                p_hi[idx] += eps_kw
                p_lo[idx] -= eps_kw
            try:
                hi = solve_load_flow(network, p_hi, q_hi)
                lo = solve_load_flow(network, p_lo, q_lo)
            except LoadFlowDivergenceError as exc:
                kind = "Q" if react else "P"
                raise SensitivityError(
                    f"perturbed load flow diverged at node {bus_id} ({kind}): {exc}"
                ) from exc
            denom = 2.0 * eps_kw
            dv = (hi.voltage_pu - lo.voltage_pu) / denom
            di = (hi.current_a - lo.current_a) / denom
            ds0 = (hi.slack_kva - lo.slack_kva) / denom
            if react:
                dv_dq[:, col] = dv
                di_dq[:, col] = di
                ds0_dq[col] = ds0
            else:
                dv_dp[:, col] = dv
                di_dp[:, col] = di
                ds0_dp[col] = ds0

    # The slack magnitude is held fixed by the solver; clamp residual noise.
    sl = network.slack_index
    dv_dp[sl, :] = 0.0
    dv_dq[sl, :] = 0.0

    return SensitivityCoefficients(
        node_ids=node_ids,
        dv_dp=dv_dp,
        dv_dq=dv_dq,
        di_dp=di_dp,
        di_dq=di_dq,
        ds0_dp=ds0_dp,
        ds0_dq=ds0_dq,
        point=point,
    )
