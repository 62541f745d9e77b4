"""Nonlinear load flow (Newton-Raphson, polar form, all nodes PQ).

This is the exact grid model that the sensitivity-based linear constraints
approximate. Inputs are demand-positive kW/kVAr per non-slack node.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LoadFlowDivergenceError
from .network import BusNetwork, build_admittance

MISMATCH_TOL_PU = 1e-8


@dataclass(frozen=True)
class OperatingPoint:
    """Converged grid state for one demand vector.

    ``p_kw``/``q_kvar`` are the demand-positive injections the state was
    solved for, indexed like ``network.buses`` (slack entry holds the slack
    residual demand, i.e. minus the power it supplies).
    """

    p_kw: np.ndarray
    q_kvar: np.ndarray
    voltage_pu: np.ndarray
    angle_rad: np.ndarray
    current_a: np.ndarray
    slack_kva: float
    mismatch_pu: float

    def voltage_at(self, network: BusNetwork, bus_id: int) -> float:
        return float(self.voltage_pu[network.bus_index(bus_id)])


def _complex_voltage(vm: np.ndarray, va: np.ndarray) -> np.ndarray:
    return vm * np.exp(1j * va)


def _line_currents_pu(network: BusNetwork, v: np.ndarray) -> np.ndarray:
    """Sending-end current magnitude per line, per-unit."""
    z_base = network.z_base_ohm
    mags = np.empty(network.n_lines)
    for k, ln in enumerate(network.lines):
        a, b = network.bus_index(ln.from_bus), network.bus_index(ln.to_bus)
        y_ser = 1.0 / ((ln.r_ohm + 1j * ln.x_ohm) / z_base)
        y_sh_half = 0.5j * ln.b_s * z_base
        mags[k] = abs((v[a] - v[b]) * y_ser + v[a] * y_sh_half)
    return mags


def solve_load_flow(
    network: BusNetwork,
    demand_kw: dict[int, float] | np.ndarray,
    demand_kvar: dict[int, float] | np.ndarray,
    max_iter: int = 30,
    tol_pu: float = MISMATCH_TOL_PU,
) -> OperatingPoint:
    """Newton-Raphson fixed point; raises LoadFlowDivergenceError on failure.

    Demand may be given as arrays over all buses (slack entry ignored) or as
    {bus_id: value} maps over non-slack nodes.
    """
    n = network.n_buses
    sl = network.slack_index
    p = _as_bus_array(network, demand_kw)
    q = _as_bus_array(network, demand_kvar)
    p[sl] = 0.0
    q[sl] = 0.0

    ybus = build_admittance(network)
    s_spec = -(p + 1j * q) / network.base_kva  # injection convention
    pq = np.array([i for i in range(n) if i != sl])

    vm = np.full(n, network.slack_voltage_pu)
    va = np.zeros(n)
    mismatch = np.inf
    for _ in range(max_iter):
        v = _complex_voltage(vm, va)
        s_calc = v * np.conj(ybus @ v)
        ds = s_spec - s_calc
        mismatch = float(np.max(np.abs(np.concatenate([ds[pq].real, ds[pq].imag]))))
        if not np.isfinite(mismatch):
            raise LoadFlowDivergenceError(
                "load flow produced non-finite state", mismatch=mismatch
            )
        if mismatch <= tol_pu:
            return _finish(network, ybus, v, p, q, mismatch)
        j = _jacobian(ybus, v, vm, pq)
        rhs = np.concatenate([ds[pq].real, ds[pq].imag])
        try:
            step = np.linalg.solve(j, rhs)
        except np.linalg.LinAlgError as exc:
            raise LoadFlowDivergenceError(
                f"singular Jacobian: {exc}", mismatch=mismatch
            ) from exc
        m = len(pq)
        va[pq] += step[:m]
        vm[pq] += step[m:]
        if np.any(vm[pq] <= 0):
            raise LoadFlowDivergenceError(
                "voltage magnitude collapsed below zero", mismatch=mismatch
            )
    raise LoadFlowDivergenceError(
        f"no convergence within {max_iter} iterations (mismatch {mismatch:.3e} pu)",
        mismatch=mismatch,
        iterations=max_iter,
    )


def _as_bus_array(network: BusNetwork, values) -> np.ndarray:
    if isinstance(values, dict):
        out = np.zeros(network.n_buses)
        for bus_id, val in values.items():
            out[network.bus_index(bus_id)] = float(val)
        return out
    arr = np.asarray(values, dtype=float)
    if arr.shape != (network.n_buses,):
        raise ValueError(f"expected {network.n_buses} bus values, got {arr.shape}")
    return arr.copy()


def _jacobian(ybus, v, vm, pq):
    # Standard complex-form power flow derivatives.
    i = ybus @ v
    diag_v = np.diag(v)
    diag_i = np.diag(i)
    diag_vn = np.diag(v / np.abs(v))
    ds_dva = 1j * diag_v @ np.conj(diag_i - ybus @ diag_v)
    ds_dvm = diag_vn @ np.conj(diag_i) + diag_v @ np.conj(ybus @ diag_vn)
    # Mismatch is spec - calc, so the Newton matrix is +d(calc)/dx.
    j11 = ds_dva[np.ix_(pq, pq)].real
    j12 = ds_dvm[np.ix_(pq, pq)].real
    j21 = ds_dva[np.ix_(pq, pq)].imag
    j22 = ds_dvm[np.ix_(pq, pq)].imag
    return np.block([[j11, j12], [j21, j22]])


def _finish(network, ybus, v, p, q, mismatch) -> OperatingPoint:
    sl = network.slack_index
    s_slack = (v * np.conj(ybus @ v))[sl] * network.base_kva
    p = p.copy()
    q = q.copy()
    p[sl] = -s_slack.real  # demand-positive residual at the slack
    q[sl] = -s_slack.imag
    return OperatingPoint(
        p_kw=p,
        q_kvar=q,
        voltage_pu=np.abs(v),
        angle_rad=np.angle(v),
        current_a=_line_currents_pu(network, v) * network.i_base_a,
        slack_kva=float(abs(s_slack)),
        mismatch_pu=mismatch,
    )
