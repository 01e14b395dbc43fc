"""Newton-Raphson AC power flow.

Planning-style solve: flat start, PV buses hold their voltage setpoint with
reactive limits ignored, one slack per island absorbs that island's
imbalance. The Jacobian is assembled from the sparse complex power-injection
derivatives and factorized with SuperLU each iteration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .case_model import GridCase


class PowerFlowError(RuntimeError):
    pass


class PowerFlowDivergence(PowerFlowError):
    def __init__(self, iterations: int, mismatch: float):
        self.iterations = iterations
        self.mismatch = mismatch
        super().__init__(
            f"no convergence after {iterations} iterations "
            f"(max mismatch {mismatch:.3e} pu)")


class SingularJacobian(PowerFlowError):
    def __init__(self, bus_id=None):
        self.bus_id = bus_id
        where = f" (suspect bus {bus_id})" if bus_id is not None else ""
        super().__init__(f"singular power-flow Jacobian{where}")


@dataclass
class PowerFlowSolution:
    """Solved bus voltages. ``max_mismatch_pu`` is the worst remaining
    PQ/PV complex-power mismatch component."""

    bus_ids: list[int]
    v_mag: np.ndarray
    v_ang: np.ndarray  # radians
    iterations: int
    max_mismatch_pu: float

    @property
    def v(self) -> np.ndarray:
        return self.v_mag * np.exp(1j * self.v_ang)


def bus_injections(case: GridCase) -> np.ndarray:
    """Specified complex injections per bus, system-base pu (gen - load)."""
    idx = case.bus_index()
    s = np.zeros(len(case.buses), dtype=complex)
    for g in case.generators:
        if g.status:
            s[idx[g.bus_id]] += complex(g.p_mw, g.q_mvar)
    for l in case.loads:
        s[idx[l.bus_id]] -= complex(l.p_mw, l.q_mvar)
    return s / case.s_base_mva


def effective_kinds(case: GridCase) -> np.ndarray:
    """Bus kinds with sourceless pv buses demoted to pq: voltage can only be
    regulated where an in-service generator remains."""
    alive = {g.bus_id for g in case.generators if g.status}
    return np.array(["pq" if b.kind == "pv" and b.id not in alive else b.kind
                     for b in case.buses])


def mismatch_vector(case: GridCase, ybus: sp.csc_matrix, v: np.ndarray) -> np.ndarray:
    """Stacked [P at pv+pq; Q at pq] mismatch, pu, for the given voltages."""
    kinds = effective_kinds(case)
    pvpq = np.flatnonzero(kinds != "slack")
    pq = np.flatnonzero(kinds == "pq")
    mis = v * np.conj(ybus @ v) - bus_injections(case)
    return np.r_[mis[pvpq].real, mis[pq].imag]


def solve_powerflow(case: GridCase, tol: float = 1e-8,
                    max_iter: int = 20) -> PowerFlowSolution:
    """Full Newton power flow from a flat start.

    Raises PowerFlowDivergence after max_iter and SingularJacobian when the
    factorization fails (the reported bus is the first with a vanishing
    Jacobian diagonal, the usual culprit).
    """
    from .netdyn import build_ybus  # deferred: netdyn also imports this module

    ybus = build_ybus(case)
    n = len(case.buses)
    kinds = effective_kinds(case)
    pv = np.flatnonzero(kinds == "pv")
    pq = np.flatnonzero(kinds == "pq")
    pvpq = np.r_[pv, pq]
    sbus = bus_injections(case)

    # flat start: setpoint magnitude at PV/slack, 1.0 at PQ, zero angles
    vm = np.array([b.v_mag if k in ("pv", "slack") else 1.0
                   for b, k in zip(case.buses, kinds)])
    va = np.array([b.v_ang if k == "slack" else 0.0
                   for b, k in zip(case.buses, kinds)])

    npvpq, npq = len(pvpq), len(pq)
    if npvpq == 0:
        v = vm * np.exp(1j * va)
        f = mismatch_vector(case, ybus, v)
        return PowerFlowSolution([b.id for b in case.buses], vm, va, 0,
                                 float(np.max(np.abs(f))) if f.size else 0.0)

    for it in range(max_iter + 1):
        v = vm * np.exp(1j * va)
        mis = v * np.conj(ybus @ v) - sbus
        f = np.r_[mis[pvpq].real, mis[pq].imag]
        norm = float(np.max(np.abs(f)))
        if norm <= tol:
            return PowerFlowSolution([b.id for b in case.buses], vm, va, it, norm)
        if it == max_iter:
            raise PowerFlowDivergence(it, norm)

        ibus = ybus @ v
        d_v = sp.diags(v)
        d_i = sp.diags(ibus)
        d_vn = sp.diags(v / np.abs(v))
        ds_dva = 1j * d_v @ (d_i - ybus @ d_v).conjugate()
        ds_dvm = d_v @ (ybus @ d_vn).conjugate() + d_i.conjugate() @ d_vn
        j11 = ds_dva[pvpq][:, pvpq].real
        j12 = ds_dvm[pvpq][:, pq].real
        j21 = ds_dva[pq][:, pvpq].imag
        j22 = ds_dvm[pq][:, pq].imag
        jac = sp.bmat([[j11, j12], [j21, j22]], format="csc")
        try:
            dx = spla.splu(jac).solve(-f)
        except RuntimeError as exc:
            if "singular" in str(exc).lower():
                raise SingularJacobian(_suspect_bus(case, jac, pvpq, pq)) from exc
            raise
        va[pvpq] += dx[:npvpq]
        vm[pq] += dx[npvpq:]

    raise PowerFlowDivergence(max_iter, norm)  # pragma: no cover


def _suspect_bus(case: GridCase, jac: sp.csc_matrix, pvpq, pq):
    diag = np.abs(jac.diagonal())
    weak = np.flatnonzero(diag < 1e-12)
    if weak.size == 0:
        return None
    row = int(weak[0])
    bus_pos = pvpq[row] if row < len(pvpq) else pq[row - len(pvpq)]
    return case.buses[bus_pos].id


def accept_solved_voltages(case: GridCase, tol: float = 1e-4) -> PowerFlowSolution:
    """Wrap the voltages stored on the case, verifying they actually satisfy
    the power balance to within tol (inclusive). For pre-solved imports."""
    from .netdyn import build_ybus

    ybus = build_ybus(case)
    vm = np.array([b.v_mag for b in case.buses])
    va = np.array([b.v_ang for b in case.buses])
    v = vm * np.exp(1j * va)
    f = mismatch_vector(case, ybus, v)
    norm = float(np.max(np.abs(f))) if f.size else 0.0
    if norm > tol:
        raise PowerFlowError(
            f"stored voltages are inconsistent with the specified injections "
            f"(max mismatch {norm:.3e} pu > {tol:g} pu)")
    return PowerFlowSolution([b.id for b in case.buses], vm, va, 0, norm)
