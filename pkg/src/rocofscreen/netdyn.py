"""Dynamic network model: admittance matrix, Norton machine equivalents,
and classical machine initialization.

The dynamic admittance matrix extends the branch network with constant
impedance shunts for loads and non-synchronous generation, plus one Norton
shunt 1/(j x'd) per in-service synchronous machine (system base). With
machine current injections I on the right-hand side, Y V = I recovers the
terminal voltages; the factorization is reused for every algebraic solve,
and solves are counted so screening cost claims can be asserted.

Machine-base to system-base conversion happens exactly once, here:
    x_sys = x_mach * s_base_sys / s_base_mach      (impedance)
    t_mach = p_sys * s_base_sys / s_base_mach      (torque/power)
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .case_model import GridCase, island_labels
from .powerflow import PowerFlowSolution

log = logging.getLogger(__name__)


class ModelBuildError(ValueError):
    """Case cannot be turned into a dynamic model (missing data, bad values)."""


def build_ybus(case: GridCase) -> sp.csc_matrix:
    """Branch-network bus admittance matrix (pi model with off-nominal taps).

    Convention: series admittance ys = 1/(r + jx) appears as +ys (plus half
    charging) on the diagonals and -ys off-diagonal; a from-side tap t scales
    the from diagonal by 1/t**2 and both off-diagonals by 1/t. Loads and
    machines are not included; see augment_dynamic.
    """
    idx = case.bus_index()
    n = len(case.buses)
    rows, cols, data = [], [], []
    for br in case.branches:
        if not br.status:
            continue
        z = complex(br.r_pu, br.x_pu)
        if z == 0:
            raise ModelBuildError(
                f"branch {br.from_bus}-{br.to_bus} has zero impedance")
        ys = 1.0 / z
        bc = 0.5j * br.b_pu
        t = br.tap_ratio if br.tap_ratio else 1.0
        i, j = idx[br.from_bus], idx[br.to_bus]
        rows += [i, j, i, j]
        cols += [i, j, j, i]
        data += [(ys + bc) / t**2, ys + bc, -ys / t, -ys / t]
    y = sp.coo_matrix((data, (rows, cols)), shape=(n, n), dtype=complex)
    return y.tocsc()


class CountingLU:
    """splu handle that counts linear-system solutions on its owner model."""

    def __init__(self, lu, owner: "NetworkModel"):
        self._lu = lu
        self._owner = owner

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        self._owner.solve_count += 1
        return self._lu.solve(rhs)


@dataclass
class NetworkModel:
    """Factorized dynamic network plus the static machine table.

    Arrays are aligned with ``machine_ids`` (in-service synchronous machines,
    case order). The model is read-only by convention after build; scenario
    evaluation derives diagonal-updated copies rather than mutating
    ``y_dyn``.
    """

    case: GridCase
    bus_ids: list[int]
    y_dyn: sp.csc_matrix
    machine_ids: list[str]
    machine_bus: np.ndarray        # bus position per machine
    xdp_sys: np.ndarray            # transient reactance, system base
    norton_y: np.ndarray           # 1/(j xdp_sys)
    h_sec: np.ndarray              # machine base, seconds
    s_mach: np.ndarray             # machine MVA bases
    load_ids: list[str]
    load_bus: np.ndarray
    load_shunt: np.ndarray         # constant-impedance load admittances
    islands: np.ndarray            # island label per bus
    f_base: float
    s_base: float
    solve_count: int = 0
    _lu: CountingLU | None = field(default=None, repr=False)
    _diag_ptr: np.ndarray | None = field(default=None, repr=False)

    @property
    def machine_index(self) -> dict[str, int]:
        """Generator id -> bus id for every modeled machine."""
        return {gid: self.bus_ids[b] for gid, b in zip(self.machine_ids, self.machine_bus)}

    @property
    def n_bus(self) -> int:
        return len(self.bus_ids)

    def machine_positions(self, gen_ids) -> np.ndarray:
        pos = {gid: k for k, gid in enumerate(self.machine_ids)}
        out = []
        for gid in gen_ids:
            if gid not in pos:
                raise KeyError(
                    f"generator {gid!r} is not an in-service synchronous "
                    "machine of this model")
            out.append(pos[gid])
        return np.array(sorted(out), dtype=np.int64)

    def factorize(self, matrix: sp.csc_matrix | None = None) -> CountingLU:
        """Factor a matrix (default: y_dyn) into a counting solve handle."""
        if matrix is None:
            if self._lu is None:
                self._lu = CountingLU(spla.splu(self.y_dyn), self)
            return self._lu
        return CountingLU(spla.splu(matrix), self)

    def y_with_diag_update(self, bus_pos: np.ndarray,
                           delta_y: np.ndarray) -> sp.csc_matrix:
        """Copy of y_dyn with delta_y added at the given bus diagonals.

        Only the data array is copied; the sparsity pattern is shared, which
        keeps per-scenario matrix preparation cheap on large cases.
        """
        bus_pos = np.asarray(bus_pos, dtype=np.int64)
        ptr = self._diag_ptr[bus_pos]
        if (ptr < 0).any():
            bad = [self.bus_ids[b] for b in bus_pos[ptr < 0]]
            raise ModelBuildError(
                f"no structural diagonal at buses {bad}; cannot update")
        data = self.y_dyn.data.copy()
        np.add.at(data, ptr, delta_y)  # bus_pos may repeat
        return sp.csc_matrix((data, self.y_dyn.indices, self.y_dyn.indptr),
                             shape=self.y_dyn.shape)

    def dead_island_mask(self, active_machines: np.ndarray | None = None) -> np.ndarray:
        """Bus mask of islands left without any active synchronous machine."""
        if active_machines is None:
            active_machines = np.ones(len(self.machine_ids), dtype=bool)
        alive = set(self.islands[self.machine_bus[active_machines]].tolist())
        return ~np.isin(self.islands, list(alive) or [-1])


@dataclass
class MachineStates:
    """Classical-model machine states, aligned with NetworkModel.machine_ids.

    e_prime and delta define the internal EMF E' /_ delta; t_m is mechanical
    torque on the machine base; omega is per-unit speed deviation (zero at
    initialization); i_inj is the Norton injection (E'/x'd) /_ (delta - pi/2)
    on the system base at the initial angle.
    """

    ids: list[str]
    e_prime: np.ndarray
    delta: np.ndarray
    t_m: np.ndarray
    omega: np.ndarray
    i_inj: np.ndarray

    def copy(self) -> "MachineStates":
        return MachineStates(list(self.ids), self.e_prime.copy(), self.delta.copy(),
                             self.t_m.copy(), self.omega.copy(), self.i_inj.copy())


def _csc_diag_positions(y: sp.csc_matrix) -> np.ndarray:
    """Index into y.data of each structurally-present diagonal (-1 if absent)."""
    n = y.shape[0]
    pos = np.full(n, -1, dtype=np.int64)
    indptr, indices = y.indptr, y.indices
    for col in range(n):
        sl = indices[indptr[col]:indptr[col + 1]]
        hit = np.flatnonzero(sl == col)
        if hit.size:
            pos[col] = indptr[col] + hit[0]
    return pos


def solved_generator_powers(case: GridCase, ybus: sp.csc_matrix,
                            solution: PowerFlowSolution) -> dict[str, complex]:
    """Complex power produced by each in-service generator at the solved
    operating point, system-base pu.

    The power-flow bus injection plus local load is what the units at a bus
    produce together. Active power follows the dispatch records, with any
    surplus (slack losses) shared by the bus's synchronous units in
    proportion to machine base. Reactive power is a power-flow outcome, not
    a record, so it is shared by all units at the bus in proportion to
    machine base.
    """
    idx = case.bus_index()
    v = solution.v
    s_bus = v * np.conj(ybus @ v)
    for l in case.loads:
        s_bus[idx[l.bus_id]] += complex(l.p_mw, l.q_mvar) / case.s_base_mva

    by_bus: dict[int, list] = {}
    for g in case.generators:
        if g.status:
            by_bus.setdefault(idx[g.bus_id], []).append(g)

    out: dict[str, complex] = {}
    for b, members in by_bus.items():
        base = np.array([g.s_base_mva for g in members])
        w_all = base / base.sum()
        sync = np.array([g.synchronous for g in members])
        w_sync = np.where(sync, base, 0.0)
        w_sync = w_sync / w_sync.sum() if w_sync.sum() > 0 else w_all
        disp = np.array([g.p_mw for g in members]) / case.s_base_mva
        surplus = s_bus[b].real - disp.sum()
        p = disp + surplus * w_sync
        q = s_bus[b].imag * w_all
        for j, g in enumerate(members):
            out[g.id] = complex(p[j], q[j])
    return out


def augment_dynamic(ybus: sp.csc_matrix, case: GridCase,
                    solution: PowerFlowSolution) -> NetworkModel:
    """Attach load/non-synchronous shunts and machine Norton shunts to ybus.

    Each load contributes y = conj(S_pu) / |V|^2 at its bus; each in-service
    non-synchronous generator contributes the negative-load equivalent
    y = -conj(S_pu) / |V|^2 at its solved output (its reactive share at a
    regulated bus is a power-flow result); each in-service synchronous
    machine contributes 1/(j xdp) on the system base. The result is
    factorized once for reuse.
    """
    idx = case.bus_index()
    n = len(case.buses)
    v = solution.v
    diag = np.zeros(n, dtype=complex)
    solved_s = solved_generator_powers(case, ybus, solution)

    load_ids, load_bus, load_shunt = [], [], []
    for l in case.loads:
        b = idx[l.bus_id]
        if abs(v[b]) == 0:
            raise ModelBuildError(f"load {l.id!r} at bus {l.bus_id} with |V| = 0")
        s_pu = complex(l.p_mw, l.q_mvar) / case.s_base_mva
        y = np.conj(s_pu) / abs(v[b]) ** 2
        diag[b] += y
        load_ids.append(l.id)
        load_bus.append(b)
        load_shunt.append(y)

    mach_ids, mach_bus, xdp_sys, h_sec, s_mach = [], [], [], [], []
    for g in case.generators:
        if not g.status:
            continue
        b = idx[g.bus_id]
        if abs(v[b]) == 0:
            raise ModelBuildError(f"generator {g.id!r} at bus {g.bus_id} with |V| = 0")
        if not g.synchronous:
            diag[b] += -np.conj(solved_s[g.id]) / abs(v[b]) ** 2
            continue
        if g.h_sec is None or g.xdp_pu is None:
            raise ModelBuildError(
                f"generator {g.id!r} lacks dynamic parameters (h_sec/xdp_pu); "
                "apply a sidecar or synthesize them first")
        x_sys = g.xdp_pu * case.s_base_mva / g.s_base_mva
        mach_ids.append(g.id)
        mach_bus.append(b)
        xdp_sys.append(x_sys)
        h_sec.append(g.h_sec)
        s_mach.append(g.s_base_mva)
        diag[b] += 1.0 / (1j * x_sys)

    y_dyn = (ybus + sp.diags(diag, format="csc", dtype=complex)).tocsc()
    y_dyn.sort_indices()

    model = NetworkModel(
        case=case,
        bus_ids=[b.id for b in case.buses],
        y_dyn=y_dyn,
        machine_ids=mach_ids,
        machine_bus=np.array(mach_bus, dtype=np.int64),
        xdp_sys=np.array(xdp_sys),
        norton_y=1.0 / (1j * np.array(xdp_sys)),
        h_sec=np.array(h_sec),
        s_mach=np.array(s_mach),
        load_ids=load_ids,
        load_bus=np.array(load_bus, dtype=np.int64),
        load_shunt=np.array(load_shunt, dtype=complex),
        islands=island_labels(case),
        f_base=case.f_base_hz,
        s_base=case.s_base_mva,
    )
    model._diag_ptr = _csc_diag_positions(y_dyn)
    model.factorize()
    return model


def init_machines(model: NetworkModel, case: GridCase,
                  solution: PowerFlowSolution) -> MachineStates:
    """Initialize E', delta, Norton injections, and steady-state torques.

    For each machine: stator current I_t = conj(S)/conj(V); internal EMF
    E' /_ delta = V + j x'd I_t; Norton injection (E'/x'd) /_ (delta - pi/2).
    Mechanical torque is set equal to electrical torque at the re-solved
    network voltages, so the initial state is an exact equilibrium of the
    algebraic model. A reconstruction check asserts the network solve
    reproduces the power-flow voltages (islands without any machine excluded;
    they carry no dynamic source and solve to zero).
    """
    if case != model.case:
        raise ModelBuildError("model was built from a different case")
    ybus = build_ybus(case)
    solved_s = solved_generator_powers(case, ybus, solution)
    s_gen = np.array([solved_s[gid] for gid in model.machine_ids])
    vb = solution.v[model.machine_bus]
    i_t = np.conj(s_gen) / np.conj(vb)
    e_cplx = vb + 1j * model.xdp_sys * i_t
    e_prime = np.abs(e_cplx)
    delta = np.angle(e_cplx)
    if (e_prime <= 0).any():
        bad = [model.machine_ids[k] for k in np.flatnonzero(e_prime <= 0)]
        raise ModelBuildError(f"zero internal EMF for machines {bad}")
    i_inj = (e_prime / model.xdp_sys) * np.exp(1j * (delta - np.pi / 2))

    rhs = np.zeros(model.n_bus, dtype=complex)
    np.add.at(rhs, model.machine_bus, i_inj)
    v_chk = model.factorize().solve(rhs)
    live = ~model.dead_island_mask()
    resid = float(np.max(np.abs(v_chk - solution.v)[live])) if live.any() else 0.0
    if resid > 1e-8:
        raise ModelBuildError(
            f"machine initialization is inconsistent with the power flow "
            f"(max |dV| = {resid:.3e} > 1e-8)")

    states = MachineStates(
        ids=list(model.machine_ids),
        e_prime=e_prime,
        delta=delta,
        t_m=np.zeros_like(e_prime),
        omega=np.zeros_like(e_prime),
        i_inj=i_inj,
    )
    # equilibrium torque from the same solve path used during analysis
    states.t_m = electrical_torque(model, states, v_chk)
    return states


def norton_injections(model: NetworkModel, states: MachineStates,
                      active: np.ndarray | None = None) -> np.ndarray:
    """Bus vector of Norton current injections at the machines' present angles."""
    i_mach = (states.e_prime / model.xdp_sys) * np.exp(1j * (states.delta - np.pi / 2))
    if active is not None:
        i_mach = np.where(active, i_mach, 0.0)
    rhs = np.zeros(model.n_bus, dtype=complex)
    np.add.at(rhs, model.machine_bus, i_mach)
    return rhs


def electrical_torque(model: NetworkModel, states: MachineStates,
                      voltages: np.ndarray,
                      active: np.ndarray | None = None) -> np.ndarray:
    """Per-machine electrical torque, machine base, classical assumption.

    T_e equals the active power delivered at the terminal: Re[V conj(I_s)]
    with stator current I_s = I_norton - y_norton V. In the lossless
    classical model this coincides with air-gap power. Inactive machines get
    zero.
    """
    vb = voltages[model.machine_bus]
    i_norton = (states.e_prime / model.xdp_sys) * np.exp(1j * (states.delta - np.pi / 2))
    i_s = i_norton - model.norton_y * vb
    te = (vb * np.conj(i_s)).real * model.s_base / model.s_mach
    if active is not None:
        te = np.where(active, te, 0.0)
    return te


def passive_network_power(model: NetworkModel, voltages: np.ndarray) -> float:
    """Active power absorbed by branches plus load/non-synchronous shunts,
    system-base pu. Machine Norton shunts (lossless) are netted out, so this
    equals total machine electrical output at any consistent (I, V) pair."""
    i_all = model.y_dyn @ voltages
    p_total = float(np.sum(voltages * np.conj(i_all)).real)
    vb = voltages[model.machine_bus]
    p_norton = float(np.sum((vb * np.conj(model.norton_y * vb)).real))
    return p_total - p_norton
