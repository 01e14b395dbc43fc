"""Contingency/loading scenario banks and the batch screening runner.

A scenario is one (loading case, contingency) pair. Loading cases sweep
total demand and wind output over a regular grid, re-dispatching the
synchronous fleet with a merit-order heuristic (wind and nuclear at full
output, remaining demand met by committing coal then gas units at a uniform
loading factor). Contingencies are probabilistic multi-unit generation
losses, mostly single-plant events below the design size with a tail of
larger multi-site events.

The bank runner evaluates every pair in one of three modes and emits a flat
result table; per-scenario failures are recorded in their row and never
abort the bank. Output ordering is by (loading id, contingency id) no matter
how many workers execute, and the table streams to disk so large banks need
bounded memory.

For a fixed loading case the tabulated system-wide ROCOF uses that case's
total online inertia in the denominator, making it the linear-in-MW-lost
screening line the per-bus results are compared against. (The per-bus
evaluation itself excludes the outaged machines' inertia, which matters
only when the outage removes a large inertia share.)
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .case_model import GridCase
from .netdyn import augment_dynamic, build_ybus, init_machines
from .powerflow import solve_powerflow
from .rocof import Contingency, locational_rocof
from .swingsim import SimOptions, simulate

log = logging.getLogger(__name__)

CONCERN_ROCOF_HZ_S = -0.5
FUEL_MERIT_ORDER = {"coal": 0, "gas": 1, "other": 2}

SCENARIO_COLUMNS = [
    "loading_id", "contingency_id", "mw_lost", "inertia_gws",
    "system_rocof", "bus_rocof_min", "bus_rocof_mean", "bus_rocof_max",
    "worst_bus", "concern_flag", "status",
]


class InfeasibleDispatch(ValueError):
    pass


@dataclass(frozen=True)
class LoadingCase:
    """One demand/wind operating point with its committed dispatch."""

    id: str
    target_load_mw: float
    target_wind_mw: float
    dispatch: dict[str, float]          # gen id -> p_mw for in-service units
    committed: frozenset[str]           # in-service unit ids (incl. wind)
    online_inertia_gws: float
    wind_fraction: float


@dataclass
class ScenarioRecord:
    loading_id: str
    contingency_id: str
    mw_lost: float
    inertia_gws: float
    system_rocof_hz_s: float
    bus_rocof_min: float = math.nan
    bus_rocof_mean: float = math.nan
    bus_rocof_max: float = math.nan
    worst_bus: int | None = None
    concern_flag: bool = False
    status: str = "ok"

    def row(self) -> list[str]:
        def num(x):
            return "" if x is None or (isinstance(x, float) and math.isnan(x)) else repr(float(x))
        return [self.loading_id, self.contingency_id, num(self.mw_lost),
                num(self.inertia_gws), num(self.system_rocof_hz_s),
                num(self.bus_rocof_min), num(self.bus_rocof_mean),
                num(self.bus_rocof_max),
                "" if self.worst_bus is None else str(self.worst_bus),
                "1" if self.concern_flag else "0", self.status]


def dispatch_heuristic(case: GridCase, target_load_mw: float,
                       target_wind_mw: float) -> GridCase:
    """Re-dispatch the case to the given demand and wind targets.

    Loads scale uniformly; wind scales to its target; nuclear runs at full
    output; machines at slack buses are must-run; the remaining demand
    commits non-nuclear synchronous units in merit order (coal, gas, other;
    largest first) at one uniform loading factor. Uncommitted units go out
    of service, and the power flow is re-solved with the slack absorbing
    losses. The returned case carries the solved voltages.
    """
    base_load = sum(l.p_mw for l in case.loads)
    if base_load <= 0:
        raise InfeasibleDispatch("case has no load to scale")
    load_factor = target_load_mw / base_load

    wind = [g for g in case.generators if not g.synchronous and g.status]
    wind_cap = sum(g.p_max_mw for g in wind)
    if target_wind_mw > wind_cap:
        raise InfeasibleDispatch(
            f"wind target {target_wind_mw:.0f} MW exceeds installed wind "
            f"capability {wind_cap:.0f} MW")
    wind_factor = target_wind_mw / wind_cap if wind_cap > 0 else 0.0

    idx = case.bus_index()
    slack_buses = {b.id for b in case.buses if b.kind == "slack"}
    sync = [g for g in case.generators if g.synchronous and g.status]
    nuclear_mw = sum(g.p_max_mw for g in sync if g.fuel == "nuclear")
    required = target_load_mw - target_wind_mw - nuclear_mw
    if required < 0:
        raise InfeasibleDispatch(
            f"wind target {target_wind_mw:.0f} MW exceeds load "
            f"{target_load_mw:.0f} MW minus the {nuclear_mw:.0f} MW "
            "must-run nuclear floor")

    must_run = [g for g in sync if g.fuel == "nuclear" or g.bus_id in slack_buses]
    merit = sorted((g for g in sync if g not in must_run),
                   key=lambda g: (FUEL_MERIT_ORDER.get(g.fuel, 9),
                                  -g.p_max_mw, g.id))
    committed = list(must_run)
    cap = sum(g.p_max_mw for g in must_run if g.fuel != "nuclear")
    for g in merit:
        if cap >= required:
            break
        committed.append(g)
        cap += g.p_max_mw
    if cap < required:
        raise InfeasibleDispatch(
            f"insufficient synchronous capacity: need {required:.0f} MW "
            f"beyond nuclear, have {cap:.0f} MW")
    lam = required / cap if cap > 0 else 0.0

    committed_ids = {g.id for g in committed}
    new_gens = []
    for g in case.generators:
        if not g.status:
            new_gens.append(g)
        elif not g.synchronous:
            new_gens.append(replace(g, p_mw=g.p_max_mw * wind_factor, q_mvar=0.0))
        elif g.id in committed_ids:
            p = g.p_max_mw if g.fuel == "nuclear" else lam * g.p_max_mw
            new_gens.append(replace(g, p_mw=p))
        else:
            new_gens.append(replace(g, status=False))

    new_loads = [replace(l, p_mw=l.p_mw * load_factor,
                         q_mvar=l.q_mvar * load_factor) for l in case.loads]

    # a pv bus with nothing left in service cannot regulate voltage
    alive = {g.bus_id for g in new_gens if g.status}
    new_buses = [replace(b, kind="pq") if b.kind == "pv" and b.id not in alive
                 else b for b in case.buses]

    out = replace(case, generators=tuple(new_gens), loads=tuple(new_loads),
                  buses=tuple(new_buses))
    sol = solve_powerflow(out)
    pos = {bid: i for i, bid in enumerate(sol.bus_ids)}
    out = out.with_buses(replace(b, v_mag=float(sol.v_mag[pos[b.id]]),
                                 v_ang=float(sol.v_ang[pos[b.id]]))
                         for b in out.buses)
    return out


def loading_case_from(case: GridCase, dispatched: GridCase, lc_id: str,
                      target_load_mw: float, target_wind_mw: float) -> LoadingCase:
    disp = {g.id: g.p_mw for g in dispatched.generators if g.status}
    committed = frozenset(disp)
    inertia = sum(g.h_sec * g.s_base_mva for g in dispatched.generators
                  if g.status and g.synchronous and g.h_sec is not None) / 1000.0
    sync_mw = sum(g.p_mw for g in dispatched.generators
                  if g.status and g.synchronous)
    total = sync_mw + target_wind_mw
    return LoadingCase(lc_id, target_load_mw, target_wind_mw, disp, committed,
                       inertia, target_wind_mw / total if total > 0 else 0.0)


def generate_loading_cases(case: GridCase, n: int,
                           load_range_mw: tuple[float, float],
                           wind_range_mw: tuple[float, float]) -> list[LoadingCase]:
    """Regular grid of n loading cases over the demand and wind ranges.

    Demand levels form the outer axis; within each demand level the wind
    levels span from the range minimum up to the feasible maximum (demand
    minus the nuclear must-run floor), so every generated case dispatches.
    Raises when some demand level cannot accept even the minimum wind.
    """
    if n <= 0:
        raise ValueError("n must be positive")
    lo_l, hi_l = load_range_mw
    lo_w, hi_w = wind_range_mw
    sync = [g for g in case.generators if g.synchronous and g.status]
    nuclear_mw = sum(g.p_max_mw for g in sync if g.fuel == "nuclear")
    wind_cap = sum(g.p_max_mw for g in case.generators
                   if not g.synchronous and g.status)

    n_load = max(int(round(math.sqrt(n))), 1)
    n_wind = math.ceil(n / n_load)
    load_levels = np.linspace(lo_l, hi_l, n_load) if n_load > 1 else [lo_l]
    out: list[LoadingCase] = []
    for load_mw in load_levels:
        w_max = min(hi_w, wind_cap, load_mw - nuclear_mw)
        if w_max < lo_w:
            raise InfeasibleDispatch(
                f"wind target {lo_w:.0f} MW exceeds what a {load_mw:.0f} MW "
                f"demand level can absorb ({w_max:.0f} MW after the nuclear "
                "floor)")
        if w_max < hi_w:
            log.info("demand level %.0f MW caps wind at %.0f MW "
                     "(requested up to %.0f)", load_mw, w_max, hi_w)
        wind_levels = np.linspace(lo_w, w_max, n_wind) if n_wind > 1 else [lo_w]
        for wind_mw in wind_levels:
            if len(out) >= n:
                break
            lc_id = f"lc{len(out):03d}"
            dispatched = dispatch_heuristic(case, float(load_mw), float(wind_mw))
            out.append(loading_case_from(case, dispatched, lc_id,
                                         float(load_mw), float(wind_mw)))
    return out


def apply_loading_case(case: GridCase, lc: LoadingCase) -> GridCase:
    """Reconstruct the dispatched, solved case recorded in a LoadingCase."""
    base_load = sum(l.p_mw for l in case.loads)
    factor = lc.target_load_mw / base_load
    new_gens = []
    for g in case.generators:
        if not g.status:
            new_gens.append(g)
        elif g.id in lc.dispatch:
            new_gens.append(replace(g, p_mw=lc.dispatch[g.id],
                                    q_mvar=0.0 if not g.synchronous else g.q_mvar))
        else:
            new_gens.append(replace(g, status=False))
    new_loads = [replace(l, p_mw=l.p_mw * factor, q_mvar=l.q_mvar * factor)
                 for l in case.loads]
    alive = {g.bus_id for g in new_gens if g.status}
    new_buses = [replace(b, kind="pq") if b.kind == "pv" and b.id not in alive
                 else b for b in case.buses]
    out = replace(case, generators=tuple(new_gens), loads=tuple(new_loads),
                  buses=tuple(new_buses))
    sol = solve_powerflow(out)
    pos = {bid: i for i, bid in enumerate(sol.bus_ids)}
    return out.with_buses(replace(b, v_mag=float(sol.v_mag[pos[b.id]]),
                                  v_ang=float(sol.v_ang[pos[b.id]]))
                          for b in out.buses)


def generate_contingencies(case: GridCase, n: int, rng: np.random.Generator,
                           min_mw: float = 800.0, design_mw: float = 2750.0,
                           multi_site_fraction: float = 0.10) -> list[Contingency]:
    """n distinct generation-loss contingencies, each above min_mw.

    About (1 - multi_site_fraction) of them are design-sized events drawn
    log-uniformly between min_mw and the design contingency, preferring
    multi-unit outages at a single plant (a second plant joins only when a
    fleet is too small to keep the bank distinct); the rest combine whole
    plants from several sites into losses of up to twice the design size.
    Plants are picked with probability proportional to dispatched MW.
    """
    units = [g for g in case.generators if g.synchronous and g.status and g.p_mw > 0]
    plants: dict[int, list] = {}
    for g in units:
        plants.setdefault(g.bus_id, []).append(g)
    for members in plants.values():
        members.sort(key=lambda g: (-g.p_mw, g.id))
    plant_ids = sorted(plants)
    plant_mw = np.array([sum(g.p_mw for g in plants[b]) for b in plant_ids])
    if not plant_ids or plant_mw.sum() <= min_mw:
        raise ValueError(
            f"case dispatch ({plant_mw.sum():.0f} MW) is too small to build "
            f"outages above {min_mw:.0f} MW")
    weights = plant_mw / plant_mw.sum()

    n_multi = int(round(n * multi_site_fraction))
    seen: set[frozenset[str]] = set()
    out: list[Contingency] = []
    attempts = 0
    stale = 0            # consecutive attempts that added nothing
    max_attempts = 200 * n
    while len(out) < n:
        attempts += 1
        if attempts > max_attempts:
            raise ValueError(
                f"could not assemble {n} distinct contingencies above "
                f"{min_mw:.0f} MW from this case (found {len(out)})")
        if len(out) < n_multi:
            target = rng.uniform(design_mw, 2.0 * design_mw)
            chosen: list = []
            total = 0.0
            order = rng.choice(len(plant_ids), size=len(plant_ids),
                               replace=False, p=weights)
            for pi in order:
                chosen.extend(plants[plant_ids[pi]])
                total += plant_mw[pi]
                if total >= target:
                    break
            if total <= min_mw:
                continue
        else:
            target = math.exp(rng.uniform(math.log(min_mw), math.log(design_mw)))
            # widen to a second site only once single-plant draws go stale
            second_site = stale > 25 and rng.random() < 0.7
            eligible = np.flatnonzero(plant_mw > (0.0 if second_site else min_mw))
            if eligible.size == 0:
                n_multi = n  # no single plant is large enough
                continue
            w = plant_mw[eligible] / plant_mw[eligible].sum()
            picks = [int(eligible[rng.choice(eligible.size, p=w)])]
            if second_site and len(plant_ids) > 1:
                picks.append(int(rng.choice(len(plant_ids), p=weights)))
            members = [g for pi in dict.fromkeys(picks)
                       for g in plants[plant_ids[pi]]]
            chosen = []
            total = 0.0
            for ui in rng.permutation(len(members)):
                g = members[int(ui)]
                if total > min_mw and (total >= target or
                                       total + g.p_mw > design_mw):
                    break
                chosen.append(g)
                total += g.p_mw
            if not (min_mw < total <= design_mw):
                stale += 1
                continue
        key = frozenset(g.id for g in chosen)
        if key in seen:
            stale += 1
            continue
        seen.add(key)
        stale = 0
        out.append(Contingency(f"ctg{len(out):03d}", key, float(total)))
    return out


def _bus_stats(bus_ids, values) -> tuple[float, float, float, int | None]:
    vals = np.asarray(values, dtype=float)
    if np.all(np.isnan(vals)):
        return math.nan, math.nan, math.nan, None
    worst = int(np.nanargmin(vals))
    return (float(np.nanmin(vals)), float(np.nanmean(vals)),
            float(np.nanmax(vals)), int(bus_ids[worst]))


def _eval_loading_case(case: GridCase, lc: LoadingCase,
                       contingencies: list[Contingency], mode: str,
                       sim_opts: SimOptions | None) -> list[ScenarioRecord]:
    f_base = case.f_base_hz
    inertia_mws = lc.online_inertia_gws * 1000.0

    def inertia_line(mw: float) -> float:
        return -f_base * mw / (2.0 * inertia_mws) if inertia_mws > 0 else math.nan

    def base_record(ctg, mw, status="ok"):
        sys_r = inertia_line(mw) if mw > 0 else 0.0
        return ScenarioRecord(lc.id, ctg.id, mw, lc.online_inertia_gws, sys_r,
                              concern_flag=(sys_r < CONCERN_ROCOF_HZ_S),
                              status=status)

    rows: list[ScenarioRecord] = []
    model = states = None
    setup_error: str | None = None
    if mode in ("locational", "simulate"):
        try:
            dispatched = apply_loading_case(case, lc)
            sol = solve_powerflow(dispatched)
            model = augment_dynamic(build_ybus(dispatched), dispatched, sol)
            states = init_machines(model, dispatched, sol)
        except Exception as exc:  # noqa: BLE001 - recorded per row
            setup_error = f"loading case failed: {exc}"

    for ctg in sorted(contingencies, key=lambda c: c.id):
        online = frozenset(g for g in ctg.outaged_generator_ids
                           if g in lc.committed)
        mw_disp = sum(lc.dispatch.get(g, 0.0) for g in online)
        if not online:
            rows.append(base_record(ctg, 0.0, status="no_online_units"))
            continue
        if mode == "system_only":
            rows.append(base_record(ctg, mw_disp))
            continue
        if setup_error is not None:
            rows.append(base_record(ctg, mw_disp, status=setup_error))
            continue
        try:
            sub = Contingency(ctg.id, online)
            if mode == "locational":
                res = locational_rocof(model, states, sub)
                rec = base_record(ctg, res.mw_lost)
                (rec.bus_rocof_min, rec.bus_rocof_mean, rec.bus_rocof_max,
                 rec.worst_bus) = _bus_stats(res.bus_ids, res.bus_rocof_hz_s)
                if res.undefined_islands:
                    rec.status = f"{len(res.undefined_islands)} undefined island(s)"
                rows.append(rec)
            else:  # simulate
                opts = sim_opts or SimOptions(t_end=0.25, enable_ufls=False,
                                              enable_ffr=False)
                sim = simulate(model, states.copy(), sub, opts)
                rec = base_record(ctg, mw_disp)
                (rec.bus_rocof_min, rec.bus_rocof_mean, rec.bus_rocof_max,
                 rec.worst_bus) = _bus_stats(
                    sim.bus_ids, finite_difference_rocof(sim))
                rows.append(rec)
        except Exception as exc:  # noqa: BLE001 - fault isolation
            rows.append(base_record(ctg, mw_disp, status=f"error: {exc}"))
    return rows


def finite_difference_rocof(sim, window_s: float = 0.02) -> np.ndarray:
    """Average per-bus ROCOF over the first window after the event, from a
    central second difference of the raw (unfiltered) voltage angles."""
    if len(sim.time_s) < 3:
        raise ValueError("simulation horizon too short for the FD window")
    dt = float(sim.time_s[1] - sim.time_s[0])
    k1 = int(round(sim.t_event / dt))
    m = max(int(round(window_s / (2 * dt))), 1)
    if k1 + 2 * m >= len(sim.time_s):
        raise ValueError("simulation horizon too short for the FD window")
    th = sim.bus_angle_rad
    return (th[k1 + 2 * m] - 2.0 * th[k1 + m] + th[k1]) / ((m * dt) ** 2 * 2 * np.pi)


def run_bank(case: GridCase, loading_cases: list[LoadingCase],
             contingencies: list[Contingency], mode: str = "locational",
             out_path=None, workers: int = 1,
             sim_opts: SimOptions | None = None) -> list[ScenarioRecord]:
    """Evaluate every (loading case, contingency) pair.

    mode: "system_only" (inertia arithmetic only), "locational" (two sparse
    solves per scenario after per-loading-case initialization), or
    "simulate" (short time-domain run per scenario; slow, small cases only).

    Rows stream to out_path as each loading case completes. Worker threads
    share nothing across loading cases, and rows are assembled in sorted
    (loading_id, contingency_id) order, so the output is identical for any
    worker count.
    """
    if mode not in ("system_only", "locational", "simulate"):
        raise ValueError(f"unknown mode {mode!r}")
    ordered = sorted(loading_cases, key=lambda lc: lc.id)

    def job(lc):
        return _eval_loading_case(case, lc, contingencies, mode, sim_opts)

    writer = ctx = None
    if out_path is not None:
        ctx = open(out_path, "w", newline="")
        writer = csv.writer(ctx)
        writer.writerow(SCENARIO_COLUMNS)

    records: list[ScenarioRecord] = []

    def emit(rows):
        records.extend(rows)
        if writer is not None:
            for r in rows:
                writer.writerow(r.row())

    try:
        if workers <= 1:
            for rows in map(job, ordered):
                emit(rows)
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                for rows in pool.map(job, ordered):
                    emit(rows)
    finally:
        if ctx is not None:
            ctx.close()
    return records
