"""Deterministic discrete-event engine for pilot-based workload execution.

Time is continuous (real-valued seconds); events are totally ordered by
(time, sequence number) and the loop is strictly single threaded, so a run
is a pure function of (plan, workload, sites, config) and replays are
bit-identical. Independent runs with different seeds can be executed in
parallel since no state is shared.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, asdict
from enum import Enum
from typing import Sequence

from .errors import InfeasiblePlanError, InvalidArgumentError
from .pilot import (
    BindingMode,
    ComputeUnit,
    EarlyBindingParams,
    Pilot,
    PilotDescription,
    PilotState,
    UnitState,
    cancel_pilot,
    find_unschedulable,
    schedule_early,
    schedule_late,
    submit_pilot,
)
from .resource import Site, WaitSampler
from .strategy import ExecutionPlan
from .trace import Trace
from .workload import Workload, WorkloadKind, as_self_contained_bot, ready_tasks


class EventKind(str, Enum):
    PILOT_ACTIVATES = "pilot_activates"
    PILOT_EXPIRES = "pilot_expires"
    UNIT_STAGE_IN_DONE = "unit_stage_in_done"
    UNIT_EXEC_DONE = "unit_exec_done"
    UNIT_STAGE_OUT_DONE = "unit_stage_out_done"
    SCHEDULER_TICK = "scheduler_tick"
    BRIDGE_FLUSH = "bridge_flush"


@dataclass(frozen=True)
class SimConfig:
    """Run-level knobs: seed, overheads, staging.

    Pilot bootstrap/shutdown costs live on the pilot descriptions (set by the
    planner); the per-unit scheduling overhead is c0 + c1 * (number of sites
    the plan spans). middleware_s delays the release of the workload into the
    scheduler, modeling middleware processing time.
    """

    seed: int = 0
    scheduler_interval_s: float = 0.0  # extra periodic passes; 0 = event-driven
    sched_overhead_c0_s: float = 0.0
    sched_overhead_c1_s: float = 0.0
    middleware_s: float = 0.0
    staging_enabled: bool = False

    def __post_init__(self):
        for name in ("scheduler_interval_s", "sched_overhead_c0_s",
                     "sched_overhead_c1_s", "middleware_s"):
            if getattr(self, name) < 0:
                raise InvalidArgumentError(f"{name} must be >= 0")


class _Engine:
    """Executes one self-contained workload segment."""

    def __init__(
        self,
        plan: ExecutionPlan,
        workload: Workload,
        sites: Sequence[Site],
        config: SimConfig,
        sampler: WaitSampler,
        trace: Trace,
        t_start: float = 0.0,
        pilot_counter: itertools.count | None = None,
    ):
        self.plan = plan
        self.config = config
        self.sampler = sampler
        self.trace = trace
        self.t_start = t_start
        self.now = t_start

        self.sites = {s.name: s for s in sites}
        for d in plan.pilot_descriptions:
            if d.site_name not in self.sites:
                raise InvalidArgumentError(f"plan references unknown site {d.site_name!r}")
        # Sites the plan actually spans, in plan order.
        self.plan_sites = list(dict.fromkeys(d.site_name for d in plan.pilot_descriptions))
        self.sched_overhead_s = (
            config.sched_overhead_c0_s
            + config.sched_overhead_c1_s * len(self.plan_sites)
        )

        self._heap: list[tuple[float, int, EventKind, str]] = []
        self._seq = itertools.count()
        self._pilot_counter = pilot_counter if pilot_counter is not None else itertools.count()

        self.pilots: dict[str, Pilot] = {}
        self.units = [ComputeUnit(t) for t in workload.tasks]
        self.units_by_id = {u.id: u for u in self.units}
        self.running: dict[str, set[str]] = {}  # pilot id -> unit ids
        self._site_concurrent: dict[str, int] = {s: 0 for s in self.sites}
        self._deferred: dict[str, list[PilotDescription]] = {s: [] for s in self.sites}
        self._occ_cache: dict[tuple[str, str], float] = {}

        self.unschedulable: list[str] = []
        self.completed: set[str] = set()
        self._released = False
        self._tick_at: float | None = None

        # Pending queues, filled at workload release time.
        self.pending: list[ComputeUnit] = []
        self.site_pending: dict[str, list[ComputeUnit]] = {s: [] for s in self.sites}

    # -- time/occupancy helpers --------------------------------------------

    def _staging_s(self, unit: ComputeUnit, site: Site, refs) -> float:
        if not self.config.staging_enabled:
            return 0.0
        return sum(site.staging_time_s(r.size_bytes) for r in refs)

    def _occupancy(self, unit: ComputeUnit, site_name: str) -> float:
        """Wall seconds a unit holds its cores on a pilot at this site."""
        key = (unit.id, site_name)
        occ = self._occ_cache.get(key)
        if occ is None:
            site = self.sites[site_name]
            occ = (
                self._staging_s(unit, site, unit.task.inputs)
                + unit.duration_s
                + self._staging_s(unit, site, unit.task.outputs)
            )
            self._occ_cache[key] = occ
        return occ

    # -- event plumbing -----------------------------------------------------

    def _push(self, time_s: float, kind: EventKind, subject: str):
        heapq.heappush(self._heap, (time_s, next(self._seq), kind, subject))

    def _emit(self, entity_kind: str, entity_id: str, state: str, time_s: float):
        self.trace.append(entity_kind, entity_id, state, time_s)

    # -- pilot management ---------------------------------------------------

    def _submit(self, desc: PilotDescription, now: float):
        site = self.sites[desc.site_name]
        if self._site_concurrent[site.name] >= site.max_concurrent_pilots:
            self._deferred[site.name].append(desc)
            return
        pilot = submit_pilot(
            desc, now, site, self._site_concurrent[site.name],
            next(self._pilot_counter),
        )
        self._site_concurrent[site.name] += 1
        self.pilots[pilot.id] = pilot
        self.running[pilot.id] = set()
        self._emit("pilot", pilot.id, "queued", now)
        wait = self.sampler.sample(site.name, desc.cores)
        self._push(now + wait, EventKind.PILOT_ACTIVATES, pilot.id)

    def _retire_pilot(self, pilot: Pilot, now: float, state: PilotState):
        pilot.state = state
        pilot.end_time = now
        pilot.free_cores = 0
        self._site_concurrent[pilot.description.site_name] -= 1
        self._emit("pilot", pilot.id, state.value, now)

    def _scope_pending(self, pilot: Pilot) -> list[ComputeUnit]:
        if self.plan.binding is BindingMode.LATE_TO_PILOT:
            return self.pending
        return self.site_pending[pilot.description.site_name]

    def _turnover(self, now: float):
        """Retire idle pilots that can no longer serve pending work, and
        submit replacements so the site keeps a usable pilot in its queue."""
        if not self.plan.scheduler_params.replace_expired:
            return
        for pilot in list(self.pilots.values()):
            if pilot.state is not PilotState.ACTIVE:
                continue
            if self.running[pilot.id]:
                continue
            scope = [u for u in self._scope_pending(pilot) if u.state is UnitState.NEW]
            if not scope:
                continue
            desc = pilot.description
            fits_fresh = any(
                u.cores <= desc.cores
                and self._occupancy(u, desc.site_name) <= desc.usable_s + 1e-6
                for u in scope
            )
            fits_now = any(
                u.cores <= pilot.free_cores
                and max(now + self.sched_overhead_s, pilot.ready_time)
                + self._occupancy(u, desc.site_name) <= pilot.deadline + 1e-6
                for u in scope
            )
            if fits_fresh and not fits_now:
                self._retire_pilot(pilot, now, PilotState.CANCELED)
                self._submit(desc, now)
        # A freed concurrency slot may unblock a deferred submission.
        for site_name, deferred in self._deferred.items():
            site = self.sites[site_name]
            while deferred and self._site_concurrent[site_name] < site.max_concurrent_pilots:
                self._submit(deferred.pop(0), now)

    # -- unit lifecycle -----------------------------------------------------

    def _start_unit(self, unit: ComputeUnit, pilot: Pilot, now: float):
        desc = pilot.description
        t_begin = max(now + self.sched_overhead_s, pilot.ready_time)
        unit.state = UnitState.SCHEDULED
        unit.timestamps[UnitState.SCHEDULED] = t_begin - self.sched_overhead_s
        self._emit("unit", unit.id, "scheduled", t_begin - self.sched_overhead_s)
        self.running[pilot.id].add(unit.id)

        site = self.sites[desc.site_name]
        stage_in = self._staging_s(unit, site, unit.task.inputs)
        if stage_in > 0:
            unit.state = UnitState.STAGING_INPUT
            unit.timestamps[UnitState.STAGING_INPUT] = t_begin
            self._emit("unit", unit.id, "staging_input", t_begin)
            self._push(t_begin + stage_in, EventKind.UNIT_STAGE_IN_DONE, unit.id)
        else:
            self._begin_exec(unit, t_begin)

    def _begin_exec(self, unit: ComputeUnit, t: float):
        unit.state = UnitState.EXECUTING
        unit.timestamps[UnitState.EXECUTING] = t
        self._emit("unit", unit.id, "executing", t)
        self._push(t + unit.duration_s, EventKind.UNIT_EXEC_DONE, unit.id)

    def _finish_unit(self, unit: ComputeUnit, t: float):
        unit.state = UnitState.DONE
        unit.timestamps[UnitState.DONE] = t
        self._emit("unit", unit.id, "done", t)
        pilot = self.pilots[unit.bound_pilot]
        self.running[pilot.id].discard(unit.id)
        if pilot.state is PilotState.ACTIVE:
            pilot.free_cores += unit.cores
        self.completed.add(unit.id)

    # -- scheduling ---------------------------------------------------------

    def _release(self, now: float):
        self._released = True
        for u in self.units:
            u.timestamps[UnitState.NEW] = now
            self._emit("unit", u.id, "new", now)
        occ = lambda u, d: self._occupancy(u, d.site_name)
        if self.plan.binding is BindingMode.LATE_TO_PILOT:
            bad = find_unschedulable(self.units, self.plan.pilot_descriptions, occ)
            self._mark_unschedulable(bad, now)
            self.pending = [u for u in self.units if u.state is UnitState.NEW]
        else:
            params = EarlyBindingParams(
                selection_weights=self.plan.scheduler_params.selection_weights,
                max_queued_per_site=self.plan.scheduler_params.max_queued_per_site,
            )
            plan_sites = [self.sites[n] for n in self.plan_sites]
            partition = schedule_early(self.units, plan_sites, params)
            descs_by_site: dict[str, list[PilotDescription]] = {}
            for d in self.plan.pilot_descriptions:
                descs_by_site.setdefault(d.site_name, []).append(d)
            for site_name, units in partition.items():
                bad = find_unschedulable(units, descs_by_site.get(site_name, []), occ)
                self._mark_unschedulable(bad, now)
                self.site_pending[site_name] = [
                    u for u in units if u.state is UnitState.NEW
                ]
        if len(self.unschedulable) == len(self.units):
            raise InfeasiblePlanError(
                "no unit of the workload fits any pilot the plan provides"
            )

    def _mark_unschedulable(self, units, now: float):
        for u in units:
            u.state = UnitState.FAILED
            u.timestamps[UnitState.FAILED] = now
            self._emit("unit", u.id, "failed", now)
            self.unschedulable.append(u.id)

    def _pass(self, now: float):
        if not self._released:
            return
        occ = lambda u, p: self._occupancy(u, p.description.site_name)
        start = lambda p: max(now + self.sched_overhead_s, p.ready_time)
        if self.plan.binding is BindingMode.LATE_TO_PILOT:
            queues = [(None, self.pending)]
        else:
            queues = list(self.site_pending.items())
        for site_name, queue in queues:
            if not queue:
                continue
            if site_name is None:
                pilots = self.pilots.values()
            else:
                pilots = [
                    p for p in self.pilots.values()
                    if p.description.site_name == site_name
                ]
            for unit, pilot in schedule_late(queue, pilots, now, occ, start):
                self._start_unit(unit, pilot, now)
        self.pending = [u for u in self.pending if u.state is UnitState.NEW]
        for site_name in list(self.site_pending):
            self.site_pending[site_name] = [
                u for u in self.site_pending[site_name] if u.state is UnitState.NEW
            ]
        self._turnover(now)
        interval = max(self.plan.scheduler_params.scheduler_interval_s,
                       self.config.scheduler_interval_s)
        has_pending = bool(self.pending) or any(self.site_pending.values())
        if interval > 0 and has_pending:
            t_next = now + interval
            if self._tick_at is None or self._tick_at <= now:
                self._tick_at = t_next
                self._push(t_next, EventKind.SCHEDULER_TICK, "tick")

    # -- main loop ----------------------------------------------------------

    def run(self) -> None:
        self._emit("middleware", "workload", "submitted", self.t_start)
        for desc in self.plan.pilot_descriptions:
            self._submit(desc, self.t_start)
        release_at = self.t_start + self.config.middleware_s
        self._push(release_at, EventKind.SCHEDULER_TICK, "release")

        n_terminal_target = len(self.units)
        n_terminal = 0

        while self._heap and n_terminal < n_terminal_target:
            t = self._heap[0][0]
            need_sched = False
            while self._heap and self._heap[0][0] == t:
                _, _, kind, subject = heapq.heappop(self._heap)
                if kind is EventKind.PILOT_ACTIVATES:
                    pilot = self.pilots[subject]
                    if pilot.state is not PilotState.QUEUED:
                        continue  # canceled while queued; activation voided
                    pilot.state = PilotState.ACTIVE
                    pilot.activate_time = t
                    pilot.free_cores = pilot.description.cores
                    self._emit("pilot", pilot.id, "active", t)
                    self._push(t + pilot.description.walltime_s,
                               EventKind.PILOT_EXPIRES, pilot.id)
                    need_sched = True
                elif kind is EventKind.PILOT_EXPIRES:
                    pilot = self.pilots[subject]
                    if pilot.state is not PilotState.ACTIVE:
                        continue
                    if self.running[pilot.id]:
                        # The walltime check at assignment guarantees units
                        # finish by the deadline; completions falling on this
                        # very timestamp may still sit in the event batch, so
                        # re-arm the expiry just past it.
                        self._push(t + 1e-6, EventKind.PILOT_EXPIRES, pilot.id)
                        continue
                    self._retire_pilot(pilot, t, PilotState.DONE)
                    need_sched = True
                elif kind is EventKind.UNIT_STAGE_IN_DONE:
                    unit = self.units_by_id[subject]
                    if unit.state is UnitState.STAGING_INPUT:
                        self._begin_exec(unit, t)
                elif kind is EventKind.UNIT_EXEC_DONE:
                    unit = self.units_by_id[subject]
                    if unit.state is not UnitState.EXECUTING:
                        continue
                    site = self.sites[
                        self.pilots[unit.bound_pilot].description.site_name]
                    stage_out = self._staging_s(unit, site, unit.task.outputs)
                    if stage_out > 0:
                        unit.state = UnitState.STAGING_OUTPUT
                        unit.timestamps[UnitState.STAGING_OUTPUT] = t
                        self._emit("unit", unit.id, "staging_output", t)
                        self._push(t + stage_out,
                                   EventKind.UNIT_STAGE_OUT_DONE, unit.id)
                    else:
                        self._finish_unit(unit, t)
                        n_terminal += 1
                        need_sched = True
                elif kind is EventKind.UNIT_STAGE_OUT_DONE:
                    unit = self.units_by_id[subject]
                    if unit.state is UnitState.STAGING_OUTPUT:
                        self._finish_unit(unit, t)
                        n_terminal += 1
                        need_sched = True
                elif kind is EventKind.SCHEDULER_TICK:
                    if subject == "release" and not self._released:
                        self.now = t
                        self._release(t)
                        n_terminal = len(self.unschedulable)
                    need_sched = True
            self.now = t
            if need_sched:
                n_before = len(self.unschedulable)
                self._pass(t)
                n_terminal += len(self.unschedulable) - n_before

        # Tidy up: pilots still in flight are canceled at the final time.
        for pilot in self.pilots.values():
            if pilot.state in (PilotState.QUEUED, PilotState.ACTIVE):
                self._retire_pilot(pilot, self.now, PilotState.CANCELED)

    def pilot_meta(self) -> dict:
        return {
            p.id: {
                "site": p.description.site_name,
                "cores": p.description.cores,
                "walltime_s": p.description.walltime_s,
                "bootstrap_s": p.description.bootstrap_s,
                "shutdown_s": p.description.shutdown_s,
                "submit_time": p.submit_time,
                "activate_time": p.activate_time,
                "wait_s": (None if p.activate_time is None
                           else p.activate_time - p.submit_time),
            }
            for p in self.pilots.values()
        }


def _base_meta(plan: ExecutionPlan, config: SimConfig) -> dict:
    return {
        "binding": plan.binding.value,
        "config": asdict(config),
        "plan": plan.to_dict(),
        "pilots": {},
        "unit_pilot": {},
        "segments": [],
        "unschedulable": [],
    }


def run(
    plan: ExecutionPlan,
    w: Workload,
    sites: Sequence[Site],
    config: SimConfig,
) -> Trace:
    """Simulate one self-contained workload under the given plan."""
    trace = Trace(meta=_base_meta(plan, config))
    sampler = WaitSampler(sites, config.seed)
    engine = _Engine(plan, w, sites, config, sampler, trace)
    engine.run()
    trace.meta["pilots"] = engine.pilot_meta()
    trace.meta["unit_pilot"] = {
        u.id: u.bound_pilot for u in engine.units if u.bound_pilot
    }
    trace.meta["unschedulable"] = list(engine.unschedulable)
    trace.meta["segments"] = [{
        "t_start": 0.0,
        "t_end": engine.now,
        "task_ids": [u.id for u in engine.units],
    }]
    return trace


def run_staged(
    plan: ExecutionPlan,
    w: Workload,
    sites: Sequence[Site],
    config: SimConfig,
) -> Trace:
    """Simulate a staged workflow, stage by stage.

    Each stage is repackaged as a self-contained workload (as the integration
    bridge would hand it over) and executed with freshly submitted pilots;
    per-stage traces are concatenated on a single global clock. Tasks whose
    producers could not be scheduled are reported unschedulable in turn.
    """
    if w.kind is not WorkloadKind.STAGED:
        raise InvalidArgumentError("run_staged requires a staged workload")
    trace = Trace(meta=_base_meta(plan, config))
    sampler = WaitSampler(sites, config.seed)
    counter = itertools.count()
    t = 0.0
    done: set[str] = set()
    unschedulable: list[str] = []
    for stage in range(w.stages):
        stage_tasks = w.tasks_in_stage(stage)
        ready = ready_tasks(w, done) & {s.id for s in stage_tasks}
        runnable = [s for s in stage_tasks if s.id in ready]
        blocked = [s for s in stage_tasks if s.id not in ready]
        for task in blocked:
            trace.append("unit", task.id, "failed", t)
            unschedulable.append(task.id)
        if not runnable:
            continue
        sub = as_self_contained_bot(runnable)
        engine = _Engine(plan, sub, sites, config, sampler, trace,
                         t_start=t, pilot_counter=counter)
        engine.run()
        trace.meta["pilots"].update(engine.pilot_meta())
        trace.meta["unit_pilot"].update(
            {u.id: u.bound_pilot for u in engine.units if u.bound_pilot}
        )
        unschedulable.extend(engine.unschedulable)
        trace.meta["segments"].append({
            "t_start": t,
            "t_end": engine.now,
            "task_ids": [u.id for u in engine.units],
        })
        done |= engine.completed
        t = engine.now
    trace.meta["unschedulable"] = unschedulable
    return trace
