"""Pilot lifecycle, compute units, and the two task-to-pilot schedulers.

Two binding modes are supported:

* late_to_pilot: one global unit queue; units are assigned greedily (with
  backfill) to whichever active pilot can fit them, regardless of site.
* early_to_resource: units are partitioned across sites up front, before any
  pilot activates; each site's queue is then served only by that site's
  pilots.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Sequence

from .errors import (
    CapacityExceededError,
    InvalidArgumentError,
    InvalidStateError,
    RejectedSubmissionError,
)
from .resource import Site
from .workload import Task


class BindingMode(str, Enum):
    LATE_TO_PILOT = "late_to_pilot"
    EARLY_TO_RESOURCE = "early_to_resource"


class PilotState(str, Enum):
    DESCRIBED = "described"
    QUEUED = "queued"
    ACTIVE = "active"
    DONE = "done"
    CANCELED = "canceled"
    FAILED = "failed"


class UnitState(str, Enum):
    NEW = "new"
    SCHEDULED = "scheduled"
    STAGING_INPUT = "staging_input"
    EXECUTING = "executing"
    STAGING_OUTPUT = "staging_output"
    DONE = "done"
    FAILED = "failed"


@dataclass(frozen=True)
class PilotDescription:
    """Shape of a pilot job as submitted to a site's resource manager."""

    site_name: str
    cores: int
    walltime_s: float
    bootstrap_s: float = 0.0
    shutdown_s: float = 0.0

    def __post_init__(self):
        if self.cores < 1:
            raise InvalidArgumentError("pilot cores must be >= 1")
        if self.bootstrap_s < 0 or self.shutdown_s < 0:
            raise InvalidArgumentError("pilot overheads must be >= 0")
        if self.walltime_s <= self.bootstrap_s + self.shutdown_s:
            raise InvalidArgumentError(
                f"walltime ({self.walltime_s}s) must exceed bootstrap + shutdown "
                f"({self.bootstrap_s + self.shutdown_s}s)"
            )

    @property
    def usable_s(self) -> float:
        """Walltime available for unit execution."""
        return self.walltime_s - self.bootstrap_s - self.shutdown_s


@dataclass
class Pilot:
    """A placeholder job on a site and its lifecycle bookkeeping."""

    id: str
    index: int
    description: PilotDescription
    state: PilotState = PilotState.DESCRIBED
    submit_time: float | None = None
    activate_time: float | None = None
    end_time: float | None = None
    free_cores: int = 0

    @property
    def deadline(self) -> float:
        """Latest time by which units on this pilot must have finished."""
        assert self.activate_time is not None
        return self.activate_time + self.description.walltime_s - self.description.shutdown_s

    @property
    def ready_time(self) -> float:
        """Earliest time a unit can start executing on this pilot."""
        assert self.activate_time is not None
        return self.activate_time + self.description.bootstrap_s


@dataclass
class ComputeUnit:
    """A task bound for execution, with per-state timestamps."""

    task: Task
    state: UnitState = UnitState.NEW
    bound_pilot: str | None = None
    timestamps: dict[UnitState, float] = field(default_factory=dict)

    @property
    def id(self) -> str:
        return self.task.id

    @property
    def cores(self) -> int:
        return self.task.cores

    @property
    def duration_s(self) -> float:
        return self.task.duration_s


def submit_pilot(
    desc: PilotDescription,
    now: float,
    site: Site,
    concurrent_count: int,
    index: int,
) -> Pilot:
    """Create a queued pilot; the caller schedules its activation event.

    ``concurrent_count`` is the number of pilots currently queued or active
    on the site; submission beyond the site cap is rejected.
    """
    if desc.cores > site.total_cores:
        raise CapacityExceededError(
            f"pilot of {desc.cores} cores exceeds site {site.name!r} "
            f"({site.total_cores} cores)"
        )
    if concurrent_count >= site.max_concurrent_pilots:
        raise RejectedSubmissionError(
            f"site {site.name!r} already has {concurrent_count} concurrent "
            f"pilots (max {site.max_concurrent_pilots})"
        )
    return Pilot(
        id=f"p{index:04d}",
        index=index,
        description=desc,
        state=PilotState.QUEUED,
        submit_time=now,
        free_cores=desc.cores,
    )


def cancel_pilot(
    pilot: Pilot,
    now: float,
    running_units: Sequence[ComputeUnit] = (),
    mode: BindingMode = BindingMode.LATE_TO_PILOT,
) -> list[ComputeUnit]:
    """Cancel a queued or active pilot.

    Returns the units to put back on the queue (late binding re-queues them;
    early binding fails them, since their site commitment is lost).
    """
    if pilot.state not in (PilotState.QUEUED, PilotState.ACTIVE):
        raise InvalidStateError(
            f"cannot cancel pilot {pilot.id} in state {pilot.state.value}"
        )
    pilot.state = PilotState.CANCELED
    pilot.end_time = now
    pilot.free_cores = 0
    requeued: list[ComputeUnit] = []
    for u in running_units:
        u.bound_pilot = None
        if mode is BindingMode.LATE_TO_PILOT:
            u.state = UnitState.NEW
            u.timestamps.pop(UnitState.SCHEDULED, None)
            u.timestamps.pop(UnitState.STAGING_INPUT, None)
            u.timestamps.pop(UnitState.EXECUTING, None)
            requeued.append(u)
        else:
            u.state = UnitState.FAILED
            u.timestamps[UnitState.FAILED] = now
    return requeued


def _pilot_order(p: Pilot):
    # Earliest-activated first, then most free cores, then lowest id: a
    # deterministic order that concentrates work on the first-active pilot.
    return (p.activate_time, -p.free_cores, p.index)


def schedule_late(
    queue: Sequence[ComputeUnit],
    pilots: Iterable[Pilot],
    now: float,
    unit_time_fn: Callable[[ComputeUnit, Pilot], float] | None = None,
    start_fn: Callable[[Pilot], float] | None = None,
) -> list[tuple[ComputeUnit, Pilot]]:
    """Greedy backfill over a unit queue and a set of active pilots.

    Units are scanned in queue order; each is placed on the first eligible
    pilot (enough free cores, enough remaining walltime for the unit's full
    footprint). A unit blocked by core count does not block later, smaller
    units. ``unit_time_fn`` gives the wall seconds a unit will occupy its
    cores on a pilot (staging included); defaults to the nominal duration.
    ``start_fn`` gives the earliest start on a pilot; defaults to
    max(now, pilot ready time).
    """
    if unit_time_fn is None:
        unit_time_fn = lambda u, p: u.duration_s
    if start_fn is None:
        start_fn = lambda p: max(now, p.ready_time)
    active = sorted(
        (p for p in pilots if p.state is PilotState.ACTIVE),
        key=_pilot_order,
    )
    assignments: list[tuple[ComputeUnit, Pilot]] = []
    free_total = sum(p.free_cores for p in active)
    for unit in queue:
        if free_total <= 0:
            break
        if unit.state is not UnitState.NEW:
            continue
        for p in active:
            if p.free_cores < unit.cores:
                continue
            if start_fn(p) + unit_time_fn(unit, p) > p.deadline + 1e-6:
                continue
            p.free_cores -= unit.cores
            free_total -= unit.cores
            unit.bound_pilot = p.id
            assignments.append((unit, p))
            break
    return assignments


@dataclass(frozen=True)
class EarlyBindingParams:
    """Throttles and selection weights for per-site early binding."""

    selection_weights: tuple[float, float, float] = (1.0, 1.0, 10.0)  # (wq, wc, wf)
    max_queued_per_site: int | None = None


def schedule_early(
    units: Sequence[ComputeUnit],
    sites: Sequence[Site],
    params: EarlyBindingParams = EarlyBindingParams(),
    initial_states: dict | None = None,
) -> dict[str, list[ComputeUnit]]:
    """Partition units across sites before any pilot activates.

    Each unit goes to the best-scoring site (fewest queued, best completion
    rate, fewest failures). Site throttles cap per-site totals; once every
    site is saturated the throttle is relaxed so that the workload can still
    be fully placed. With identical idle sites, the queued-count factor
    round-robins units so every site receives work.
    """
    from .strategy import SiteScoreState, site_select

    if not sites:
        raise InvalidArgumentError("early binding needs at least one site")
    states = {
        s.name: (initial_states or {}).get(s.name) or SiteScoreState(site_name=s.name)
        for s in sites
    }
    assignment: dict[str, list[ComputeUnit]] = {s.name: [] for s in sites}
    cap = params.max_queued_per_site
    for unit in units:
        candidates = [
            st for st in states.values()
            if cap is None or st.queued_count < cap
        ] or list(states.values())
        chosen = site_select(candidates, params.selection_weights)
        assignment[chosen].append(unit)
        states[chosen] = states[chosen].with_queued(states[chosen].queued_count + 1)
    return assignment


def find_unschedulable(
    units: Iterable[ComputeUnit],
    descriptions: Iterable[PilotDescription],
    unit_time_fn: Callable[[ComputeUnit, PilotDescription], float] | None = None,
) -> list[ComputeUnit]:
    """Units that no pilot the plan can ever provide would fit."""
    if unit_time_fn is None:
        unit_time_fn = lambda u, d: u.duration_s
    descs = list(descriptions)
    out = []
    for u in units:
        if not any(
            d.cores >= u.cores and unit_time_fn(u, d) <= d.usable_s + 1e-6
            for d in descs
        ):
            out.append(u)
    return out
