"""Execution planning: turn (workload, sites, knobs) into an ExecutionPlan.

Two planners are provided. The derived planner sizes one (or more) pilots
per site so that any single pilot could execute the whole workload by
itself, and binds tasks late. The fixed planner replicates a user-specified
pilot shape per site, as configuration-file-driven systems do, and is
typically paired with early binding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

from .errors import (
    CapacityExceededError,
    InfeasiblePlanError,
    InvalidArgumentError,
    UnschedulableError,
)
from .pilot import BindingMode, ComputeUnit, PilotDescription
from .resource import Site
from .workload import Workload

# Calibration defaults for pilot and per-unit overheads.
DEFAULT_BOOTSTRAP_S = 150.0
DEFAULT_SHUTDOWN_S = 150.0
DEFAULT_SCHED_C0_S = 0.1
DEFAULT_SCHED_C1_S = 0.05


@dataclass(frozen=True)
class SchedulerParams:
    """Scheduler knobs carried by an execution plan."""

    scheduler_interval_s: float = 0.0  # 0 = purely event-driven
    selection_weights: tuple[float, float, float] = (1.0, 1.0, 10.0)
    max_queued_per_site: int | None = None
    replace_expired: bool = True


@dataclass(frozen=True)
class ExecutionPlan:
    """A materialized execution strategy: pilots, binding, scheduler knobs."""

    binding: BindingMode
    pilot_descriptions: tuple[PilotDescription, ...]
    scheduler_params: SchedulerParams = SchedulerParams()
    concurrency_pct: float = 100.0
    resource_pct: float = 100.0

    def __post_init__(self):
        if not self.pilot_descriptions:
            raise InvalidArgumentError("a plan needs at least one pilot description")
        for pct, name in ((self.concurrency_pct, "concurrency_pct"),
                          (self.resource_pct, "resource_pct")):
            if not 0 < pct <= 100:
                raise InvalidArgumentError(f"{name} must be in (0, 100], got {pct}")

    @property
    def total_cores(self) -> int:
        return sum(d.cores for d in self.pilot_descriptions)

    def to_dict(self) -> dict:
        return {
            "binding": self.binding.value,
            "concurrency_pct": self.concurrency_pct,
            "resource_pct": self.resource_pct,
            "scheduler_params": {
                "scheduler_interval_s": self.scheduler_params.scheduler_interval_s,
                "selection_weights": list(self.scheduler_params.selection_weights),
                "max_queued_per_site": self.scheduler_params.max_queued_per_site,
                "replace_expired": self.scheduler_params.replace_expired,
            },
            "pilots": [
                {
                    "site": d.site_name,
                    "cores": d.cores,
                    "walltime_s": d.walltime_s,
                    "bootstrap_s": d.bootstrap_s,
                    "shutdown_s": d.shutdown_s,
                }
                for d in self.pilot_descriptions
            ],
        }


@dataclass(frozen=True)
class SiteScoreState:
    """Per-site factors consulted by automatic site selection."""

    site_name: str
    queued_count: int = 0
    completion_rate: float = 0.0
    failure_rate: float = 0.0

    def __post_init__(self):
        if self.completion_rate < 0 or self.failure_rate < 0:
            raise InvalidArgumentError("site rates must be >= 0")

    def with_queued(self, queued_count: int) -> "SiteScoreState":
        return replace(self, queued_count=queued_count)


def site_select(
    states: Sequence[SiteScoreState],
    weights: tuple[float, float, float] = (1.0, 1.0, 10.0),
) -> str:
    """Pick the best site by a weighted three-factor score.

    score = wc * completion_rate - wq * queued_count - wf * failure_rate,
    with ``weights`` given as (wq, wc, wf). Ties break by site name order,
    so selection is deterministic.
    """
    if not states:
        raise InvalidArgumentError("site_select needs at least one site state")
    wq, wc, wf = weights

    def score(s: SiteScoreState) -> float:
        return wc * s.completion_rate - wq * s.queued_count - wf * s.failure_rate

    return min(states, key=lambda s: (-score(s), s.site_name)).site_name


def throttle_gate(
    state: SiteScoreState,
    limits: tuple[int, int],
    recent_submission_count: int = 0,
) -> bool:
    """Both per-site throttles must pass for a new submission to the site."""
    max_queued, max_submit_rate = limits
    if max_queued <= 0 or max_submit_rate <= 0:
        raise InvalidArgumentError("throttle limits must be positive")
    return state.queued_count < max_queued and recent_submission_count < max_submit_rate


def _stage_walltime_need(
    w: Workload, pilot_cores: int, task_duration_s: float | None,
    per_task_overhead_s: float,
) -> float:
    """Max over stages of the execution time one pilot needs for that stage.

    Staged workloads run stage by stage on freshly submitted pilots, so a
    pilot only ever has to accommodate the heaviest single stage.
    """
    need = 0.0
    for stage in range(w.stages):
        tasks = w.tasks_in_stage(stage)
        if not tasks:
            continue
        demand = sum(t.cores for t in tasks)
        generations = math.ceil(demand / pilot_cores)
        duration = task_duration_s if task_duration_s is not None \
            else max(t.duration_s for t in tasks)
        need = max(need, generations * (duration + per_task_overhead_s))
    return need


def plan_aimes(
    w: Workload,
    sites: Sequence[Site],
    task_duration_s: float | None = None,
    pilots_per_site: int = 1,
    *,
    bootstrap_s: float = 0.0,
    shutdown_s: float = 0.0,
    per_task_overhead_s: float = 0.0,
    concurrency_pct: float = 100.0,
    resource_pct: float = 100.0,
    scheduler_params: SchedulerParams | None = None,
) -> ExecutionPlan:
    """Derive a late-binding plan: pilots sized so the whole workload fits.

    Cores per pilot = ceil(total core demand / number of pilots), never below
    the widest single task; walltime = the generations needed to run the
    whole workload on one pilot, plus pilot overheads. With equal sites the
    result is invariant under site ordering.
    """
    if not sites:
        raise InvalidArgumentError("plan_aimes needs at least one site")
    if not w.tasks:
        raise InvalidArgumentError("plan_aimes needs a nonempty workload")
    if pilots_per_site < 1:
        raise InvalidArgumentError("pilots_per_site must be >= 1")

    n_sites = math.ceil(len(sites) * resource_pct / 100.0)
    used = list(sites[:n_sites])
    n_pilots = pilots_per_site * len(used)
    max_task_cores = max(t.cores for t in w.tasks)
    demand = sum(t.cores for t in w.tasks)
    pilot_cores = max(math.ceil(demand / n_pilots), max_task_cores)
    pilot_cores = max(
        math.ceil(pilot_cores * concurrency_pct / 100.0), max_task_cores
    )
    for s in used:
        if pilot_cores > s.total_cores:
            raise CapacityExceededError(
                f"derived pilot of {pilot_cores} cores exceeds site "
                f"{s.name!r} ({s.total_cores} cores)"
            )
    exec_need = _stage_walltime_need(w, pilot_cores, task_duration_s,
                                     per_task_overhead_s)
    walltime = exec_need + bootstrap_s + shutdown_s
    descs = tuple(
        PilotDescription(
            site_name=s.name, cores=pilot_cores, walltime_s=walltime,
            bootstrap_s=bootstrap_s, shutdown_s=shutdown_s,
        )
        for s in used
        for _ in range(pilots_per_site)
    )
    return ExecutionPlan(
        binding=BindingMode.LATE_TO_PILOT,
        pilot_descriptions=descs,
        scheduler_params=scheduler_params or SchedulerParams(),
        concurrency_pct=concurrency_pct,
        resource_pct=resource_pct,
    )


def plan_fixed(
    w: Workload,
    sites: Sequence[Site],
    pilots_per_site: int,
    cores_per_pilot: int,
    walltime_s: float,
    binding: BindingMode,
    *,
    bootstrap_s: float = 0.0,
    shutdown_s: float = 0.0,
    per_task_overhead_s: float = 0.0,
    scheduler_params: SchedulerParams | None = None,
) -> ExecutionPlan:
    """Replicate a user-specified pilot shape on every site."""
    if not sites:
        raise InvalidArgumentError("plan_fixed needs at least one site")
    if pilots_per_site < 1 or cores_per_pilot < 1 or walltime_s <= 0:
        raise InvalidArgumentError("plan_fixed arguments must be positive")
    usable = walltime_s - bootstrap_s - shutdown_s
    # A fresh pilot absorbs the per-unit scheduling overhead in its bootstrap
    # window, so a unit fits as long as its duration fits the usable walltime.
    min_need = max(
        (t.duration_s + max(per_task_overhead_s - bootstrap_s, 0.0)
         for t in w.tasks if t.cores <= cores_per_pilot),
        default=None,
    )
    if min_need is not None and min_need > usable + 1e-6:
        raise InfeasiblePlanError(
            f"pilot walltime {walltime_s}s leaves {usable}s for execution, "
            f"not enough for a {min_need}s task"
        )
    descs = tuple(
        PilotDescription(
            site_name=s.name, cores=cores_per_pilot, walltime_s=walltime_s,
            bootstrap_s=bootstrap_s, shutdown_s=shutdown_s,
        )
        for s in sites
        for _ in range(pilots_per_site)
    )
    return ExecutionPlan(
        binding=binding,
        pilot_descriptions=descs,
        scheduler_params=scheduler_params or SchedulerParams(),
    )


def pack_pilots(
    pending: Sequence[ComputeUnit],
    max_nodes: int,
    cores_per_node: int,
    slack: float = 1.25,
    *,
    site_name: str = "",
    bootstrap_s: float = 0.0,
    shutdown_s: float = 0.0,
) -> list[PilotDescription]:
    """Size pilot jobs for a site's pending queue by first-fit-decreasing.

    Units are packed by decreasing core count into boxes at most
    max_nodes * cores_per_node wide; each box becomes a pilot whose cores
    equal the packed demand and whose walltime is ``slack`` times the longest
    packed unit (plus overheads).
    """
    if max_nodes < 1 or cores_per_node < 1:
        raise InvalidArgumentError("max_nodes and cores_per_node must be >= 1")
    if slack < 1.0:
        raise InvalidArgumentError("slack must be >= 1")
    if not pending:
        return []
    width = max_nodes * cores_per_node
    widest = max(u.cores for u in pending)
    if widest > width:
        raise UnschedulableError(
            f"unit of {widest} cores exceeds the widest packable pilot ({width} cores)"
        )
    boxes: list[dict] = []  # {"free": int, "cores": int, "max_duration": float}
    for u in sorted(pending, key=lambda u: -u.cores):
        for box in boxes:
            if box["free"] >= u.cores:
                box["free"] -= u.cores
                box["cores"] += u.cores
                box["max_duration"] = max(box["max_duration"], u.duration_s)
                break
        else:
            boxes.append({
                "free": width - u.cores,
                "cores": u.cores,
                "max_duration": u.duration_s,
            })
    return [
        PilotDescription(
            site_name=site_name,
            cores=box["cores"],
            walltime_s=slack * box["max_duration"] + bootstrap_s + shutdown_s,
            bootstrap_s=bootstrap_s,
            shutdown_s=shutdown_s,
        )
        for box in boxes
    ]
