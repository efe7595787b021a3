"""Time-to-completion decomposition and strategy-performance metrics.

TTC is measured from workload submission to the last unit reaching a
terminal state, and split as TTC = Tx + Tw: Tw is the critical-path pilot
queue wait plus middleware time, Tx everything on the execution path
(scheduling, bootstrap, staging, execution).

Critical-path convention: under late binding the pilot-queue contribution is
the wait of the first pilot to activate among those that executed work (TTC
does not depend on the last pilot becoming active, only the first); under
early binding it is the maximum over sites that executed work of each site's
first-active pilot wait. When several pilot generations are chained (pilot
turnover), the waits of later generations surface in the exec component.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    IncompleteTraceError,
    InfeasiblePlanError,
    InvalidArgumentError,
)
from .strategy import ExecutionPlan
from .trace import Trace
from .workload import Workload

COMPONENT_KEYS = (
    "scheduling",
    "bootstrap",
    "stage_in",
    "exec",
    "stage_out",
    "shutdown",
    "pilot_queue",
    "middleware",
)

_ADDITIVITY_TOL = 1e-9


@dataclass(frozen=True)
class TtcBreakdown:
    """TTC and its additive decomposition (all values in seconds)."""

    ttc_s: float
    tx_s: float
    tw_s: float
    components: dict = field(default_factory=dict)

    def __post_init__(self):
        if abs(self.ttc_s - (self.tx_s + self.tw_s)) > 1e-6:
            raise InvalidArgumentError("ttc must equal tx + tw")


def _segment_breakdown(trace: Trace, segment: dict, unit_states: dict) -> dict:
    meta = trace.meta
    binding = meta.get("binding", "late_to_pilot")
    config = meta.get("config", {})
    pilots = meta.get("pilots", {})
    unit_pilot = meta.get("unit_pilot", {})
    unschedulable = set(meta.get("unschedulable", ()))

    t0 = segment["t_start"]
    comps = {k: 0.0 for k in COMPONENT_KEYS}

    done_units = []
    for uid in segment["task_ids"]:
        states = unit_states.get(uid, {})
        if "done" in states:
            done_units.append((states["done"], uid))
        elif "failed" not in states and uid not in unschedulable:
            raise IncompleteTraceError(f"unit {uid!r} has no terminal state")
    if not done_units:
        return {"ttc": 0.0, "components": comps}

    t_end, crit_uid = max(done_units)
    seg_ttc = t_end - t0

    # Pilots that executed completed work in this segment.
    exec_pilots = sorted({
        unit_pilot[uid] for _, uid in done_units if uid in unit_pilot
    })
    crit_pilot = None
    if exec_pilots:
        if binding == "early_to_resource":
            first_per_site: dict[str, str] = {}
            for pid in sorted(
                exec_pilots, key=lambda p: pilots[p]["activate_time"]
            ):
                first_per_site.setdefault(pilots[pid]["site"], pid)
            crit_pilot = max(
                first_per_site.values(), key=lambda p: pilots[p]["wait_s"]
            )
        else:
            crit_pilot = min(
                exec_pilots, key=lambda p: pilots[p]["activate_time"]
            )
    if crit_pilot is not None:
        comps["pilot_queue"] = pilots[crit_pilot]["wait_s"]
        comps["bootstrap"] = pilots[crit_pilot]["bootstrap_s"]
    comps["middleware"] = config.get("middleware_s", 0.0)

    crit = unit_states[crit_uid]
    in_path_start = crit.get("staging_input", crit.get("executing"))
    if "scheduled" in crit and in_path_start is not None:
        comps["scheduling"] = in_path_start - crit["scheduled"]
    if "staging_input" in crit and "executing" in crit:
        comps["stage_in"] = crit["executing"] - crit["staging_input"]
    if "staging_output" in crit:
        comps["stage_out"] = crit["done"] - crit["staging_output"]

    # Execution time on the critical path is the window remainder: it covers
    # the critical unit's run plus any earlier generations it queued behind.
    fixed = ("middleware", "bootstrap", "scheduling", "stage_in", "stage_out")
    comps["exec"] = seg_ttc - comps["pilot_queue"] - sum(comps[k] for k in fixed)
    if comps["exec"] < 0:
        # Overlapping-wait degeneracy: trim the queue attribution so the
        # decomposition stays additive and nonnegative.
        comps["pilot_queue"] = max(0.0, comps["pilot_queue"] + comps["exec"])
        comps["exec"] = max(
            0.0, seg_ttc - comps["pilot_queue"] - sum(comps[k] for k in fixed)
        )
    return {"ttc": seg_ttc, "components": comps}


def ttc(trace: Trace) -> TtcBreakdown:
    """Decompose a complete trace into TTC = Tx + Tw."""
    unit_states = trace.by_entity("unit")
    if not unit_states:
        raise IncompleteTraceError("trace contains no units")
    segments = trace.meta.get("segments") or [{
        "t_start": 0.0,
        "task_ids": list(unit_states),
    }]
    total = {k: 0.0 for k in COMPONENT_KEYS}
    ttc_s = 0.0
    for seg in segments:
        part = _segment_breakdown(trace, seg, unit_states)
        ttc_s += part["ttc"]
        for k in COMPONENT_KEYS:
            total[k] += part["components"][k]
    tw = total["pilot_queue"] + total["middleware"]
    return TtcBreakdown(ttc_s=ttc_s, tx_s=ttc_s - tw, tw_s=tw, components=total)


def ttc_ideal(plan: ExecutionPlan, w: Workload) -> float:
    """Ideal TTC under maximal task concurrency for the plan's pilot set.

    Per stage, the concurrent slot count is the number of stage-shaped tasks
    the plan's pilots can hold at once; the stage runs in
    ceil(tasks / slots) generations of the stage duration. Stages with
    heterogeneous tasks are bounded by their widest/longest task.
    """
    if not w.tasks:
        raise InvalidArgumentError("ttc_ideal needs a nonempty workload")
    total = 0.0
    for stage in range(w.stages):
        tasks = w.tasks_in_stage(stage)
        if not tasks:
            continue
        cores = max(t.cores for t in tasks)
        duration = max(t.duration_s for t in tasks)
        slots = sum(d.cores // cores for d in plan.pilot_descriptions)
        if slots == 0:
            raise InfeasiblePlanError(
                f"no pilot in the plan can hold a {cores}-core task"
            )
        total += math.ceil(len(tasks) / slots) * duration
    return total


def p_es(ttc_ideal_s: float, ttc_s: float) -> float:
    """Execution-strategy performance: 100 * TTC_ideal / TTC, in percent.

    The ideal can never quite be achieved in practice, so values are
    normally in (0, 100]; a value above 100 signals an inconsistent pairing
    of ideal and observed TTC and is returned as-is for the caller to flag.
    """
    if ttc_ideal_s <= 0 or ttc_s <= 0:
        raise InvalidArgumentError("p_es needs positive TTC values")
    return 100.0 * ttc_ideal_s / ttc_s


def aggregate(runs) -> dict:
    """Component-wise mean/stddev/min/max over a collection of breakdowns.

    Stddev is the population standard deviation (ddof=0).
    """
    runs = list(runs)
    if not runs:
        raise InvalidArgumentError("aggregate needs at least one run")

    def stats(values) -> dict:
        arr = np.asarray(values, dtype=float)
        return {
            "mean": float(arr.mean()),
            "stddev": float(arr.std()),
            "min": float(arr.min()),
            "max": float(arr.max()),
        }

    out = {
        "n": len(runs),
        "ttc_s": stats([r.ttc_s for r in runs]),
        "tx_s": stats([r.tx_s for r in runs]),
        "tw_s": stats([r.tw_s for r in runs]),
        "components": {
            k: stats([r.components.get(k, 0.0) for r in runs])
            for k in COMPONENT_KEYS
        },
    }
    return out
