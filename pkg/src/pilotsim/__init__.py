"""Discrete-event simulation of pilot-based execution strategies.

Build a workload, describe the sites it could run on, derive or fix an
execution plan, simulate the run, and decompose the resulting trace into
time-to-completion components:

    from pilotsim import make_bot, get_preset, run_once

    cfg = get_preset("exp3", ideal=True)
    row, trace, breakdown = run_once(cfg, n=256)
"""

from .bridge import SubmissionBuffer, create_app
from .errors import (
    CapacityExceededError,
    IncompleteTraceError,
    InfeasiblePlanError,
    InvalidArgumentError,
    InvalidStateError,
    PilotSimError,
    RejectedSubmissionError,
    UnschedulableError,
)
from .experiments import (
    ExperimentConfig,
    ExperimentResult,
    PRESETS,
    format_table,
    get_preset,
    load_config,
    run_experiment,
    run_once,
)
from .metrics import TtcBreakdown, aggregate, p_es, ttc, ttc_ideal
from .pilot import (
    BindingMode,
    ComputeUnit,
    Pilot,
    PilotDescription,
    PilotState,
    UnitState,
)
from .resource import (
    CapabilitySnapshot,
    QueueModel,
    QueueModelKind,
    Site,
    WaitSampler,
    bundle_query,
)
from .simulator import SimConfig, run, run_staged
from .strategy import (
    ExecutionPlan,
    SchedulerParams,
    SiteScoreState,
    pack_pilots,
    plan_aimes,
    plan_fixed,
    site_select,
)
from .trace import Trace, TraceRecord, trace_from_ndjson
from .workload import (
    FileOrigin,
    FileRef,
    Task,
    Workload,
    WorkloadKind,
    make_bot,
    make_extasy,
    ready_tasks,
    workload_from_json,
    workload_to_json,
)

__version__ = "0.1.0"
