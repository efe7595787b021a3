"""Experiment harness: named presets, YAML configs, and result tables.

An experiment sweeps a workload-size axis, runs each size for a number of
seeded repeats, and reports per-run TTC breakdowns, per-size aggregates, and
a strategy-performance (P_ES) table. Repeats reuse the same seed sequence
across experiments so that different strategies can be compared pairwise
under identical queue-wait draws.
"""

from __future__ import annotations

import csv
import difflib
import json
import math
import os
from dataclasses import dataclass, field

import yaml

from .errors import InvalidArgumentError
from .metrics import COMPONENT_KEYS, p_es, ttc, ttc_ideal
from .pilot import BindingMode
from .resource import QueueModel, QueueModelKind, Site
from .simulator import SimConfig, run, run_staged
from .strategy import (
    DEFAULT_BOOTSTRAP_S,
    DEFAULT_SCHED_C0_S,
    DEFAULT_SCHED_C1_S,
    DEFAULT_SHUTDOWN_S,
    ExecutionPlan,
    plan_aimes,
    plan_fixed,
)
from .workload import (
    DEFAULT_FILE_SIZE_BYTES,
    DEFAULT_STAGE_DURATIONS,
    Workload,
    WorkloadKind,
    make_bot,
    make_extasy,
)

CSV_COLUMNS = (
    "experiment", "size", "repeat", "seed", "binding",
    "ttc_ideal_s", "ttc_s", "tx_s", "tw_s", "p_es_pct",
) + tuple(f"comp_{k}" for k in COMPONENT_KEYS)


@dataclass(frozen=True)
class ExperimentConfig:
    """Declarative description of one experiment sweep."""

    name: str
    sites: tuple[Site, ...]
    sizes: tuple[int, ...]
    repeats: int = 1
    seed: int = 0
    workload: str = "bot"  # "bot" | "staged4"
    task_duration_s: float = 1200.0
    stage_durations: tuple[float, ...] = DEFAULT_STAGE_DURATIONS
    file_size_bytes: int = DEFAULT_FILE_SIZE_BYTES
    planner: str = "derived"  # "derived" | "fixed" | "fixed_scaled"
    binding: BindingMode = BindingMode.LATE_TO_PILOT
    pilots_per_site: int = 1
    max_pilots_per_site: int = 16
    cores_per_pilot: int | None = None
    walltime_s: float | None = None
    bootstrap_s: float = DEFAULT_BOOTSTRAP_S
    shutdown_s: float = DEFAULT_SHUTDOWN_S
    sched_c0_s: float = DEFAULT_SCHED_C0_S
    sched_c1_s: float = DEFAULT_SCHED_C1_S
    middleware_s: float = 0.0
    staging: bool = False
    scheduler_interval_s: float = 0.0

    def __post_init__(self):
        if not self.sites:
            raise InvalidArgumentError("an experiment needs at least one site")
        if not self.sizes or any(n < 1 for n in self.sizes):
            raise InvalidArgumentError("sizes must be positive integers")
        if self.repeats < 1:
            raise InvalidArgumentError("repeats must be >= 1")
        if self.workload not in ("bot", "staged4"):
            raise InvalidArgumentError(
                f"workload must be 'bot' or 'staged4', got {self.workload!r}"
            )
        if self.planner not in ("derived", "fixed", "fixed_scaled"):
            raise InvalidArgumentError(
                f"planner must be 'derived', 'fixed' or 'fixed_scaled', "
                f"got {self.planner!r}"
            )
        if self.planner in ("fixed", "fixed_scaled") and self.cores_per_pilot is None:
            raise InvalidArgumentError(
                f"planner {self.planner!r} requires cores_per_pilot"
            )
        if self.planner == "fixed" and self.walltime_s is None:
            raise InvalidArgumentError("planner 'fixed' requires walltime_s")

    @property
    def sched_overhead_s(self) -> float:
        return self.sched_c0_s + self.sched_c1_s * len(self.sites)

    def sim_config(self, seed: int) -> SimConfig:
        return SimConfig(
            seed=seed,
            scheduler_interval_s=self.scheduler_interval_s,
            sched_overhead_c0_s=self.sched_c0_s,
            sched_overhead_c1_s=self.sched_c1_s,
            middleware_s=self.middleware_s,
            staging_enabled=self.staging,
        )


def make_workload(cfg: ExperimentConfig, n: int) -> Workload:
    if cfg.workload == "staged4":
        return make_extasy(n, cfg.file_size_bytes, cfg.stage_durations)
    return make_bot(n, cfg.task_duration_s)


def _max_staging_s(cfg: ExperimentConfig, w: Workload) -> float:
    """Largest per-task staging footprint across the sweep's sites."""
    if not cfg.staging:
        return 0.0
    worst = 0.0
    for t in w.tasks:
        for s in cfg.sites:
            total = sum(s.staging_time_s(r.size_bytes)
                        for r in t.inputs + t.outputs)
            worst = max(worst, total)
    return worst


def make_plan(cfg: ExperimentConfig, w: Workload, n: int) -> ExecutionPlan:
    """Materialize the sweep's execution strategy for one workload size."""
    ov = cfg.sched_overhead_s + _max_staging_s(cfg, w)
    if cfg.planner == "derived":
        return plan_aimes(
            w, cfg.sites,
            pilots_per_site=cfg.pilots_per_site,
            bootstrap_s=cfg.bootstrap_s,
            shutdown_s=cfg.shutdown_s,
            per_task_overhead_s=ov,
        )
    if cfg.planner == "fixed":
        return plan_fixed(
            w, cfg.sites, cfg.pilots_per_site, cfg.cores_per_pilot,
            cfg.walltime_s, cfg.binding,
            bootstrap_s=cfg.bootstrap_s,
            shutdown_s=cfg.shutdown_s,
            per_task_overhead_s=ov,
        )
    # fixed_scaled: grow the pilot count with the workload, then size the
    # walltime so one pilot generation chain covers its share of the work.
    slots_per_wave = len(cfg.sites) * cfg.cores_per_pilot
    pilots_per_site = min(
        cfg.max_pilots_per_site, math.ceil(n / slots_per_wave)
    )
    generations = math.ceil(
        n / (pilots_per_site * len(cfg.sites) * cfg.cores_per_pilot)
    )
    walltime = (
        generations * (cfg.task_duration_s + ov)
        + cfg.bootstrap_s + cfg.shutdown_s
    )
    return plan_fixed(
        w, cfg.sites, pilots_per_site, cfg.cores_per_pilot,
        walltime, cfg.binding,
        bootstrap_s=cfg.bootstrap_s,
        shutdown_s=cfg.shutdown_s,
        per_task_overhead_s=ov,
    )


def run_once(cfg: ExperimentConfig, n: int, repeat: int = 0):
    """One simulated run; returns (row dict, trace)."""
    seed = cfg.seed + repeat
    w = make_workload(cfg, n)
    plan = make_plan(cfg, w, n)
    sim = cfg.sim_config(seed)
    trace = run_staged(plan, w, cfg.sites, sim) \
        if w.kind is WorkloadKind.STAGED else run(plan, w, cfg.sites, sim)
    breakdown = ttc(trace)
    ideal = ttc_ideal(plan, w)
    row = {
        "experiment": cfg.name,
        "size": n,
        "repeat": repeat,
        "seed": seed,
        "binding": plan.binding.value,
        "ttc_ideal_s": ideal,
        "ttc_s": breakdown.ttc_s,
        "tx_s": breakdown.tx_s,
        "tw_s": breakdown.tw_s,
        "p_es_pct": p_es(ideal, breakdown.ttc_s),
    }
    for k in COMPONENT_KEYS:
        row[f"comp_{k}"] = breakdown.components[k]
    return row, trace, breakdown


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    rows: list[dict] = field(default_factory=list)
    aggregates: dict[int, dict] = field(default_factory=dict)
    table: list[dict] = field(default_factory=list)


def run_experiment(
    cfg: ExperimentConfig, out_dir: str | None = None
) -> ExperimentResult:
    """Run the full sweep: every size, every repeat.

    When ``out_dir`` is given, writes runs.csv (fixed column order),
    aggregates.json (per-size statistics) and p_es_table.json.
    """
    from .metrics import aggregate

    result = ExperimentResult(config=cfg)
    for n in cfg.sizes:
        breakdowns = []
        for rep in range(cfg.repeats):
            row, _, breakdown = run_once(cfg, n, rep)
            result.rows.append(row)
            breakdowns.append(breakdown)
        result.aggregates[n] = aggregate(breakdowns)
        size_rows = [r for r in result.rows if r["size"] == n]
        mean_pes = sum(r["p_es_pct"] for r in size_rows) / len(size_rows)
        result.table.append({
            "size": n,
            "ttc_ideal_s": size_rows[0]["ttc_ideal_s"],
            "ttc_mean_s": result.aggregates[n]["ttc_s"]["mean"],
            "p_es_pct": mean_pes,
            "p_es_pct_rounded": round(mean_pes),
        })
    if out_dir is not None:
        write_results(result, out_dir)
    return result


def write_results(result: ExperimentResult, out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "runs.csv"), "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        for row in result.rows:
            writer.writerow(row)
    with open(os.path.join(out_dir, "aggregates.json"), "w") as f:
        json.dump(
            {str(n): agg for n, agg in result.aggregates.items()},
            f, indent=2,
        )
    with open(os.path.join(out_dir, "p_es_table.json"), "w") as f:
        json.dump({
            "experiment": result.config.name,
            "rows": result.table,
        }, f, indent=2)


def format_table(result: ExperimentResult) -> str:
    """Human-readable P_ES matrix: one row per workload size."""
    lines = [
        f"experiment: {result.config.name}",
        f"{'size':>8} {'ttc_ideal_s':>12} {'ttc_mean_s':>12} "
        f"{'p_es_pct':>10} {'rounded':>8}",
    ]
    for row in result.table:
        lines.append(
            f"{row['size']:>8} {row['ttc_ideal_s']:>12.1f} "
            f"{row['ttc_mean_s']:>12.1f} {row['p_es_pct']:>10.2f} "
            f"{row['p_es_pct_rounded']:>8}"
        )
    return "\n".join(lines)


# --- preset experiments ------------------------------------------------------

# Queue-wait calibration for the preset site pools: a "fast" site with a
# median wait of a few minutes and a "slow" site with a median wait of a few
# hours, both with a deterministic penalty that grows with the pilot size.
FAST_MEDIAN_WAIT_S = 300.0
SLOW_MEDIAN_WAIT_S = 10_000.0
WAIT_SIGMA = 0.4
SIZE_PENALTY_S_PER_CORE = 3.0
PRESET_SITE_CORES = 32_768


def _preset_site(name: str, median_wait_s: float, ideal: bool,
                 seed_offset: int) -> Site:
    if ideal:
        model = QueueModel(QueueModelKind.CONSTANT, (0.0,))
    else:
        model = QueueModel(
            QueueModelKind.LOGNORMAL,
            (math.log(median_wait_s), WAIT_SIGMA),
            size_penalty_s_per_core=SIZE_PENALTY_S_PER_CORE,
            seed_offset=seed_offset,
        )
    return Site(
        name=name,
        total_cores=PRESET_SITE_CORES,
        queue_model=model,
        max_concurrent_pilots=64,
    )


def _preset_sites(medians: list[float], ideal: bool) -> tuple[Site, ...]:
    names = ("alpha", "bravo", "charlie", "delta", "echo")
    return tuple(
        _preset_site(names[i], m, ideal, seed_offset=i)
        for i, m in enumerate(medians)
    )


def get_preset(name: str, ideal: bool = False) -> ExperimentConfig:
    """One of the five built-in sweeps.

    ``ideal`` replaces queue waits with zero, drops pilot and scheduling
    overheads and disables staging, giving the zero-overhead baseline against
    which the strategy-performance metric is normalized.
    """
    overheads = dict(
        bootstrap_s=0.0 if ideal else DEFAULT_BOOTSTRAP_S,
        shutdown_s=0.0 if ideal else DEFAULT_SHUTDOWN_S,
        sched_c0_s=0.0 if ideal else DEFAULT_SCHED_C0_S,
        sched_c1_s=0.0 if ideal else DEFAULT_SCHED_C1_S,
    )
    if name == "exp1":
        # Many small fixed-shape pilots per site, early binding, short
        # walltimes that force pilot turnover between task generations.
        return ExperimentConfig(
            name="exp1",
            sites=_preset_sites([SLOW_MEDIAN_WAIT_S, FAST_MEDIAN_WAIT_S], ideal),
            sizes=(8, 32, 256, 2048),
            planner="fixed",
            binding=BindingMode.EARLY_TO_RESOURCE,
            pilots_per_site=20,
            cores_per_pilot=16,
            walltime_s=1500.0,
            **overheads,
        )
    if name == "exp2":
        # Pilot count grows with the workload and walltimes are sized so one
        # pilot chain covers its share; early binding.
        return ExperimentConfig(
            name="exp2",
            sites=_preset_sites([SLOW_MEDIAN_WAIT_S, FAST_MEDIAN_WAIT_S], ideal),
            sizes=(32, 128, 512, 1024, 2048),
            planner="fixed_scaled",
            binding=BindingMode.EARLY_TO_RESOURCE,
            max_pilots_per_site=16,
            cores_per_pilot=16,
            **overheads,
        )
    if name == "exp3":
        # One derived pilot per site sized to the whole workload; late binding.
        return ExperimentConfig(
            name="exp3",
            sites=_preset_sites([SLOW_MEDIAN_WAIT_S, FAST_MEDIAN_WAIT_S], ideal),
            sizes=(8, 32, 256, 2048),
            planner="derived",
            **overheads,
        )
    if name == "exp4":
        # Same derived strategy over a four-site pool.
        return ExperimentConfig(
            name="exp4",
            sites=_preset_sites(
                [SLOW_MEDIAN_WAIT_S, FAST_MEDIAN_WAIT_S,
                 SLOW_MEDIAN_WAIT_S, FAST_MEDIAN_WAIT_S], ideal),
            sizes=(8, 32, 256, 2048),
            planner="derived",
            **overheads,
        )
    if name == "integrated":
        # Four-stage workflow handed over stage by stage, with file staging,
        # across a five-site pool.
        medians = [FAST_MEDIAN_WAIT_S, 1000.0, 2000.0, 5000.0,
                   SLOW_MEDIAN_WAIT_S]
        return ExperimentConfig(
            name="integrated",
            sites=_preset_sites(medians, ideal),
            sizes=(256, 1024, 2048),
            workload="staged4",
            planner="derived",
            staging=not ideal,
            **overheads,
        )
    raise InvalidArgumentError(
        f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}"
    )


PRESETS = ("exp1", "exp2", "exp3", "exp4", "integrated")


# --- YAML configuration ------------------------------------------------------

_CONFIG_FIELDS = {
    "name", "sites", "sizes", "repeats", "seed", "workload",
    "task_duration_s", "stage_durations", "file_size_bytes", "planner",
    "binding", "pilots_per_site", "max_pilots_per_site", "cores_per_pilot",
    "walltime_s", "bootstrap_s", "shutdown_s", "sched_c0_s", "sched_c1_s",
    "middleware_s", "staging", "scheduler_interval_s",
}
_SITE_FIELDS = {
    "name", "total_cores", "queue", "max_concurrent_pilots",
    "bandwidth_bytes_per_s", "staging_latency_s",
}
_QUEUE_FIELDS = {"kind", "parameters", "size_penalty_s_per_core", "seed_offset"}


def _unknown_field_messages(given, known, context: str) -> list[str]:
    out = []
    for key in given:
        if key in known:
            continue
        hint = difflib.get_close_matches(key, known, n=1)
        suggestion = f"; did you mean {hint[0]!r}?" if hint else ""
        out.append(f"{context}: unknown field {key!r}{suggestion}")
    return out


def validate_config_dict(d) -> list[str]:
    """Field-level diagnostics for a configuration document."""
    if not isinstance(d, dict):
        return ["configuration must be a mapping"]
    problems = _unknown_field_messages(d, _CONFIG_FIELDS, "config")
    for req in ("name", "sites", "sizes"):
        if req not in d:
            problems.append(f"config: missing required field {req!r}")
    for i, site in enumerate(d.get("sites") or []):
        ctx = f"sites[{i}]"
        if not isinstance(site, dict):
            problems.append(f"{ctx}: must be a mapping")
            continue
        problems += _unknown_field_messages(site, _SITE_FIELDS, ctx)
        for req in ("name", "total_cores", "queue"):
            if req not in site:
                problems.append(f"{ctx}: missing required field {req!r}")
        queue = site.get("queue")
        if isinstance(queue, dict):
            problems += _unknown_field_messages(
                queue, _QUEUE_FIELDS, f"{ctx}.queue")
            if "kind" not in queue:
                problems.append(f"{ctx}.queue: missing required field 'kind'")
        elif queue is not None:
            problems.append(f"{ctx}.queue: must be a mapping")
    return problems


def _site_from_dict(d: dict) -> Site:
    q = d["queue"]
    model = QueueModel(
        kind=QueueModelKind(q["kind"]),
        parameters=tuple(float(p) for p in q.get("parameters", ())),
        size_penalty_s_per_core=float(q.get("size_penalty_s_per_core", 0.0)),
        seed_offset=int(q.get("seed_offset", 0)),
    )
    return Site(
        name=str(d["name"]),
        total_cores=int(d["total_cores"]),
        queue_model=model,
        max_concurrent_pilots=int(d.get("max_concurrent_pilots", 20)),
        bandwidth_bytes_per_s=float(d.get("bandwidth_bytes_per_s", 10e6)),
        staging_latency_s=float(d.get("staging_latency_s", 0.0)),
    )


def config_from_dict(d: dict) -> ExperimentConfig:
    problems = validate_config_dict(d)
    if problems:
        raise InvalidArgumentError(
            "invalid experiment configuration:\n  " + "\n  ".join(problems)
        )
    kwargs = {k: v for k, v in d.items() if k not in ("sites", "binding")}
    kwargs["sites"] = tuple(_site_from_dict(s) for s in d["sites"])
    if "binding" in d:
        kwargs["binding"] = BindingMode(d["binding"])
    if "sizes" in kwargs:
        kwargs["sizes"] = tuple(int(n) for n in kwargs["sizes"])
    if "stage_durations" in kwargs:
        kwargs["stage_durations"] = tuple(
            float(x) for x in kwargs["stage_durations"])
    return ExperimentConfig(**kwargs)


def load_config(path: str) -> ExperimentConfig:
    with open(path) as f:
        return config_from_dict(yaml.safe_load(f))
