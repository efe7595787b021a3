"""Tasks, bags of tasks, and multi-stage dataflow workflows.

Workload values are immutable after construction and can safely be shared.
Dataflow structure is expressed through file references: a task whose input
file originates from another task's output cannot start before that producer
has completed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

from .errors import InvalidArgumentError

# Per-stage nominal durations for the 4-stage molecular-dynamics pattern.
# The aggregate (870 s) is the published profile; the split is configurable.
DEFAULT_STAGE_DURATIONS = (300.0, 300.0, 180.0, 90.0)

# "Few hundreds KB" per file; 200 KB is the default midpoint.
DEFAULT_FILE_SIZE_BYTES = 200_000


class FileOrigin(str, Enum):
    USER_WORKSTATION = "user_workstation"
    TASK_OUTPUT = "task_output"


class WorkloadKind(str, Enum):
    BOT = "bot"
    STAGED = "staged"


@dataclass(frozen=True)
class FileRef:
    """Reference to an input or output file of a task."""

    id: str
    size_bytes: int
    origin: FileOrigin = FileOrigin.USER_WORKSTATION

    def __post_init__(self):
        if self.size_bytes < 0:
            raise InvalidArgumentError(
                f"file {self.id!r}: size_bytes must be >= 0, got {self.size_bytes}"
            )


@dataclass(frozen=True)
class Task:
    """A unit of work: core count, nominal duration, and file endpoints."""

    id: str
    cores: int
    duration_s: float
    inputs: tuple[FileRef, ...] = ()
    outputs: tuple[FileRef, ...] = ()
    stage: int = 0

    def __post_init__(self):
        if self.cores < 1:
            raise InvalidArgumentError(f"task {self.id!r}: cores must be >= 1")
        if self.duration_s <= 0:
            raise InvalidArgumentError(f"task {self.id!r}: duration_s must be > 0")
        if self.stage < 0:
            raise InvalidArgumentError(f"task {self.id!r}: stage must be >= 0")


@dataclass(frozen=True)
class Workload:
    """An immutable collection of tasks, either independent or staged."""

    tasks: tuple[Task, ...]
    kind: WorkloadKind = WorkloadKind.BOT

    def __post_init__(self):
        ids = [t.id for t in self.tasks]
        if len(set(ids)) != len(ids):
            raise InvalidArgumentError("task ids must be unique within a workload")
        producers = self._producers()
        for t in self.tasks:
            for ref in t.inputs:
                if ref.origin is not FileOrigin.TASK_OUTPUT:
                    continue
                if self.kind is WorkloadKind.BOT:
                    raise InvalidArgumentError(
                        f"bag-of-tasks workload cannot contain task-output "
                        f"input {ref.id!r} (task {t.id!r})"
                    )
                src = producers.get(ref.id)
                if src is None:
                    raise InvalidArgumentError(
                        f"task {t.id!r} consumes {ref.id!r} which no task produces"
                    )
                if src.stage >= t.stage:
                    raise InvalidArgumentError(
                        f"task {t.id!r} (stage {t.stage}) consumes output of "
                        f"task {src.id!r} (stage {src.stage}); producer must be "
                        f"in a strictly earlier stage"
                    )
            if self.kind is WorkloadKind.BOT and t.stage != 0:
                raise InvalidArgumentError(
                    f"bag-of-tasks workload requires stage 0 for all tasks "
                    f"(task {t.id!r} has stage {t.stage})"
                )

    def _producers(self) -> dict[str, Task]:
        out: dict[str, Task] = {}
        for t in self.tasks:
            for ref in t.outputs:
                out[ref.id] = t
        return out

    @property
    def stages(self) -> int:
        if not self.tasks:
            return 0
        return max(t.stage for t in self.tasks) + 1

    @property
    def task_ids(self) -> set[str]:
        return {t.id for t in self.tasks}

    def tasks_in_stage(self, stage: int) -> tuple[Task, ...]:
        return tuple(t for t in self.tasks if t.stage == stage)

    def task(self, task_id: str) -> Task:
        for t in self.tasks:
            if t.id == task_id:
                return t
        raise KeyError(task_id)


def make_bot(n: int, duration_s: float, cores_per_task: int = 1) -> Workload:
    """Build a single-stage workload of ``n`` identical independent tasks."""
    if n < 1:
        raise InvalidArgumentError(f"n must be >= 1, got {n}")
    if duration_s <= 0:
        raise InvalidArgumentError(f"duration_s must be > 0, got {duration_s}")
    if cores_per_task < 1:
        raise InvalidArgumentError(f"cores_per_task must be >= 1, got {cores_per_task}")
    tasks = tuple(
        Task(id=f"t{i:05d}", cores=cores_per_task, duration_s=float(duration_s))
        for i in range(n)
    )
    return Workload(tasks=tasks, kind=WorkloadKind.BOT)


def make_extasy(
    n: int,
    file_size_bytes: int = DEFAULT_FILE_SIZE_BYTES,
    stage_durations: Sequence[float] = DEFAULT_STAGE_DURATIONS,
) -> Workload:
    """Build the 4-stage simulation/analysis workflow with ``n`` simulations.

    Stage 0: n 1-core simulation tasks, each reading 3 of the 5 workflow
    input files and writing one file.
    Stage 1: n 1-core simulation tasks, each reading one stage-0 output plus
    2 workflow inputs and writing one file.
    Stage 2: one n-core analysis task reading every stage-1 output plus one
    workflow input, writing n files.
    Stage 3: one 1-core analysis task reading every stage-2 output plus one
    workflow input, writing the final file.
    """
    if n < 1:
        raise InvalidArgumentError(f"n must be >= 1, got {n}")
    if file_size_bytes < 1:
        raise InvalidArgumentError("file_size_bytes must be >= 1")
    if len(stage_durations) != 4 or any(d <= 0 for d in stage_durations):
        raise InvalidArgumentError("stage_durations must be 4 positive values")
    d1, d2, d3, d4 = (float(d) for d in stage_durations)

    def wf_input(name: str) -> FileRef:
        return FileRef(f"wf-{name}", file_size_bytes, FileOrigin.USER_WORKSTATION)

    def produced(name: str) -> FileRef:
        return FileRef(name, file_size_bytes, FileOrigin.TASK_OUTPUT)

    tasks: list[Task] = []
    s1_out = [produced(f"s1-out-{i:05d}") for i in range(n)]
    for i in range(n):
        tasks.append(Task(
            id=f"s1-{i:05d}", cores=1, duration_s=d1, stage=0,
            inputs=(wf_input("green"), wf_input("azure"), wf_input("red")),
            outputs=(s1_out[i],),
        ))
    s2_out = [produced(f"s2-out-{i:05d}") for i in range(n)]
    for i in range(n):
        tasks.append(Task(
            id=f"s2-{i:05d}", cores=1, duration_s=d2, stage=1,
            inputs=(s1_out[i], wf_input("red"), wf_input("blue")),
            outputs=(s2_out[i],),
        ))
    s3_out = tuple(produced(f"s3-out-{i:05d}") for i in range(n))
    tasks.append(Task(
        id="s3-00000", cores=n, duration_s=d3, stage=2,
        inputs=tuple(s2_out) + (wf_input("red"),),
        outputs=s3_out,
    ))
    tasks.append(Task(
        id="s4-00000", cores=1, duration_s=d4, stage=3,
        inputs=s3_out + (wf_input("orange"),),
        outputs=(produced("final-out"),),
    ))
    return Workload(tasks=tuple(tasks), kind=WorkloadKind.STAGED)


def ready_tasks(w: Workload, completed: set[str] | frozenset[str]) -> set[str]:
    """Ids of tasks whose dataflow inputs are all satisfied by ``completed``."""
    unknown = set(completed) - w.task_ids
    if unknown:
        raise InvalidArgumentError(f"unknown task ids in completed set: {sorted(unknown)}")
    producers = w._producers()
    ready: set[str] = set()
    for t in w.tasks:
        if t.id in completed:
            continue
        deps = {
            producers[ref.id].id
            for ref in t.inputs
            if ref.origin is FileOrigin.TASK_OUTPUT
        }
        if deps <= set(completed):
            ready.add(t.id)
    return ready


def as_self_contained_bot(tasks: Iterable[Task]) -> Workload:
    """Repackage already-ready tasks as an independent single-stage workload.

    Cross-stage inputs are rewritten to originate from the user workstation:
    once the producing stage has completed, its outputs are staged back and
    the consuming group is executed as if it had no external dependencies.
    """
    converted = []
    for t in tasks:
        converted.append(Task(
            id=t.id, cores=t.cores, duration_s=t.duration_s, stage=0,
            inputs=tuple(
                FileRef(r.id, r.size_bytes, FileOrigin.USER_WORKSTATION)
                for r in t.inputs
            ),
            outputs=tuple(
                FileRef(r.id, r.size_bytes, FileOrigin.USER_WORKSTATION)
                for r in t.outputs
            ),
        ))
    return Workload(tasks=tuple(converted), kind=WorkloadKind.BOT)


# --- JSON wire format -------------------------------------------------------
#
# A workload serializes to {"kind": ..., "tasks": [...]} where each task is
# {id, cores, duration_s, stage, inputs: [{id, size_bytes, origin}], outputs}.
# This is also the format accepted by the task-submission bridge.

def _fileref_to_dict(r: FileRef) -> dict:
    return {"id": r.id, "size_bytes": r.size_bytes, "origin": r.origin.value}


def _fileref_from_dict(d: dict) -> FileRef:
    return FileRef(
        id=str(d["id"]),
        size_bytes=int(d["size_bytes"]),
        origin=FileOrigin(d.get("origin", "user_workstation")),
    )


def workload_to_dict(w: Workload) -> dict:
    return {
        "kind": w.kind.value,
        "tasks": [
            {
                "id": t.id,
                "cores": t.cores,
                "duration_s": t.duration_s,
                "stage": t.stage,
                "inputs": [_fileref_to_dict(r) for r in t.inputs],
                "outputs": [_fileref_to_dict(r) for r in t.outputs],
            }
            for t in w.tasks
        ],
    }


def workload_from_dict(d: dict) -> Workload:
    try:
        tasks = tuple(
            Task(
                id=str(td["id"]),
                cores=int(td["cores"]),
                duration_s=float(td["duration_s"]),
                stage=int(td.get("stage", 0)),
                inputs=tuple(_fileref_from_dict(r) for r in td.get("inputs", [])),
                outputs=tuple(_fileref_from_dict(r) for r in td.get("outputs", [])),
            )
            for td in d["tasks"]
        )
    except (KeyError, TypeError) as exc:
        raise InvalidArgumentError(f"malformed workload document: {exc}") from exc
    return Workload(tasks=tasks, kind=WorkloadKind(d.get("kind", "bot")))


def workload_to_json(w: Workload) -> str:
    return json.dumps(workload_to_dict(w), sort_keys=False)


def workload_from_json(text: str) -> Workload:
    return workload_from_dict(json.loads(text))
