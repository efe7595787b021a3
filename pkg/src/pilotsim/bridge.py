"""Task-submission bridge between a workflow engine and the execution manager.

Workflow-side components submit JSON task descriptions one at a time; the
bridge buffers them and, once a configurable number of seconds has passed
since the last submission, flushes the buffer as one self-contained workload.
The bridge holds no workflow-level knowledge: flush decisions depend only on
buffer contents and timing, so staged workflows naturally arrive one flush
per stage.

The same buffer logic serves two clocks: in simulated mode it is driven by
the event loop, in service mode (HTTP, see :func:`create_app`) by wall time.
"""

from __future__ import annotations

import threading
import time as _time
from typing import Callable

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .workload import FileOrigin, FileRef, Task, Workload, WorkloadKind, workload_to_dict

DEFAULT_IDLE_THRESHOLD_S = 10.0

_REQUIRED_FIELDS = ("executable", "cores", "duration_s")


def _parse_filerefs(value, field_name: str) -> tuple[FileRef, ...]:
    if value is None:
        return ()
    if not isinstance(value, list):
        raise ValueError(f"field {field_name!r} must be a list of file records")
    refs = []
    for item in value:
        if not isinstance(item, dict) or "id" not in item:
            raise ValueError(f"field {field_name!r} entries need an 'id'")
        size = item.get("size_bytes", 0)
        if not isinstance(size, int) or size < 0:
            raise ValueError(
                f"field {field_name!r} entry {item['id']!r}: "
                f"'size_bytes' must be a nonnegative integer"
            )
        refs.append(FileRef(str(item["id"]), size, FileOrigin.USER_WORKSTATION))
    return tuple(refs)


def validate_record(record) -> str | None:
    """Return a reason naming the offending field, or None when valid."""
    if not isinstance(record, dict):
        return "task record must be a JSON object"
    for name in _REQUIRED_FIELDS:
        if name not in record:
            return f"missing required field {name!r}"
    if not isinstance(record["executable"], str) or not record["executable"]:
        return "field 'executable' must be a nonempty string"
    if not isinstance(record["cores"], int) or record["cores"] < 1:
        return "field 'cores' must be a positive integer"
    if not isinstance(record["duration_s"], (int, float)) or record["duration_s"] <= 0:
        return "field 'duration_s' must be a positive number"
    if "arguments" in record and not isinstance(record["arguments"], list):
        return "field 'arguments' must be a list"
    try:
        _parse_filerefs(record.get("inputs"), "inputs")
        _parse_filerefs(record.get("outputs"), "outputs")
    except ValueError as exc:
        return str(exc)
    return None


class SubmissionBuffer:
    """Order-preserving task buffer with idle-triggered flushing.

    Accepted tasks appear in exactly one flushed workload; resubmitting an
    already-seen task id is idempotent and returns the original
    acknowledgment.
    """

    def __init__(self, idle_threshold_s: float = DEFAULT_IDLE_THRESHOLD_S):
        if idle_threshold_s <= 0:
            raise ValueError("idle_threshold_s must be > 0")
        self.idle_threshold_s = idle_threshold_s
        self.pending: list[Task] = []
        self.last_submit_time: float | None = None
        self.flushed: list[Workload] = []
        self._acks: dict[str, dict] = {}
        self._records: dict[str, dict] = {}
        self._auto_id = 0

    def submit(self, record, now: float) -> dict:
        """Validate and buffer one task record; returns the acknowledgment."""
        reason = validate_record(record)
        if reason is not None:
            return {"accepted": False, "task_id": None, "reason": reason}
        task_id = record.get("id")
        if task_id is None:
            task_id = f"task-{self._auto_id:06d}"
            self._auto_id += 1
        task_id = str(task_id)
        if task_id in self._acks:
            return self._acks[task_id]
        task = Task(
            id=task_id,
            cores=record["cores"],
            duration_s=float(record["duration_s"]),
            inputs=_parse_filerefs(record.get("inputs"), "inputs"),
            outputs=_parse_filerefs(record.get("outputs"), "outputs"),
        )
        self.pending.append(task)
        self.last_submit_time = now
        ack = {"accepted": True, "task_id": task_id}
        self._acks[task_id] = ack
        self._records[task_id] = dict(record, id=task_id)
        return ack

    def idle_flush(self, now: float) -> Workload | None:
        """Flush the buffer as one workload if submissions have gone idle."""
        if not self.pending or self.last_submit_time is None:
            return None
        if now - self.last_submit_time < self.idle_threshold_s:
            return None
        workload = Workload(tasks=tuple(self.pending), kind=WorkloadKind.BOT)
        self.pending = []
        self.flushed.append(workload)
        return workload

    def get_record(self, task_id: str) -> dict | None:
        return self._records.get(task_id)


def submit_task(buffer: SubmissionBuffer, record, now: float) -> dict:
    return buffer.submit(record, now)


def idle_flush(buffer: SubmissionBuffer, now: float) -> Workload | None:
    return buffer.idle_flush(now)


def create_app(
    buffer: SubmissionBuffer | None = None,
    idle_threshold_s: float = DEFAULT_IDLE_THRESHOLD_S,
    clock: Callable[[], float] = _time.monotonic,
):
    """HTTP front end for the bridge.

    Endpoints: POST /tasks, GET /tasks/{id}, GET /workloads, GET /health.
    Accepted submissions get 200 with {accepted, task_id}; schema violations
    get 400 with a reason naming the field; unparsable bodies get 400.
    """
    buf = buffer if buffer is not None else SubmissionBuffer(idle_threshold_s)
    lock = threading.Lock()
    app = FastAPI(title="task-submission bridge")
    app.state.buffer = buf

    @app.post("/tasks")
    async def post_task(request: Request):
        try:
            record = await request.json()
        except Exception:
            return JSONResponse(
                {"accepted": False, "task_id": None, "reason": "malformed JSON body"},
                status_code=400,
            )
        with lock:
            ack = buf.submit(record, clock())
        if not ack["accepted"]:
            return JSONResponse(ack, status_code=400)
        return ack

    @app.get("/tasks/{task_id}")
    def get_task(task_id: str):
        with lock:
            record = buf.get_record(task_id)
        if record is None:
            return JSONResponse({"error": f"unknown task {task_id!r}"}, status_code=404)
        return record

    @app.get("/workloads")
    def get_workloads():
        with lock:
            buf.idle_flush(clock())
            return [workload_to_dict(w) for w in buf.flushed]

    @app.get("/health")
    def health():
        with lock:
            return {
                "status": "ok",
                "pending": len(buf.pending),
                "flushed": len(buf.flushed),
            }

    return app
