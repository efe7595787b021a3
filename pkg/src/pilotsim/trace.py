"""Timestamped state-transition traces emitted by the simulator.

The wire format is newline-delimited JSON with a stable field order
(entity_kind, entity_id, state, time_s) so that trace content can be hashed
and compared across runs.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Iterable


@dataclass(frozen=True)
class TraceRecord:
    entity_kind: str  # "pilot" | "unit" | "middleware"
    entity_id: str
    state: str
    time_s: float


@dataclass
class Trace:
    """An ordered record stream plus run metadata needed for attribution.

    ``meta`` carries the run configuration snapshot, per-pilot bookkeeping
    (site, overheads, submit/activate times), the unit-to-pilot binding, the
    per-segment windows of staged runs, and any units reported unschedulable.
    """

    records: list[TraceRecord] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def append(self, entity_kind: str, entity_id: str, state: str, time_s: float):
        self.records.append(TraceRecord(entity_kind, entity_id, state, time_s))

    def by_entity(self, entity_kind: str) -> dict[str, dict[str, float]]:
        """state -> timestamp maps, keyed by entity id (first occurrence wins)."""
        out: dict[str, dict[str, float]] = {}
        for r in self.records:
            if r.entity_kind != entity_kind:
                continue
            states = out.setdefault(r.entity_id, {})
            states.setdefault(r.state, r.time_s)
        return out

    def to_ndjson(self) -> str:
        lines = [
            json.dumps(
                {
                    "entity_kind": r.entity_kind,
                    "entity_id": r.entity_id,
                    "state": r.state,
                    "time_s": r.time_s,
                },
                sort_keys=False,
            )
            for r in self.records
        ]
        return "\n".join(lines) + ("\n" if lines else "")

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(self.to_ndjson().encode())
        return h.hexdigest()


def trace_from_ndjson(text: str, meta: dict | None = None) -> Trace:
    records = [
        TraceRecord(d["entity_kind"], d["entity_id"], d["state"], d["time_s"])
        for d in (json.loads(line) for line in text.splitlines() if line.strip())
    ]
    return Trace(records=records, meta=meta or {})
