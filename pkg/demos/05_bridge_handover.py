"""Hand a staged workflow over through the task-submission bridge.

A workflow engine submits tasks one at a time as JSON records; the bridge
buffers them and flushes a self-contained workload once submissions go
idle. Stage-by-stage submission therefore yields one workload per stage,
without the bridge knowing anything about the workflow's structure.

The same buffer is served over HTTP with `pilotsim --serve` (POST /tasks,
GET /tasks/{id}, GET /workloads, GET /health).
"""

from pilotsim import SubmissionBuffer, make_extasy
from pilotsim.workload import workload_to_dict

workflow = make_extasy(4)
bridge = SubmissionBuffer(idle_threshold_s=10.0)

clock = 0.0
for stage in range(workflow.stages):
    for record in workload_to_dict(workflow)["tasks"]:
        if record["stage"] != stage:
            continue
        record = {k: v for k, v in record.items() if k != "stage"}
        record["executable"] = "/opt/md/run"
        ack = bridge.submit(record, clock)
        clock += 0.5
    # The stage's results are computed; nothing is submitted for a while.
    clock += 30.0
    flushed = bridge.idle_flush(clock)
    print(f"stage {stage}: flushed {len(flushed.tasks)} tasks "
          f"({sorted(t.id for t in flushed.tasks)[:3]} ...)")

# Malformed records come back with the offending field named.
bad = bridge.submit({"executable": "/opt/md/run", "cores": 0,
                     "duration_s": 5.0}, clock)
print(f"\nrejected submission: {bad['reason']}")

# Resubmitting a known id is idempotent: same acknowledgment, no duplicate.
again = bridge.submit({"id": "s1-00000", "executable": "/opt/md/run",
                       "cores": 1, "duration_s": 300.0}, clock)
print(f"duplicate resubmission acknowledged as: {again}")
print(f"total workloads flushed: {len(bridge.flushed)}")
