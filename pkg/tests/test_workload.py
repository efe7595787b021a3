import pytest
from hypothesis import given, strategies as st

from pilotsim.errors import InvalidArgumentError
from pilotsim.workload import (
    FileOrigin,
    FileRef,
    Task,
    Workload,
    WorkloadKind,
    as_self_contained_bot,
    make_bot,
    make_extasy,
    ready_tasks,
    workload_from_json,
    workload_to_json,
)


class TestBot:
    def test_make_bot_counts_and_ids(self):
        w = make_bot(5, 100.0)
        assert len(w.tasks) == 5
        assert w.kind is WorkloadKind.BOT
        assert sorted(w.task_ids) == [f"t{i:05d}" for i in range(5)]
        assert all(t.cores == 1 and t.duration_s == 100.0 for t in w.tasks)

    def test_make_bot_rejects_bad_args(self):
        with pytest.raises(InvalidArgumentError):
            make_bot(0, 100.0)
        with pytest.raises(InvalidArgumentError):
            make_bot(3, 0.0)
        with pytest.raises(InvalidArgumentError):
            make_bot(3, 100.0, cores_per_task=0)

    def test_duplicate_ids_rejected(self):
        t = Task(id="a", cores=1, duration_s=1.0)
        with pytest.raises(InvalidArgumentError):
            Workload(tasks=(t, t))

    def test_bot_cannot_carry_task_output_inputs(self):
        dep = FileRef("f", 10, FileOrigin.TASK_OUTPUT)
        t = Task(id="a", cores=1, duration_s=1.0, inputs=(dep,))
        with pytest.raises(InvalidArgumentError):
            Workload(tasks=(t,), kind=WorkloadKind.BOT)


class TestStaged:
    def test_make_extasy_shape(self):
        n = 6
        w = make_extasy(n)
        assert w.kind is WorkloadKind.STAGED
        assert len(w.tasks) == 2 * n + 2
        assert w.stages == 4
        assert len(w.tasks_in_stage(0)) == n
        assert len(w.tasks_in_stage(1)) == n
        assert len(w.tasks_in_stage(2)) == 1
        assert len(w.tasks_in_stage(3)) == 1
        wide = w.tasks_in_stage(2)[0]
        assert wide.cores == n
        # n stage-1 outputs plus one workflow input feed the wide task.
        assert len(wide.inputs) == n + 1

    def test_extasy_file_counts(self):
        w = make_extasy(4)
        first = w.tasks_in_stage(0)[0]
        assert len(first.inputs) == 3 and len(first.outputs) == 1
        second = w.tasks_in_stage(1)[0]
        assert len(second.inputs) == 3 and len(second.outputs) == 1
        last = w.tasks_in_stage(3)[0]
        assert len(last.inputs) == 5 and len(last.outputs) == 1
        # Five distinct workflow-level input files overall.
        wf_inputs = {
            r.id for t in w.tasks for r in t.inputs
            if r.origin is FileOrigin.USER_WORKSTATION
        }
        assert len(wf_inputs) == 5

    def test_producer_must_be_in_earlier_stage(self):
        out = FileRef("x", 10, FileOrigin.TASK_OUTPUT)
        producer = Task(id="p", cores=1, duration_s=1.0, outputs=(out,), stage=1)
        consumer = Task(id="c", cores=1, duration_s=1.0, inputs=(out,), stage=1)
        with pytest.raises(InvalidArgumentError):
            Workload(tasks=(producer, consumer), kind=WorkloadKind.STAGED)

    def test_missing_producer_rejected(self):
        dep = FileRef("ghost", 10, FileOrigin.TASK_OUTPUT)
        t = Task(id="c", cores=1, duration_s=1.0, inputs=(dep,), stage=1)
        with pytest.raises(InvalidArgumentError):
            Workload(tasks=(t,), kind=WorkloadKind.STAGED)


class TestReadiness:
    def test_ready_tasks_progression(self):
        w = make_extasy(3)
        stage0 = {t.id for t in w.tasks_in_stage(0)}
        assert ready_tasks(w, set()) == stage0
        done = set(stage0)
        ready = ready_tasks(w, done)
        assert ready == {t.id for t in w.tasks_in_stage(1)}
        done |= ready
        assert ready_tasks(w, done) == {"s3-00000"}
        done.add("s3-00000")
        assert ready_tasks(w, done) == {"s4-00000"}

    def test_unknown_completed_ids_rejected(self):
        w = make_bot(2, 1.0)
        with pytest.raises(InvalidArgumentError):
            ready_tasks(w, {"nope"})

    @given(st.integers(min_value=1, max_value=6), st.integers(min_value=0, max_value=12))
    def test_ready_set_grows_with_completion(self, n, k):
        w = make_extasy(n)
        order = [t.id for t in w.tasks]
        done = set(order[: min(k, len(order))])
        # Completing more tasks never shrinks the downstream-ready frontier.
        smaller = ready_tasks(w, set()) - done
        assert smaller <= ready_tasks(w, done) | done


class TestSerde:
    def test_roundtrip_bot(self):
        w = make_bot(4, 60.0, cores_per_task=2)
        assert workload_from_json(workload_to_json(w)) == w

    def test_roundtrip_staged(self):
        w = make_extasy(3)
        assert workload_from_json(workload_to_json(w)) == w

    def test_malformed_document_diagnostics(self):
        with pytest.raises(InvalidArgumentError):
            workload_from_json('{"tasks": [{"cores": 1}]}')

    def test_self_contained_rewrite(self):
        w = make_extasy(2)
        sub = as_self_contained_bot(w.tasks_in_stage(1))
        assert sub.kind is WorkloadKind.BOT
        assert all(
            r.origin is FileOrigin.USER_WORKSTATION
            for t in sub.tasks for r in t.inputs + t.outputs
        )
        assert {t.id for t in sub.tasks} == {t.id for t in w.tasks_in_stage(1)}
