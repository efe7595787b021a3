import pytest
from fastapi.testclient import TestClient
from hypothesis import given, settings, strategies as st

from pilotsim.bridge import SubmissionBuffer, create_app, validate_record


def _record(i, **over):
    rec = {
        "id": f"job-{i}",
        "executable": "/bin/app",
        "arguments": ["-n", str(i)],
        "cores": 1,
        "duration_s": 60.0,
        "inputs": [{"id": f"in-{i}", "size_bytes": 200_000}],
        "outputs": [{"id": f"out-{i}", "size_bytes": 200_000}],
    }
    rec.update(over)
    return rec


class TestValidation:
    def test_valid_record_passes(self):
        assert validate_record(_record(0)) is None

    @pytest.mark.parametrize("missing", ["executable", "cores", "duration_s"])
    def test_missing_field_named_in_reason(self, missing):
        rec = _record(0)
        del rec[missing]
        reason = validate_record(rec)
        assert reason is not None and missing in reason

    def test_bad_cores(self):
        assert "cores" in validate_record(_record(0, cores=0))
        assert "cores" in validate_record(_record(0, cores="four"))

    def test_bad_duration(self):
        assert "duration_s" in validate_record(_record(0, duration_s=-1))

    def test_bad_file_entries(self):
        reason = validate_record(_record(0, inputs=[{"size_bytes": 5}]))
        assert "inputs" in reason
        reason = validate_record(
            _record(0, outputs=[{"id": "x", "size_bytes": -1}]))
        assert "outputs" in reason


class TestBuffering:
    def test_no_flush_while_submissions_keep_coming(self):
        buf = SubmissionBuffer(idle_threshold_s=10.0)
        for i in range(5):
            buf.submit(_record(i), now=float(i))
        assert buf.idle_flush(now=9.0) is None
        assert buf.pending and not buf.flushed

    def test_flush_after_idle_gap(self):
        buf = SubmissionBuffer(idle_threshold_s=10.0)
        buf.submit(_record(0), now=0.0)
        buf.submit(_record(1), now=2.0)
        w = buf.idle_flush(now=12.0)
        assert w is not None
        assert {t.id for t in w.tasks} == {"job-0", "job-1"}
        assert buf.pending == []
        assert buf.flushed == [w]

    def test_resubmission_is_idempotent(self):
        buf = SubmissionBuffer()
        first = buf.submit(_record(0), now=0.0)
        again = buf.submit(_record(0), now=1.0)
        assert first == again
        assert len(buf.pending) == 1

    def test_rejected_records_never_buffered(self):
        buf = SubmissionBuffer()
        ack = buf.submit(_record(0, cores=0), now=0.0)
        assert not ack["accepted"]
        assert buf.pending == []

    def test_stagewise_submission_yields_one_flush_per_stage(self):
        from pilotsim.workload import make_extasy, workload_to_dict
        w = make_extasy(4)
        buf = SubmissionBuffer(idle_threshold_s=10.0)
        clock = 0.0
        for stage in range(4):
            for td in workload_to_dict(w)["tasks"]:
                if td["stage"] != stage:
                    continue
                rec = dict(td, executable="/bin/md")
                rec.pop("stage")
                assert buf.submit(rec, clock)["accepted"]
                clock += 0.5
            clock += 60.0
            buf.idle_flush(clock)
        assert len(buf.flushed) == 4
        sizes = [len(fw.tasks) for fw in buf.flushed]
        assert sizes == [4, 4, 1, 1]

    @given(st.lists(st.floats(0.1, 30.0), min_size=1, max_size=40))
    @settings(max_examples=40, deadline=None)
    def test_no_task_lost_or_duplicated(self, gaps):
        buf = SubmissionBuffer(idle_threshold_s=10.0)
        clock = 0.0
        for i, gap in enumerate(gaps):
            buf.submit(_record(i), clock)
            clock += gap
            buf.idle_flush(clock)
        buf.idle_flush(clock + 100.0)
        seen = [t.id for fw in buf.flushed for t in fw.tasks]
        assert sorted(seen) == sorted(f"job-{i}" for i in range(len(gaps)))
        assert len(seen) == len(set(seen))


class TestHttp:
    def _client(self):
        self.clock = [0.0]
        app = create_app(idle_threshold_s=10.0, clock=lambda: self.clock[0])
        return TestClient(app)

    def test_submit_and_fetch(self):
        client = self._client()
        r = client.post("/tasks", json=_record(0))
        assert r.status_code == 200
        assert r.json() == {"accepted": True, "task_id": "job-0"}
        r = client.get("/tasks/job-0")
        assert r.status_code == 200
        assert r.json()["executable"] == "/bin/app"

    def test_unknown_task_404(self):
        client = self._client()
        assert client.get("/tasks/nope").status_code == 404

    def test_malformed_submission_400_names_field(self):
        client = self._client()
        rec = _record(0)
        del rec["cores"]
        r = client.post("/tasks", json=rec)
        assert r.status_code == 400
        assert "cores" in r.json()["reason"]

    def test_malformed_json_400(self):
        client = self._client()
        r = client.post("/tasks", content=b"not json",
                        headers={"content-type": "application/json"})
        assert r.status_code == 400

    def test_workloads_flush_on_idle_clock(self):
        client = self._client()
        client.post("/tasks", json=_record(0))
        client.post("/tasks", json=_record(1))
        assert client.get("/workloads").json() == []
        self.clock[0] = 20.0
        flushed = client.get("/workloads").json()
        assert len(flushed) == 1
        assert len(flushed[0]["tasks"]) == 2

    def test_health(self):
        client = self._client()
        client.post("/tasks", json=_record(0))
        body = client.get("/health").json()
        assert body == {"status": "ok", "pending": 1, "flushed": 0}
