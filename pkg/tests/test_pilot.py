import pytest
from hypothesis import given, settings, strategies as st

from pilotsim.errors import (
    CapacityExceededError,
    InvalidArgumentError,
    InvalidStateError,
    RejectedSubmissionError,
)
from pilotsim.pilot import (
    BindingMode,
    ComputeUnit,
    EarlyBindingParams,
    Pilot,
    PilotDescription,
    PilotState,
    UnitState,
    cancel_pilot,
    find_unschedulable,
    schedule_early,
    schedule_late,
    submit_pilot,
)
from pilotsim.resource import QueueModel, QueueModelKind, Site
from pilotsim.workload import Task


def _site(name="s", cores=256, max_pilots=4):
    return Site(name=name, total_cores=cores,
                queue_model=QueueModel(QueueModelKind.CONSTANT, (0.0,)),
                max_concurrent_pilots=max_pilots)


def _active_pilot(idx=0, cores=16, walltime=1000.0, activate=0.0,
                  bootstrap=0.0, shutdown=0.0, site="s"):
    desc = PilotDescription(site_name=site, cores=cores, walltime_s=walltime,
                            bootstrap_s=bootstrap, shutdown_s=shutdown)
    return Pilot(id=f"p{idx:04d}", index=idx, description=desc,
                 state=PilotState.ACTIVE, submit_time=0.0,
                 activate_time=activate, free_cores=cores)


def _unit(uid, cores=1, duration=10.0):
    return ComputeUnit(Task(id=uid, cores=cores, duration_s=duration))


class TestDescription:
    def test_walltime_must_cover_overheads(self):
        with pytest.raises(InvalidArgumentError):
            PilotDescription(site_name="s", cores=1, walltime_s=300.0,
                             bootstrap_s=150.0, shutdown_s=150.0)

    def test_usable_window(self):
        d = PilotDescription(site_name="s", cores=1, walltime_s=1500.0,
                             bootstrap_s=150.0, shutdown_s=150.0)
        assert d.usable_s == 1200.0


class TestSubmission:
    def test_submit_queues_pilot(self):
        desc = PilotDescription(site_name="s", cores=16, walltime_s=100.0)
        p = submit_pilot(desc, 5.0, _site(), concurrent_count=0, index=3)
        assert p.state is PilotState.QUEUED
        assert p.submit_time == 5.0
        assert p.id == "p0003"

    def test_oversized_pilot_rejected(self):
        desc = PilotDescription(site_name="s", cores=512, walltime_s=100.0)
        with pytest.raises(CapacityExceededError):
            submit_pilot(desc, 0.0, _site(cores=256), 0, 0)

    def test_concurrency_cap(self):
        desc = PilotDescription(site_name="s", cores=16, walltime_s=100.0)
        with pytest.raises(RejectedSubmissionError):
            submit_pilot(desc, 0.0, _site(max_pilots=4), concurrent_count=4, index=0)


class TestCancel:
    def test_cancel_requeues_under_late_binding(self):
        p = _active_pilot()
        u = _unit("a")
        u.state = UnitState.EXECUTING
        u.timestamps[UnitState.EXECUTING] = 1.0
        requeued = cancel_pilot(p, 2.0, [u], BindingMode.LATE_TO_PILOT)
        assert p.state is PilotState.CANCELED
        assert requeued == [u]
        assert u.state is UnitState.NEW
        assert UnitState.EXECUTING not in u.timestamps

    def test_cancel_fails_units_under_early_binding(self):
        p = _active_pilot()
        u = _unit("a")
        u.state = UnitState.EXECUTING
        out = cancel_pilot(p, 2.0, [u], BindingMode.EARLY_TO_RESOURCE)
        assert out == []
        assert u.state is UnitState.FAILED

    def test_cannot_cancel_terminal_pilot(self):
        p = _active_pilot()
        p.state = PilotState.DONE
        with pytest.raises(InvalidStateError):
            cancel_pilot(p, 0.0)


class TestLateScheduling:
    def test_fills_first_active_pilot_first(self):
        early = _active_pilot(0, activate=0.0)
        late = _active_pilot(1, activate=5.0)
        units = [_unit(f"u{i}") for i in range(4)]
        pairs = schedule_late(units, [late, early], now=10.0)
        assert all(p is early for _, p in pairs)

    def test_backfill_lets_small_units_pass_blocked_large_one(self):
        p = _active_pilot(cores=4)
        big = _unit("big", cores=8)
        small = [_unit(f"s{i}", cores=1) for i in range(3)]
        pairs = schedule_late([big] + small, [p], now=0.0)
        assert {u.id for u, _ in pairs} == {"s0", "s1", "s2"}
        assert big.state is UnitState.NEW

    def test_respects_walltime_deadline(self):
        p = _active_pilot(walltime=100.0)
        fits = _unit("fits", duration=50.0)
        too_long = _unit("late", duration=50.0)
        pairs = schedule_late([fits], [p], now=0.0)
        assert len(pairs) == 1
        # Second unit would finish past the deadline at this point in time.
        pairs = schedule_late([too_long], [p], now=60.0)
        assert pairs == []

    def test_ignores_inactive_pilots(self):
        p = _active_pilot()
        p.state = PilotState.QUEUED
        assert schedule_late([_unit("a")], [p], now=0.0) == []

    @given(
        st.lists(st.tuples(st.integers(1, 8), st.floats(1.0, 50.0)),
                 min_size=1, max_size=12),
        st.integers(1, 3),
    )
    @settings(max_examples=60, deadline=None)
    def test_never_overcommits_cores_or_deadline(self, specs, n_pilots):
        pilots = [_active_pilot(i, cores=8, walltime=60.0) for i in range(n_pilots)]
        units = [_unit(f"u{i}", cores=c, duration=d)
                 for i, (c, d) in enumerate(specs)]
        pairs = schedule_late(units, pilots, now=0.0)
        used = {p.id: 0 for p in pilots}
        for u, p in pairs:
            used[p.id] += u.cores
            assert u.duration_s <= p.deadline + 1e-6
        for p in pilots:
            assert used[p.id] + p.free_cores == p.description.cores


class TestEarlyBinding:
    def test_round_robins_over_identical_sites(self):
        sites = [_site("a"), _site("b")]
        units = [_unit(f"u{i}") for i in range(10)]
        out = schedule_early(units, sites)
        assert len(out["a"]) == 5 and len(out["b"]) == 5

    def test_every_site_receives_work(self):
        sites = [_site(n) for n in ("a", "b", "c")]
        units = [_unit(f"u{i}") for i in range(7)]
        out = schedule_early(units, sites)
        assert all(out[s.name] for s in sites)

    def test_throttle_relaxed_when_all_sites_saturated(self):
        sites = [_site("a"), _site("b")]
        units = [_unit(f"u{i}") for i in range(10)]
        params = EarlyBindingParams(max_queued_per_site=2)
        out = schedule_early(units, sites, params)
        assert sum(len(v) for v in out.values()) == 10

    def test_partition_is_deterministic(self):
        sites = [_site("a"), _site("b")]
        units1 = [_unit(f"u{i}") for i in range(9)]
        units2 = [_unit(f"u{i}") for i in range(9)]
        out1 = schedule_early(units1, sites)
        out2 = schedule_early(units2, sites)
        assert {k: [u.id for u in v] for k, v in out1.items()} == \
               {k: [u.id for u in v] for k, v in out2.items()}


class TestUnschedulable:
    def test_too_wide_and_too_long_units_flagged(self):
        desc = PilotDescription(site_name="s", cores=8, walltime_s=100.0,
                                bootstrap_s=10.0, shutdown_s=10.0)
        wide = _unit("wide", cores=16, duration=10.0)
        long = _unit("long", cores=1, duration=90.0)
        ok = _unit("ok", cores=8, duration=80.0)
        out = find_unschedulable([wide, long, ok], [desc])
        assert {u.id for u in out} == {"wide", "long"}
