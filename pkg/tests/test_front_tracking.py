"""
Tests for the front-tracking engine on small data sets.
"""

import pytest

from phase_traffic.core.errors import ConfigError, SimulationOverflow, UsageError
from phase_traffic.pipeline.front_tracking import (
    EventRecord,
    InitialPiece,
    ProfileGrid,
    SimConfig,
    init,
    label_macro_events,
    run,
    state_at_point,
    step,
)
from phase_traffic.pipeline.phase_model import free_state, vacuum
from phase_traffic.pipeline.toll_gate import U2, toll_gate_config


def _two_piece(p, u_l, u_r, **kw):
    return SimConfig(
        model=p,
        initial=[InitialPiece(x_hi=0.0, state=u_l), InitialPiece(x_lo=0.0, state=u_r)],
        delta_v=0.01,
        **kw,
    )


def test_single_contact_moves_at_free_speed(ptp_s):
    cfg = _two_piece(ptp_s, free_state(ptp_s, 0.2), free_state(ptp_s, 0.1), t_end=2.0,
                     profile_times=[2.0], profile_x=ProfileGrid(x_min=-1.0, x_max=1.0, n=5))
    trace = run(ptp_s, cfg)
    assert trace.events == []
    assert [p.kind.value for p in trace.paths] == ["Contact"]
    assert trace.paths[0].x_stop == pytest.approx(0.5)
    rho = {r["x"]: r["rho"] for r in trace.profiles}
    assert rho[-1.0] == pytest.approx(0.2)
    assert rho[0.0] == pytest.approx(0.2)
    assert rho[1.0] == pytest.approx(0.1)
    assert trace.mass_drift() < 1e-12


def test_vacuum_alone_has_no_fronts(pta_r):
    cfg = _two_piece(pta_r, vacuum(pta_r), vacuum(pta_r), t_end=1.0)
    assert init(pta_r, cfg).fronts == []


def test_step_signals_completion_when_nothing_meets(ptp_s):
    cfg = _two_piece(ptp_s, free_state(ptp_s, 0.2), free_state(ptp_s, 0.1), t_end=2.0)
    fs = init(ptp_s, cfg)
    event, after = step(ptp_s, fs)
    assert event is None
    assert after is fs
    assert fs.t == 0.0
    assert len(fs.fronts) == 1


def test_stepping_by_hand_replays_run(pta_r):
    cfg = toll_gate_config(pta_r, delta_v=0.05, t_end=5.0, profile_times=[])
    fs = init(pta_r, cfg)
    times = []
    while True:
        event, fs = step(pta_r, fs)
        if event is None:
            break
        assert event.index == len(times)
        assert fs.t == event.t
        times.append(event.t)
    assert times == sorted(times)
    assert step(pta_r, fs)[0] is None
    assert times == [e.t for e in run(pta_r, cfg).events]


def test_step_rejects_foreign_model(pta_r, ptp_s):
    fs = init(pta_r, toll_gate_config(pta_r, delta_v=0.05, t_end=5.0))
    with pytest.raises(UsageError):
        step(ptp_s, fs)


def test_queue_release_fronts(pta_r):
    cfg = _two_piece(pta_r, U2, vacuum(pta_r), t_end=0.5)
    fs = init(pta_r, cfg)
    kinds = {f.kind.value for f in fs.fronts}
    assert "Rarefaction1" in kinds
    speeds = [f.speed for f in fs.fronts]
    assert speeds == sorted(speeds)


def test_empty_initial_datum(pta_r):
    trace = run(pta_r, SimConfig(model=pta_r, initial=[], t_end=3.0, delta_v=0.1))
    assert trace.events == []
    assert trace.profiles == []
    assert trace.t_final == 3.0


def test_partition_must_cover_the_line(ptp_s):
    u = free_state(ptp_s, 0.2)
    gap = SimConfig(model=ptp_s, t_end=1.0, delta_v=0.1, initial=[
        InitialPiece(x_hi=0.0, state=u), InitialPiece(x_lo=1.0, state=u)])
    with pytest.raises(ConfigError):
        run(ptp_s, gap)
    bounded = SimConfig(model=ptp_s, t_end=1.0, delta_v=0.1, initial=[
        InitialPiece(x_lo=-1.0, x_hi=0.0, state=u), InitialPiece(x_lo=0.0, state=u)])
    with pytest.raises(ConfigError):
        run(ptp_s, bounded)


def test_state_at_point(pta_r):
    cfg = toll_gate_config(pta_r)
    assert state_at_point(cfg, -3.0).q == pytest.approx(-0.4)
    assert state_at_point(cfg, -0.5).q == pytest.approx(0.3)
    assert state_at_point(cfg, 0.0).rho == 0.0


def test_event_cap_keeps_partial_trace(pta_r):
    cfg = toll_gate_config(pta_r, delta_v=0.05).model_copy(update={"event_cap": 5})
    with pytest.raises(SimulationOverflow) as exc:
        run(pta_r, cfg)
    assert len(exc.value.details["trace"].events) == 5


def test_macro_labels():
    def ev(i, t, kind="collision", boundary=False):
        return EventRecord(index=i, t=t, x=0.0, kind=kind, in_ids=[], out_ids=[], vacuum_boundary=boundary)

    events = [ev(0, 1.0), ev(1, 2.0, boundary=True), ev(2, 3.0, "gate"),
              ev(3, 4.0, boundary=True), ev(4, 5.0, boundary=True), ev(5, 6.0, "gate")]
    label_macro_events(events)
    assert [e.label for e in events] == ["a1", "a2", "a4", "a3", "a5", "a6"]


def test_labels_share_an_event():
    events = [EventRecord(index=0, t=1.0, x=-1.0, kind="collision", in_ids=[], out_ids=[], vacuum_boundary=True)]
    label_macro_events(events)
    assert events[0].label == "a1,a2,a3,a5"
