"""
Wave-Front Tracking
===================

Purpose: Evolve piecewise-constant data with the exact Riemann solvers,
optionally with a capacity-F gate at x = 0.

Every wave is a straight front. Rarefactions are split into fronts whose
velocity jump is at most delta_v. The loop advances to the earliest front
collision or gate crossing, re-solves the Riemann problem between the outer
states of the fronts meeting there (constrained solver at the gate) and
replaces them by the outgoing fronts.
"""

import bisect
import logging
import math
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from tqdm import tqdm

from phase_traffic.core.config import settings
from phase_traffic.core.errors import ConfigError, SimulationOverflow, UsageError
from phase_traffic.pipeline.constrained import solve_constrained
from phase_traffic.pipeline.phase_model import (
    ModelParams,
    State,
    canonical,
    classify,
    curve_state,
    flux,
    marker,
    rh_speed,
    state_distance,
    velocity,
)
from phase_traffic.pipeline.riemann import solve
from phase_traffic.pipeline.wavefan import WaveFan, WaveKind

logger = logging.getLogger(__name__)


class InitialPiece(BaseModel):
    """Constant state on (x_lo, x_hi); None stands for an infinite end."""

    x_lo: Optional[float] = None
    x_hi: Optional[float] = None
    state: State


class GateSpec(BaseModel):
    position: float = 0.0
    F: float = Field(gt=0)

    @model_validator(mode="after")
    def _at_origin(self) -> "GateSpec":
        if self.position != 0.0:
            raise ValueError("the gate sits at x = 0")
        return self


class ProfileGrid(BaseModel):
    x_min: float
    x_max: float
    n: int = Field(default=401, ge=2)


class SimConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    model: ModelParams
    initial: List[InitialPiece]
    gate: Optional[GateSpec] = None
    t_end: float = Field(gt=0)
    delta_v: float = Field(gt=0)
    profile_times: List[float] = []
    profile_x: Optional[ProfileGrid] = None
    window_pad: float = Field(default=10.0, gt=0)
    event_cap: int = Field(default=settings.event_cap, gt=0)


class Front:
    """Straight front anchored at (t0, x0)."""

    __slots__ = ("id", "t0", "x0", "speed", "left", "right", "kind")

    def __init__(self, fid: int, t0: float, x0: float, speed: float, left: State, right: State, kind: WaveKind):
        self.id = fid
        self.t0 = t0
        self.x0 = x0
        self.speed = speed
        self.left = left
        self.right = right
        self.kind = kind

    def position(self, t: float) -> float:
        return self.x0 + self.speed * (t - self.t0)

    def __repr__(self) -> str:
        return f"Front(id={self.id}, x0={self.x0:.6g}, t0={self.t0:.6g}, speed={self.speed:.6g}, {self.kind.value})"


class EventRecord(BaseModel):
    index: int
    t: float
    x: float
    kind: str
    in_ids: List[int]
    out_ids: List[int]
    vacuum_boundary: bool = False
    n_fronts: int = 0
    label: Optional[str] = None


class FrontPath(BaseModel):
    id: int
    kind: WaveKind
    t_start: float
    x_start: float
    t_stop: float
    x_stop: float


class SimTrace(BaseModel):
    events: List[EventRecord] = []
    profiles: List[Dict[str, float]] = []
    gate_flux: List[Dict[str, float]] = []
    mass: List[Dict[str, float]] = []
    paths: List[FrontPath] = []
    t_final: float = 0.0

    def macro_times(self) -> Dict[str, float]:
        times: Dict[str, float] = {}
        for e in self.events:
            for label in (e.label or "").split(","):
                if label:
                    times[label] = e.t
        return times

    def mass_drift(self) -> float:
        if not self.mass:
            return 0.0
        base = self.mass[0]["balance"]
        scale = max(abs(base), 1e-300)
        return max(abs(row["balance"] - base) for row in self.mass) / scale


class FrontState:
    """Mutable state of a front-tracking run."""

    def __init__(self, p: ModelParams, cfg: SimConfig):
        self.p = p
        self.cfg = cfg
        self.t = 0.0
        self.fronts: List[Front] = []
        self.background: Optional[State] = None
        self.next_id = 0
        self.events: List[EventRecord] = []
        self.paths: Dict[int, FrontPath] = {}
        self.window: Tuple[float, float] = (0.0, 0.0)
        self.pending: Optional[Tuple[float, float]] = None

    @property
    def F(self) -> Optional[float]:
        return self.cfg.gate.F if self.cfg.gate else None


# ---------------------------------------------------------------------------
# Construction
# ---------------------------------------------------------------------------

def _breakpoints(cfg: SimConfig) -> List[Tuple[float, State, State]]:
    pieces = cfg.initial
    if not pieces:
        return []
    if pieces[0].x_lo is not None or pieces[-1].x_hi is not None:
        raise ConfigError("Initial pieces must start at -inf and end at +inf (use null)")
    jumps = []
    for prev, cur in zip(pieces[:-1], pieces[1:]):
        if prev.x_hi is None or cur.x_lo is None or prev.x_hi != cur.x_lo:
            raise ConfigError(f"Initial pieces do not partition the line near x={prev.x_hi}")
        if cur.x_hi is not None and cur.x_hi <= cur.x_lo:
            raise ConfigError(f"Empty initial interval ({cur.x_lo}, {cur.x_hi})")
        jumps.append((cur.x_lo, prev.state, cur.state))
    return jumps


def _discretize(fs: FrontState, fan: WaveFan, x: float, t: float, at_gate: bool = False) -> List[Front]:
    p = fs.p
    pieces: List[Tuple[State, State, float, WaveKind]] = []
    for wave in fan.waves:
        if not wave.is_rarefaction:
            pieces.append((wave.left, wave.right, wave.speed, wave.kind))
            continue
        v_a, v_b = velocity(p, wave.left), velocity(p, wave.right)
        n = max(1, math.ceil(abs(v_b - v_a) / fs.cfg.delta_v - 1e-12))
        states = [wave.left]
        for k in range(1, n):
            states.append(curve_state(p, wave.w, v_a + (v_b - v_a) * k / n))
        states.append(wave.right)
        for a, b in zip(states[:-1], states[1:]):
            pieces.append((a, b, rh_speed(p, a, b), WaveKind.RAREFACTION1))

    merged: List[List] = []
    for left, right, speed, kind in pieces:
        if state_distance(left, right) <= settings.cull_tol:
            continue
        if merged and abs(merged[-1][2] - speed) <= settings.speed_tol * max(1.0, abs(speed)):
            merged[-1][1] = right
            if not (classify(p, merged[-1][0]).phases & classify(p, right).phases):
                merged[-1][3] = WaveKind.PHASE_TRANSITION
            continue
        merged.append([left, right, speed, kind])

    fronts = []
    for left, right, speed, kind in merged:
        if at_gate and abs(speed) <= 1e-9:
            # fans on either side of the gate must not leak across it
            speed = 0.0
        fronts.append(Front(fs.next_id, t, x, speed, left, right, kind))
        fs.paths[fs.next_id] = FrontPath(id=fs.next_id, kind=kind, t_start=t, x_start=x, t_stop=t, x_stop=x)
        fs.next_id += 1
    return fronts


def _solve_at(fs: FrontState, u_l: State, u_r: State, at_gate: bool) -> WaveFan:
    if at_gate and fs.F is not None:
        return solve_constrained(fs.p, fs.F, u_l, u_r).fan
    return solve(fs.p, u_l, u_r)


def init(p: ModelParams, cfg: SimConfig) -> FrontState:
    """Solve every initial jump (and the gate) and lay out the first fronts."""
    fs = FrontState(p, cfg)
    jumps = _breakpoints(cfg)
    if cfg.initial:
        fs.background = canonical(p, cfg.initial[0].state)

    if cfg.gate is not None and cfg.initial and all(abs(x) > 0.0 for x, _, _ in jumps):
        u0 = state_at_point(cfg, 0.0)
        jumps.append((0.0, u0, u0))
        jumps.sort(key=lambda j: j[0])

    for x, u_l, u_r in jumps:
        u_l, u_r = canonical(p, u_l), canonical(p, u_r)
        at_gate = cfg.gate is not None and x == 0.0
        fan = _solve_at(fs, u_l, u_r, at_gate)
        fs.fronts.extend(_discretize(fs, fan, x, 0.0, at_gate))

    xs = [x for x, _, _ in jumps] or [0.0]
    fs.window = (min(xs) - cfg.window_pad, max(xs) + cfg.window_pad)
    logger.info(f"🚀 Front tracking initialised: {len(jumps)} jumps, {len(fs.fronts)} fronts")
    return fs


def state_at_point(cfg: SimConfig, x: float) -> State:
    for piece in cfg.initial:
        lo = -math.inf if piece.x_lo is None else piece.x_lo
        hi = math.inf if piece.x_hi is None else piece.x_hi
        if lo <= x < hi:
            return piece.state
    raise ConfigError(f"No initial piece covers x={x}")


# ---------------------------------------------------------------------------
# Queries on the front list
# ---------------------------------------------------------------------------

def _state_at(fs: FrontState, t: float, x: float) -> Optional[State]:
    positions = [f.position(t) for f in fs.fronts]
    k = bisect.bisect_right(positions, x)
    if k < len(fs.fronts):
        return fs.fronts[k].left
    return fs.fronts[-1].right if fs.fronts else fs.background


def gate_traces(fs: FrontState, t: float) -> Tuple[State, State]:
    """Traces at 0- and 0+ just after time t."""
    tol = 1e-9
    minus = fs.fronts[0].left if fs.fronts else fs.background
    plus = None
    for f in fs.fronts:
        x = f.position(t)
        if x < -tol or (abs(x) <= tol and f.speed < -settings.speed_tol):
            minus = f.right
        elif plus is None and (x > tol or (abs(x) <= tol and f.speed > settings.speed_tol)):
            plus = f.left
    if plus is None:
        plus = fs.fronts[-1].right if fs.fronts else fs.background
    return minus, plus


def sample_profile(fs: FrontState, t: float, xs) -> List[Dict[str, float]]:
    """Rows (t, x, rho, q, v, w) of the solution at time t."""
    p = fs.p
    rows = []
    positions = [f.position(t) for f in fs.fronts]
    for x in xs:
        k = bisect.bisect_right(positions, x)
        if k < len(fs.fronts):
            u = fs.fronts[k].left
        else:
            u = fs.fronts[-1].right if fs.fronts else fs.background
        if u is None:
            continue
        rows.append({"t": t, "x": float(x), "rho": u.rho, "q": u.q,
                     "v": velocity(p, u), "w": marker(p, u)})
    return rows


def _mass(fs: FrontState, t: float) -> float:
    a, b = fs.window
    total = 0.0
    cursor = a
    state = _state_at(fs, t, a)
    for f in fs.fronts:
        x = f.position(t)
        if x <= a:
            continue
        if x >= b:
            break
        total += state.rho * (x - cursor)
        cursor, state = x, f.right
    total += state.rho * (b - cursor)
    return total


def _boundary_outflow(fs: FrontState, t0: float, t1: float) -> float:
    """Integral over (t0, t1) of f(u(t, b)) - f(u(t, a)) with the fronts frozen in their current course."""
    out = 0.0
    for xb, sign in ((fs.window[1], 1.0), (fs.window[0], -1.0)):
        cuts = [t0, t1]
        for f in fs.fronts:
            if f.speed != 0.0:
                tc = f.t0 + (xb - f.x0) / f.speed
                if t0 < tc < t1:
                    cuts.append(tc)
        cuts.sort()
        for ta, tb in zip(cuts[:-1], cuts[1:]):
            u = _state_at(fs, 0.5 * (ta + tb), xb)
            out += sign * flux(fs.p, u) * (tb - ta)
    return out


# ---------------------------------------------------------------------------
# Event loop
# ---------------------------------------------------------------------------

def _next_event(fs: FrontState) -> Tuple[float, float]:
    """Earliest (time, position) of a collision or gate crossing; (inf, nan) if none."""
    if fs.pending is not None:
        return fs.pending
    t = fs.t
    best_t, best_x = math.inf, math.nan
    positions = [f.position(t) for f in fs.fronts]
    for i in range(len(fs.fronts) - 1):
        a, b = fs.fronts[i], fs.fronts[i + 1]
        closing = a.speed - b.speed
        if closing <= 1e-9 * max(1.0, abs(a.speed)):
            continue
        dt = max(positions[i + 1] - positions[i], 0.0) / closing
        if t + dt < best_t - 1e-12 or (abs(t + dt - best_t) <= 1e-12 and positions[i] < best_x):
            best_t, best_x = t + dt, positions[i] + a.speed * dt
    if fs.F is not None:
        for f, x in zip(fs.fronts, positions):
            if (x < -1e-9 and f.speed > 0.0) or (x > 1e-9 and f.speed < 0.0):
                tc = t - x / f.speed
                if tc < best_t - 1e-12 or (abs(tc - best_t) <= 1e-12 and 0.0 < best_x):
                    best_t, best_x = tc, 0.0
    fs.pending = (best_t, best_x)
    return fs.pending


def next_event_time(fs: FrontState) -> float:
    """Time of the next interaction; inf when the fronts never meet again."""
    return _next_event(fs)[0]


def _resolve(fs: FrontState, t_event: float, x_event: float) -> EventRecord:
    """Resolve the interaction at (t_event, x_event) and replace the fronts involved."""
    at_gate = fs.F is not None and abs(x_event) <= 1e-9
    if at_gate:
        x_event = 0.0
    tol = 1e-9 * max(1.0, abs(x_event))
    idx = [i for i, f in enumerate(fs.fronts) if abs(f.position(t_event) - x_event) <= tol]
    if not idx:
        raise SimulationOverflow(f"No front found at x={x_event} t={t_event}")
    first, last = idx[0], idx[-1]
    incoming = fs.fronts[first:last + 1]
    u_l, u_r = incoming[0].left, incoming[-1].right
    vacuum_boundary = (first == 0 and u_l.rho <= settings.state_tol and not at_gate)

    for f in incoming:
        path = fs.paths[f.id]
        fs.paths[f.id] = path.model_copy(update={"t_stop": t_event, "x_stop": x_event})

    fan = _solve_at(fs, u_l, u_r, at_gate)
    outgoing = _discretize(fs, fan, x_event, t_event, at_gate)
    fs.fronts[first:last + 1] = outgoing
    fs.t = t_event
    fs.pending = None

    record = EventRecord(
        index=len(fs.events), t=t_event, x=x_event,
        kind="gate" if at_gate else "collision",
        in_ids=[f.id for f in incoming], out_ids=[f.id for f in outgoing],
        vacuum_boundary=vacuum_boundary, n_fronts=len(fs.fronts),
    )
    fs.events.append(record)
    logger.debug(f"event {record.index}: t={t_event:.9g} x={x_event:.6g} {record.kind} "
                 f"{len(incoming)}->{len(outgoing)} fronts")
    return record


def step(p: ModelParams, fs: FrontState) -> Tuple[Optional[EventRecord], FrontState]:
    """
    Advance to the earliest interaction and resolve it.

    Returns (None, fs) without touching the fronts when no interaction is left
    before t_end; callers treat that as the end of the simulation.

    Raises:
        UsageError: fs was built for another model.
    """
    if p is not fs.p:
        raise UsageError("step needs the model the FrontState was initialised with")
    t_next, x_next = _next_event(fs)
    if t_next > fs.cfg.t_end:
        return None, fs
    return _resolve(fs, t_next, x_next), fs


def _record_gate(fs: FrontState, trace: SimTrace, t: float) -> None:
    if fs.F is None:
        return
    minus, plus = gate_traces(fs, t)
    trace.gate_flux.append({"t": t, "f_minus": flux(fs.p, minus), "f_plus": flux(fs.p, plus)})


def _record_mass(fs: FrontState, trace: SimTrace, t: float, outflow: float) -> None:
    mass = _mass(fs, t)
    trace.mass.append({"t": t, "mass": mass, "outflow": outflow, "balance": mass + outflow})


def label_macro_events(events: List[EventRecord]) -> None:
    """
    Attach labels a1..a6 to the landmark interactions of a run.

    a1 first interior interaction; a2, a3, a5 first, second-to-last and last
    interaction at the vacuum boundary; a4, a6 first and last gate interaction.
    """
    interior = [e for e in events if e.kind == "collision"]
    boundary = [e for e in events if e.vacuum_boundary]
    gate = [e for e in events if e.kind == "gate" and e.t > 0.0]
    picks = []
    if interior:
        picks.append(("a1", interior[0]))
    if boundary:
        picks.append(("a2", boundary[0]))
        picks.append(("a3", boundary[-2] if len(boundary) > 1 else boundary[0]))
        picks.append(("a5", boundary[-1]))
    if gate:
        picks.append(("a4", gate[0]))
        picks.append(("a6", gate[-1]))
    for label, event in picks:
        event.label = label if event.label is None else f"{event.label},{label}"


def run(p: ModelParams, cfg: SimConfig) -> SimTrace:
    """
    Run front tracking up to t_end or until no interaction is left.

    Raises:
        SimulationOverflow: the event cap was hit; the partial trace travels in
        the exception details under "trace".
    """
    if not cfg.initial:
        logger.warning("Empty initial datum, nothing to track")
        return SimTrace(t_final=cfg.t_end)
    fs = init(p, cfg)
    trace = SimTrace()
    profile_times = sorted(t for t in cfg.profile_times if 0.0 <= t <= cfg.t_end)
    grid = None
    if cfg.profile_x is not None:
        n = cfg.profile_x.n
        grid = [cfg.profile_x.x_min + (cfg.profile_x.x_max - cfg.profile_x.x_min) * k / (n - 1) for k in range(n)]

    outflow = 0.0
    _record_gate(fs, trace, 0.0)
    _record_mass(fs, trace, 0.0, outflow)

    while True:
        t_next = next_event_time(fs)
        horizon = min(t_next, cfg.t_end)
        while grid is not None and profile_times and profile_times[0] <= horizon:
            trace.profiles.extend(sample_profile(fs, profile_times.pop(0), grid))
        if t_next <= cfg.t_end and len(fs.events) >= cfg.event_cap:
            trace.events = fs.events
            raise SimulationOverflow(
                f"Event cap {cfg.event_cap} reached at t={fs.t:.6g}",
                details={"trace": trace, "n_fronts": len(fs.fronts)},
            )
        outflow += _boundary_outflow(fs, fs.t, horizon)
        event, fs = step(p, fs)
        if event is None:
            fs.t = cfg.t_end
            fs.pending = None
            break
        _record_gate(fs, trace, event.t)
        _record_mass(fs, trace, event.t, outflow)

    t_final = cfg.t_end
    _record_mass(fs, trace, t_final, outflow)
    for f in fs.fronts:
        path = fs.paths[f.id]
        fs.paths[f.id] = path.model_copy(update={"t_stop": t_final, "x_stop": f.position(t_final)})

    label_macro_events(fs.events)
    trace.events = fs.events
    trace.paths = sorted(fs.paths.values(), key=lambda path: path.id)
    trace.t_final = t_final
    logger.info(f"✅ Front tracking done: {len(fs.events)} events, {len(fs.fronts)} fronts at t={t_final:.6g}, "
                f"mass drift {trace.mass_drift():.3g}")
    return trace


def convergence_study(p: ModelParams, cfg: SimConfig, deltas: List[float]) -> List[Dict[str, float]]:
    """
    Macro-event times for each delta_v, with observed orders against the finest run.

    With a profile grid configured, each row also carries l1_rho, the L1 distance
    of the density at t_end to the finest run's.
    """
    rows = []
    densities = []
    profile_times = [cfg.t_end] if cfg.profile_x is not None else []
    for dv in tqdm(deltas, desc="convergence", disable=not logger.isEnabledFor(logging.INFO)):
        trace = run(p, cfg.model_copy(update={"delta_v": dv, "profile_times": profile_times}))
        row = {"delta_v": dv, "events": float(len(trace.events))}
        row.update(trace.macro_times())
        rows.append(row)
        if profile_times:
            densities.append(np.array([r["rho"] for r in trace.profiles]))
    if densities and all(len(d) == len(densities[-1]) for d in densities):
        grid = cfg.profile_x
        dx = (grid.x_max - grid.x_min) / (grid.n - 1)
        for row, rho in zip(rows, densities):
            row["l1_rho"] = float(np.sum(np.abs(rho - densities[-1])) * dx)
    if len(rows) >= 3:
        finest = rows[-1]
        for label in ("a1", "a2", "a3", "a4", "a5", "a6"):
            errs = [abs(r.get(label, math.nan) - finest.get(label, math.nan)) for r in rows[:-1]]
            for r, (e1, e2) in zip(rows[1:-1], zip(errs[:-1], errs[1:])):
                if e1 > 0 and e2 > 0:
                    r[f"order_{label}"] = math.log(e1 / e2, 2)
    return rows
