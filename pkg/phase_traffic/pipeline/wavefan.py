"""
Wave Fans
=========

Purpose: Self-similar Riemann solutions as ordered wave sequences.

A WaveFan is a function of xi = x/t. Jumps (contacts, 1-shocks, phase
transitions, the stationary gate jump) are stored with their speed,
1-rarefactions exactly by their endpoint states and marker. Discretization of
rarefactions only happens in front tracking.

Handles:
- evaluation at a point or on a vector of xi
- admissibility checks (chaining, speed order, Rankine-Hugoniot, Lax)
- total variation in the v and w coordinates
- L1 distances between profiles and weak-form residuals
- line-oriented text records for golden files
"""

import logging
import math
from enum import Enum
from typing import Iterable, List, Literal, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from pydantic import BaseModel, ConfigDict

from phase_traffic.core.config import settings
from phase_traffic.pipeline.phase_model import (
    ModelParams,
    State,
    _lax_d1,
    classify,
    flux,
    lambda1,
    marker,
    rh_speed,
    state_distance,
    velocity,
    velocity_many,
)

logger = logging.getLogger(__name__)

Coord = Literal["v", "w"]
TraceSide = Literal["-", "+"]


class WaveKind(str, Enum):
    CONTACT = "Contact"
    SHOCK1 = "Shock1"
    RAREFACTION1 = "Rarefaction1"
    PHASE_TRANSITION = "PhaseTransition"
    STATIONARY_JUMP = "StationaryJump"


class Wave(BaseModel):
    """One elementary wave; jumps have speed_lo == speed_hi."""

    model_config = ConfigDict(frozen=True)

    kind: WaveKind
    left: State
    right: State
    speed_lo: float
    speed_hi: float
    w: Optional[float] = None

    @property
    def speed(self) -> float:
        return self.speed_lo

    @property
    def is_rarefaction(self) -> bool:
        return self.kind is WaveKind.RAREFACTION1


def jump(kind: WaveKind, left: State, right: State, speed: float) -> Wave:
    return Wave(kind=kind, left=left, right=right, speed_lo=speed, speed_hi=speed)


def labelled_jump(p: ModelParams, kind: WaveKind, left: State, right: State,
                  speed: Optional[float] = None) -> Wave:
    """Jump of the given kind, relabelled PhaseTransition when the endpoints share no phase."""
    if speed is None:
        speed = rh_speed(p, left, right)
    if not (classify(p, left).phases & classify(p, right).phases):
        kind = WaveKind.PHASE_TRANSITION
    return jump(kind, left, right, speed)


def rarefaction(p: ModelParams, left: State, right: State) -> Wave:
    return Wave(
        kind=WaveKind.RAREFACTION1,
        left=left,
        right=right,
        speed_lo=lambda1(p, left),
        speed_hi=lambda1(p, right),
        w=left.q / left.rho,
    )


class WaveFan(BaseModel):
    """Ordered waves from left_state to right_state."""

    model_config = ConfigDict(frozen=True)

    waves: Tuple[Wave, ...] = ()
    left_state: State
    right_state: State

    @classmethod
    def from_waves(cls, left: State, right: State, waves: Iterable[Wave]) -> "WaveFan":
        return cls(waves=tuple(waves), left_state=left, right_state=right)

    @classmethod
    def constant(cls, u: State) -> "WaveFan":
        return cls(waves=(), left_state=u, right_state=u)

    @property
    def is_empty(self) -> bool:
        return len(self.waves) == 0

    def kinds(self) -> List[WaveKind]:
        return [wave.kind for wave in self.waves]

    def count(self, kind: WaveKind) -> int:
        return sum(1 for wave in self.waves if wave.kind is kind)

    def min_speed(self) -> float:
        return min((wave.speed_lo for wave in self.waves), default=math.inf)

    def max_speed(self) -> float:
        return max((wave.speed_hi for wave in self.waves), default=-math.inf)

    def breakpoints(self) -> List[float]:
        points = []
        for wave in self.waves:
            points.append(wave.speed_lo)
            if wave.is_rarefaction:
                points.append(wave.speed_hi)
        return points

    def states(self) -> List[State]:
        """Every constant state of the fan, ends included."""
        out = [self.left_state]
        for wave in self.waves:
            out.append(wave.right)
        return out

    def eval_many(self, p: ModelParams, xis: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return eval_many(p, self, xis)


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def _invert_lambda1(p: ModelParams, wave: Wave, xis: np.ndarray) -> np.ndarray:
    """Vectorised bisection for L'_w(rho) = xi along a rarefaction."""
    lo = np.full(xis.shape, wave.left.rho)
    hi = np.full(xis.shape, wave.right.rho)
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        below = _lax_d1(p, wave.w, mid) < xis
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


def rarefaction_state(p: ModelParams, wave: Wave, xi: float) -> State:
    rho = float(_invert_lambda1(p, wave, np.array([xi]))[0])
    return State(rho, wave.w * rho)


def eval_fan(p: ModelParams, fan: WaveFan, xi: float, side: TraceSide = "-") -> State:
    """
    State of the fan at xi = x/t.

    Args:
        p: Model parameters
        fan: Wave fan
        xi: Self-similar coordinate
        side: Which trace to return when xi sits exactly on a jump

    Returns:
        State at xi
    """
    tol = settings.speed_tol
    state = fan.left_state
    for wave in fan.waves:
        if wave.is_rarefaction:
            if xi < wave.speed_lo:
                return state
            if xi > wave.speed_hi:
                state = wave.right
                continue
            return rarefaction_state(p, wave, xi)
        if xi < wave.speed - tol or (abs(xi - wave.speed) <= tol and side == "-"):
            return state
        state = wave.right
    return state


def eval_many(p: ModelParams, fan: WaveFan, xis: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorised evaluation; returns (rho, q) arrays."""
    xis = np.asarray(xis, dtype=float)
    rho = np.full(xis.shape, fan.left_state.rho)
    q = np.full(xis.shape, fan.left_state.q)
    for wave in fan.waves:
        if wave.is_rarefaction:
            inside = (xis >= wave.speed_lo) & (xis <= wave.speed_hi)
            after = xis > wave.speed_hi
            if inside.any():
                r = _invert_lambda1(p, wave, xis[inside])
                rho[inside] = r
                q[inside] = wave.w * r
        else:
            after = xis > wave.speed
        rho[after] = wave.right.rho
        q[after] = wave.right.q
    return rho, q


def trace_flux(p: ModelParams, fan: WaveFan, xi: float = 0.0) -> Tuple[float, float]:
    """Fluxes f(u(xi-)) and f(u(xi+))."""
    return flux(p, eval_fan(p, fan, xi, "-")), flux(p, eval_fan(p, fan, xi, "+"))


# ---------------------------------------------------------------------------
# Admissibility
# ---------------------------------------------------------------------------

class AdmissibilityReport(BaseModel):
    passed: bool
    violations: List[str] = []


def check_admissible(p: ModelParams, fan: WaveFan, rh_tol: float = 1e-10) -> AdmissibilityReport:
    """Check chaining, speed order, jump conditions and Lax inequalities."""
    violations: List[str] = []
    chain_tol = 1e-10
    speed_tol = 1e-9

    previous = fan.left_state
    for k, wave in enumerate(fan.waves):
        if state_distance(previous, wave.left) > chain_tol:
            violations.append(f"wave {k}: left state does not chain")
        previous = wave.right
    if state_distance(previous, fan.right_state) > chain_tol:
        violations.append("last wave does not end at right_state")

    for k in range(1, len(fan.waves)):
        if fan.waves[k].speed_lo < fan.waves[k - 1].speed_hi - speed_tol:
            violations.append(f"waves {k - 1},{k}: speeds decrease")

    has_gate = any(w.kind is WaveKind.STATIONARY_JUMP for w in fan.waves)
    if not has_gate and fan.count(WaveKind.PHASE_TRANSITION) > 1:
        violations.append("more than one phase transition")

    for k, wave in enumerate(fan.waves):
        if wave.is_rarefaction:
            if abs(wave.speed_lo - lambda1(p, wave.left)) > speed_tol or \
                    abs(wave.speed_hi - lambda1(p, wave.right)) > speed_tol:
                violations.append(f"wave {k}: rarefaction speeds are not lambda_1 of its ends")
            if wave.speed_lo > wave.speed_hi + speed_tol:
                violations.append(f"wave {k}: rarefaction fan is inverted")
            if abs(marker(p, wave.left) - marker(p, wave.right)) > chain_tol:
                violations.append(f"wave {k}: rarefaction ends on different Lax curves")
            continue

        residual = wave.speed * (wave.right.rho - wave.left.rho) - (flux(p, wave.right) - flux(p, wave.left))
        if abs(residual) > rh_tol:
            violations.append(f"wave {k}: Rankine-Hugoniot residual {residual:.3g}")

        if wave.kind is WaveKind.STATIONARY_JUMP and abs(wave.speed) > speed_tol:
            violations.append(f"wave {k}: stationary jump moves at {wave.speed:.3g}")
        if wave.kind is WaveKind.SHOCK1:
            if not lambda1(p, wave.left) + speed_tol >= wave.speed >= lambda1(p, wave.right) - speed_tol:
                violations.append(f"wave {k}: 1-shock violates the Lax inequalities")
        if wave.kind is WaveKind.PHASE_TRANSITION:
            if classify(p, wave.left).phases & classify(p, wave.right).phases:
                violations.append(f"wave {k}: phase transition inside one phase")

    return AdmissibilityReport(passed=not violations, violations=violations)


# ---------------------------------------------------------------------------
# Total variation
# ---------------------------------------------------------------------------

def coordinate(p: ModelParams, u: State, coord: Coord) -> float:
    return velocity(p, u) if coord == "v" else marker(p, u)


def tv_of(p: ModelParams, fan: WaveFan, coord: Coord) -> float:
    """Total variation of v or w along the fan; rarefactions are monotone in v and flat in w."""
    total = 0.0
    for wave in fan.waves:
        if wave.is_rarefaction and coord == "w":
            continue
        total += abs(coordinate(p, wave.right, coord) - coordinate(p, wave.left, coord))
    return total


# ---------------------------------------------------------------------------
# Profiles, L1 distances, weak residual
# ---------------------------------------------------------------------------

class GluedProfile:
    """first(xi) for xi < cut, second(xi) for xi >= cut."""

    def __init__(self, first, second, cut: float):
        self.first = first
        self.second = second
        self.cut = cut

    def eval_many(self, p: ModelParams, xis: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        r1, q1 = self.first.eval_many(p, xis)
        r2, q2 = self.second.eval_many(p, xis)
        left = xis < self.cut
        return np.where(left, r1, r2), np.where(left, q1, q2)

    def breakpoints(self) -> List[float]:
        return self.first.breakpoints() + self.second.breakpoints() + [self.cut]


def _panels(points: Sequence[float], lo: float, hi: float) -> List[Tuple[float, float]]:
    cuts = sorted({lo, hi, *(x for x in points if lo < x < hi)})
    return [(a, b) for a, b in zip(cuts[:-1], cuts[1:]) if b - a > 1e-14]


def l1_distance(p: ModelParams, first, second, lo: float, hi: float, n_gauss: int = 12) -> float:
    """
    Integral over [lo, hi] of |rho_1 - rho_2| + |q_1 - q_2| in xi.

    Both profiles are split at their breakpoints, so each Gauss-Legendre panel
    sees a smooth integrand.
    """
    nodes, weights = leggauss(n_gauss)
    total = 0.0
    for a, b in _panels(first.breakpoints() + second.breakpoints(), lo, hi):
        xs = 0.5 * (b - a) * nodes + 0.5 * (a + b)
        r1, q1 = first.eval_many(p, xs)
        r2, q2 = second.eval_many(p, xs)
        total += 0.5 * (b - a) * float(np.dot(weights, np.abs(r1 - r2) + np.abs(q1 - q2)))
    return total


def _bump(s: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """C-infinity bump exp(-1/(1-s^2)) on (-1, 1) and its derivative."""
    inside = np.abs(s) < 1.0
    s_in = np.where(inside, s, 0.0)
    denom = 1.0 - s_in ** 2
    b = np.where(inside, np.exp(-1.0 / denom), 0.0)
    db = np.where(inside, b * (-2.0 * s_in / denom ** 2), 0.0)
    return b, db


def _composite(lo: float, hi: float, breaks: Sequence[float], n_panels: int, n_gauss: int):
    nodes, weights = leggauss(n_gauss)
    xs, ws = [], []
    for a, b in _panels(breaks, lo, hi):
        edges = np.linspace(a, b, n_panels + 1)
        for c, d in zip(edges[:-1], edges[1:]):
            xs.append(0.5 * (d - c) * nodes + 0.5 * (c + d))
            ws.append(0.5 * (d - c) * weights)
    return np.concatenate(xs), np.concatenate(ws)


def weak_residual(
    p: ModelParams,
    fan: WaveFan,
    n_tests: int = 50,
    seed: int = 0,
    n_panels: int = 6,
    n_gauss: int = 16,
) -> Tuple[float, Optional[float]]:
    """
    Weak-form residuals of the fan against random bump test functions.

    Returns:
        (max |rho residual|, max |q residual| or None when the fan carries a
        phase transition or a stationary jump, across which q is not conserved)
    """
    rng = np.random.default_rng(seed)
    check_q = not any(w.kind in (WaveKind.PHASE_TRANSITION, WaveKind.STATIONARY_JUMP) for w in fan.waves)
    speeds = fan.breakpoints()
    reach = 1.0 + max((abs(s) for s in speeds), default=0.0)

    worst_rho, worst_q = 0.0, 0.0
    for _ in range(n_tests):
        t0 = rng.uniform(0.8, 2.0)
        ht = rng.uniform(0.2, 0.5) * t0
        x0 = rng.uniform(-reach * t0, reach * t0)
        hx = rng.uniform(0.3, 1.5)

        ts, wts = _composite(t0 - ht, t0 + ht, [], n_panels, n_gauss)
        bt, dbt = _bump((ts - t0) / ht)
        res_rho, res_q = 0.0, 0.0
        for t, wt, b_t, db_t in zip(ts, wts, bt, dbt):
            xs, wxs = _composite(x0 - hx, x0 + hx, [s * t for s in speeds], n_panels, n_gauss)
            rho, q = eval_many(p, fan, xs / t)
            v = velocity_many(p, rho, q)
            bx, dbx = _bump((xs - x0) / hx)
            phi_t = bx * db_t / ht
            phi_x = dbx * b_t / hx
            res_rho += wt * float(np.dot(wxs, rho * phi_t + rho * v * phi_x))
            if check_q:
                res_q += wt * float(np.dot(wxs, q * phi_t + q * v * phi_x))
        worst_rho = max(worst_rho, abs(res_rho))
        worst_q = max(worst_q, abs(res_q))
    return worst_rho, (worst_q if check_q else None)


# ---------------------------------------------------------------------------
# Text records
# ---------------------------------------------------------------------------

RECORD_HEADER = "kind speed_lo speed_hi rho_left q_left rho_right q_right"


def _g(x: float) -> str:
    return f"{x:.17g}"


def to_record(fan: WaveFan) -> str:
    """One wave per line, numbers with 17 significant digits."""
    lines = [RECORD_HEADER]
    for wave in fan.waves:
        lines.append(" ".join([
            wave.kind.value, _g(wave.speed_lo), _g(wave.speed_hi),
            _g(wave.left.rho), _g(wave.left.q), _g(wave.right.rho), _g(wave.right.q),
        ]))
    return "\n".join(lines) + "\n"


def from_record(text: str) -> WaveFan:
    """Parse a record written by to_record."""
    waves = []
    for line in text.strip().splitlines()[1:]:
        kind, lo, hi, rl, ql, rr, qr = line.split()
        left, right = State(float(rl), float(ql)), State(float(rr), float(qr))
        w = left.q / left.rho if kind == WaveKind.RAREFACTION1.value else None
        waves.append(Wave(kind=WaveKind(kind), left=left, right=right,
                          speed_lo=float(lo), speed_hi=float(hi), w=w))
    if not waves:
        raise ValueError("Record holds no waves; constant fans need their state")
    return WaveFan.from_waves(waves[0].left, waves[-1].right, waves)
