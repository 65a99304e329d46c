"""
Constrained Riemann Solvers
===========================

Purpose: Riemann solvers R_F and S_F enforcing f(u(t, 0+-)) <= F at a gate
placed at x = 0.

Data pairs split in two sets: D1, where the unconstrained solution already
respects the capacity F, and D2, where the solution is rebuilt around a
stationary undercompressive jump u_hat -> u_check at x = 0.
"""

import logging
from enum import Enum
from typing import List, Optional, Tuple

from pydantic import BaseModel, ConfigDict
from scipy.optimize import brentq

from phase_traffic.core.config import settings
from phase_traffic.core.errors import DomainError, InvariantViolation, UsageError
from phase_traffic.pipeline.phase_model import (
    ModelParams,
    PhaseClass,
    State,
    _lax_value,
    canonical,
    classify,
    curve_state,
    flux,
    free_state,
    marker,
    psi1,
    psi2,
    rho1_0,
    rho_for_velocity,
    state_distance,
    state_from_rho_velocity,
    u_minus_c,
    u_star,
    velocity,
)
from phase_traffic.pipeline.riemann import _solve_r, solve_S
from phase_traffic.pipeline.wavefan import Wave, WaveFan, WaveKind, jump, trace_flux

logger = logging.getLogger(__name__)


class SolverFamily(str, Enum):
    R = "R"
    S = "S"


class DClass(str, Enum):
    D1 = "D1"
    D2 = "D2"


class Constraint(BaseModel):
    """Gate capacity F in (0, V_f sigma_+^f)."""

    model_config = ConfigDict(frozen=True)

    F: float

    def check(self, p: ModelParams) -> "Constraint":
        if not 0.0 < self.F < p.V_f * p.sigma_f_plus:
            raise DomainError(f"Capacity F={self.F} outside (0, {p.V_f * p.sigma_f_plus:.6g})")
        return self


class ConstrainedSplit(BaseModel):
    """Solution of a constrained Riemann problem; `fan` is the full self-similar profile."""

    model_config = ConfigDict(frozen=True)

    family: SolverFamily
    F: float
    classification: DClass
    u_hat: Optional[State] = None
    u_check: Optional[State] = None
    left_fan: WaveFan
    right_fan: WaveFan
    fan: WaveFan


def _family_for(p: ModelParams, family: SolverFamily) -> None:
    if family is SolverFamily.R and not p.intersecting:
        raise UsageError("R_F needs V_f == V_c; use the intersecting counterpart of the model")
    if family is SolverFamily.S and p.intersecting:
        raise UsageError("S_F needs V_c < V_f")


def _unconstrained(p: ModelParams, u_l: State, u_r: State, family: SolverFamily) -> WaveFan:
    if family is SolverFamily.R:
        return _solve_r(p, u_l, u_r, p.V_f)
    return solve_S(p, u_l, u_r)


# ---------------------------------------------------------------------------
# D1 / D2
# ---------------------------------------------------------------------------

def gate_flux_estimate(p: ModelParams, u_l: State, u_r: State, family: SolverFamily) -> float:
    """
    Flux the unconstrained solution carries through x = 0, from the closed-form
    D1 sets. (u_l, u_r) is in D1 exactly when this is <= F.
    """
    cl, cr = classify(p, u_l), classify(p, u_r)
    if cl.is_free and cr.is_free:
        return flux(p, u_l)

    if family is SolverFamily.R:
        if not cl.is_free_minus and not cr.is_free_minus:
            return flux(p, u_star(p, u_l, u_r))
        if not cl.is_free_minus:
            return flux(p, curve_state(p, marker(p, u_l), p.V_f))
        return min(flux(p, u_l), flux(p, psi2(p, u_r, "-")))

    if cl is PhaseClass.CONGESTED_ONLY and cr is PhaseClass.CONGESTED_ONLY:
        return flux(p, u_star(p, u_l, u_r))
    if cl is PhaseClass.CONGESTED_ONLY:
        return flux(p, psi1(p, u_l, "f"))
    if cl.is_free_minus:
        return min(flux(p, u_l), flux(p, psi2(p, u_r, "-")))
    return flux(p, u_star(p, u_l, u_r))


def classify_D(p: ModelParams, F: float, u_l: State, u_r: State, solver: SolverFamily) -> DClass:
    """D1 if the unconstrained solution satisfies the constraint, D2 otherwise."""
    u_l, u_r = canonical(p, u_l), canonical(p, u_r)
    return DClass.D1 if gate_flux_estimate(p, u_l, u_r, solver) <= F else DClass.D2


def classify_D_by_traces(p: ModelParams, F: float, u_l: State, u_r: State, solver: SolverFamily) -> DClass:
    """Same classification read off the unconstrained fan at 0-/0+."""
    u_l, u_r = canonical(p, u_l), canonical(p, u_r)
    fan = _unconstrained(p, u_l, u_r, solver)
    f_minus, f_plus = trace_flux(p, fan, 0.0)
    return DClass.D1 if max(f_minus, f_plus) <= F + 1e-12 else DClass.D2


# ---------------------------------------------------------------------------
# u_hat / u_check
# ---------------------------------------------------------------------------

def _point_with_flux(p: ModelParams, w: float, target: float, v_top: float) -> State:
    """Point of the w curve with flux `target`, between v = v_top and v = 0."""
    lo = rho_for_velocity(p, w, v_top)
    hi = rho1_0(p, w)

    def g(rho: float) -> float:
        return _lax_value(p, w, rho) - target

    g_lo = g(lo)
    if abs(g_lo) <= 1e-10:
        return State(lo, w * lo)
    if g_lo < 0.0:
        raise InvariantViolation(
            f"Flux {target:.6g} exceeds the maximum {target + g_lo:.6g} of the w={w:.6g} curve",
            details={"w": w, "target": target},
        )
    # gate traces must match F to rounding
    rho = brentq(g, lo, hi, xtol=1e-15)
    return State(rho, w * rho)


def _select(p: ModelParams, F: float, u_l: State, u_r: State, family: SolverFamily) -> Tuple[State, State]:
    w_hat = max(marker(p, u_l), p.w_minus)
    if family is SolverFamily.R:
        target, v_top = F, p.V_f
    else:
        target = min(F, p.V_c * rho_for_velocity(p, w_hat, p.V_c))
        v_top = p.V_c
    u_hat = _point_with_flux(p, w_hat, target, v_top)

    v_r = velocity(p, u_r)
    if flux(p, psi2(p, u_r, "-")) > F or abs(v_r - p.V_f) <= settings.state_tol:
        u_check = free_state(p, target / p.V_f)
    else:
        u_check = state_from_rho_velocity(p, target / v_r, v_r)
    return u_hat, u_check


def select_hat_check_R(p: ModelParams, F: float, u_l: State, u_r: State) -> Tuple[State, State]:
    """u_hat on the max(w(u_l), w_-) curve with flux F; u_check with flux F and v = V or v_r."""
    _family_for(p, SolverFamily.R)
    return _select(p, F, canonical(p, u_l), canonical(p, u_r), SolverFamily.R)


def select_hat_check_S(p: ModelParams, F: float, u_l: State, u_r: State) -> Tuple[State, State]:
    """As R, with the flux capped at the congested maximum of the u_hat curve."""
    _family_for(p, SolverFamily.S)
    return _select(p, F, canonical(p, u_l), canonical(p, u_r), SolverFamily.S)


# ---------------------------------------------------------------------------
# Solvers
# ---------------------------------------------------------------------------

def _split_at_gate(fan: WaveFan) -> Tuple[List[Wave], List[Wave]]:
    tol = settings.speed_tol
    left = [w for w in fan.waves if w.speed_hi <= tol]
    right = [w for w in fan.waves if w.speed_hi > tol]
    return left, right


def _solve_constrained(p: ModelParams, F: float, u_l: State, u_r: State, family: SolverFamily) -> ConstrainedSplit:
    _family_for(p, family)
    Constraint(F=F).check(p)
    u_l, u_r = canonical(p, u_l), canonical(p, u_r)

    if gate_flux_estimate(p, u_l, u_r, family) <= F:
        fan = _unconstrained(p, u_l, u_r, family)
        left, right = _split_at_gate(fan)
        mid = left[-1].right if left else u_l
        return ConstrainedSplit(
            family=family, F=F, classification=DClass.D1,
            left_fan=WaveFan.from_waves(u_l, mid, left),
            right_fan=WaveFan.from_waves(mid, u_r, right),
            fan=fan,
        )

    u_hat, u_check = _select(p, F, u_l, u_r, family)
    if abs(flux(p, u_hat) - flux(p, u_check)) > 1e-10:
        raise InvariantViolation(
            f"Gate fluxes differ: f(u_hat)={flux(p, u_hat):.12g}, f(u_check)={flux(p, u_check):.12g}")
    left_fan = _unconstrained(p, u_l, u_hat, family)
    right_fan = _unconstrained(p, u_check, u_r, family)

    tol = 1e-9
    if left_fan.max_speed() > tol or right_fan.min_speed() < -tol:
        raise InvariantViolation(
            "Constrained fans cross the gate",
            details={"left_max": left_fan.max_speed(), "right_min": right_fan.min_speed()},
        )

    gate: List[Wave] = []
    if state_distance(u_hat, u_check) > settings.cull_tol:
        gate.append(jump(WaveKind.STATIONARY_JUMP, u_hat, u_check, 0.0))
    fan = WaveFan.from_waves(u_l, u_r, list(left_fan.waves) + gate + list(right_fan.waves))
    return ConstrainedSplit(
        family=family, F=F, classification=DClass.D2,
        u_hat=u_hat, u_check=u_check,
        left_fan=left_fan, right_fan=right_fan, fan=fan,
    )


def solve_RF(p: ModelParams, F: float, u_l: State, u_r: State) -> ConstrainedSplit:
    """Constrained solver built on R (intersecting phases)."""
    return _solve_constrained(p, F, u_l, u_r, SolverFamily.R)


def solve_SF(p: ModelParams, F: float, u_l: State, u_r: State) -> ConstrainedSplit:
    """Constrained solver built on S (non-intersecting phases)."""
    return _solve_constrained(p, F, u_l, u_r, SolverFamily.S)


def solve_constrained(p: ModelParams, F: float, u_l: State, u_r: State) -> ConstrainedSplit:
    return solve_RF(p, F, u_l, u_r) if p.intersecting else solve_SF(p, F, u_l, u_r)


def sf_selection_differs(p: ModelParams, F: float, u_l: State, u_r: State) -> Optional[str]:
    """
    Name of the D2 family where S_F caps the gate flux below F, else None.

    On these pairs f(u_hat) = f(u_check) < F and v(u_hat) = V_c.
    """
    cl, cr = classify(p, u_l), classify(p, u_r)
    if not cr.is_free or p.intersecting:
        return None
    f_l = flux(p, u_l)
    if cl.is_free_minus and flux(p, u_minus_c(p)) < F < f_l:
        return "free_minus_to_free"
    if cl is PhaseClass.FREE_PLUS and flux(p, psi1(p, u_l, "c")) < F < f_l:
        return "free_plus_to_free"
    if cl is PhaseClass.CONGESTED_ONLY and flux(p, psi1(p, u_l, "c")) < F < flux(p, psi1(p, u_l, "f")):
        return "congested_to_free"
    return None
