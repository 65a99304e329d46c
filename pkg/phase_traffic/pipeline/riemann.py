"""
Riemann Solvers
===============

Purpose: Exact solvers for the two-phase models without constraint.

- solve_R: intersecting phases (V_f == V_c); the free branch of the congested
  domain is handled as congested.
- solve_S: non-intersecting phases (V_c < V_f); differs from R only on three
  families of data (see s_differs_from_r) and delegates to R elsewhere.

The R construction is written for an arbitrary reference speed V so that S can
reuse it with V = V_f.
"""

import logging
from typing import List, Optional

from pydantic import BaseModel, ConfigDict
from scipy.optimize import brentq

from phase_traffic.core.config import settings
from phase_traffic.core.errors import InfeasibleError, UsageError
from phase_traffic.pipeline.phase_model import (
    ModelParams,
    PhaseClass,
    State,
    _lax_d2,
    canonical,
    classify,
    curve_state,
    lambda1,
    marker,
    psi1,
    psi2,
    rh_speed,
    rho_for_velocity,
    state_distance,
    u_minus_c,
    u_star,
    velocity,
)
from phase_traffic.pipeline.wavefan import Wave, WaveFan, WaveKind, labelled_jump, rarefaction

logger = logging.getLogger(__name__)


class RiemannProblem(BaseModel):
    model_config = ConfigDict(frozen=True)

    u_left: State
    u_right: State


def one_wave(p: ModelParams, a: State, b: State) -> List[Wave]:
    """
    First-family wave between two states of one Lax curve.

    The type follows Lax admissibility: equal characteristic speeds give a
    contact, decreasing speeds a 1-shock, increasing speeds a rarefaction.
    """
    if state_distance(a, b) <= settings.cull_tol:
        return []
    la, lb = lambda1(p, a), lambda1(p, b)
    if abs(la - lb) <= settings.speed_tol * max(1.0, abs(la)):
        return [labelled_jump(p, WaveKind.CONTACT, a, b)]
    if la > lb:
        return [labelled_jump(p, WaveKind.SHOCK1, a, b)]
    return [rarefaction(p, a, b)]


def _second_contact(p: ModelParams, a: State, b: State) -> List[Wave]:
    if state_distance(a, b) <= settings.cull_tol:
        return []
    return [labelled_jump(p, WaveKind.CONTACT, a, b, speed=velocity(p, b))]


def _free_contact(p: ModelParams, a: State, b: State, V: float) -> List[Wave]:
    if state_distance(a, b) <= settings.cull_tol:
        return []
    return [labelled_jump(p, WaveKind.CONTACT, a, b, speed=V)]


def lax_congested(p: ModelParams, u_l: State, u_r: State) -> WaveFan:
    """1-wave from u_l to u_*(u_l, u_r) followed by a 2-contact at v(u_r)."""
    u_l, u_r = canonical(p, u_l), canonical(p, u_r)
    return WaveFan.from_waves(u_l, u_r, _lax_waves(p, u_l, u_r))


def _lax_waves(p: ModelParams, u_l: State, u_r: State) -> List[Wave]:
    mid = u_star(p, u_l, u_r)
    return one_wave(p, u_l, mid) + _second_contact(p, mid, u_r)


def tangency_state(p: ModelParams, u_l: State, u_r: State, V: float) -> State:
    """
    State u_p on the w_- curve with Lambda(u_l, u_p) = lambda_1(u_p).

    The root is bracketed between the point of the w_- curve moving at V and
    psi_2^-(u_r).
    """
    w = p.w_minus
    lo = rho_for_velocity(p, w, V)
    hi = psi2(p, u_r, "-").rho

    def g(rho: float) -> float:
        u = State(rho, w * rho)
        return rh_speed(p, u_l, u) - lambda1(p, u)

    g_lo, g_hi = g(lo), g(hi)
    if g_lo == 0.0:
        return State(lo, w * lo)
    if g_lo * g_hi > 0.0:
        raise InfeasibleError(
            f"No tangency state between rho={lo:.6g} and rho={hi:.6g}",
            details={"g_lo": g_lo, "g_hi": g_hi},
        )
    rho = brentq(g, lo, hi, xtol=settings.root_tol)
    return State(rho, w * rho)


def _solve_r(p: ModelParams, u_l: State, u_r: State, V: float) -> WaveFan:
    """R with reference speed V; states must already be canonical."""
    cl, cr = classify(p, u_l), classify(p, u_r)

    if cl.is_free and cr.is_free:
        waves = _free_contact(p, u_l, u_r, V)
    elif not cl.is_free_minus and not cr.is_free_minus:
        waves = _lax_waves(p, u_l, u_r)
    elif not cl.is_free_minus:
        # congested into the low-density free branch
        top = curve_state(p, marker(p, u_l), V)
        waves = one_wave(p, u_l, top) + _free_contact(p, top, u_r, V)
    else:
        m = psi2(p, u_r, "-")
        if rh_speed(p, u_l, m) >= lambda1(p, m):
            waves = [labelled_jump(p, WaveKind.PHASE_TRANSITION, u_l, m)] + _second_contact(p, m, u_r)
        else:
            up = tangency_state(p, u_l, u_r, V)
            waves = ([labelled_jump(p, WaveKind.PHASE_TRANSITION, u_l, up)]
                     + one_wave(p, up, m) + _second_contact(p, m, u_r))
    return WaveFan.from_waves(u_l, u_r, waves)


def solve_R(p: ModelParams, u_l: State, u_r: State) -> WaveFan:
    """Riemann solver for the intersecting-phase model."""
    if not p.intersecting:
        raise UsageError("solve_R needs V_f == V_c; use solve_S for V_c < V_f")
    return _solve_r(p, canonical(p, u_l), canonical(p, u_r), p.V_f)


def _curvature(p: ModelParams, u: State) -> float:
    return float(_lax_d2(p, u.q / u.rho, u.rho))


def s_differs_from_r(p: ModelParams, u_l: State, u_r: State) -> Optional[str]:
    """Name of the data family where S departs from R (with V = V_f), else None."""
    cl, cr = classify(p, u_l), classify(p, u_r)
    if cl is PhaseClass.CONGESTED_ONLY and cr.is_free and _curvature(p, u_l) < 0.0:
        return "congested_to_free_concave"
    if cl is PhaseClass.FREE_PLUS and cr is PhaseClass.CONGESTED_ONLY and _curvature(p, u_l) > 0.0:
        return "free_plus_to_congested_convex"
    if cl.is_free_minus and cr is PhaseClass.CONGESTED_ONLY:
        uc = u_minus_c(p)
        if rh_speed(p, u_l, uc) < lambda1(p, uc):
            return "free_minus_to_congested_fast"
    return None


def solve_S(p: ModelParams, u_l: State, u_r: State) -> WaveFan:
    """Riemann solver for the non-intersecting-phase model."""
    if p.intersecting:
        raise UsageError("solve_S needs V_c < V_f; use solve_R for V_f == V_c")
    u_l, u_r = canonical(p, u_l), canonical(p, u_r)
    case = s_differs_from_r(p, u_l, u_r)
    V = p.V_f

    if case == "congested_to_free_concave":
        low, high = psi1(p, u_l, "c"), psi1(p, u_l, "f")
        waves = (_solve_r(p, u_l, low, V).waves
                 + (labelled_jump(p, WaveKind.PHASE_TRANSITION, low, high),)
                 + _solve_r(p, high, u_r, V).waves)
    elif case == "free_minus_to_congested_fast":
        uc = u_minus_c(p)
        waves = (labelled_jump(p, WaveKind.PHASE_TRANSITION, u_l, uc),) + _solve_r(p, uc, u_r, V).waves
    elif case == "free_plus_to_congested_convex":
        low = psi1(p, u_l, "c")
        waves = (labelled_jump(p, WaveKind.PHASE_TRANSITION, u_l, low),) + _solve_r(p, low, u_r, V).waves
    else:
        return _solve_r(p, u_l, u_r, V)
    return WaveFan.from_waves(u_l, u_r, waves)


def solve(p: ModelParams, u_l: State, u_r: State) -> WaveFan:
    """R or S, whichever matches the model."""
    return solve_R(p, u_l, u_r) if p.intersecting else solve_S(p, u_l, u_r)


def solve_problem(p: ModelParams, problem: RiemannProblem) -> WaveFan:
    return solve(p, canonical(p, problem.u_left), canonical(p, problem.u_right))
