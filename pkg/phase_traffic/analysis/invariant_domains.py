"""
Invariant Domains
=================

Purpose: Membership in the invariant domains of the constrained solvers and
sampled closure / minimality checks.

Handles:
- I_f = Omega_f u I_1 u I_2, the smallest domain containing Omega_f
- I_c, the smallest domain containing Omega_c (R and S families)
- closure: every state attained by the solver on pairs of the domain is a member
- generators: pair families whose solutions force the domain to be at least I_f / I_c
"""

import logging
from enum import Enum
from typing import Callable, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict

from phase_traffic.analysis.sampling import (
    above_capacity,
    rng_for,
    sample_congested,
    sample_free,
    sample_state,
)
from phase_traffic.core.errors import PhaseTrafficError, UsageError
from phase_traffic.pipeline.constrained import _point_with_flux
from phase_traffic.pipeline.phase_model import (
    ModelParams,
    State,
    Variant,
    _lax_d2,
    classify,
    curve_state,
    flux,
    free_state,
    in_domain,
    psi2,
    state_distance,
    u_minus_c,
    velocity,
)
from phase_traffic.pipeline.wavefan import WaveFan

logger = logging.getLogger(__name__)

MEMBER_TOL = 1e-9
RAREFACTION_SAMPLES = 17

Solver = Callable[[State, State], WaveFan]


class DomainKind(str, Enum):
    I_F = "If"
    I_C_R = "Ic_R"
    I_C_S = "Ic_S"
    OMEGA_F = "OmegaF"
    OMEGA_C = "OmegaC"
    CUSTOM = "Custom"


class DomainSpec(BaseModel):
    """A subset of Omega; CUSTOM domains carry their own membership predicate."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    kind: DomainKind
    F: Optional[float] = None
    predicate: Optional[Callable[[State], bool]] = None
    label: str = ""

    @classmethod
    def invariant_free(cls, F: float) -> "DomainSpec":
        return cls(kind=DomainKind.I_F, F=F)

    @classmethod
    def invariant_congested(cls, p: ModelParams, F: float) -> "DomainSpec":
        return cls(kind=DomainKind.I_C_R if p.intersecting else DomainKind.I_C_S, F=F)

    @classmethod
    def custom(cls, predicate: Callable[[State], bool], label: str = "") -> "DomainSpec":
        return cls(kind=DomainKind.CUSTOM, predicate=predicate, label=label)


def gate_point(p: ModelParams, F: float) -> State:
    """(F/V, Q(F/V)): where the level set f = F meets the free curve."""
    return free_state(p, F / p.V_f)


def _in_i1(p: ModelParams, F: float, u: State) -> bool:
    return flux(p, u) <= F + MEMBER_TOL and F <= flux(p, psi2(p, u, "+")) + MEMBER_TOL


def _in_i2(p: ModelParams, F: float, u: State) -> bool:
    if p.variant is Variant.PTP:
        return False
    return flux(p, u) > F and float(_lax_d2(p, u.q / u.rho, u.rho)) > 0.0


def member(p: ModelParams, F: Optional[float], spec: DomainSpec, u: State) -> bool:
    """
    Whether u belongs to the domain described by spec.

    States outside Omega are never members.
    """
    if spec.kind is DomainKind.CUSTOM:
        return bool(spec.predicate(u))
    if not in_domain(p, u):
        return False
    phase = classify(p, u)
    F = spec.F if spec.F is not None else F

    if spec.kind is DomainKind.OMEGA_F:
        return phase.is_free
    if spec.kind is DomainKind.OMEGA_C:
        return phase.is_congested
    if spec.kind is DomainKind.I_F:
        if phase.is_free:
            return True
        return _in_i1(p, F, u) or _in_i2(p, F, u)

    if phase.is_congested:
        return True
    point = gate_point(p, F)
    if spec.kind is DomainKind.I_C_R:
        return state_distance(u, point) <= MEMBER_TOL
    if spec.kind is DomainKind.I_C_S:
        return F < flux(p, u_minus_c(p)) and state_distance(u, point) <= MEMBER_TOL
    raise UsageError(f"Unknown domain kind {spec.kind}")


# ---------------------------------------------------------------------------
# Attained states and sampling inside a domain
# ---------------------------------------------------------------------------

def attained_states(p: ModelParams, fan: WaveFan, n_interior: int = RAREFACTION_SAMPLES) -> List[State]:
    """Constant states of the fan plus interior points of each rarefaction."""
    states = list(fan.states())
    for wave in fan.waves:
        if not wave.is_rarefaction:
            continue
        v_a, v_b = velocity(p, wave.left), velocity(p, wave.right)
        for k in range(1, n_interior + 1):
            states.append(curve_state(p, wave.w, v_a + (v_b - v_a) * k / (n_interior + 1)))
    return states


def sample_in(p: ModelParams, F: float, spec: DomainSpec, rng: np.random.Generator, max_tries: int = 200) -> Optional[State]:
    """Rejection sample of a member; the isolated gate point is drawn on purpose."""
    if spec.kind in (DomainKind.I_C_R, DomainKind.I_C_S) and rng.uniform() < 0.1:
        point = gate_point(p, F)
        if member(p, F, spec, point):
            return point
    for _ in range(max_tries):
        u = sample_state(p, rng)
        if member(p, F, spec, u):
            return u
    return None


class Violation(BaseModel):
    u_l: State
    u_r: State
    state: State


class ClosureReport(BaseModel):
    domain: str
    n_pairs: int
    n_states: int
    closed: bool
    violations: List[Violation] = []
    errors: List[str] = []

    def distinct_violators(self, tol: float = 1e-9) -> List[State]:
        out: List[State] = []
        for v in self.violations:
            if all(state_distance(v.state, s) > tol for s in out):
                out.append(v.state)
        return out


def closure_test(
    p: ModelParams,
    F: float,
    spec: DomainSpec,
    solver: Solver,
    n_samples: int = 1000,
    seed: int = 0,
    max_violations: int = 50,
) -> ClosureReport:
    """Sample pairs of the domain, solve them and check every attained state."""
    violations: List[Violation] = []
    errors: List[str] = []
    n_pairs = n_states = 0
    for i in range(n_samples):
        rng = rng_for(seed, i)
        u_l, u_r = sample_in(p, F, spec, rng), sample_in(p, F, spec, rng)
        if u_l is None or u_r is None:
            continue
        try:
            fan = solver(u_l, u_r)
        except PhaseTrafficError as e:
            errors.append(f"pair {i}: {e}")
            continue
        n_pairs += 1
        for u in attained_states(p, fan):
            n_states += 1
            if not member(p, F, spec, u) and len(violations) < max_violations:
                violations.append(Violation(u_l=u_l, u_r=u_r, state=u))
    if n_pairs == 0:
        logger.warning(f"Closure test on {spec.kind.value}: no pair sampled")
    report = ClosureReport(
        domain=spec.label or spec.kind.value, n_pairs=n_pairs, n_states=n_states,
        closed=not violations and not errors, violations=violations, errors=errors,
    )
    logger.info(f"{'✅' if report.closed else '❌'} Closure of {report.domain}: "
                f"{n_pairs} pairs, {len(violations)} violations")
    return report


# ---------------------------------------------------------------------------
# Minimality
# ---------------------------------------------------------------------------

def _level_state(p: ModelParams, w: float, F: float) -> Optional[State]:
    """Congested state on the w curve with flux F, if there is one."""
    try:
        u = _point_with_flux(p, w, F, p.V_c)
    except PhaseTrafficError:
        return None
    return u if classify(p, u).is_congested else None


def minimality_generators(
    p: ModelParams,
    F: float,
    family: str,
    n: int = 50,
    seed: int = 0,
) -> List[Tuple[State, State]]:
    """
    Pairs whose constrained solutions any invariant domain containing Omega_f
    (family "If") or Omega_c (family "Ic") must absorb.

    If: free pairs with f(u_l) > F; congested pairs on the level f = F with
    v(u_l) > v(u_r); and, when F > V sigma_-, pairs of Omega_f^+ x Omega_c with
    f(u_l) <= F = f(u_r).
    Ic: congested pairs with f(psi_2^-(u_r)) > F; empty when F >= V sigma_-
    (R) or F >= f(u_-^c) (S).
    """
    pairs: List[Tuple[State, State]] = []
    if family == "If":
        for i in range(n):
            rng = rng_for(seed, i)
            pairs.append((above_capacity(p, rng, F), sample_free(p, rng)))
        for i in range(n):
            rng = rng_for(seed + 1, i)
            a = _level_state(p, float(rng.uniform(p.w_minus, p.w_plus)), F)
            b = _level_state(p, float(rng.uniform(p.w_minus, p.w_plus)), F)
            if a is None or b is None or abs(velocity(p, a) - velocity(p, b)) < 1e-9:
                continue
            pairs.append((a, b) if velocity(p, a) > velocity(p, b) else (b, a))
        if F > p.V_f * p.sigma_minus:
            for i in range(n):
                rng = rng_for(seed + 2, i)
                rho = float(rng.uniform(p.sigma_f_minus, min(F / p.V_f, p.sigma_f_plus)))
                u_l = free_state(p, rho)
                u_r = _level_state(p, float(rng.uniform(p.w_minus, p.w_plus)), F)
                if u_r is not None and classify(p, u_l).is_free_plus:
                    pairs.append((u_l, u_r))
        return pairs

    if family == "Ic":
        threshold = p.V_f * p.sigma_minus if p.intersecting else flux(p, u_minus_c(p))
        if F >= threshold:
            return pairs
        for i in range(n):
            rng = rng_for(seed, i)
            for _ in range(50):
                u_r = sample_congested(p, rng)
                if flux(p, psi2(p, u_r, "-")) > F:
                    pairs.append((sample_congested(p, rng), u_r))
                    break
        return pairs

    raise UsageError(f"Unknown generator family {family!r}; expected 'If' or 'Ic'")


class PuncturedCheck(BaseModel):
    """Removing one generated state from the domain breaks closure."""

    point: State
    inputs_still_members: bool
    closure_broken: bool


def punctured_check(
    p: ModelParams,
    F: float,
    spec: DomainSpec,
    solver: Solver,
    pairs: List[Tuple[State, State]],
    radius: float = 1e-7,
    limit: int = 10,
) -> List[PuncturedCheck]:
    """For a few generator pairs, puncture the domain at one produced state and re-test the pair."""
    checks: List[PuncturedCheck] = []
    for u_l, u_r in pairs:
        if len(checks) >= limit:
            break
        attained = attained_states(p, solver(u_l, u_r))
        produced = [u for u in attained
                    if state_distance(u, u_l) > radius and state_distance(u, u_r) > radius]
        if not produced:
            continue
        hole = produced[0]

        def punctured(u: State, hole: State = hole) -> bool:
            return member(p, F, spec, u) and state_distance(u, hole) > radius

        domain = DomainSpec.custom(punctured, label=f"{spec.kind.value} minus {hole}")
        inputs_ok = member(p, F, domain, u_l) and member(p, F, domain, u_r)
        broken = any(not member(p, F, domain, u) for u in attained)
        checks.append(PuncturedCheck(point=hole, inputs_still_members=inputs_ok, closure_broken=broken))
    return checks
