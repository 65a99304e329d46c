"""
Two-Phase Traffic Model
=======================

Purpose: Parameters, phase domains and state geometry for the PTa and PTp
two-phase traffic models.

A state is u = (rho, q). The free phase is the curve q = Q(rho) on which every
vehicle moves at V_f; the congested phase is a 2x2 system bounded by the
velocity V_c and the markers w_- <= q/rho <= w_+. Everything here is a pure
function of a frozen ModelParams, so the module is safe to share across threads.

Handles:
- velocity / flux / Lagrangian marker laws for both variants
- first-family Lax curves L_w and their derivatives
- helper maps psi1, psi2, u_star and the Rankine-Hugoniot speed
- phase classification and hypothesis validation (P), (H1), (H2)
"""

import logging
import math
from enum import Enum
from typing import Any, Dict, List, Literal, NamedTuple, Optional, Protocol, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, ValidationError
from scipy.optimize import brentq

from phase_traffic.core.config import settings
from phase_traffic.core.errors import (
    ConfigError,
    DegenerateJumpError,
    DomainError,
    InfeasibleError,
)

logger = logging.getLogger(__name__)

Level = Literal["f", "c"]
Side = Literal["-", "+"]


class Variant(str, Enum):
    PTA = "PTa"
    PTP = "PTp"


class State(NamedTuple):
    """Point of the (density, linearized momentum) plane."""

    rho: float
    q: float


class PhaseClass(str, Enum):
    """Phase membership of a state."""

    FREE_MINUS = "FreeMinus"
    FREE_PLUS = "FreePlus"
    CONGESTED_ONLY = "CongestedOnly"
    CONGESTED_AND_FREE = "CongestedAndFree"
    VACUUM = "Vacuum"

    @property
    def is_free(self) -> bool:
        return self is not PhaseClass.CONGESTED_ONLY

    @property
    def is_congested(self) -> bool:
        return self in (PhaseClass.CONGESTED_ONLY, PhaseClass.CONGESTED_AND_FREE)

    @property
    def is_free_minus(self) -> bool:
        """Omega_f^- (the vacuum included)."""
        return self in (PhaseClass.FREE_MINUS, PhaseClass.VACUUM)

    @property
    def is_free_plus(self) -> bool:
        return self in (PhaseClass.FREE_PLUS, PhaseClass.CONGESTED_AND_FREE)

    @property
    def phases(self) -> frozenset:
        if self is PhaseClass.CONGESTED_AND_FREE:
            return frozenset({"free", "congested"})
        if self is PhaseClass.CONGESTED_ONLY:
            return frozenset({"congested"})
        return frozenset({"free"})


class Pressure(Protocol):
    """Pressure law p(rho) of the PTp model; must satisfy 2p' + rho p'' > 0."""

    def p(self, rho): ...

    def dp(self, rho): ...

    def d2p(self, rho): ...

    def inverse(self, value): ...


class PowerPressure:
    """p(rho) = rho**gamma."""

    def __init__(self, gamma: float):
        self.gamma = gamma

    def p(self, rho):
        return rho ** self.gamma

    def dp(self, rho):
        return self.gamma * rho ** (self.gamma - 1.0)

    def d2p(self, rho):
        return self.gamma * (self.gamma - 1.0) * rho ** (self.gamma - 2.0)

    def inverse(self, value):
        return max(value, 0.0) ** (1.0 / self.gamma)


class ModelParams(BaseModel):
    """
    All constants of a PT model, immutable after construction.

    Build instances through ModelParams.pta / ModelParams.ptp: they derive the
    sigma densities and run validate() before returning.
    """

    model_config = ConfigDict(frozen=True)

    variant: Variant
    V_f: float = Field(gt=0)
    V_c: float = Field(gt=0)
    R: float = Field(gt=0)
    w_minus: float
    w_plus: float
    a: float = 0.0
    sigma: Optional[float] = None
    gamma: Optional[float] = None

    sigma_f_minus: float = math.nan
    sigma_f_plus: float = math.nan
    sigma_c_minus: float = math.nan
    sigma_c_plus: float = math.nan

    _pressure: Optional[Any] = PrivateAttr(default=None)

    def model_post_init(self, __context: Any) -> None:
        if self.variant is Variant.PTP and self.gamma is not None:
            self._pressure = PowerPressure(self.gamma)

    @classmethod
    def pta(
        cls,
        *,
        a: float,
        sigma: float,
        V_f: float,
        V_c: float,
        R: float,
        w_minus: float,
        w_plus: float,
        check: bool = True,
    ) -> "ModelParams":
        return cls._build(
            dict(variant=Variant.PTA, a=a, sigma=sigma, V_f=V_f, V_c=V_c, R=R,
                 w_minus=w_minus, w_plus=w_plus),
            check=check,
        )

    @classmethod
    def ptp(
        cls,
        *,
        gamma: float,
        V_f: float,
        V_c: float,
        R: float,
        w_minus: float,
        w_plus: float,
        pressure: Optional[Pressure] = None,
        check: bool = True,
    ) -> "ModelParams":
        return cls._build(
            dict(variant=Variant.PTP, gamma=gamma, V_f=V_f, V_c=V_c, R=R,
                 w_minus=w_minus, w_plus=w_plus),
            check=check,
            pressure=pressure,
        )

    @classmethod
    def _build(cls, fields: Dict[str, Any], check: bool, pressure: Optional[Pressure] = None) -> "ModelParams":
        try:
            base = cls(**fields)
        except ValidationError as e:
            raise ConfigError(f"Invalid model parameters: {e}") from e

        if pressure is not None:
            base._pressure = pressure
        if base.variant is Variant.PTA and (base.sigma is None or not 0 < base.sigma < base.R):
            raise ConfigError(f"PTa needs sigma in (0, R), got {base.sigma}")
        if base.variant is Variant.PTP and base.pressure is None:
            raise ConfigError("PTp needs gamma > 0 or an explicit pressure law")
        if not base.V_c <= base.V_f:
            raise ConfigError(f"Need V_c <= V_f, got V_c={base.V_c}, V_f={base.V_f}")
        if not base.w_minus < base.w_plus:
            raise ConfigError(f"Need w_- < w_+, got {base.w_minus} >= {base.w_plus}")

        try:
            derived = {
                "sigma_f_minus": rho_for_velocity(base, base.w_minus, base.V_f),
                "sigma_f_plus": rho_for_velocity(base, base.w_plus, base.V_f),
                "sigma_c_minus": rho_for_velocity(base, base.w_minus, base.V_c),
                "sigma_c_plus": rho_for_velocity(base, base.w_plus, base.V_c),
            }
        except (InfeasibleError, DomainError) as e:
            raise ConfigError(f"Could not derive phase densities: {e}") from e

        model = base.model_copy(update=derived)
        model._pressure = base._pressure

        if check:
            report = validate(model)
            if not report.passed:
                failed = [c.name for c in report.checks if not c.passed]
                raise ConfigError(
                    f"Model fails hypotheses {failed}",
                    details={"report": report.model_dump()},
                )
        logger.debug(f"Built {model.variant.value} model: sigma_-^f={model.sigma_f_minus:.6g}, "
                     f"sigma_-^c={model.sigma_c_minus:.6g}")
        return model

    @property
    def pressure(self) -> Optional[Pressure]:
        return self._pressure

    @property
    def intersecting(self) -> bool:
        """True when Omega_f and Omega_c overlap (V_f == V_c)."""
        return self.V_f == self.V_c

    @property
    def sigma_minus(self) -> float:
        return self.sigma_f_minus

    def intersecting_counterpart(self) -> "ModelParams":
        """Same model with V_c raised to V_f."""
        fields = self.model_dump(include={"variant", "V_f", "R", "w_minus", "w_plus", "a", "sigma", "gamma"})
        fields["V_c"] = self.V_f
        return ModelParams._build(fields, check=False, pressure=self._pressure)


# ---------------------------------------------------------------------------
# Velocity, flux, marker
# ---------------------------------------------------------------------------

def _c_pta(p: ModelParams) -> float:
    return p.V_f * p.sigma / (p.R - p.sigma)


def v_eq(p: ModelParams, rho):
    """PTa equilibrium velocity (R/rho - 1)(V_f sigma/(R - sigma) + a(sigma - rho))."""
    return (p.R / rho - 1.0) * (_c_pta(p) + p.a * (p.sigma - rho))


def _check_rho(p: ModelParams, rho: float) -> None:
    tol = settings.state_tol
    if rho < -tol or rho > p.R + tol:
        raise DomainError(f"Density {rho} outside [0, {p.R}]")


def velocity(p: ModelParams, u: State) -> float:
    """Average speed v(u); the vacuum moves at V_f."""
    rho, q = u
    _check_rho(p, rho)
    if rho <= settings.state_tol:
        return p.V_f
    if p.variant is Variant.PTA:
        if rho >= p.R:
            return 0.0
        return v_eq(p, rho) * (1.0 + q)
    return q / rho - p.pressure.p(rho)


def velocity_many(p: ModelParams, rho: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Vectorised velocity; no domain checks."""
    rho = np.asarray(rho, dtype=float)
    q = np.asarray(q, dtype=float)
    vac = rho <= settings.state_tol
    safe = np.where(vac, 1.0, rho)
    if p.variant is Variant.PTA:
        v = v_eq(p, safe) * (1.0 + q)
    else:
        v = q / safe - p.pressure.p(safe)
    return np.where(vac, p.V_f, v)


def flux(p: ModelParams, u: State) -> float:
    """f(u) = rho v(u)."""
    if u[0] <= settings.state_tol:
        _check_rho(p, u[0])
        return 0.0
    return u[0] * velocity(p, u)


def marker(p: ModelParams, u: State) -> float:
    """Lagrangian marker w(u): q/rho, or the affine extension on Omega_f^-."""
    rho, q = u
    _check_rho(p, rho)
    if rho < p.sigma_f_minus:
        return p.w_minus + p.V_f * (rho / p.sigma_f_minus - 1.0)
    return q / rho


def q_free(p: ModelParams, rho: float) -> float:
    """Free-phase curve Q(rho), on which v = V_f."""
    tol = settings.state_tol
    if rho < -tol or rho > p.sigma_f_plus + tol:
        raise DomainError(f"Free density {rho} outside [0, {p.sigma_f_plus}]")
    rho = max(rho, 0.0)
    if p.variant is Variant.PTP:
        return rho * (p.V_f + p.pressure.p(rho))
    R, s, a, V_f = p.R, p.sigma, p.a, p.V_f
    num = (rho - s) * (V_f * R + a * (R - rho) * (R - s))
    den = (R - rho) * (V_f * s + a * (s - rho) * (R - s))
    return num / den


def free_state(p: ModelParams, rho: float) -> State:
    return State(rho, q_free(p, rho))


def vacuum(p: ModelParams) -> State:
    return State(0.0, q_free(p, 0.0))


def state_from_rho_velocity(p: ModelParams, rho: float, v: float) -> State:
    """State with density rho and velocity v."""
    if rho <= settings.state_tol:
        return vacuum(p)
    if p.variant is Variant.PTP:
        return State(rho, rho * (v + p.pressure.p(rho)))
    ve = v_eq(p, rho)
    if ve <= 0.0:
        raise DomainError(f"Velocity {v} not attainable at rho={rho}")
    return State(rho, v / ve - 1.0)


# ---------------------------------------------------------------------------
# Lax curves
# ---------------------------------------------------------------------------

def _lax_value(p: ModelParams, w, rho):
    if p.variant is Variant.PTA:
        return (p.R - rho) * (_c_pta(p) + p.a * (p.sigma - rho)) * (1.0 + w * rho)
    return w * rho - rho * p.pressure.p(rho)


def _lax_d1(p: ModelParams, w, rho):
    if p.variant is Variant.PTA:
        A = p.R - rho
        B = _c_pta(p) + p.a * (p.sigma - rho)
        C = 1.0 + w * rho
        return -B * C - p.a * A * C + w * A * B
    pr = p.pressure
    return w - pr.p(rho) - rho * pr.dp(rho)


def _lax_d2(p: ModelParams, w, rho):
    if p.variant is Variant.PTA:
        A = p.R - rho
        B = _c_pta(p) + p.a * (p.sigma - rho)
        C = 1.0 + w * rho
        return 2.0 * (p.a * C - w * B - p.a * w * A)
    pr = p.pressure
    return -2.0 * pr.dp(rho) - rho * pr.d2p(rho)


def _check_w(p: ModelParams, w: float) -> None:
    tol = settings.state_tol
    if w < p.w_minus - tol or w > p.w_plus + tol:
        raise DomainError(f"Marker {w} outside [{p.w_minus}, {p.w_plus}]")


def lax1_value(p: ModelParams, w: float, rho: float) -> float:
    """L_w(rho) = f(rho, w rho)."""
    _check_w(p, w)
    return float(_lax_value(p, w, rho))


def lax1_d1(p: ModelParams, w: float, rho: float) -> float:
    _check_w(p, w)
    return float(_lax_d1(p, w, rho))


def lax1_d2(p: ModelParams, w: float, rho: float) -> float:
    _check_w(p, w)
    return float(_lax_d2(p, w, rho))


def rho1_0(p: ModelParams, w: float) -> float:
    """Density where the w Lax curve reaches zero velocity."""
    if p.variant is Variant.PTA:
        return p.R
    return p.pressure.inverse(w)


def rho_for_velocity(p: ModelParams, w: float, v: float) -> float:
    """Density on the w Lax curve where the velocity equals v (v decreasing in rho)."""
    if v <= 0.0:
        return rho1_0(p, w)
    if p.variant is Variant.PTP:
        if w - v < 0.0:
            raise InfeasibleError(f"No density with w={w}, v={v}")
        return p.pressure.inverse(w - v)

    def g(rho: float) -> float:
        return _lax_value(p, w, rho) - v * rho

    lo, hi = 0.0, p.R
    if g(lo) <= 0.0 or g(hi) > 0.0:
        raise InfeasibleError(f"No density with w={w}, v={v} in (0, R]")
    return brentq(g, lo, hi, xtol=settings.root_tol)


def curve_state(p: ModelParams, w: float, v: float) -> State:
    rho = rho_for_velocity(p, w, v)
    return State(rho, w * rho)


def rho1_level(p: ModelParams, w: float, level: Level) -> float:
    """rho_1^f(w) or rho_1^c(w): the w curve at v = V_f or V_c."""
    return rho_for_velocity(p, w, p.V_f if level == "f" else p.V_c)


def u_minus_c(p: ModelParams) -> State:
    """Lowest-density congested state on the w_- curve."""
    return State(p.sigma_c_minus, p.w_minus * p.sigma_c_minus)


# ---------------------------------------------------------------------------
# Eigenvalues and helper maps
# ---------------------------------------------------------------------------

def _congested_marker(p: ModelParams, u: State) -> float:
    rho, q = u
    if rho <= settings.state_tol:
        raise DomainError("Marker q/rho undefined at the vacuum")
    w = q / rho
    _check_w(p, w)
    return w


def lambda1(p: ModelParams, u: State) -> float:
    """First characteristic speed, equal to L'_{w(u)}(rho)."""
    w = _congested_marker(p, u)
    return float(_lax_d1(p, w, u[0]))


def lambda2(p: ModelParams, u: State) -> float:
    _congested_marker(p, u)
    return velocity(p, u)


def psi1(p: ModelParams, u: State, level: Level) -> State:
    """Point of u's Lax curve with v = V_f (level 'f') or V_c (level 'c')."""
    w = _congested_marker(p, u)
    return curve_state(p, w, p.V_f if level == "f" else p.V_c)


def psi2(p: ModelParams, u: State, side: Side) -> State:
    """Point of the w_- (side '-') or w_+ curve with the velocity of u."""
    w = p.w_minus if side == "-" else p.w_plus
    return curve_state(p, w, velocity(p, u))


def u_star(p: ModelParams, u_minus: State, u_plus: State) -> State:
    """Point with the marker of u_minus and the velocity of u_plus."""
    w = _congested_marker(p, u_minus)
    return curve_state(p, w, velocity(p, u_plus))


def rh_speed(p: ModelParams, u_minus: State, u_plus: State) -> float:
    """Rankine-Hugoniot speed Lambda between two states."""
    d_rho = u_plus[0] - u_minus[0]
    if abs(d_rho) <= settings.root_tol:
        raise DegenerateJumpError(f"Equal densities {u_minus[0]} and {u_plus[0]}")
    return (flux(p, u_plus) - flux(p, u_minus)) / d_rho


def state_distance(a: State, b: State) -> float:
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


# ---------------------------------------------------------------------------
# Classification
# ---------------------------------------------------------------------------

def classify(p: ModelParams, u: State) -> PhaseClass:
    """Phase of u; raises DomainError if u is not in Omega."""
    rho, q = u
    tol = settings.state_tol
    _check_rho(p, rho)
    if rho <= tol:
        return PhaseClass.VACUUM
    v = velocity(p, u)
    if abs(v - p.V_f) <= tol * max(1.0, p.V_f) and rho <= p.sigma_f_plus + tol:
        if rho < p.sigma_f_minus - tol:
            return PhaseClass.FREE_MINUS
        return PhaseClass.CONGESTED_AND_FREE if p.intersecting else PhaseClass.FREE_PLUS
    w = q / rho
    if -tol <= v <= p.V_c + tol and p.w_minus - tol <= w <= p.w_plus + tol:
        return PhaseClass.CONGESTED_ONLY
    raise DomainError(f"State ({rho}, {q}) lies outside Omega (v={v:.6g}, w={w:.6g})")


def in_domain(p: ModelParams, u: State) -> bool:
    try:
        classify(p, u)
        return True
    except DomainError:
        return False


def canonical(p: ModelParams, u: State) -> State:
    """Snap a state inside the tolerance band onto the boundary it is close to."""
    phase = classify(p, u)
    rho = u[0]
    if phase is PhaseClass.VACUUM:
        return vacuum(p)
    if phase.is_free:
        return free_state(p, min(rho, p.sigma_f_plus))
    w = min(max(u[1] / rho, p.w_minus), p.w_plus)
    snapped = State(rho, w * rho)
    v = velocity(p, snapped)
    if v < 0.0 or v > p.V_c:
        snapped = state_from_rho_velocity(p, rho, min(max(v, 0.0), p.V_c))
    return snapped


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

class HypothesisCheck(BaseModel):
    name: str
    passed: bool
    message: str = ""
    point: Optional[Tuple[float, float]] = None


class ValidationReport(BaseModel):
    passed: bool
    checks: List[HypothesisCheck]


def _extended_grid(p: ModelParams, n: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(w, rho) grid restricted to Omega_c^ex, i.e. 0 <= v <= V_f."""
    ws = np.linspace(p.w_minus, p.w_plus, n)
    rhos = np.linspace(p.R / n, p.R, n)
    W, RHO = np.meshgrid(ws, rhos, indexing="ij")
    V = _lax_value(p, W, RHO) / RHO
    tol = settings.state_tol
    mask = (V >= -tol) & (V <= p.V_f + tol)
    return W, RHO, mask


def validate(p: ModelParams, n: int = 512) -> ValidationReport:
    """
    Check the model hypotheses on a grid.

    Args:
        p: Model parameters (sigma densities already derived)
        n: Grid resolution per axis over Omega_c^ex

    Returns:
        ValidationReport with one entry per hypothesis; failures carry the
        offending (w, rho) grid point.
    """
    checks: List[HypothesisCheck] = []
    tol = 1e-12

    sig_ok = (0 < p.sigma_f_minus < p.sigma_f_plus < p.R
              and 0 < p.sigma_c_minus < p.sigma_c_plus <= p.R)
    checks.append(HypothesisCheck(
        name="sigma_order", passed=bool(sig_ok),
        message=f"sigma_f=({p.sigma_f_minus:.6g}, {p.sigma_f_plus:.6g}), "
                f"sigma_c=({p.sigma_c_minus:.6g}, {p.sigma_c_plus:.6g})",
    ))

    if p.intersecting:
        nested = (math.isclose(p.sigma_f_minus, p.sigma_c_minus, abs_tol=1e-10)
                  and math.isclose(p.sigma_f_plus, p.sigma_c_plus, abs_tol=1e-10))
    else:
        nested = p.sigma_f_minus < p.sigma_c_minus and p.sigma_f_plus < p.sigma_c_plus
    checks.append(HypothesisCheck(name="sigma_nesting", passed=bool(nested)))

    residuals = []
    for s, w, V in ((p.sigma_f_minus, p.w_minus, p.V_f), (p.sigma_f_plus, p.w_plus, p.V_f),
                    (p.sigma_c_minus, p.w_minus, p.V_c), (p.sigma_c_plus, p.w_plus, p.V_c)):
        residuals.append(abs(velocity(p, State(s, s * w)) - V) / V)
    checks.append(HypothesisCheck(
        name="sigma_velocity", passed=max(residuals) < 1e-10,
        message=f"max relative residual {max(residuals):.3g}",
    ))

    if p.variant is Variant.PTP:
        rhos = np.linspace(p.R / n, p.R, n)
        pr = p.pressure
        cond = 2.0 * pr.dp(rhos) + rhos * pr.d2p(rhos)
        bad = np.nonzero(cond <= 0.0)[0]
        checks.append(HypothesisCheck(
            name="P", passed=bad.size == 0,
            point=None if bad.size == 0 else (float("nan"), float(rhos[bad[0]])),
        ))
        top = abs(pr.p(p.R) - p.w_plus)
        checks.append(HypothesisCheck(
            name="w_plus_is_p_of_R", passed=top < 1e-10 * max(1.0, abs(p.w_plus)),
            message=f"|p(R) - w_+| = {top:.3g}",
        ))

    W, RHO, mask = _extended_grid(p, n)
    lam = _lax_d1(p, W, RHO)
    bad = mask & (lam >= 0.0)
    if bad.any():
        i, j = np.argwhere(bad)[0]
        checks.append(HypothesisCheck(name="H1", passed=False,
                                      message=f"lambda_1 = {lam[i, j]:.3g} >= 0",
                                      point=(float(W[i, j]), float(RHO[i, j]))))
    else:
        checks.append(HypothesisCheck(name="H1", passed=True))

    d2 = _lax_d2(p, W, RHO)
    h2_point = None
    for i in range(W.shape[0]):
        row = d2[i][mask[i]]
        if row.size == 0:
            continue
        if np.all(np.abs(row) <= tol):
            # linearly degenerate curve (PTa, a=0, w=0)
            if p.variant is Variant.PTA and p.a == 0.0 and abs(W[i, 0]) <= tol:
                continue
            h2_point = (float(W[i, 0]), float(RHO[i][mask[i]][0]))
            break
        if not (np.all(row > tol) or np.all(row < -tol)):
            j = int(np.argmin(np.abs(row)))
            h2_point = (float(W[i, 0]), float(RHO[i][mask[i]][j]))
            break
    checks.append(HypothesisCheck(name="H2", passed=h2_point is None, point=h2_point))

    return ValidationReport(passed=all(c.passed for c in checks), checks=checks)


def describe(p: ModelParams) -> Dict[str, float]:
    """Derived densities and capacities of a model."""
    free_capacity = p.V_f * p.sigma_f_minus
    congested_capacity = flux(p, u_minus_c(p))
    return {
        "sigma_f_minus": p.sigma_f_minus,
        "sigma_f_plus": p.sigma_f_plus,
        "sigma_c_minus": p.sigma_c_minus,
        "sigma_c_plus": p.sigma_c_plus,
        "free_capacity": free_capacity,
        "congested_capacity": congested_capacity,
        "capacity_drop": free_capacity - congested_capacity,
        "max_free_flux": p.V_f * p.sigma_f_plus,
    }
