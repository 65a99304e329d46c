"""
Total Variation
===============

Purpose: Increase of the total variation of v and w produced by the
constrained solvers, its zero set, and the comparison between R_F and S_F.

dTV_c = TV(c(u)) - |c(u_l) - c(u_r)| for c in {v, w}; both are non-negative
and vanish together.
"""

import logging
from typing import Optional, Tuple

from pydantic import BaseModel

from phase_traffic.pipeline.constrained import (
    DClass,
    SolverFamily,
    _select,
    gate_flux_estimate,
    sf_selection_differs,
    solve_RF,
    solve_SF,
)
from phase_traffic.pipeline.phase_model import (
    ModelParams,
    State,
    canonical,
    classify,
    flux,
    marker,
    psi2,
    velocity,
)
from phase_traffic.pipeline.wavefan import tv_of

logger = logging.getLogger(__name__)

ZERO_TOL = 1e-10


class TvReport(BaseModel):
    dtv_v: float
    dtv_w: float
    zero_zone: bool
    classification: DClass
    margin: float = float("inf")

    @property
    def is_zero(self) -> bool:
        return self.dtv_v <= ZERO_TOL and self.dtv_w <= ZERO_TOL

    @property
    def sign_law_holds(self) -> bool:
        """Non-negative deltas that vanish exactly on the zero zone."""
        if self.dtv_v < -1e-12 or self.dtv_w < -1e-12:
            return False
        return self.is_zero == self.zero_zone


def _family(p: ModelParams) -> SolverFamily:
    return SolverFamily.R if p.intersecting else SolverFamily.S


def zero_zone(p: ModelParams, F: float, u_l: State, u_r: State,
              solver: Optional[SolverFamily] = None) -> Tuple[bool, float]:
    """
    (in_zone, margin) for the set where the constrained solution adds no variation.

    The set is D1, plus D2 pairs where either both states are congested with
    f(psi_2^-(u_r)) <= F, or u_l is in Omega_c^- and u_r in Omega_f minus
    Omega_c; in both cases v(u_l) <= v(u_hat) and w(u_r) <= w(u_check).
    margin is the distance to the nearest boundary among the conditions used.
    """
    family = solver or _family(p)
    estimate = gate_flux_estimate(p, u_l, u_r, family)
    margin = abs(estimate - F)
    if estimate <= F:
        return True, margin

    cl, cr = classify(p, u_l), classify(p, u_r)
    u_hat, u_check = _select(p, F, u_l, u_r, family)
    v_gap = velocity(p, u_hat) - velocity(p, u_l)
    w_gap = marker(p, u_check) - marker(p, u_r)

    if cl.is_congested and cr.is_congested:
        flux_gap = F - flux(p, psi2(p, u_r, "-"))
        margin = min(margin, abs(flux_gap), abs(v_gap), abs(w_gap))
        return flux_gap >= 0.0 and v_gap >= 0.0 and w_gap >= 0.0, margin
    if cl.is_congested and not cl.is_free_plus and not cr.is_congested:
        margin = min(margin, abs(v_gap), abs(w_gap))
        return v_gap >= 0.0 and w_gap >= 0.0, margin
    return False, margin


def delta_tv(p: ModelParams, F: float, u_l: State, u_r: State,
             solver: Optional[SolverFamily] = None) -> TvReport:
    """
    dTV_v and dTV_w of a constrained solution.

    solver picks R_F or S_F; by default the one matching the model phases.
    """
    family = solver or _family(p)
    u_l, u_r = canonical(p, u_l), canonical(p, u_r)
    split = solve_RF(p, F, u_l, u_r) if family == SolverFamily.R else solve_SF(p, F, u_l, u_r)
    dtv_v = tv_of(p, split.fan, "v") - abs(velocity(p, u_l) - velocity(p, u_r))
    dtv_w = tv_of(p, split.fan, "w") - abs(marker(p, u_l) - marker(p, u_r))
    zone, margin = zero_zone(p, F, u_l, u_r, family)
    return TvReport(dtv_v=dtv_v, dtv_w=dtv_w, zero_zone=zone,
                    classification=split.classification, margin=margin)


class TvComparison(BaseModel):
    """R_F on the intersecting counterpart (1) against S_F on the model (2)."""

    rf: TvReport
    sf: TvReport
    case: Optional[str] = None
    v_strict: bool
    w_strict: bool
    expected_v_strict: bool
    expected_w_strict: bool
    expected_v_gap: Optional[float] = None
    margin: float = float("inf")

    @property
    def ordering_holds(self) -> bool:
        return (self.rf.dtv_v <= self.sf.dtv_v + ZERO_TOL
                and self.rf.dtv_w <= self.sf.dtv_w + ZERO_TOL)

    @property
    def characterization_holds(self) -> bool:
        return self.v_strict == self.expected_v_strict and self.w_strict == self.expected_w_strict


def compare_tv_rf_sf(p_s: ModelParams, F: float, u_l: State, u_r: State,
                     p_r: Optional[ModelParams] = None) -> TvComparison:
    """
    Compare the variation added by R_F and S_F on one pair.

    S_F adds strictly more v-variation exactly on the free-to-free families
    where it caps the gate flux (the gap is 2(V_c - v(u_hat_RF))), and strictly
    more w-variation on the capped families when w(u_r) > w(u_check_SF).
    """
    p_r = p_r or p_s.intersecting_counterpart()
    u_l, u_r = canonical(p_s, u_l), canonical(p_s, u_r)
    rf = delta_tv(p_r, F, u_l, u_r)
    sf = delta_tv(p_s, F, u_l, u_r)
    case = sf_selection_differs(p_s, F, u_l, u_r)

    expected_v_strict = case in ("free_minus_to_free", "free_plus_to_free")
    expected_w_strict = False
    expected_v_gap = None
    margin = min(rf.margin, sf.margin)
    if case is not None:
        u_hat_r, _ = _select(p_r, F, u_l, u_r, SolverFamily.R)
        _, u_check_s = _select(p_s, F, u_l, u_r, SolverFamily.S)
        w_gap = marker(p_s, u_r) - marker(p_s, u_check_s)
        expected_w_strict = w_gap > 0.0
        margin = min(margin, abs(w_gap))
        if expected_v_strict:
            expected_v_gap = 2.0 * (p_s.V_c - velocity(p_r, u_hat_r))

    return TvComparison(
        rf=rf, sf=sf, case=case,
        v_strict=sf.dtv_v - rf.dtv_v > ZERO_TOL,
        w_strict=sf.dtv_w - rf.dtv_w > ZERO_TOL,
        expected_v_strict=expected_v_strict,
        expected_w_strict=expected_w_strict,
        expected_v_gap=expected_v_gap,
        margin=margin,
    )
