"""
Tests for the constrained solvers R_F and S_F.
"""

import pytest

from phase_traffic.analysis.sampling import free_with_flux, rng_for, sample_pair
from phase_traffic.core.errors import DomainError, UsageError
from phase_traffic.pipeline.constrained import (
    DClass,
    SolverFamily,
    classify_D,
    classify_D_by_traces,
    gate_flux_estimate,
    select_hat_check_R,
    select_hat_check_S,
    sf_selection_differs,
    solve_RF,
    solve_SF,
)
from phase_traffic.pipeline.phase_model import (
    State,
    canonical,
    curve_state,
    flux,
    free_state,
    u_minus_c,
    vacuum,
    velocity,
)
from phase_traffic.pipeline.wavefan import WaveKind, check_admissible, trace_flux

F_TOLL = 0.12


def test_toll_gate_opening_is_in_d2(pta_r):
    split = solve_RF(pta_r, F_TOLL, State(1.0, 0.3), vacuum(pta_r))
    assert split.classification is DClass.D2
    assert split.u_hat.rho == pytest.approx(0.772703, abs=1e-6)
    assert split.u_hat.q == pytest.approx(0.231811, abs=1e-6)
    assert split.u_check.rho == pytest.approx(0.12, abs=1e-12)
    assert split.u_check.q == pytest.approx(-0.681818, abs=1e-6)
    assert flux(pta_r, split.u_hat) == pytest.approx(F_TOLL, abs=1e-10)
    assert flux(pta_r, split.u_check) == pytest.approx(F_TOLL, abs=1e-10)
    assert split.fan.kinds() == [WaveKind.RAREFACTION1, WaveKind.STATIONARY_JUMP, WaveKind.CONTACT]
    assert split.left_fan.max_speed() < 0.0


def test_hat_check_of_both_queue_states(pta_r):
    u_hat_1, _ = select_hat_check_R(pta_r, F_TOLL, State(1.0, -0.4), vacuum(pta_r))
    assert u_hat_1.rho == pytest.approx(0.626425, abs=1e-6)
    assert u_hat_1.q == pytest.approx(-0.250570, abs=1e-6)


def test_d1_pair_is_left_alone(pta_r):
    u_l, u_r = free_state(pta_r, 0.05), free_state(pta_r, 0.2)
    split = solve_RF(pta_r, F_TOLL, u_l, u_r)
    assert split.classification is DClass.D1
    assert split.u_hat is None
    assert split.fan.kinds() == [WaveKind.CONTACT]


def test_family_and_capacity_guards(pta_r, ptp_s):
    with pytest.raises(UsageError):
        solve_RF(ptp_s, 0.1, free_state(ptp_s, 0.1), free_state(ptp_s, 0.2))
    with pytest.raises(UsageError):
        solve_SF(pta_r, 0.1, free_state(pta_r, 0.1), free_state(pta_r, 0.2))
    with pytest.raises(DomainError):
        solve_SF(ptp_s, 5.0, free_state(ptp_s, 0.1), free_state(ptp_s, 0.2))
    with pytest.raises(DomainError):
        solve_SF(ptp_s, -0.1, free_state(ptp_s, 0.1), free_state(ptp_s, 0.2))


def test_sf_caps_flux_below_f_on_free_minus_pairs(ptp_s):
    F = 0.1
    u_l, u_r = free_with_flux(ptp_s, 0.1075), free_state(ptp_s, 0.1)
    assert sf_selection_differs(ptp_s, F, u_l, u_r) == "free_minus_to_free"
    u_hat, u_check = select_hat_check_S(ptp_s, F, u_l, u_r)
    assert u_hat.rho == pytest.approx(u_minus_c(ptp_s).rho, abs=1e-10)
    assert velocity(ptp_s, u_hat) == pytest.approx(ptp_s.V_c, abs=1e-10)
    assert flux(ptp_s, u_check) == pytest.approx(flux(ptp_s, u_minus_c(ptp_s)), abs=1e-10)

    # R_F on the intersecting counterpart carries the full capacity
    twin = ptp_s.intersecting_counterpart()
    split = solve_RF(twin, F, u_l, u_r)
    assert flux(twin, split.u_hat) == pytest.approx(F, abs=1e-10)


def test_sf_congested_pair_uses_flux_f(ptp_s):
    F = 0.06
    u_l, u_r = curve_state(ptp_s, 0.8, 0.14), curve_state(ptp_s, 0.8, 0.1)
    assert gate_flux_estimate(ptp_s, u_l, u_r, SolverFamily.S) > F
    split = solve_SF(ptp_s, F, u_l, u_r)
    assert split.classification is DClass.D2
    assert flux(ptp_s, split.u_hat) == pytest.approx(F, abs=1e-10)
    assert velocity(ptp_s, split.u_check) == pytest.approx(0.1, abs=1e-10)


@pytest.mark.parametrize("name,F,solver", [
    ("pta_r", 0.12, solve_RF),
    ("ptp_r", 0.1, solve_RF),
    ("pta_s", 0.1, solve_SF),
    ("ptp_s", 0.1, solve_SF),
    ("ptp_s", 0.06, solve_SF),
    ("ptp_linear", 4.0, solve_SF),
])
def test_sampled_constrained_solutions(name, F, solver, request):
    p = request.getfixturevalue(name)
    for i in range(300):
        u_l, u_r = sample_pair(p, rng_for(11, i))
        split = solver(p, F, u_l, u_r)
        report = check_admissible(p, split.fan)
        assert report.passed, (u_l, u_r, report.violations)
        f_minus, f_plus = trace_flux(p, split.fan, 0.0)
        assert max(f_minus, f_plus) <= F + 1e-12
        if split.classification is DClass.D2:
            assert flux(p, split.u_hat) == pytest.approx(flux(p, split.u_check), abs=1e-10)
            assert split.left_fan.max_speed() <= 1e-9
            assert split.right_fan.min_speed() >= -1e-9


@pytest.mark.parametrize("name,F,family", [
    ("pta_r", 0.12, SolverFamily.R),
    ("ptp_s", 0.1, SolverFamily.S),
])
def test_closed_form_classification_matches_traces(name, F, family, request):
    p = request.getfixturevalue(name)
    for i in range(300):
        u_l, u_r = sample_pair(p, rng_for(13, i))
        u_l, u_r = canonical(p, u_l), canonical(p, u_r)
        if abs(gate_flux_estimate(p, u_l, u_r, family) - F) < 1e-9:
            continue
        assert classify_D(p, F, u_l, u_r, family) is classify_D_by_traces(p, F, u_l, u_r, family)
