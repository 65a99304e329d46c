"""
Tests for the unconstrained Riemann solvers R and S.
"""

import pytest

from phase_traffic.analysis.sampling import rng_for, sample_pair
from phase_traffic.core.errors import UsageError
from phase_traffic.pipeline.phase_model import (
    State,
    curve_state,
    free_state,
    lambda1,
    psi1,
    psi2,
    rh_speed,
    u_minus_c,
    vacuum,
    velocity,
)
from phase_traffic.pipeline.riemann import (
    RiemannProblem,
    lax_congested,
    s_differs_from_r,
    solve,
    solve_R,
    solve_S,
    solve_problem,
    tangency_state,
)
from phase_traffic.pipeline.wavefan import WaveKind, check_admissible


def test_identical_states_give_empty_fan(pta_r, ptp_s):
    assert solve_R(pta_r, State(1.0, -0.4), State(1.0, -0.4)).is_empty
    u = curve_state(ptp_s, 0.7, 0.1)
    assert solve_S(ptp_s, u, u).is_empty


def test_family_guards(pta_r, ptp_s):
    with pytest.raises(UsageError):
        solve_R(ptp_s, free_state(ptp_s, 0.1), free_state(ptp_s, 0.2))
    with pytest.raises(UsageError):
        solve_S(pta_r, free_state(pta_r, 0.1), free_state(pta_r, 0.2))


def test_free_to_free_is_a_contact(pta_r):
    fan = solve_R(pta_r, free_state(pta_r, 0.1), free_state(pta_r, 0.3))
    assert fan.kinds() == [WaveKind.CONTACT]
    assert fan.waves[0].speed == pytest.approx(pta_r.V_f)


def test_queue_states_meet_in_a_standing_contact(pta_r):
    fan = solve_R(pta_r, State(1.0, -0.4), State(1.0, 0.3))
    assert fan.kinds() == [WaveKind.CONTACT]
    assert fan.waves[0].speed == 0.0


def test_congested_pair_goes_through_u_star(ptp_r):
    u_l, u_r = curve_state(ptp_r, 0.9, 0.05), curve_state(ptp_r, 0.6, 0.2)
    fan = solve_R(ptp_r, u_l, u_r)
    mid = fan.waves[0].right
    assert velocity(ptp_r, mid) == pytest.approx(0.2, abs=1e-12)
    assert fan.waves[-1].kind is WaveKind.CONTACT
    assert fan.waves[-1].speed == pytest.approx(0.2, abs=1e-12)


def test_free_minus_to_congested_has_a_phase_transition(ptp_r):
    u_l, u_r = free_state(ptp_r, 0.2), curve_state(ptp_r, 0.8, 0.05)
    fan = solve_R(ptp_r, u_l, u_r)
    assert WaveKind.PHASE_TRANSITION in fan.kinds()
    assert check_admissible(ptp_r, fan).passed
    m = psi2(ptp_r, u_r, "-")
    assert any(abs(w.right.rho - m.rho) < 1e-9 for w in fan.waves)


def test_fast_free_minus_into_queue_passes_through_tangency_state(pta_r):
    u_l, u_r = free_state(pta_r, 0.25), State(1.0, -0.45)
    m = psi2(pta_r, u_r, "-")
    assert rh_speed(pta_r, u_l, m) < lambda1(pta_r, m)

    up = tangency_state(pta_r, u_l, u_r, pta_r.V_f)
    assert up.q / up.rho == pytest.approx(pta_r.w_minus, abs=1e-12)
    assert abs(rh_speed(pta_r, u_l, up) - lambda1(pta_r, up)) < 1e-10

    fan = solve_R(pta_r, u_l, u_r)
    assert fan.kinds() == [WaveKind.PHASE_TRANSITION, WaveKind.RAREFACTION1, WaveKind.CONTACT]
    assert fan.waves[0].right.rho == pytest.approx(up.rho, abs=1e-12)
    assert fan.waves[1].speed_lo == pytest.approx(lambda1(pta_r, up), abs=1e-10)
    assert fan.waves[2].speed == pytest.approx(0.0, abs=1e-12)
    assert check_admissible(pta_r, fan).passed


def test_s_splits_concave_congested_to_free(ptp_s):
    u_l, u_r = curve_state(ptp_s, 0.9, 0.02), free_state(ptp_s, 0.2)
    assert s_differs_from_r(ptp_s, u_l, u_r) == "congested_to_free_concave"
    fan = solve_S(ptp_s, u_l, u_r)
    pts = [w for w in fan.waves if w.kind is WaveKind.PHASE_TRANSITION]
    assert len(pts) == 1
    assert pts[0].left.rho == pytest.approx(psi1(ptp_s, u_l, "c").rho, abs=1e-12)
    assert pts[0].right.rho == pytest.approx(psi1(ptp_s, u_l, "f").rho, abs=1e-12)
    # capacity drop makes the transition move backwards
    assert pts[0].speed < 0.0
    assert check_admissible(ptp_s, fan).passed


def test_s_jumps_down_from_free_plus_on_convex_curves(pta_s):
    u_l = free_state(pta_s, pta_s.sigma_f_minus + 0.004)
    u_r = State(1.0, -0.4)
    assert s_differs_from_r(pta_s, u_l, u_r) == "free_plus_to_congested_convex"
    fan = solve_S(pta_s, u_l, u_r)
    assert fan.waves[0].kind is WaveKind.PHASE_TRANSITION
    assert velocity(pta_s, fan.waves[0].right) == pytest.approx(pta_s.V_c, abs=1e-10)


def test_s_matches_r_between_congested_states(ptp_s):
    u_l, u_r = curve_state(ptp_s, 0.9, 0.05), curve_state(ptp_s, 0.6, 0.1)
    assert s_differs_from_r(ptp_s, u_l, u_r) is None
    assert solve_S(ptp_s, u_l, u_r) == lax_congested(ptp_s, u_l, u_r)


def test_free_minus_into_congested_under_s(ptp_s):
    u_l, u_r = free_state(ptp_s, 0.3), curve_state(ptp_s, 0.8, 0.1)
    fan = solve_S(ptp_s, u_l, u_r)
    assert fan.waves[0].kind is WaveKind.PHASE_TRANSITION
    assert check_admissible(ptp_s, fan).passed
    assert u_minus_c(ptp_s).rho <= fan.waves[0].right.rho + 1e-12


@pytest.mark.parametrize("name", ["pta_r", "pta_s", "ptp_s", "ptp_r", "ptp_linear"])
def test_sampled_solutions_are_admissible(name, request):
    p = request.getfixturevalue(name)
    for i in range(300):
        u_l, u_r = sample_pair(p, rng_for(7, i))
        fan = solve(p, u_l, u_r)
        report = check_admissible(p, fan)
        assert report.passed, (u_l, u_r, report.violations)


def test_stored_problem_snaps_vacuum(pta_r):
    problem = RiemannProblem(u_left=State(1.0, 0.3), u_right=State(0.0, 0.0))
    fan = solve_problem(pta_r, problem)
    assert fan.kinds() == solve(pta_r, State(1.0, 0.3), vacuum(pta_r)).kinds()
    assert fan.right_state.q == pytest.approx(-1.0)
