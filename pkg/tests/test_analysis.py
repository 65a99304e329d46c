"""
Tests for the analysis layer: consistency, continuity, total variation and
invariant domains.
"""

import pytest

from phase_traffic.analysis.harness import (
    AnalysisOptions,
    consistency_suite,
    l1loc_probe,
    make_solver,
    rf_split_counterexamples,
    run_suite,
    sf_gap_probe,
)
from phase_traffic.analysis.invariant_domains import (
    DomainKind,
    DomainSpec,
    closure_test,
    gate_point,
    member,
    minimality_generators,
)
from phase_traffic.analysis.sampling import rng_for, sample_pair
from phase_traffic.analysis.total_variation import compare_tv_rf_sf, delta_tv
from phase_traffic.core.errors import UsageError
from phase_traffic.pipeline.constrained import (
    DClass,
    SolverFamily,
    gate_flux_estimate,
    sf_selection_differs,
    solve_RF,
    solve_SF,
)
from phase_traffic.pipeline.phase_model import (
    State,
    curve_state,
    flux,
    free_state,
    psi2,
    state_distance,
    vacuum,
)
from phase_traffic.pipeline.riemann import s_differs_from_r, solve_R, solve_S
from phase_traffic.pipeline.wavefan import l1_distance

SMALL = AnalysisOptions(n_pairs=200, n_triples=100, n_probe=30, seed=5, n_jobs=1)


def test_make_solver_rejects_unknown_names(pta_r):
    with pytest.raises(UsageError):
        make_solver(pta_r, "Godunov")
    with pytest.raises(UsageError):
        make_solver(pta_r, "RF")


# ---------------------------------------------------------------------------
# Consistency
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("name,solver", [("pta_r", "R"), ("ptp_r", "R"), ("ptp_s", "S"), ("pta_s", "S")])
def test_unconstrained_solvers_are_consistent(name, solver, request):
    p = request.getfixturevalue(name)
    report = consistency_suite(p, solver, n=150, seed=3)
    assert report.n_split == 150
    assert report.n_glue > 50
    assert report.passed, (report.max_split_gap, report.max_glue_gap, report.errors[:3])


@pytest.mark.parametrize("name,solver,F", [("pta_r", "RF", 0.12), ("ptp_s", "SF", 0.1)])
def test_constrained_solvers_glue(name, solver, F, request):
    p = request.getfixturevalue(name)
    report = consistency_suite(p, solver, n=100, F=F, seed=3)
    assert report.glue_failures == 0


def test_rf_breaks_the_split_property(pta_r):
    rows = rf_split_counterexamples(pta_r, 0.12, n=20, seed=1)
    assert len(rows) == 20
    assert all(r["value_is_psi2"] for r in rows)
    assert all(r["split_fails"] for r in rows)


def test_threaded_campaign_matches_serial(ptp_s):
    serial = consistency_suite(ptp_s, "S", n=40, seed=9, n_jobs=1)
    threaded = consistency_suite(ptp_s, "S", n=40, seed=9, n_jobs=4)
    assert serial.rows == threaded.rows


# ---------------------------------------------------------------------------
# Continuity
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("name,solver", [("pta_r", "R"), ("ptp_s", "S")])
def test_unconstrained_solvers_are_continuous(name, solver, request):
    p = request.getfixturevalue(name)
    report = l1loc_probe(p, solver, n=40, seed=2)
    assert report.continuous, report.max_gap


def test_rf_is_continuous(pta_r):
    report = l1loc_probe(pta_r, "RF", n=40, F=0.12, seed=2)
    assert report.continuous, report.max_gap


def test_sf_jumps_when_left_flux_crosses_capacity(ptp_s):
    rows = sf_gap_probe(ptp_s, 0.1, n=10)
    assert all(r["discontinuous"] for r in rows)
    assert all(r["ratio"] == pytest.approx(1.0, abs=0.05) for r in rows)


def test_sf_gap_probe_needs_capacity_above_congested_maximum(ptp_s, pta_r):
    with pytest.raises(UsageError):
        sf_gap_probe(ptp_s, 0.06)
    with pytest.raises(UsageError):
        sf_gap_probe(pta_r, 0.12)


# ---------------------------------------------------------------------------
# Total variation
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("name,F", [("pta_r", 0.12), ("ptp_s", 0.1), ("ptp_s", 0.06)])
def test_tv_sign_law(name, F, request):
    p = request.getfixturevalue(name)
    checked = 0
    for i in range(300):
        u_l, u_r = sample_pair(p, rng_for(17, i))
        report = delta_tv(p, F, u_l, u_r)
        if report.margin < 1e-6:
            continue
        checked += 1
        assert report.sign_law_holds, (u_l, u_r, report)
    assert checked > 100


def test_tv_vanishes_on_d1(ptp_s):
    report = delta_tv(ptp_s, 0.1, free_state(ptp_s, 0.1), curve_state(ptp_s, 0.8, 0.1))
    assert report.zero_zone
    assert report.is_zero


def test_delta_tv_accepts_explicit_solver(pta_r, ptp_s):
    u_l, u_r = State(1.0, 0.3), vacuum(pta_r)
    default = delta_tv(pta_r, 0.12, u_l, u_r)
    explicit = delta_tv(pta_r, 0.12, u_l, u_r, solver=SolverFamily.R)
    assert explicit.dtv_v == pytest.approx(default.dtv_v, abs=1e-12)
    assert explicit.dtv_w == pytest.approx(default.dtv_w, abs=1e-12)
    assert explicit.zero_zone == default.zero_zone

    u_l, u_r = free_state(ptp_s, 0.6354), vacuum(ptp_s)
    sf = delta_tv(ptp_s, 0.15, u_l, u_r, solver=SolverFamily.S)
    assert sf.classification is DClass.D2
    assert sf.dtv_v == pytest.approx(delta_tv(ptp_s, 0.15, u_l, u_r).dtv_v, abs=1e-12)


def test_rf_adds_less_variation_than_sf(ptp_s):
    strict = 0
    for i in range(300):
        u_l, u_r = sample_pair(ptp_s, rng_for(19, i))
        cmp = compare_tv_rf_sf(ptp_s, 0.1, u_l, u_r)
        if cmp.margin < 1e-6:
            continue
        assert cmp.ordering_holds, (u_l, u_r, cmp)
        assert cmp.characterization_holds, (u_l, u_r, cmp)
        if cmp.expected_v_gap is not None:
            assert cmp.sf.dtv_v - cmp.rf.dtv_v == pytest.approx(cmp.expected_v_gap, abs=1e-9)
            strict += 1
    assert strict > 0


# ---------------------------------------------------------------------------
# S against R on the intersecting counterpart
# ---------------------------------------------------------------------------

def test_s_matches_r_outside_its_families(ptp_s, ptp_r):
    checked = 0
    for i in range(300):
        u_l, u_r = sample_pair(ptp_s, rng_for(23, i))
        if s_differs_from_r(ptp_s, u_l, u_r) is not None:
            continue
        checked += 1
        gap = l1_distance(ptp_s, solve_S(ptp_s, u_l, u_r), solve_R(ptp_r, u_l, u_r), -4.0, 4.0)
        assert gap < 1e-8, (u_l, u_r, gap)
    assert checked > 100


def test_sf_matches_rf_outside_its_families(ptp_s, ptp_r):
    F = 0.1
    checked = 0
    for i in range(300):
        u_l, u_r = sample_pair(ptp_s, rng_for(29, i))
        if abs(gate_flux_estimate(ptp_s, u_l, u_r, SolverFamily.S) - F) < 1e-6:
            continue
        sf = solve_SF(ptp_s, F, u_l, u_r)
        if sf.classification is DClass.D1:
            if s_differs_from_r(ptp_s, u_l, u_r) is not None:
                continue
        elif (sf_selection_differs(ptp_s, F, u_l, u_r) is not None
              or s_differs_from_r(ptp_s, u_l, sf.u_hat) is not None
              or s_differs_from_r(ptp_s, sf.u_check, u_r) is not None):
            continue
        checked += 1
        rf = solve_RF(ptp_r, F, u_l, u_r)
        assert rf.classification is sf.classification, (u_l, u_r)
        gap = l1_distance(ptp_s, sf.fan, rf.fan, -4.0, 4.0)
        assert gap < 1e-8, (u_l, u_r, gap)
    assert checked > 60


# ---------------------------------------------------------------------------
# Invariant domains
# ---------------------------------------------------------------------------

def test_membership(pta_r):
    F = 0.12
    spec_f = DomainSpec.invariant_free(F)
    spec_c = DomainSpec.invariant_congested(pta_r, F)
    assert spec_c.kind is DomainKind.I_C_R
    assert member(pta_r, F, spec_f, free_state(pta_r, 0.2))
    assert member(pta_r, F, spec_c, State(1.0, -0.4))
    assert member(pta_r, F, spec_c, gate_point(pta_r, F))
    assert not member(pta_r, F, spec_c, free_state(pta_r, 0.05))
    assert not member(pta_r, F, spec_f, State(2.0, 0.0))


def test_congested_domain_of_s_adds_gate_point_only_below_congested_capacity(ptp_s):
    low, high = 0.06, 0.1
    point_low, point_high = gate_point(ptp_s, low), gate_point(ptp_s, high)
    assert member(ptp_s, low, DomainSpec.invariant_congested(ptp_s, low), point_low)
    assert not member(ptp_s, high, DomainSpec.invariant_congested(ptp_s, high), point_high)


@pytest.mark.parametrize("name,F,solver", [("pta_r", 0.12, "RF"), ("ptp_s", 0.1, "SF"), ("ptp_s", 0.06, "SF")])
def test_invariant_domains_are_closed(name, F, solver, request):
    p = request.getfixturevalue(name)
    solve = make_solver(p, solver, F)
    for spec in (DomainSpec.invariant_free(F), DomainSpec.invariant_congested(p, F)):
        report = closure_test(p, F, spec, solve, n_samples=200, seed=4)
        assert report.n_pairs > 100
        assert report.closed, [v.state for v in report.violations[:3]]


def test_free_domain_of_s_leaks_above_congested_capacity(ptp_s):
    F = 0.15
    assert F > ptp_s.V_c * ptp_s.sigma_c_plus
    u_l, u_r = free_state(ptp_s, 0.6354), vacuum(ptp_s)
    assert sf_selection_differs(ptp_s, F, u_l, u_r) == "free_plus_to_free"

    split = solve_SF(ptp_s, F, u_l, u_r)
    assert split.u_hat.rho == pytest.approx(0.709771, abs=1e-5)
    assert split.u_hat.q == pytest.approx(0.464031, abs=1e-5)
    assert flux(ptp_s, psi2(ptp_s, split.u_hat, "+")) == pytest.approx(0.1383, abs=1e-4)
    spec_f = DomainSpec.invariant_free(F)
    assert member(ptp_s, F, spec_f, u_l) and member(ptp_s, F, spec_f, u_r)
    assert not member(ptp_s, F, spec_f, split.u_hat)

    report = closure_test(ptp_s, F, spec_f, make_solver(ptp_s, "SF", F), n_samples=200, seed=4)
    assert not report.closed


def test_domain_suite_records_free_leak_above_congested_capacity(ptp_s):
    result = run_suite(ptp_s, "invariant_domains", 0.15, SMALL)
    assert "If_closed" not in result.checks
    assert "If_closed" in result.recorded
    assert "Ic_closed" in result.checks


def test_congested_phase_leaks_exactly_the_gate_point(pta_r):
    solve = make_solver(pta_r, "RF", 0.12)
    report = closure_test(pta_r, 0.12, DomainSpec(kind=DomainKind.OMEGA_C), solve, n_samples=200, seed=4)
    violators = report.distinct_violators()
    assert violators
    point = gate_point(pta_r, 0.12)
    assert all(state_distance(v, point) <= 1e-9 for v in violators)


def test_congested_phase_closed_above_free_capacity(pta_r):
    F = 0.3
    solve = make_solver(pta_r, "RF", F)
    report = closure_test(pta_r, F, DomainSpec(kind=DomainKind.OMEGA_C), solve, n_samples=200, seed=4)
    assert report.closed


def test_generators_reject_unknown_family(pta_r):
    with pytest.raises(UsageError):
        minimality_generators(pta_r, 0.12, "Omega")


def test_no_congested_generators_above_threshold(pta_r):
    assert minimality_generators(pta_r, 0.3, "Ic") == []


# ---------------------------------------------------------------------------
# Suites
# ---------------------------------------------------------------------------

def test_run_suite_rejects_unknown_name(pta_r):
    with pytest.raises(UsageError):
        run_suite(pta_r, "stability", 0.12, SMALL)


@pytest.mark.parametrize("suite", ["consistency", "tv", "invariant_domains", "continuity"])
def test_suites_pass_on_toll_gate_model(pta_r, suite):
    result = run_suite(pta_r, suite, 0.12, SMALL)
    assert result.passed, result.checks
    assert result.rows


def test_continuity_suite_records_sf_jump_as_pass(ptp_s):
    result = run_suite(ptp_s, "continuity", 0.1, SMALL)
    assert result.checks["SF_discontinuity_observed"]
    assert result.passed, result.checks
