import numpy as np
import pytest

from sporadic_observer import (ObserverGains, PlantModel, build_design_problem, hinf_necessary, solve,
                               verify_certificate)
from sporadic_observer.design import (AllInfeasible, DesignRequest, IllConditionedRecovery, InfeasibleAtLowerBound,
                                      design_min_gamma, maximize_T2, pareto_sweep, parse_grid, recover_gains,
                                      two_stage_refine)
from sporadic_observer.examples import flexible_arm, oscillator, oscillator_gains, three_state

UNDETECTABLE = PlantModel.linear(A=[[1.0]], C=[[0.0]], N=[[1.0]], Cp=[[1.0]])
OSC_DELTAS = np.geomspace(1.0, 8.0, 10)


def test_parse_grid():
    np.testing.assert_allclose(parse_grid("1,100,3,log"), [1, 10, 100])
    np.testing.assert_allclose(parse_grid("0.5, 1.5, 3, lin"), [0.5, 1.0, 1.5])
    for bad in ("1,2,3", "0,1,3,log", "2,1,3,lin", "1,2,3,cubic"):
        with pytest.raises(ValueError):
            parse_grid(bad)


def test_request_validation():
    p = oscillator()
    with pytest.raises(ValueError):
        DesignRequest(p, "PropPred", 0.05, 0.41, delta_grid=[])
    with pytest.raises(ValueError):
        DesignRequest(p, "PropPred", 0.05, 0.41, delta_grid=[2.0, 1.0])
    with pytest.raises(ValueError):
        DesignRequest(p, "PropPred", 0.05, 0.41, T1=0.5)
    with pytest.raises(ValueError):
        DesignRequest(p, "Kalman", 0.05, 0.41)
    assert len(DesignRequest(p, "PropPred", 0.05, 0.41).delta_grid) == 50


def _point(prob, values):
    x = np.zeros(prob.n_vars)
    for name, M in values.items():
        x[prob.matrices[name]] = M
    return {v.label: float(x[v.index]) for v in prob.variables}


def test_recovery_formulas():
    p = three_state()
    rng = np.random.default_rng(0)
    P1 = np.diag([2.0, 3.0, 4.0])
    P2 = np.diag([1.0, 5.0])
    J = rng.normal(size=(3, 2))
    prob = build_design_problem(p, "PropPred", 0.2, 1.0, 0.3)
    g = recover_gains("PropPred", _point(prob, {"P1": P1, "P2": P2, "J": J, "Y": np.zeros((2, 2))}), p)
    np.testing.assert_allclose(g.L, np.linalg.solve(P1, J), rtol=1e-14)
    # with Y = 0 the injection gain is the predictor one
    np.testing.assert_array_equal(g.H, -p.C @ g.L)
    Y = rng.normal(size=(2, 2))
    g = recover_gains("PropPred", _point(prob, {"P1": P1, "P2": P2, "J": J, "Y": Y}), p)
    np.testing.assert_allclose(g.H, np.linalg.solve(P2, Y.T) - p.C @ g.L, rtol=1e-13)
    zp = build_design_problem(p, "ZOH", 0.2, 1.0, 0.3)
    X = np.eye(3) + 0.1 * rng.normal(size=(3, 3))
    gz = recover_gains("ZOH", _point(zp, {"X": X, "J": J, "P1": P1, "P2": P2}), p)
    assert gz.method == "ZOH" and not np.any(gz.H)
    np.testing.assert_allclose(gz.L, np.linalg.solve(X.T, J), rtol=1e-13)
    xp = build_design_problem(p, "PropX80", 0.2, 1.0, 0.3)
    U, W = np.diag([2.0, 3.0]), rng.normal(size=(2, 2))
    gx = recover_gains("PropX80", _point(xp, {"X": X, "J": J, "U": U, "W": W, "P1": P1, "P2": P2}), p)
    np.testing.assert_allclose(gx.H, np.linalg.solve(U.T, W), rtol=1e-13)


def test_singular_recovery_matrix_is_refused():
    p = three_state()
    prob = build_design_problem(p, "PropPred", 0.2, 1.0, 0.3)
    pt = _point(prob, {"P1": np.diag([1.0, 1.0, 1e-14]), "P2": np.eye(2), "J": np.ones((3, 2))})
    with pytest.raises(IllConditionedRecovery) as err:
        recover_gains("PropPred", pt, p)
    assert err.value.condition > 1e12


@pytest.fixture(scope="module")
def osc_design():
    return design_min_gamma(DesignRequest(oscillator(), "PropPred", 0.05, 0.41, 0.205, delta_grid=OSC_DELTAS))


def test_oscillator_proppred_design_verifies(osc_design):
    r = osc_design
    assert np.isfinite(r.gamma) and r.report.passed
    assert verify_certificate(oscillator(), r.gains, r.certificate).passed
    assert r.gamma >= hinf_necessary(oscillator(), r.gains.L, 0.05)
    assert r.gains.method == "PropPred"
    # gains come from a re-centred solve at a 1% looser gamma
    assert r.gamma <= r.design_gamma * 1.01 * (1 + 1e-9)


def test_undetectable_plant_is_infeasible_everywhere():
    with pytest.raises(AllInfeasible) as err:
        design_min_gamma(DesignRequest(UNDETECTABLE, "PropPred", 0.1, 0.2, delta_grid=[0.1, 1.0, 10.0]))
    assert len(err.value.margins) == 3


def test_three_state_zoh_design():
    r = design_min_gamma(DesignRequest(three_state(), "ZOH", 0.2, 0.3, 0.1714, delta_grid=np.geomspace(5, 12, 4)))
    assert r.gamma <= 2.0 and r.report.passed
    assert not np.any(r.gains.H)


def test_refinement_never_exceeds_design_gamma():
    p = flexible_arm()
    r = design_min_gamma(DesignRequest(p, "ZOH", 0.01, 0.1, delta_grid=[25.0]))
    ref = two_stage_refine(p, r.gains, [25.0], [0.1], 0.01)
    assert ref.gamma <= r.design_gamma * (1 + 1e-6)
    assert ref.report.passed


def test_refinement_needs_some_feasible_point():
    p = PlantModel.linear(A=[[1.0]], C=[[1.0]], N=[[1.0]], Cp=[[1.0]])
    with pytest.raises(AllInfeasible):
        two_stage_refine(p, ObserverGains([[0.0]], [[0.0]]), [0.5, 2.0], [0.1, 0.2], 0.1)


def test_refinement_picks_largest_feasible_T2():
    r = two_stage_refine(oscillator(), oscillator_gains(), [2.7], [0.2, 0.41, 0.6], 0.05)
    assert r.T2 == 0.41 and r.gamma <= 40.0


def test_pareto_curve(tmp_path):
    req = DesignRequest(oscillator(), "PropPred", 0.05, 0.41, 0.205, delta_grid=OSC_DELTAS)
    curve = pareto_sweep(req, [0.41, 0.05, 0.9])
    assert [pt[0] for pt in curve.points] == [0.05, 0.41]
    assert curve.infeasible == [0.9]
    assert all(pt[2].report.passed for pt in curve.points)
    lines = curve.to_csv().splitlines()
    assert lines[0] == "T2,gamma,delta,method"
    assert lines[2].startswith("0.41,") and lines[2].endswith(",PropPred")
    single = pareto_sweep(req, [0.41])
    assert len(single.points) == 1
    with pytest.raises(ValueError):
        pareto_sweep(req, [])


def test_maximize_T2_bracket_in_verification_mode():
    req = DesignRequest(oscillator(), "PropPred", 0.05, 0.41, delta_grid=OSC_DELTAS)
    res = maximize_T2(req, 0.2, 1.0, gains=oscillator_gains())
    lo, hi = res.bracket
    assert lo == res.T2_star and hi - lo < 1e-4 * 1.0 and not res.upper_capped
    assert res.result.report.passed and res.result.T2 == lo
    # upper end infeasible at every delta
    with pytest.raises(AllInfeasible):
        two_stage_refine(oscillator(), oscillator_gains(), OSC_DELTAS, [hi], 0.05)


def test_maximize_T2_degenerate_and_infeasible_ranges():
    req = DesignRequest(oscillator(), "PropPred", 0.05, 0.41, delta_grid=[2.7])
    res = maximize_T2(req, 0.41, 0.41, gains=oscillator_gains())
    assert res.T2_star == 0.41
    with pytest.raises(InfeasibleAtLowerBound):
        maximize_T2(req, 5.0, 6.0, gains=oscillator_gains())


def test_maximize_T2_design_mode():
    req = DesignRequest(three_state(), "ZOH", 0.2, 0.3, delta_grid=[7.4])
    res = maximize_T2(req, 0.3, 1.0, rel_width=1e-2)
    assert res.T2_star >= 0.3 and res.result.report.passed
