import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_certificate, random_plant
from sporadic_observer import (Certificate, ObserverGains, PlantModel, build_corollary_problem, build_design_problem,
                               build_existence_problem, build_verification_problem, convex_decomposition,
                               count_scalar_variables, eval_M, solve)
from sporadic_observer.examples import flexible_arm, oscillator, oscillator_gains, three_state
from sporadic_observer.lmi import DESIGN_METHODS, DeltaRangeError, UnknownMethodError

UNDETECTABLE = PlantModel.linear(A=[[1.0]], C=[[0.0]], N=[[1.0]], Cp=[[1.0]])


def reference_M(plant, gains, c, tau):
    """Block-by-block construction in (eps, theta_tilde, w, zeta) order."""
    A, B, S, N, C, Cp = plant.A, plant.B, plant.S, plant.N, plant.C, plant.Cp
    L, H = gains.L, gains.H
    e = np.exp(c.delta * tau)
    lin = plant.is_linear
    m11 = c.P1 @ (A - L @ C) + (A - L @ C).T @ c.P1 + 2 * c.lambda_t * c.P1 + Cp.T @ Cp
    if not lin:
        m11 = m11 + c.chi * plant.lipschitz_ell**2 * S.T @ S
    m12 = c.P1 @ L + e * (C @ A - C @ L @ C - H @ C).T @ c.P2
    m22 = e * (c.P2 @ (C @ L + H) + (C @ L + H).T @ c.P2 + (2 * c.lambda_t - c.delta) * c.P2)
    rows = [[m11, m12, c.P1 @ N], [m12.T, m22, e * c.P2 @ C @ N],
            [(c.P1 @ N).T, (e * c.P2 @ C @ N).T, -c.gamma**2 * np.eye(N.shape[1])]]
    if not lin:
        rows[0].append(c.P1 @ B)
        rows[1].append(e * c.P2 @ C @ B)
        rows[2].append(np.zeros((N.shape[1], B.shape[1])))
        rows.append([(c.P1 @ B).T, (e * c.P2 @ C @ B).T, np.zeros((B.shape[1], N.shape[1])),
                     -c.chi * np.eye(B.shape[1])])
    return np.block(rows)


def test_convex_decomposition_values():
    assert convex_decomposition(2.0, 0.5, 0.0) == (1.0, 0.0)
    assert convex_decomposition(2.0, 0.5, 0.5) == (0.0, 1.0)
    l1, l2 = convex_decomposition(1.0, 1.0, 0.5)
    assert l1 == pytest.approx(0.62246, abs=1e-5)
    assert l2 == pytest.approx(0.37754, abs=1e-5)


@given(st.floats(1e-3, 50), st.floats(1e-3, 2), st.floats(0, 1))
def test_convex_weights_are_a_partition(delta, T2, frac):
    l1, l2 = convex_decomposition(delta, T2, frac * T2)
    assert 0 <= l1 <= 1 and 0 <= l2 <= 1
    assert l1 + l2 == pytest.approx(1.0, abs=1e-14)


@given(st.integers(0, 10**6), st.booleans())
def test_eval_M_matches_block_reference(seed, nonlinear):
    rng = np.random.default_rng(seed)
    n_z, n_y = int(rng.integers(1, 5)), int(rng.integers(1, 3))
    p = random_plant(rng, n_z, n_y, nonlinear)
    g = ObserverGains(rng.normal(size=(n_z, n_y)), rng.normal(size=(n_y, n_y)))
    c = random_certificate(rng, n_z, n_y, linear=not nonlinear)
    tau = float(rng.uniform(0, c.T2))
    M = eval_M(p, g, c, tau)
    R = reference_M(p, g, c, tau)
    assert np.max(np.abs(M - R)) <= 1e-12 * (1 + np.max(np.abs(R)))
    assert np.max(np.abs(M - M.T)) <= 1e-12


@given(st.integers(0, 10**6))
def test_M_is_affine_in_the_convex_weights(seed):
    rng = np.random.default_rng(seed)
    n_z, n_y = int(rng.integers(1, 5)), int(rng.integers(1, 3))
    p = random_plant(rng, n_z, n_y, nonlinear=bool(seed % 2))
    g = ObserverGains(rng.normal(size=(n_z, n_y)), rng.normal(size=(n_y, n_y)))
    c = random_certificate(rng, n_z, n_y, linear=p.is_linear)
    M0, MT = eval_M(p, g, c, 0.0), eval_M(p, g, c, c.T2)
    for tau in np.linspace(0, c.T2, 7):
        l1, l2 = convex_decomposition(c.delta, c.T2, tau)
        assert np.max(np.abs(eval_M(p, g, c, tau) - (l1 * M0 + l2 * MT))) <= 1e-10 * (1 + np.max(np.abs(M0)))


def test_eval_M_rejects_timer_outside_range():
    c = Certificate(np.eye(2), np.eye(1), 1.0, 0.0, 0.1, 1.0, 0.4)
    with pytest.raises(ValueError):
        eval_M(oscillator(), oscillator_gains(), c, 0.5)


def test_vanishing_gamma_makes_M_indefinite():
    c = Certificate(np.eye(2), np.eye(1), 1.0, 0.0, 0.1, 1e-9, 0.4)
    assert np.linalg.eigvalsh(eval_M(oscillator(), oscillator_gains(), c, 0.2))[-1] >= 0


def test_verification_constraint_agrees_with_direct_evaluation(rng):
    # affine-expression route versus direct numpy route, away from the margin on the diagonal
    p, g = flexible_arm(), ObserverGains(rng.normal(size=(4, 2)), rng.normal(size=(2, 2)))
    prob = build_verification_problem(p, g, 0.01, 3.0, 0.2)
    x = rng.normal(size=prob.n_vars)
    cert_like = Certificate(prob.matrix_value("P1", x), prob.matrix_value("P2", x), 3.0,
                            float(prob.matrix_value("chi", x)[0, 0]), 0.01,
                            float(np.sqrt(abs(prob.matrix_value("mu", x)[0, 0]))), 0.2)
    mu = prob.matrix_value("mu", x)[0, 0]
    for cons, tau in zip(prob.constraints, (0.0, 0.2)):
        M = reference_M(p, g, cert_like, tau)
        M[6, 6] = -mu
        diff = cons.value(x) - M
        off = diff - np.diag(np.diag(diff))
        assert np.max(np.abs(off)) <= 1e-10 * (1 + np.max(np.abs(M)))
        assert np.all(np.diag(diff) > 0)


def test_verification_variables_and_objective():
    prob = build_verification_problem(oscillator(), oscillator_gains(), 0.05, 2.7, 0.41)
    assert [v.label for v in prob.variables] == ["P1[0][0]", "P1[0][1]", "P1[1][1]", "P2[0][0]", "mu"]
    assert prob.objective is not None and prob.objective[-1] == 1.0
    fixed = build_verification_problem(oscillator(), oscillator_gains(), 0.05, 2.7, 0.41, fixed_gamma=40.0)
    assert "mu" not in fixed.matrices and fixed.objective is None


def test_zero_gains_on_unstable_plant_are_not_certifiable():
    p = PlantModel.linear(A=[[1.0]], C=[[1.0]], N=[[1.0]], Cp=[[1.0]])
    prob = build_verification_problem(p, ObserverGains([[0.0]], [[0.0]]), 0.1, 1.0, 0.2)
    assert not solve(prob).feasible


def test_propx80_refuses_small_delta():
    with pytest.raises(DeltaRangeError):
        build_design_problem(oscillator(), "PropX80", 0.05, 0.05, 0.41)
    with pytest.raises(UnknownMethodError):
        build_design_problem(oscillator(), "Kalman", 0.05, 1.0, 0.41)


def test_zoh_problem_carries_nonsingularity_constraint():
    prob = build_design_problem(three_state(), "ZOH", 0.2, 7.0, 0.3)
    assert [c.name for c in prob.constraints] == ["Xi(0.0)", "Xi(0.3)", "X+X'>0"]
    off = build_design_problem(three_state(), "ZOH", 0.2, 7.0, 0.3, nonsingular_x=False)
    assert len(off.constraints) == 2


def test_census_closed_forms():
    assert count_scalar_variables("PropPred", 2, 1) == 8
    assert count_scalar_variables("PropX80", 2, 1) == 13
    assert count_scalar_variables("PropX8X6", 2, 1) == 13
    # the closed form gives 23 here (see the flexible-arm counts below, which it reproduces)
    assert count_scalar_variables("ZOH", 2, 1) == 23
    assert [count_scalar_variables(m, 4, 2) for m in ("PropPred", "PropX80", "ZOH")] == [26, 46, 86]
    with pytest.raises(UnknownMethodError):
        count_scalar_variables("Kalman", 2, 1)


@pytest.mark.parametrize("method", ["PropPred", "PropX80", "PropX8X6", "ZOH"])
@given(n_z=st.integers(1, 6), n_y=st.integers(1, 3), seed=st.integers(0, 1000))
def test_census_matches_emitted_variables(method, n_z, n_y, seed):
    rng = np.random.default_rng(seed)
    lin = random_plant(rng, n_z, n_y)
    nl = random_plant(rng, n_z, n_y, nonlinear=True)
    assert build_design_problem(lin, method, 0.1, 1.0, 0.2).n_vars == count_scalar_variables(method, n_z, n_y)
    assert (build_design_problem(nl, method, 0.1, 1.0, 0.2, fixed_gamma=2.0).n_vars
            == count_scalar_variables(method, n_z, n_y))


def test_predictor_problem_has_no_Y():
    prob = build_design_problem(oscillator(), "Predictor", 0.05, 2.0, 0.41)
    assert "Y" not in prob.matrices and "J" in prob.matrices


def test_existence_problem():
    assert solve(build_existence_problem(oscillator())).feasible
    assert solve(build_existence_problem(flexible_arm())).feasible
    assert not solve(build_existence_problem(UNDETECTABLE)).feasible


def test_corollaries():
    prob = build_corollary_problem(oscillator(), "NoLambda", delta=2.7, T2=0.41, gamma=40.0, gains=oscillator_gains())
    assert prob.metadata["corollary"] == "NoLambda" and prob.metadata["lambda_t"] == 0.0
    assert solve(prob).feasible
    ng = build_corollary_problem(UNDETECTABLE, "NoGamma", lambda_t=0.1, delta=1.0, T2=0.1, method="PropPred")
    assert not solve(ng).feasible
    full = build_verification_problem(flexible_arm(), oscillator_gains_for_arm(), 0.01, 5.0, 0.1)
    proj = build_corollary_problem(flexible_arm(), "NoGamma", lambda_t=0.01, delta=5.0, T2=0.1,
                                   gains=oscillator_gains_for_arm())
    assert proj.constraints[0].dimension == full.constraints[0].dimension - flexible_arm().n_w
    with pytest.raises(ValueError):
        build_corollary_problem(oscillator(), "NoLambda", delta=1.0, T2=0.4, gains=oscillator_gains())


def oscillator_gains_for_arm():
    return ObserverGains(np.ones((4, 2)), np.zeros((2, 2)))
