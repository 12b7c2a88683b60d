import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import bisection_eigenvalues, closed_form_2x2

from decaycert.expr import Const, UnknownVariableError, parse_expr
from decaycert.inequality import Verdict, condition_residual, log_grid, verify_certificate
from decaycert.ode import integrate_extremal
from decaycert.reduction import (
    AsymmetryError, DimensionError, InsufficientTrajectoryError, VectorSystem, build_example2, check_gdot_decay,
    example2_constant, example2_system, falsify_alpha_bound, integrate_vector, jacobi_eigenvalues,
    min_eigenvalue, reduce_to_scalar,
)


def test_eigen_examples():
    assert min_eigenvalue(np.eye(3)) == 1.0
    assert min_eigenvalue(np.diag([2.0, 5.0])) == 2.0
    assert min_eigenvalue([[2.0, 1.0], [1.0, 2.0]]) == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(AsymmetryError):
        min_eigenvalue([[1.0, 2.0], [0.0, 1.0]])
    with pytest.raises(DimensionError):
        min_eigenvalue(np.ones((2, 3)))


sym = st.floats(-10, 10, allow_nan=False)


@settings(max_examples=100, deadline=None)
@given(st.lists(sym, min_size=36, max_size=36), st.integers(1, 6))
def test_eigen_vs_sturm_bisection(vals, d):
    M = np.array(vals[:d * d]).reshape(d, d)
    M = np.triu(M) + np.triu(M, 1).T
    scale = max(1.0, np.abs(M).max())
    ref = bisection_eigenvalues(M)
    assert np.allclose(np.sort(jacobi_eigenvalues(M)), ref, atol=1e-10 * scale, rtol=0)
    if d == 2:
        assert np.allclose(closed_form_2x2(M), ref, atol=1e-10 * scale, rtol=0)


def test_reduction_constant_case():
    sys = VectorSystem.from_strings([[1, 0], [0, 1]], ["0", "0"], ["0", "0"], "0", [0.3, 0.4])
    p = reduce_to_scalar(sys)
    assert p.gamma == Const(1.0) and p.beta == Const(0.0) and p.alpha == Const(0.0)


def test_reduction_coupled_and_oracle():
    sys = VectorSystem.from_strings([[2, 1], [1, 2]], ["0", "0"], ["0", "0"], "0", [1.0, 0.0])
    p = reduce_to_scalar(sys)
    assert p.gamma_at(0.0) == pytest.approx(1.0, abs=1e-15)
    traj = integrate_vector(sys, 5.0)
    assert np.all(traj.norm <= np.exp(-traj.t) + 1e-9)


def test_reduction_time_varying_A_and_forcing():
    sys = VectorSystem.from_strings([["1 + t", "0"], ["0", "2"]], ["0", "0"], ["exp(-t)", "0"], "0", [1.0, 1.0])
    p = reduce_to_scalar(sys)
    assert p.gamma_at(0.0) == 1.0 and p.gamma_at(3.0) == 2.0
    assert p.beta_at(0.0) == 1.0 and p.beta_at(1.0) == pytest.approx(math.exp(-1))


def test_dimension_and_symmetry_errors():
    with pytest.raises(DimensionError):
        VectorSystem.from_strings([[1, 0], [0, 1]], ["0"], ["0", "0"], "0", [1.0, 1.0])
    with pytest.raises(AsymmetryError):
        VectorSystem.from_strings([[1, 1], [0, 1]], ["0", "0"], ["0", "0"], "0", [1.0, 1.0])
    with pytest.raises(UnknownVariableError):
        VectorSystem.from_strings([[1]], ["u2"], ["0"], "0", [1.0])
    with pytest.raises(DimensionError):
        VectorSystem(A=np.eye(1), h_field=(parse_expr("u2", {"u2"}),), f_field=(Const(0.0),),
                     alpha_bound=Const(0.0), u0=[1.0])


def test_vector_oracle_examples():
    diag = VectorSystem.from_strings([[1, 0], [0, 1]], ["0", "0"], ["0", "0"], "0", [3.0, 4.0])
    traj = integrate_vector(diag, 1.0)
    assert abs(traj.norm[-1] - 5 * math.exp(-1)) < 1e-6
    still = VectorSystem.from_strings([[0, 0], [0, 0]], ["0", "0"], ["0", "0"], "0", [0.0, 0.0])
    assert np.all(integrate_vector(still, 3.0).u == 0.0)
    csv = traj.to_csv().splitlines()
    assert csv[0] == "t,u_1,u_2,norm"


def test_scalar_reduction_of_one_dimensional_system():
    # d=1, A=0, h = a(t) u |u|^p, alpha = a(t) y^(1+p), f = (1+t)^-q
    sys = VectorSystem.from_strings([[0.0]], ["0.5*(1+t)^(-2)*u1*abs(u1)^2"], ["(1+t)^(-2)"],
                                    "0.5*(1+t)^(-2)*y^3", [0.2])
    p = reduce_to_scalar(sys)
    assert p.gamma == Const(0.0)
    for t in (0.0, 1.0, 30.0):
        assert p.beta_at(t) == pytest.approx((1 + t) ** -2, rel=1e-15)
    assert falsify_alpha_bound(sys, [0.01, 0.1, 1.0, 5.0], [0.0, 1.0, 10.0]) == []


def test_falsifier_finds_bad_bound():
    sys = VectorSystem.from_strings([[1, 0], [0, 1]], ["u1^2", "u2"], ["0", "0"], "0.5*y", [0.1, 0.1])
    bad = falsify_alpha_bound(sys, [0.5, 2.0], [0.0], directions=32, seed=3)
    assert bad and all(norm_h > bound for _, _, norm_h, bound in bad)


def test_falsifier_deterministic_per_seed():
    sys = VectorSystem.from_strings([[1, 0], [0, 1]], ["u1*u2", "0"], ["0", "0"], "0.4*y^2", [0.1, 0.1])
    a = falsify_alpha_bound(sys, [1.0], [0.0], directions=128, seed=7)
    b = falsify_alpha_bound(sys, [1.0], [0.0], directions=128, seed=7)
    assert a == b and a


# --- example 2 ---------------------------------------------------------------------

def test_example2_constant_branches():
    assert example2_constant(1.0, 1.0, 2.0) == 1.0
    assert example2_constant(3.0, 1.0, 2.0) == 3.0
    assert example2_constant(1.0, 1.0, 0.5) == pytest.approx(2 ** -0.5)
    assert example2_constant(2.0, 5.0, 1.0) == 1.0


def test_example2_certified():
    p, env = build_example2(1.0, 1.0, 1.0, 0.5, 2.0)
    assert condition_residual(p, env, 0.0) == pytest.approx(1 / 16, rel=1e-14)
    rep = verify_certificate(p, env, 0.4, 1e4)
    assert rep.verdict == Verdict.CERTIFIED_STRICT
    assert 1 / env.mu_at(1e4) < 1.0


def test_example2_theta_one_has_no_forcing():
    p, _ = build_example2(1.0, 1.0, 1.0, 1.0, 2.0)
    assert p.beta == Const(0.0)
    with pytest.raises(ValueError):
        build_example2(1.0, 1.0, 1.0, 0.0, 2.0)
    with pytest.raises(ValueError):
        build_example2(1.0, 1.0, 0.0, 0.5, 2.0)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.2, 5.0), st.floats(0.2, 5.0), st.floats(0.2, 3.0), st.floats(0.05, 1.0),
       st.floats(0.3, 4.0))
def test_example2_chain(c, lam, b, theta, p_exp):
    p, env = build_example2(c, lam, b, theta, p_exp)
    C = example2_constant(c, lam, p_exp)
    # the constant's two branches keep C * max(c^(1-p), (c+lam)^(1-p)) <= 1
    assert C * max(c ** (1 - p_exp), (c + lam) ** (1 - p_exp)) <= 1 + 1e-12
    for t in log_grid(0.0, 1e4, 64):
        mu = env.mu_at(t)
        drop = -env.mu_dot_at(t)                          # b lam (1+t)^(-1-b) > 0
        assert drop == pytest.approx(b * lam * (1 + t) ** (-1 - b), rel=1e-12)
        # alpha at the bound is at most theta times the drop over mu^2
        alpha = p.alpha_at(t, 1 / mu)
        assert alpha <= theta * drop / mu ** 2 * (1 + 1e-12)
        # beta is at most (1 - theta) times the same quantity since mu <= c + lam
        assert p.beta_at(t) <= (1 - theta) * drop / mu ** 2 * (1 + 1e-12) + 1e-300
        assert condition_residual(p, env, t) >= -1e-15 * drop / mu ** 2


def test_example2_vector_matches_scalar():
    sys = example2_system(1.0, 1.0, 1.0, 0.5, 2.0, 0.4)
    _, env = build_example2(1.0, 1.0, 1.0, 0.5, 2.0)
    vt = integrate_vector(sys, 1e3)
    st_ = integrate_extremal(reduce_to_scalar(sys), 0.4, 1e3)
    ts = log_grid(0.0, 1e3, 100)
    assert np.allclose(np.abs(vt.sample(ts)[:, 0]), st_.sample(ts), atol=1e-7)
    assert np.all(vt.norm < 1 / env.mu_array(vt.t))
    assert np.all(vt.norm < 1.0)


def test_gdot_decay_report():
    p, _ = build_example2(1.0, 1.0, 1.0, 0.5, 2.0)
    rep = check_gdot_decay(integrate_extremal(p, 0.4, 1e4), b=1.0, c=1.0)
    assert rep.bounded and rep.limit_ok
    assert rep.g_limit_upper <= 1.0 + 1e-6
    assert "bounded: true" in rep.to_text()


def test_gdot_decay_trivial_and_errors():
    from decaycert.inequality import ContinuousProblem
    flat = integrate_extremal(ContinuousProblem.from_strings("0", "0", "0"), 0.3, 1e3)
    rep = check_gdot_decay(flat, b=1.0)
    assert rep.g_end == 0.3 and rep.g_limit_upper == 0.3 and rep.bounded
    with pytest.raises(ValueError):
        check_gdot_decay(flat, b=0.0)
    with pytest.raises(InsufficientTrajectoryError):
        check_gdot_decay(integrate_extremal(ContinuousProblem.from_strings("0", "0", "0"), 0.3, 50.0), b=1.0)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2 ** 32 - 1))
def test_reduction_soundness_random_pd(d, seed):
    rng = np.random.default_rng(seed)
    Q = rng.normal(size=(d, d))
    A = Q @ Q.T + 0.1 * np.eye(d)
    A = 0.5 * (A + A.T)
    u0 = rng.normal(size=d)
    sys = VectorSystem(A=A, h_field=(Const(0.0),) * d, f_field=(Const(0.0),) * d, alpha_bound=Const(0.0), u0=u0)
    gamma = min_eigenvalue(A)
    traj = integrate_vector(sys, 3.0, rel_tol=1e-8, abs_tol=1e-10)
    bound = np.linalg.norm(u0) * np.exp(-gamma * traj.t)
    assert np.all(traj.norm <= bound + 10 * 1e-10 + 1e-8 * np.linalg.norm(u0))
