import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from decaycert.expr import parse_expr
from decaycert.inequality import ContinuousProblem, Envelope, log_grid
from decaycert.ode import (
    Status, Trajectory, check_envelope, dopri_step, integrate_extremal, integrate_scalar, solve,
)
from decaycert.search import PowerLawShape


def linear(gamma="1", beta="0", alpha="0"):
    return ContinuousProblem.from_strings(gamma, beta, alpha)


def test_linear_decay():
    traj = integrate_extremal(linear(), 1.0, 1.0)
    assert traj.status == Status.COMPLETED
    assert traj.t[-1] == 1.0
    assert abs(traj.g[-1] - math.exp(-1)) <= 1e-6


def test_constant_solution():
    traj = integrate_extremal(linear("0"), 0.5, 10.0)
    assert np.all(traj.g == 0.5)
    assert np.all(traj.g_dot == 0.0)


def test_scalar_examples():
    traj = integrate_scalar(parse_expr("-y", {"t", "y"}), 2.0, 0.0, 1.0)
    assert abs(traj.g[-1] - 2 * math.exp(-1)) <= 1e-6
    flat = integrate_scalar(parse_expr("0", {"t", "y"}), 3.0, 0.0, 5.0)
    assert np.all(flat.g == 3.0)


def test_blowup_near_one():
    traj = integrate_scalar(parse_expr("y^2", {"t", "y"}), 1.0, 0.0, 2.0)
    assert traj.status == Status.BLEW_UP
    assert traj.escape_time == traj.t[-1]
    assert abs(traj.escape_time - 1.0) < 1e-6


def test_extremal_blowup_escape_time():
    traj = integrate_extremal(linear("0", "0", "y^2"), 0.5, 5.0)
    assert traj.status == Status.BLEW_UP
    assert traj.escape_time == pytest.approx(2.0, abs=1e-6)


def test_example1_u_equation_from_zero():
    shape = PowerLawShape(m=1, q=1.5, c=4, p=2)
    traj = integrate_scalar(shape.u_rhs(), 0.0, 0.0, 1e3)
    assert traj.status == Status.COMPLETED
    square = Trajectory(traj.t, traj.g ** 2, 2 * traj.g * traj.g_dot, traj.tolerance, traj.status)
    check = check_envelope(square, Envelope.from_string("4*(1+t)"))
    assert check.ok and check.worst_slack > 0


def test_check_envelope_examples():
    ts = np.linspace(0, 1, 11)
    ones = Trajectory(ts, np.ones_like(ts), np.zeros_like(ts), (1e-8, 1e-10), Status.COMPLETED)
    check = check_envelope(ones, Envelope.from_string("2"))
    assert len(check.violations) == 11
    assert check.worst_slack == -0.5
    zeros = Trajectory(ts, np.zeros_like(ts), np.zeros_like(ts), (1e-8, 1e-10), Status.COMPLETED)
    assert check_envelope(zeros, Envelope.from_string("3*(1+t)^2")).ok


def test_nonstrict_tolerance():
    ts = np.array([0.0, 1.0])
    at_bound = Trajectory(ts, np.array([0.5, 0.5]), np.zeros(2), (1e-8, 1e-10), Status.COMPLETED)
    env = Envelope.from_string("2")
    assert not check_envelope(at_bound, env, strict=True).ok
    assert check_envelope(at_bound, env, strict=False).ok


def test_dense_output_accuracy():
    traj = integrate_extremal(linear(), 1.0, 5.0, rel_tol=1e-10, abs_tol=1e-12)
    ts = np.linspace(0, 5, 401)
    assert np.max(np.abs(traj.sample(ts) - np.exp(-ts))) < 1e-8
    g, gd = traj.sample_with_derivative(ts)
    assert np.max(np.abs(gd + g)) < 1e-12


def test_fixed_step_order():
    f = lambda t, y: -y
    errors = []
    for n in (8, 16, 32):
        h = 1.0 / n
        y = np.array([1.0])
        fy = f(0.0, y)
        for i in range(n):
            y, fy, _, _ = dopri_step(f, i * h, y, fy, h)
        errors.append(abs(y[0] - math.exp(-1)))
    for a, b in zip(errors, errors[1:]):
        assert 32 / 4 <= a / b <= 32 * 4


def test_tolerance_decade_order():
    errs = []
    for k in range(3):
        traj = integrate_extremal(linear(), 1.0, 1.0, rel_tol=1e-8 / 10 ** k, abs_tol=1e-10 / 10 ** k)
        errs.append(abs(traj.g[-1] - math.exp(-1)))
    # a 5th order method gains about 10^(5/6) ~ 6.8x per tolerance decade;
    # accept a factor of 4 either side of that
    for a, b in zip(errs, errs[1:]):
        assert 10 ** (5 / 6) / 4 <= a / b <= 10 ** (5 / 6) * 4


def test_clamp_keeps_nonnegative():
    p = linear("50", "0", "0")
    traj = integrate_extremal(p, 1e-3, 10.0, rel_tol=1e-3, abs_tol=1e-3)
    assert np.all(traj.g >= 0)
    assert np.all(traj.sample(np.linspace(0, 10, 97)) >= 0)


def test_csv_round_trip():
    traj = integrate_extremal(linear(), 1.0, 1.0)
    lines = traj.to_csv().splitlines()
    assert lines[0] == "t,g,g_dot"
    rows = np.array([[float(x) for x in line.split(",")] for line in lines[1:]])
    assert np.array_equal(rows[:, 0], traj.t)
    assert np.array_equal(rows[:, 1], traj.g)
    assert np.array_equal(rows[:, 2], traj.g_dot)


def test_time_strictly_increasing():
    traj = integrate_extremal(PowerLawShape(1, 1.5, 4, 2).problem(), 0.16, 1e4)
    assert np.all(np.diff(traj.t) > 0)


def test_vector_solve():
    sol = solve(lambda t, u: -u, 0.0, [3.0, 4.0], 1.0)
    assert abs(np.linalg.norm(sol.y[-1]) - 5 * math.exp(-1)) < 1e-6


# --- properties ------------------------------------------------------------------

@settings(max_examples=50, deadline=None)
@given(st.floats(0.0, 3.0), st.floats(0.0, 2.0), st.floats(0.0, 1.0), st.floats(0.0, 0.3),
       st.floats(0.0, 0.3))
def test_comparison_property(g, a, b, g0a, gap):
    p = ContinuousProblem.from_strings("g/(1+t)", "b/(1+t)^2", "a*y^2/(1+t)^2", params={"g": g, "a": a, "b": b})
    g0b = g0a + gap
    ta = integrate_extremal(p, g0a, 50.0)
    tb = integrate_extremal(p, g0b, 50.0)
    if Status.BLEW_UP in (ta.status, tb.status):
        return
    ts = log_grid(0.0, 50.0, 200)
    assert np.all(ta.sample(ts) <= tb.sample(ts) + 10 * 1e-10)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 5.0), st.floats(0.0, 10.0))
def test_damped_trajectories_nonincreasing(g, g0):
    p = ContinuousProblem.from_strings("g*(1 + 0.5*exp(-t))", "0", "0", params={"g": g})
    traj = integrate_extremal(p, g0, 20.0)
    assert np.all(np.diff(traj.g) <= 1e-10)
