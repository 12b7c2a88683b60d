import math

import pytest
from hypothesis import given, settings, strategies as st

from decaycert.discrete import DiscreteProblem
from decaycert.inequality import ContinuousProblem, verify_certificate
from decaycert.search import (
    EnvelopeFamily, InvalidRangeError, NoSignChangeError, PowerLawShape, WrongShapeError,
    powerlaw_closed_form_check, refine_boundary, search_feasible,
)

SHAPE = PowerLawShape(m=1, q=1.5, c=4, p=2)
EX1_RANGES = {"lam": (1.0, 8.0), "nu": (0.25, 2.0)}


@pytest.fixture(scope="module")
def ex1_region():
    return search_feasible(SHAPE.problem(), EnvelopeFamily("power_law", EX1_RANGES), 0.16,
                           {"lam": 33, "nu": 29}, shape=SHAPE)


def test_closed_form_examples():
    assert powerlaw_closed_form_check(1, 1.5, 4, 2, 4, 1)
    assert not powerlaw_closed_form_check(1, 1.2, 4, 2, 4, 1)
    assert not powerlaw_closed_form_check(1, 1.5, 4, 2, 1e12, 1)
    assert not powerlaw_closed_form_check(1, 1.5, 4, 2, math.inf, 1)
    with pytest.raises(WrongShapeError):
        powerlaw_closed_form_check(1, 1.5, 4, 2, 4, 1, b=2)


def test_family_validation():
    with pytest.raises(InvalidRangeError):
        EnvelopeFamily("power_law", {"lam": (1.0, 1.0), "nu": (0.0, 1.0)})
    with pytest.raises(InvalidRangeError):
        EnvelopeFamily("power_law", {"lam": (-1.0, 1.0), "nu": (0.0, 1.0)})
    with pytest.raises(InvalidRangeError):
        EnvelopeFamily("shifted", {"c": (1.0, 2.0), "lam": (1.0, 2.0)})
    with pytest.raises(ValueError):
        EnvelopeFamily("spline", {})
    with pytest.raises(InvalidRangeError):
        EnvelopeFamily("constant_discrete", {"mu": (1.0, 2.0)}).axes(1)


def test_example1_region(ex1_region):
    assert not ex1_region.empty
    assert ex1_region.contains({"lam": 4.0, "nu": 1.0})
    assert not ex1_region.contains({"lam": 4.0, "nu": 1.5})
    best = ex1_region.best_point()
    assert best["nu"] == 1.0


def test_every_listed_point_passes(ex1_region):
    for pt in ex1_region.points:
        lam, nu = pt.params
        assert SHAPE.closed_form(lam, nu)
        env = ex1_region.family.envelope({"lam": lam, "nu": nu})
        assert verify_certificate(SHAPE.problem(), env, 0.16, 1e4).certified
        assert pt.headroom == pytest.approx(1 - lam * 0.16)


def test_refine_along_nu(ex1_region):
    nu_star = refine_boundary(ex1_region, "nu", 1e-4, at={"lam": 4.0})
    assert abs(nu_star - 1.0) <= 1e-3


def test_grid_only_boundary_is_later(ex1_region):
    grid_only = search_feasible(SHAPE.problem(), EnvelopeFamily("power_law", EX1_RANGES), 0.16,
                                {"lam": 33, "nu": 29})
    nu_grid = refine_boundary(grid_only, "nu", 1e-3, at={"lam": 4.0})
    # sampling up to the horizon cannot see the tail constraint, so it overshoots
    assert nu_grid > 1.05
    assert len(grid_only.points) >= len(ex1_region.points)


def test_refine_errors_and_trivial_step():
    p = ContinuousProblem.from_strings("10", "0", "0")
    region = search_feasible(p, EnvelopeFamily("power_law", {"lam": (1.0, 2.0), "nu": (0.0, 1.0)}), 0.1, 3,
                             horizon=100.0, grid_points=64)
    with pytest.raises(NoSignChangeError):
        refine_boundary(region, "nu", 1e-3)
    # one step: with only the range endpoints on the lattice, tol = width returns the midpoint
    q = ContinuousProblem.from_strings("1/(1+t)", "0", "0")
    fam = EnvelopeFamily("power_law", {"lam": (1.0, 2.0), "nu": (0.5, 1.5)})
    two = search_feasible(q, fam, 0.1, 2, horizon=100.0, grid_points=64)
    assert refine_boundary(two, "nu", 1.0) == 1.0


def test_infeasible_forcing_gives_empty_region():
    p = ContinuousProblem.from_strings("0", "1", "0")
    for fam in (EnvelopeFamily("power_law", EX1_RANGES),
                EnvelopeFamily("shifted", {"c": (0.5, 2.0), "lam": (0.5, 2.0), "b": (0.5, 2.0)})):
        region = search_feasible(p, fam, 0.1, 4, horizon=100.0, grid_points=64)
        assert region.empty and region.best is None and region.best_point() is None
        assert "empty region" in region.summary()
        with pytest.raises(NoSignChangeError):
            refine_boundary(region, fam.names[0], 1e-3)


def test_discrete_constant_family():
    p = DiscreteProblem.from_strings("0.5", "0", "1", "y^2", n_max=1000)
    region = search_feasible(p, EnvelopeFamily("constant_discrete", {"mu": (1.0, 8.0)}), 0.25, 8)
    assert region.contains({"mu": 4.0})
    assert region.best_point() == {"mu": 4.0}


def test_power_discrete_family():
    p = DiscreteProblem.from_strings("0.5", "0", "1", "0.1*y^2", n_max=2000)
    region = search_feasible(p, EnvelopeFamily("power_discrete", {"lam": (1.0, 3.0), "nu": (0.0, 1.0)}), 0.1, 5)
    assert not region.empty
    for pt in region.points:
        assert pt.min_residual >= 0


def test_family_problem_mismatch():
    p = DiscreteProblem.from_strings("0.5", "0", "1", "0", n_max=10)
    with pytest.raises(ValueError):
        search_feasible(p, EnvelopeFamily("power_law", EX1_RANGES), 0.1, 2)
    with pytest.raises(WrongShapeError):
        search_feasible(SHAPE.problem(), EnvelopeFamily("shifted", {"c": (1, 2), "lam": (1, 2), "b": (1, 2)}),
                        0.1, 2, shape=SHAPE)


def test_csv_format(ex1_region):
    lines = ex1_region.to_csv().splitlines()
    assert lines[0] == "lam,nu,min_residual,headroom,feasible"
    assert len(lines) == 1 + 33 * 29
    row = next(r for r in lines[1:] if r.startswith("1.0,1.0,"))
    assert row.endswith(",true")
    pt = next(p for p in ex1_region.points if p.params == (1.0, 1.0))
    assert float(row.split(",")[2]) == pt.min_residual


def test_determinism_and_workers():
    p = SHAPE.problem()
    fam = EnvelopeFamily("power_law", EX1_RANGES)
    a = search_feasible(p, fam, 0.16, 9, horizon=1e3, grid_points=256, shape=SHAPE)
    b = search_feasible(p, fam, 0.16, 9, horizon=1e3, grid_points=256, shape=SHAPE, workers=4)
    assert a.to_csv() == b.to_csv()
    assert a.best == b.best


def test_max_margin_objective():
    fam = EnvelopeFamily("power_law", EX1_RANGES)
    region = search_feasible(SHAPE.problem(), fam, 0.16, 9, objective="max_margin", horizon=1e3,
                             grid_points=256)
    best = region.best
    assert best.min_residual == max(p.min_residual for p in region.points)


def test_tie_break_prefers_headroom():
    # gamma large and nothing else: every lattice point feasible, decay ties across lam
    p = ContinuousProblem.from_strings("10", "0", "0")
    fam = EnvelopeFamily("power_law", {"lam": (1.0, 3.0), "nu": (0.0, 1.0)})
    region = search_feasible(p, fam, 0.1, 3, horizon=100.0, grid_points=64)
    assert region.best_point() == {"lam": 1.0, "nu": 1.0}


# --- properties ------------------------------------------------------------------

@settings(max_examples=40, deadline=None)
@given(st.floats(0.5, 2.0), st.floats(1.0, 2.0), st.floats(2.0, 8.0), st.floats(1.0, 3.0),
       st.floats(0.5, 20.0), st.floats(0.0, 2.0), st.sampled_from([1e2, 1e3, 1e4]), st.sampled_from([64, 512]))
def test_closed_form_dominates_grid(m, q, c, p, lam, nu, horizon, grid):
    if not powerlaw_closed_form_check(m, q, c, p, lam, nu):
        return
    shape = PowerLawShape(m=m, q=q, c=c, p=p)
    env = EnvelopeFamily("power_law", {"lam": (lam, lam + 1), "nu": (nu, nu + 1)}).envelope({"lam": lam, "nu": nu})
    g0 = 0.5 / lam
    assert verify_certificate(shape.problem(), env, g0, horizon, grid).certified


def test_monotone_in_nu(ex1_region):
    feasible = {pt.params for pt in ex1_region.points}
    for lam in ex1_region.axes["lam"]:
        for nu in ex1_region.axes["nu"]:
            if (lam, nu) not in feasible:
                continue
            for nu2 in ex1_region.axes["nu"]:
                if nu2 < nu and SHAPE.m + 0.5 * SHAPE.p * nu2 >= 1 and \
                        math.sqrt(lam) + lam ** (-0.5 * SHAPE.p) <= SHAPE.c - 0.5 * nu2:
                    assert (lam, nu2) in feasible
