"""Lattice search over parametric envelope families, plus closed-form global checks.

Grid certification only covers ``[t0, horizon]``.  For the power-law shape

    u' = -c (1+t)^-b u + (1+t)^-m u |u|^p + (1+t)^-q,    g = u^2,
    mu(t) = lam (1+t)^nu,

with ``b = 1`` the three inequalities

    m + p nu / 2 >= 1,    q - nu / 2 >= 1,    lam^(1/2) + lam^(-p/2) <= c - nu / 2

imply the envelope condition for every ``t >= 0``.  Passing a
:class:`PowerLawShape` to :func:`search_feasible` makes feasibility require
that global check on top of the grid verifier.
"""

from __future__ import annotations

import io
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .discrete import DiscreteEnvelope, DiscreteProblem, PreconditionError, verify_discrete_certificate
from .expr import DomainError, parse_expr
from .inequality import (
    DEFAULT_GRID_POINTS, CertificateReport, ContinuousProblem, Envelope, NonpositiveEnvelopeError,
    verify_certificate,
)

FAMILY_PARAMS: dict[str, tuple[str, ...]] = {
    "power_law": ("lam", "nu"),
    "shifted": ("c", "lam", "b"),
    "constant_discrete": ("mu",),
    "power_discrete": ("lam", "nu"),
}
DECAY_PARAM = {"power_law": "nu", "shifted": "b", "constant_discrete": "mu", "power_discrete": "nu"}
_POSITIVE = {"lam", "c", "b", "mu"}


class WrongShapeError(ValueError):
    pass


class InvalidRangeError(ValueError):
    pass


class NoSignChangeError(ValueError):
    pass


def powerlaw_closed_form_check(m: float, q: float, c_coef: float, p: float, lam: float, nu: float,
                               b: float = 1.0) -> bool:
    """Sufficient conditions for ``mu = lam (1+t)^nu`` to be an envelope for all ``t >= 0``.

    Only valid for ``b = 1``; anything else raises :class:`WrongShapeError`.
    """
    if b != 1.0:
        raise WrongShapeError(f"closed-form check needs b = 1, got b = {b!r}")
    if not lam > 0:
        raise ValueError("lam must be positive")
    if math.isinf(lam):
        return False
    return (m + 0.5 * p * nu >= 1.0
            and q - 0.5 * nu >= 1.0
            and math.sqrt(lam) + lam ** (-0.5 * p) <= c_coef - 0.5 * nu)


@dataclass(frozen=True)
class PowerLawShape:
    """The scalar ODE ``u' = -c (1+t)^-b u + (1+t)^-m u|u|^p + (1+t)^-q`` and its ``g = u^2`` inequality."""

    m: float
    q: float
    c: float
    p: float
    b: float = 1.0

    def _params(self) -> dict[str, float]:
        return {"m": self.m, "q": self.q, "c": self.c, "p": self.p, "b": self.b,
                "gc": 2.0 * self.c, "ea": 1.0 + 0.5 * self.p}

    def problem(self) -> ContinuousProblem:
        """Inequality for ``g = u^2``: gamma = 2c/(1+t)^b, alpha = 2(1+t)^-m y^(1+p/2) + 2(1+t)^-q y^(1/2)."""
        return ContinuousProblem.from_strings(
            "gc/(1+t)^b", "0", "2*(1+t)^(-m)*y^ea + 2*(1+t)^(-q)*y^0.5", 0.0, self._params())

    def u_rhs(self):
        return parse_expr("-c/(1+t)^b*y + (1+t)^(-m)*y*abs(y)^p + (1+t)^(-q)", {"t", "y"},
                          self._params())

    def closed_form(self, lam: float, nu: float) -> bool:
        return powerlaw_closed_form_check(self.m, self.q, self.c, self.p, lam, nu, self.b)


@dataclass(frozen=True)
class EnvelopeFamily:
    kind: str
    ranges: Mapping[str, tuple[float, float]]

    def __post_init__(self):
        if self.kind not in FAMILY_PARAMS:
            raise ValueError(f"unknown family {self.kind!r}; choose from {sorted(FAMILY_PARAMS)}")
        names = FAMILY_PARAMS[self.kind]
        if set(self.ranges) != set(names):
            raise InvalidRangeError(f"{self.kind} needs ranges for {names}, got {sorted(self.ranges)}")
        clean = {}
        for name in names:
            lo, hi = (float(v) for v in self.ranges[name])
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise InvalidRangeError(f"range for {name} must satisfy lo < hi, got [{lo!r}, {hi!r}]")
            if name in _POSITIVE and lo <= 0:
                raise InvalidRangeError(f"{name} must be positive over its range")
            clean[name] = (lo, hi)
        object.__setattr__(self, "ranges", clean)

    @property
    def names(self) -> tuple[str, ...]:
        return FAMILY_PARAMS[self.kind]

    @property
    def discrete(self) -> bool:
        return self.kind.endswith("_discrete")

    def axes(self, resolution: int | Mapping[str, int]) -> dict[str, np.ndarray]:
        out = {}
        for name in self.names:
            k = resolution if isinstance(resolution, int) else resolution[name]
            if k < 2:
                raise InvalidRangeError("grid resolution must be at least 2 per parameter")
            lo, hi = self.ranges[name]
            out[name] = np.linspace(lo, hi, k)
        return out

    def envelope(self, point: Mapping[str, float]):
        pt = {k: float(point[k]) for k in self.names}
        if self.kind == "power_law":
            return Envelope(parse_expr("lam*(1+t)^nu", {"t"}, pt),
                            description=f"mu(t) = {pt['lam']!r}*(1+t)^{pt['nu']!r}")
        if self.kind == "shifted":
            return Envelope(parse_expr("c + lam*(1+t)^(-b)", {"t"}, pt),
                            description=f"mu(t) = {pt['c']!r} + {pt['lam']!r}*(1+t)^(-{pt['b']!r})")
        if self.kind == "constant_discrete":
            return DiscreteEnvelope.from_string(repr(pt["mu"]))
        return DiscreteEnvelope(parse_expr("lam*(1+n)^nu", {"n"}, pt))


@dataclass
class LatticePoint:
    params: tuple[float, ...]
    min_residual: float
    headroom: float
    feasible: bool
    verdict: str


@dataclass
class FeasibleRegion:
    family: EnvelopeFamily
    axes: dict[str, np.ndarray]
    evaluated: list[LatticePoint]
    objective: str
    best: LatticePoint | None = None
    _predicate: Callable[[Mapping[str, float]], tuple[bool, CertificateReport | None]] | None = \
        field(default=None, repr=False)

    @property
    def names(self) -> tuple[str, ...]:
        return self.family.names

    @property
    def points(self) -> list[LatticePoint]:
        return [pt for pt in self.evaluated if pt.feasible]

    @property
    def empty(self) -> bool:
        return not self.points

    def best_point(self) -> dict[str, float] | None:
        return None if self.best is None else dict(zip(self.names, self.best.params))

    def contains(self, point: Mapping[str, float]) -> bool:
        """True if ``point`` lies in a lattice cell whose corners are all feasible."""
        feasible = {pt.params for pt in self.evaluated if pt.feasible}
        choices = []
        for name in self.names:
            axis, x = self.axes[name], float(point[name])
            if x < axis[0] or x > axis[-1]:
                return False
            hit = np.nonzero(np.isclose(axis, x, rtol=0, atol=1e-12 * max(1.0, abs(x))))[0]
            if hit.size:
                choices.append([float(axis[hit[0]])])
            else:
                j = int(np.searchsorted(axis, x))
                choices.append([float(axis[j - 1]), float(axis[j])])
        return all(corner in feasible for corner in itertools.product(*choices))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join([*self.names, "min_residual", "headroom", "feasible"]) + "\n")
        for pt in self.evaluated:
            buf.write(",".join([*(repr(v) for v in pt.params), repr(pt.min_residual),
                                repr(pt.headroom), str(pt.feasible).lower()]) + "\n")
        return buf.getvalue()

    def summary(self) -> str:
        lines = [f"family: {self.family.kind}",
                 f"objective: {self.objective}",
                 f"lattice: " + " x ".join(f"{n}[{len(a)}]" for n, a in self.axes.items()),
                 f"feasible_points: {len(self.points)} of {len(self.evaluated)}"]
        if self.best is None:
            lines.append("best: none (empty region)")
        else:
            lines.append("best: " + ", ".join(f"{n}={v!r}" for n, v in zip(self.names, self.best.params)))
            lines.append(f"best_min_residual: {self.best.min_residual!r}")
            lines.append(f"best_headroom: {self.best.headroom!r}")
        return "\n".join(lines) + "\n"


def _make_predicate(problem, family: EnvelopeFamily, g0: float, horizon: float, grid_points: int,
                    margin: float, mode: str, lipschitz: bool, shape: PowerLawShape | None):
    if shape is not None and family.kind != "power_law":
        raise WrongShapeError("closed-form shape checks apply to the power_law family only")
    if family.discrete != isinstance(problem, DiscreteProblem):
        raise ValueError(f"family {family.kind!r} does not match problem type {type(problem).__name__}")

    def evaluate(point: Mapping[str, float]):
        env = family.envelope(point)
        try:
            if family.discrete:
                report = verify_discrete_certificate(problem, env, g0, margin)
            else:
                report = verify_certificate(problem, env, g0, horizon, grid_points, margin, mode,
                                            lipschitz)
        except (DomainError, NonpositiveEnvelopeError, PreconditionError):
            return False, None
        ok = report.certified
        if ok and shape is not None:
            ok = shape.closed_form(float(point["lam"]), float(point["nu"]))
            if ok:
                report.mark_global("closed-form power-law check passed: bound holds for all t >= t0")
        return ok, report
    return evaluate


def search_feasible(problem: ContinuousProblem | DiscreteProblem, family: EnvelopeFamily, g0: float,
                    resolution: int | Mapping[str, int] = 17, objective: str = "max_decay",
                    horizon: float = 1e4, grid_points: int = DEFAULT_GRID_POINTS, margin: float = 0.0,
                    mode: str = "strict", lipschitz: bool = False,
                    shape: PowerLawShape | None = None, workers: int = 1) -> FeasibleRegion:
    """Verify every lattice point of ``family`` and pick the best feasible one.

    ``max_decay`` maximizes the family's rate parameter (``nu``, ``b``, or the
    constant ``mu``); ``max_margin`` maximizes the minimum residual.  Ties go
    to larger initial headroom ``1 - mu(t0) g0``, then to the lexicographically
    smallest parameter tuple.  With ``workers > 1`` points are evaluated on a
    thread pool; results are still collected in lattice order.
    """
    if objective not in ("max_decay", "max_margin"):
        raise ValueError(f"unknown objective {objective!r}")
    axes = family.axes(resolution)
    evaluate = _make_predicate(problem, family, g0, horizon, grid_points, margin, mode, lipschitz, shape)
    points = [dict(zip(family.names, (float(v) for v in combo)))
              for combo in itertools.product(*(axes[n] for n in family.names))]
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(evaluate, points))
    else:
        results = [evaluate(point) for point in points]
    evaluated = []
    for point, (ok, report) in zip(points, results):
        if report is None:
            evaluated.append(LatticePoint(tuple(point.values()), math.nan, math.nan, False, "Error"))
        else:
            evaluated.append(LatticePoint(tuple(point.values()), report.min_residual,
                                          1.0 - report.initial_product, ok, str(report.verdict)))

    region = FeasibleRegion(family, axes, evaluated, objective, _predicate=evaluate)
    feasible = region.points
    if feasible:
        k = family.names.index(DECAY_PARAM[family.kind])

        def score(pt: LatticePoint):
            primary = pt.params[k] if objective == "max_decay" else pt.min_residual
            return (-primary, -pt.headroom, pt.params)
        region.best = min(feasible, key=score)
    return region


def refine_boundary(region: FeasibleRegion, param: str, tol: float,
                    at: Mapping[str, float] | None = None) -> float:
    """Bisect the feasibility boundary along ``param``.

    Other parameters are held at the best point, overridden by ``at``.  The
    bracket is the first feasible/infeasible pair of lattice values along the
    axis, scanning upward from the feasible value nearest the fixed point and
    then downward.  Returns the bracket midpoint once its width is at most ``tol``.
    """
    if region.empty or region._predicate is None:
        raise NoSignChangeError("region is empty")
    if param not in region.names:
        raise KeyError(param)
    if not tol > 0:
        raise ValueError("tol must be positive")
    fixed = dict(region.best_point())
    if at:
        fixed.update({k: float(v) for k, v in at.items()})

    def feasible(x: float) -> bool:
        return region._predicate({**fixed, param: x})[0]

    axis = [float(v) for v in region.axes[param]]
    flags = [feasible(x) for x in axis]
    if all(flags) or not any(flags):
        raise NoSignChangeError(f"feasibility does not change along {param}")
    good = [i for i, f in enumerate(flags) if f]
    start = min(good, key=lambda i: (abs(axis[i] - fixed[param]), i))
    bracket = None
    for i in range(start, len(axis) - 1):
        if not flags[i + 1]:
            bracket = (axis[i], axis[i + 1])
            break
    if bracket is None:
        for i in range(start, 0, -1):
            if not flags[i - 1]:
                bracket = (axis[i], axis[i - 1])
                break
    if bracket is None:
        raise NoSignChangeError(f"no feasible/infeasible neighbours along {param}")
    ok_x, bad_x = bracket
    while abs(bad_x - ok_x) > tol:
        mid = 0.5 * (ok_x + bad_x)
        if feasible(mid):
            ok_x = mid
        else:
            bad_x = mid
    return 0.5 * (ok_x + bad_x)
