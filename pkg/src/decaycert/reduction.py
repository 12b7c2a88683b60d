"""Reduce ``u' + A u = h(t, u) + f(t)`` in R^d to the scalar inequality for ``g = |u|``.

With ``<A u, u> >= gamma |u|^2`` and ``|h(t, u)| <= alpha(t, |u|)`` the norm
satisfies ``g' <= -gamma g + alpha(t, g) + beta(t)``, ``beta = |f(t)|``, so the
scalar certificate machinery applies verbatim.  ``gamma`` is the smallest
eigenvalue of the symmetric matrix ``A`` (computed per time when ``A``
depends on ``t``).
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .expr import Const, Expression, parse_expr
from .inequality import ContinuousProblem, Envelope
from .ode import Status, Trajectory, _dense_eval, _Solution, solve


class AsymmetryError(ValueError):
    pass


class DimensionError(ValueError):
    pass


def _check_symmetric(M: np.ndarray) -> None:
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {M.shape}")
    tol = 1e-12 * max(1.0, float(np.max(np.abs(M))) if M.size else 1.0)
    gap = float(np.max(np.abs(M - M.T))) if M.size else 0.0
    if gap > tol:
        raise AsymmetryError(f"matrix is not symmetric (max |M - M^T| = {gap!r})")


def jacobi_eigenvalues(M, max_sweeps: int = 100) -> np.ndarray:
    """All eigenvalues of a symmetric matrix by cyclic Jacobi rotations (unsorted)."""
    a = np.array(M, dtype=float)
    _check_symmetric(a)
    n = a.shape[0]
    scale = math.sqrt(float(np.sum(a * a)))
    if n == 1 or scale == 0.0:
        return np.diag(a).copy()
    for _ in range(max_sweeps):
        off = math.sqrt(float(np.sum(np.triu(a, 1) ** 2)))
        if off <= 1e-17 * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:      # theta^2 would overflow; t ~ 1/(2 theta)
                    t = 0.5 / theta
                else:
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                col_p, col_q = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p, row_q = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = a[q, p] = 0.0
    return np.diag(a).copy()


def min_eigenvalue(M) -> float:
    return float(np.min(jacobi_eigenvalues(M)))


# --- the vector system -------------------------------------------------------------

def _var_names(d: int) -> list[str]:
    return [f"u{i + 1}" for i in range(d)]


@dataclass(frozen=True)
class VectorSystem:
    """``u' = -A(t) u + h(t, u) + f(t)`` with a user-supplied bound ``|h| <= alpha_bound(t, |u|)``.

    ``A`` is either a constant symmetric array or a nested list of expressions
    in ``t``.  ``h_field`` entries are expressions in ``t, u1 .. ud``.
    """

    A: np.ndarray | tuple
    h_field: tuple[Expression, ...]
    f_field: tuple[Expression, ...]
    alpha_bound: Expression
    u0: np.ndarray
    t0: float = 0.0

    def __post_init__(self):
        u0 = np.array(self.u0, dtype=float).ravel()
        object.__setattr__(self, "u0", u0)
        d = u0.size
        if isinstance(self.A, np.ndarray) or _is_numeric_matrix(self.A):
            A = np.array(self.A, dtype=float)
            _check_symmetric(A)
            object.__setattr__(self, "A", A)
            shape = A.shape
        else:
            A = tuple(tuple(row) for row in self.A)
            object.__setattr__(self, "A", A)
            shape = (len(A), len(A[0]) if A else 0)
            if any(len(row) != shape[0] for row in A):
                raise DimensionError("A must be square")
            _check_symmetric(self.A_at(self.t0))
        object.__setattr__(self, "h_field", tuple(self.h_field))
        object.__setattr__(self, "f_field", tuple(self.f_field))
        if shape != (d, d) or len(self.h_field) != d or len(self.f_field) != d:
            raise DimensionError(f"dimension mismatch: u0 has {d} entries, A is {shape}, "
                                 f"h has {len(self.h_field)}, f has {len(self.f_field)}")
        allowed = {"t", *_var_names(d)}
        for e in self.h_field:
            if not e.free_vars <= allowed:
                raise DimensionError(f"h entry {e} uses variables outside {sorted(allowed)}")

    @classmethod
    def from_strings(cls, A, h: Sequence[str], f: Sequence[str], alpha_bound: str,
                     u0: Sequence[float], t0: float = 0.0,
                     params: Mapping[str, float] | None = None) -> "VectorSystem":
        d = len(u0)
        names = {"t", *_var_names(d)}
        if not _is_numeric_matrix(A):
            A = [[parse_expr(x, {"t"}, params) if isinstance(x, str) else Const(float(x)) for x in row]
                 for row in A]
        return cls(
            A=A,
            h_field=tuple(parse_expr(x, names, params) for x in h),
            f_field=tuple(parse_expr(x, {"t"}, params) for x in f),
            alpha_bound=parse_expr(alpha_bound, {"t", "y"}, params),
            u0=u0, t0=t0,
        )

    @property
    def dim(self) -> int:
        return self.u0.size

    @property
    def constant_A(self) -> bool:
        return isinstance(self.A, np.ndarray)

    def A_at(self, t: float) -> np.ndarray:
        if isinstance(self.A, np.ndarray):
            return self.A
        return np.array([[e.evaluate({"t": t}) for e in row] for row in self.A])

    def h_at(self, t: float, u: np.ndarray) -> np.ndarray:
        env = {"t": t, **dict(zip(_var_names(self.dim), map(float, u)))}
        return np.array([e.evaluate(env) for e in self.h_field])

    def f_at(self, t: float) -> np.ndarray:
        return np.array([e.evaluate({"t": t}) for e in self.f_field])

    def rhs(self, t: float, u: np.ndarray) -> np.ndarray:
        return -self.A_at(t) @ u + self.h_at(t, u) + self.f_at(t)


def _is_numeric_matrix(A) -> bool:
    try:
        arr = np.array(A, dtype=float)
    except (TypeError, ValueError):
        return False
    return arr.ndim == 2


class MinEigenCoefficient:
    """``gamma(t)`` = smallest eigenvalue of ``A(t)``, memoized per evaluation time."""

    description = "min eigenvalue of A(t)"

    def __init__(self, system: VectorSystem):
        self.system = system
        self._cache: dict[float, float] = {}

    def __call__(self, t: float) -> float:
        t = float(t)
        value = self._cache.get(t)
        if value is None:
            value = self._cache[t] = min_eigenvalue(self.system.A_at(t))
        return value


class NormCoefficient:
    """``beta(t) = |f(t)|`` (Euclidean)."""

    description = "||f(t)||"

    def __init__(self, f_field: Sequence[Expression]):
        self.f_field = tuple(f_field)

    def __call__(self, t: float) -> float:
        return math.sqrt(sum(e.evaluate({"t": t}) ** 2 for e in self.f_field))

    def table(self, ts) -> np.ndarray:
        return np.array([self(float(t)) for t in ts])


def reduce_to_scalar(sys: VectorSystem) -> ContinuousProblem:
    if sys.constant_A:
        gamma = Const(min_eigenvalue(sys.A))
    else:
        gamma = MinEigenCoefficient(sys)
    if all(e.is_constant() for e in sys.f_field):
        beta = Const(math.sqrt(sum(e.evaluate({}) ** 2 for e in sys.f_field)))
    else:
        beta = NormCoefficient(sys.f_field)
    return ContinuousProblem(gamma=gamma, beta=beta, alpha=sys.alpha_bound, t0=sys.t0)


def falsify_alpha_bound(sys: VectorSystem, radii: Sequence[float], times: Sequence[float],
                        directions: int = 64, seed: int = 0, tol: float = 1e-12
                        ) -> list[tuple[float, float, float, float]]:
    """Search for ``|h(t, u)| > alpha_bound(t, |u|)`` with ``u`` random on spheres.

    Returns counterexamples ``(t, radius, |h|, alpha)``.  An empty list proves
    nothing; a non-empty one refutes the bound.
    """
    rng = np.random.default_rng(seed)
    found = []
    for t in times:
        for r in radii:
            bound = sys.alpha_bound.evaluate({"t": float(t), "y": float(r)})
            for _ in range(directions):
                v = rng.normal(size=sys.dim)
                v *= r / np.linalg.norm(v)
                size = float(np.linalg.norm(sys.h_at(float(t), v)))
                if size > bound + tol:
                    found.append((float(t), float(r), size, bound))
    return found


@dataclass
class VectorTrajectory:
    t: np.ndarray
    u: np.ndarray           # shape (N, d)
    norm: np.ndarray
    tolerance: tuple[float, float]
    status: Status
    notes: list[str] = field(default_factory=list)
    escape_time: float | None = None
    _solution: _Solution | None = field(default=None, repr=False)

    @property
    def samples(self) -> list[tuple[float, np.ndarray, float]]:
        return [(float(a), b.copy(), float(c)) for a, b, c in zip(self.t, self.u, self.norm)]

    def sample(self, times) -> np.ndarray:
        return _dense_eval(self._solution, times)

    def to_csv(self) -> str:
        d = self.u.shape[1]
        buf = io.StringIO()
        buf.write(",".join(["t", *(f"u_{i + 1}" for i in range(d)), "norm"]) + "\n")
        for t, row, nrm in zip(self.t, self.u, self.norm):
            buf.write(",".join([repr(float(t)), *(repr(float(x)) for x in row), repr(float(nrm))]) + "\n")
        return buf.getvalue()


def integrate_vector(sys: VectorSystem, horizon: float, rel_tol: float = 1e-8,
                     abs_tol: float = 1e-10) -> VectorTrajectory:
    sol = solve(sys.rhs, sys.t0, sys.u0, horizon, rel_tol, abs_tol)
    return VectorTrajectory(sol.t, sol.y, np.linalg.norm(sol.y, axis=1), (rel_tol, abs_tol),
                            sol.status, list(sol.notes), sol.escape_time, sol)


# --- the shifted envelope family (gamma = 0) --------------------------------------------

def example2_constant(c: float, lam: float, p: float) -> float:
    """``C = c^(p-1)`` for ``p > 1`` and ``(lam + c)^(p-1)`` otherwise."""
    return c ** (p - 1.0) if p > 1.0 else (lam + c) ** (p - 1.0)


def _check_example2(c, lam, b, theta, p):
    if not (c > 0 and lam > 0 and b > 0 and p > 0):
        raise ValueError("need c > 0, lambda > 0, b > 0, p > 0")
    if not 0 < theta <= 1:
        raise ValueError("theta must lie in (0, 1]")


def build_example2(c: float, lam: float, b: float, theta: float, p: float
                   ) -> tuple[ContinuousProblem, Envelope]:
    """Problem with ``gamma = 0`` whose alpha and beta sit exactly on the admissible bounds

        alpha(t, y) = theta C y^p b lam / ((lam + c) (1+t)^(1+b))
        beta(t)     = (1 - theta) b lam / ((c + lam)^2 (1+t)^(1+b))

    paired with ``mu(t) = c + lam (1+t)^(-b)``, which satisfies the envelope
    condition for every ``t >= 0``.  ``theta = 1`` gives ``beta = 0``.
    """
    _check_example2(c, lam, b, theta, p)
    C = example2_constant(c, lam, p)
    params = {
        "ka": theta * C * b * lam / (lam + c),
        "kb": (1.0 - theta) * b * lam / (c + lam) ** 2,
        "e": -(1.0 + b), "p": p, "c": c, "lam": lam, "b": b,
    }
    alpha = parse_expr("ka*(1+t)^e*y^p", {"t", "y"}, params)
    beta = parse_expr("kb*(1+t)^e" if theta < 1 else "0", {"t"}, params)
    problem = ContinuousProblem(gamma=Const(0.0), beta=beta, alpha=alpha, t0=0.0)
    env = Envelope(parse_expr("c + lam*(1+t)^(-b)", {"t"}, params),
                   description=f"mu(t) = {c!r} + {lam!r}*(1+t)^(-{b!r})")
    return problem, env


def example2_system(c: float, lam: float, b: float, theta: float, p: float,
                    u0: float) -> VectorSystem:
    """One-dimensional system with ``A = 0`` whose reduction is :func:`build_example2`."""
    problem, _ = build_example2(c, lam, b, theta, p)
    C = example2_constant(c, lam, p)
    params = {"ka": theta * C * b * lam / (lam + c), "e": -(1.0 + b), "p": p}
    h = parse_expr("ka*(1+t)^e*abs(u1)^p", {"t", "u1"}, params)
    return VectorSystem(A=np.zeros((1, 1)), h_field=(h,), f_field=(problem.beta,),
                        alpha_bound=problem.alpha, u0=[u0])


@dataclass
class GdotDecayReport:
    b: float
    windows: list[tuple[float, float, float]]   # (t_start, t_end, sup |g'| (1+t)^(1+b))
    growth_exponent: float                      # log10 ratio of the last two window statistics
    bounded: bool
    g_end: float
    g_limit_upper: float                        # g_end plus the tail integral of the bound
    limit_bound: float | None
    limit_ok: bool | None

    def to_text(self) -> str:
        lines = [f"b: {self.b!r}"]
        for a, z, s in self.windows:
            lines.append(f"window [{a!r}, {z!r}]: sup |g'|(1+t)^(1+b) = {s!r}")
        lines += [f"growth_exponent: {self.growth_exponent!r}",
                  f"bounded: {str(self.bounded).lower()}",
                  f"g_end: {self.g_end!r}",
                  f"g_limit_upper: {self.g_limit_upper!r}"]
        if self.limit_bound is not None:
            lines.append(f"limit_bound: {self.limit_bound!r}")
            lines.append(f"limit_ok: {str(self.limit_ok).lower()}")
        return "\n".join(lines) + "\n"


class InsufficientTrajectoryError(ValueError):
    pass


def check_gdot_decay(traj: Trajectory, b: float, c: float | None = None, tol: float = 1e-6,
                     growth_tol: float = 0.05, points_per_decade: int = 64) -> GdotDecayReport:
    """Check ``g'(t) = O((1+t)^-(1+b))`` and ``lim g <= 1/c`` on an extremal trajectory.

    The statistic ``sup |g'| (1+t)^(1+b)`` is taken per decade of ``1+t``;
    it counts as bounded when the last decade exceeds the previous one by at
    most a factor ``10**growth_tol``.  The limit is bounded above by
    ``g(T) + S (1+T)^-b / b`` with ``S`` the last-decade statistic.
    """
    if not b > 0:
        raise ValueError("b must be positive")
    s0, s1 = 1.0 + traj.t[0], 1.0 + traj.t[-1]
    if s0 <= 0 or math.log10(s1 / s0) < 2.0 - 1e-12:
        raise InsufficientTrajectoryError("trajectory must span at least two decades of 1+t")
    edges = [s0]
    k = math.floor(math.log10(s0)) + 1
    while 10.0 ** k < s1:
        edges.append(10.0 ** k)
        k += 1
    edges.append(s1)

    windows = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi <= lo:
            continue
        ss = np.geomspace(lo, hi, points_per_decade)
        ts = np.clip(ss - 1.0, traj.t[0], traj.t[-1])
        _, gd = traj.sample_with_derivative(ts)
        windows.append((float(lo - 1.0), float(hi - 1.0), float(np.max(np.abs(gd) * ss ** (1.0 + b)))))
    # the last two windows that span a full decade
    full = [w for w in windows if (1.0 + w[1]) / (1.0 + w[0]) >= 10.0 - 1e-9] or windows
    last = full[-1][2]
    prev = full[-2][2] if len(full) >= 2 else last
    if last == 0.0:
        growth = 0.0 if prev == 0.0 else -math.inf
    elif prev == 0.0:
        growth = math.inf
    else:
        growth = math.log10(last / prev)
    g_end = float(traj.g[-1])
    tail = max(w[2] for w in windows[-2:]) * s1 ** (-b) / b
    upper = float(g_end + tail)
    limit_bound = None if c is None else 1.0 / c
    return GdotDecayReport(
        b=b, windows=windows, growth_exponent=growth, bounded=growth <= growth_tol,
        g_end=g_end, g_limit_upper=upper, limit_bound=limit_bound,
        limit_ok=None if c is None else upper <= 1.0 / c + tol,
    )
