"""Adaptive Dormand-Prince 5(4) integration of the extremal (equality-case) ODE.

The integrated trajectory is the numerical oracle for envelope certificates:
with alpha nondecreasing in ``y`` every solution of the inequality lies below
the solution of the equality ODE started from the same value, so a certified
envelope must also bound the extremal trajectory.
"""

from __future__ import annotations

import enum
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .expr import DomainError, Expression
from .inequality import ContinuousProblem, Envelope

# Dormand-Prince 5(4) tableau with Shampine's quartic dense output.
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
_E = np.array([-71 / 57600, 0.0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40])
_P = np.array([
    [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0
# PI step control, h_new = h * SAFETY * err^-PI_ALPHA * err_prev^PI_BETA (Hairer's DOPRI5 gains)
PI_BETA = 0.04
PI_ALPHA = 0.2 - 0.75 * PI_BETA
MIN_STEP_FRACTION = 1e-14
ERR_PREV0 = 1e-4

RHS = Callable[[float, np.ndarray], np.ndarray]


class Status(str, enum.Enum):
    COMPLETED = "Completed"
    BLEW_UP = "BlewUp"
    DOMAIN_ERROR = "DomainError"

    def __str__(self) -> str:
        return self.value


def dopri_step(f: RHS, t: float, y: np.ndarray, f0: np.ndarray, h: float):
    """One Dormand-Prince step.  Returns ``(y_new, f_new, error_vector, K)``."""
    K = np.empty((7, y.size))
    K[0] = f0
    for s in range(1, 6):
        dy = h * (np.asarray(_A[s]) @ K[:s])
        K[s] = f(t + _C[s] * h, y + dy)
    y_new = y + h * (_B @ K[:6])
    K[6] = f(t + h, y_new)
    err = h * (_E @ K)
    return y_new, K[6].copy(), err, K


@dataclass
class _Solution:
    t: np.ndarray
    y: np.ndarray              # shape (N, n)
    f: np.ndarray              # shape (N, n)
    dense: list[np.ndarray]    # per step: Q with y(t_i + s h) = y_i + h * Q @ [s, s^2, s^3, s^4]
    status: Status
    notes: list[str]
    escape_time: float | None
    n_rejected: int


def _rms(x: np.ndarray) -> float:
    return float(np.sqrt(np.mean(x * x)))


def _initial_step(f: RHS, t0: float, y0: np.ndarray, f0: np.ndarray, span: float,
                  rel_tol: float, abs_tol: float) -> float:
    scale = abs_tol + rel_tol * np.abs(y0)
    d0, d1 = _rms(y0 / scale), _rms(f0 / scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, span)
    try:
        f1 = f(t0 + h0, y0 + h0 * f0)
    except DomainError:
        return h0
    d2 = _rms((f1 - f0) / scale) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1, span)


def solve(f: RHS, t0: float, y0: Sequence[float], horizon: float, rel_tol: float = 1e-8,
          abs_tol: float = 1e-10, clamp_nonnegative: bool = False,
          blowup_norm: float | None = None, max_steps: int = 2_000_000) -> _Solution:
    """Integrate ``y' = f(t, y)`` from ``t0`` to ``horizon`` with a PI-controlled DOPRI5.

    Local error per step is kept below ``abs_tol + rel_tol * |y|`` componentwise.
    Integration stops with ``BlewUp`` when ``|y|`` exceeds ``1/abs_tol`` (or
    ``blowup_norm``) or the step size falls below ``1e-14 * (horizon - t0)``.
    """
    if not horizon > t0:
        raise ValueError("horizon must exceed t0")
    if rel_tol <= 0 or abs_tol <= 0:
        raise ValueError("tolerances must be positive")
    span = horizon - t0
    h_min = MIN_STEP_FRACTION * span
    limit = 1.0 / abs_tol if blowup_norm is None else blowup_norm

    y = np.array(y0, dtype=float).ravel()
    fy = np.asarray(f(t0, y), dtype=float).ravel()
    t = float(t0)
    ts, ys, fs, dense = [t], [y.copy()], [fy.copy()], []
    notes: list[str] = []
    status = Status.COMPLETED
    escape = None
    clamped = 0
    rejected_total = 0

    h = _initial_step(f, t, y, fy, span, rel_tol, abs_tol)
    err_prev = ERR_PREV0
    rejected = False
    last_domain: DomainError | None = None

    for _ in range(max_steps):
        if t >= horizon:
            break
        if h < h_min:
            if last_domain is not None and not last_domain.nonfinite:
                status = Status.DOMAIN_ERROR
                notes.append(f"step size underflow after domain error near t={t!r}: {last_domain}")
            else:
                status = Status.BLEW_UP
                notes.append(f"step size underflow at t={t!r}")
            escape = t
            break
        last_step = t + h >= horizon - 1e-12 * span
        if last_step:
            h = horizon - t
        try:
            y_new, f_new, err_vec, K = dopri_step(f, t, y, fy, h)
        except DomainError as exc:
            last_domain = exc
            h *= 0.25
            rejected = True
            rejected_total += 1
            continue
        scale = abs_tol + rel_tol * np.maximum(np.abs(y), np.abs(y_new))
        err = float(np.max(np.abs(err_vec) / scale))

        if err <= 1.0:
            Q = K.T @ _P
            t_new = horizon if last_step else t + h
            if clamp_nonnegative and np.any(y_new < 0.0):
                y_new = np.maximum(y_new, 0.0)
                clamped += 1
                try:
                    f_new = np.asarray(f(t_new, y_new), dtype=float).ravel()
                except DomainError as exc:
                    last_domain = exc
                    h *= 0.25
                    rejected = True
                    continue
            t, y, fy = t_new, y_new, f_new
            ts.append(t)
            ys.append(y.copy())
            fs.append(fy.copy())
            dense.append(Q)
            last_domain = None
            if np.max(np.abs(y)) > limit:
                status = Status.BLEW_UP
                escape = t
                notes.append(f"|y| exceeded {limit!r} at t={t!r}")
                break
            if err == 0.0:
                factor = MAX_FACTOR
            else:
                factor = SAFETY * err ** -PI_ALPHA * err_prev ** PI_BETA
                factor = min(MAX_FACTOR, max(MIN_FACTOR, factor))
            if rejected:
                factor = min(1.0, factor)
            err_prev = max(err, 1e-4)
            rejected = False
            h *= factor
        else:
            h *= max(MIN_FACTOR, SAFETY * err ** -0.2)
            rejected = True
            rejected_total += 1
    else:
        status = Status.BLEW_UP
        escape = t
        notes.append(f"step budget of {max_steps} exhausted at t={t!r}")

    if clamped:
        notes.append(f"clamped a negative state to 0 on {clamped} accepted steps")
    return _Solution(np.array(ts), np.array(ys), np.array(fs), dense, status, notes, escape,
                     rejected_total)


def _dense_eval(sol: _Solution, times: np.ndarray) -> np.ndarray:
    times = np.atleast_1d(np.asarray(times, dtype=float))
    t = sol.t
    if np.any(times < t[0]) or np.any(times > t[-1]):
        raise ValueError("requested times outside the integrated interval")
    out = np.empty((times.size, sol.y.shape[1]))
    idx = np.clip(np.searchsorted(t, times, side="right") - 1, 0, max(len(t) - 2, 0))
    for k, (tau, i) in enumerate(zip(times, idx)):
        if len(t) == 1 or tau == t[i]:
            out[k] = sol.y[i]
            continue
        h = t[i + 1] - t[i]
        s = (tau - t[i]) / h
        out[k] = sol.y[i] + h * (sol.dense[i] @ np.array([s, s * s, s ** 3, s ** 4]))
    return out


@dataclass
class Trajectory:
    """Accepted integrator steps of a scalar ODE plus a dense interpolant."""

    t: np.ndarray
    g: np.ndarray
    g_dot: np.ndarray
    tolerance: tuple[float, float]       # (rel_tol, abs_tol)
    status: Status
    notes: list[str] = field(default_factory=list)
    escape_time: float | None = None
    _solution: _Solution | None = field(default=None, repr=False)
    _rhs: Callable[[float, float], float] | None = field(default=None, repr=False)
    _nonnegative: bool = field(default=False, repr=False)

    @property
    def samples(self) -> list[tuple[float, float, float]]:
        return list(zip(self.t.tolist(), self.g.tolist(), self.g_dot.tolist()))

    @property
    def abs_tol(self) -> float:
        return self.tolerance[1]

    def sample(self, times) -> np.ndarray:
        """Values at arbitrary times inside the integrated interval (quartic dense output)."""
        g = _dense_eval(self._solution, times)[:, 0]
        return np.maximum(g, 0.0) if self._nonnegative else g

    def sample_with_derivative(self, times) -> tuple[np.ndarray, np.ndarray]:
        g = self.sample(times)
        times = np.atleast_1d(np.asarray(times, dtype=float))
        gd = np.array([self._rhs(float(a), float(b)) for a, b in zip(times, g)])
        return g, gd

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("t,g,g_dot\n")
        for a, b, c in zip(self.t, self.g, self.g_dot):
            buf.write(f"{float(a)!r},{float(b)!r},{float(c)!r}\n")
        return buf.getvalue()


def _scalar_trajectory(sol: _Solution, rhs, rel_tol, abs_tol, nonnegative) -> Trajectory:
    return Trajectory(t=sol.t, g=sol.y[:, 0].copy(), g_dot=sol.f[:, 0].copy(),
                      tolerance=(rel_tol, abs_tol), status=sol.status, notes=list(sol.notes),
                      escape_time=sol.escape_time, _solution=sol, _rhs=rhs,
                      _nonnegative=nonnegative)


def integrate_extremal(p: ContinuousProblem, g0: float, horizon: float, rel_tol: float = 1e-8,
                       abs_tol: float = 1e-10) -> Trajectory:
    """Integrate ``g' = -gamma g + alpha(t, g) + beta`` from ``g(t0) = g0``.

    Stage values that dip below zero evaluate alpha at 0 (alpha is only defined
    for ``y >= 0``), and accepted negative states are clamped to 0.
    """
    if g0 < 0:
        raise ValueError("g0 must be nonnegative")

    def rhs(t: float, g: float) -> float:
        return -p.gamma_at(t) * g + p.alpha_at(t, max(g, 0.0)) + p.beta_at(t)

    sol = solve(lambda t, y: np.array([rhs(t, y[0])]), p.t0, [g0], horizon, rel_tol, abs_tol,
                clamp_nonnegative=True)
    return _scalar_trajectory(sol, rhs, rel_tol, abs_tol, nonnegative=True)


def integrate_scalar(rhs: Expression, y0: float, t0: float, horizon: float, rel_tol: float = 1e-8,
                     abs_tol: float = 1e-10) -> Trajectory:
    """Integrate ``y' = rhs(t, y)``; no clamping."""

    def f(t: float, y: float) -> float:
        return rhs.evaluate({"t": t, "y": y})

    sol = solve(lambda t, y: np.array([f(t, y[0])]), t0, [y0], horizon, rel_tol, abs_tol)
    return _scalar_trajectory(sol, f, rel_tol, abs_tol, nonnegative=False)


@dataclass
class EnvelopeCheck:
    violations: list[tuple[float, float, float]]    # (t, g, 1/mu)
    worst_slack: float
    argmin_t: float
    n_samples: int
    strict: bool

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_text(self) -> str:
        kind = "g >= 1/mu" if self.strict else "g > 1/mu + tol"
        lines = [f"samples: {self.n_samples}",
                 f"violations ({kind}): {len(self.violations)}",
                 f"worst_slack: {self.worst_slack!r}",
                 f"argmin_t: {self.argmin_t!r}"]
        for t, g, b in self.violations[:20]:
            lines.append(f"violation: t={t!r} g={g!r} bound={b!r}")
        if len(self.violations) > 20:
            lines.append(f"... {len(self.violations) - 20} more")
        return "\n".join(lines) + "\n"


def check_envelope(traj: Trajectory, env: Envelope, strict: bool = True, tol: float | None = None,
                   times: np.ndarray | None = None) -> EnvelopeCheck:
    """Compare a trajectory with ``1/mu``.

    Samples are the accepted steps, or ``times`` through the dense interpolant.
    Strict mode flags ``g >= 1/mu``; nonstrict flags ``g > 1/mu + tol`` where
    ``tol`` defaults to the trajectory's absolute tolerance.
    """
    if times is None:
        ts, g = traj.t, traj.g
    else:
        ts = np.asarray(times, dtype=float)
        g = traj.sample(ts)
    bound = 1.0 / env.mu_array(ts)
    slack = bound - g
    if strict:
        bad = g >= bound
    else:
        bad = g > bound + (traj.abs_tol if tol is None else tol)
    violations = [(float(a), float(b), float(c)) for a, b, c in zip(ts[bad], g[bad], bound[bad])]
    i = int(np.argmin(slack))
    return EnvelopeCheck(violations, float(slack[i]), float(ts[i]), int(ts.size), strict)
