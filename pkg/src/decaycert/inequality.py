"""Continuous inequality ``g' <= -gamma(t) g + alpha(t, g) + beta(t)`` and its envelope certificate.

An envelope ``mu(t) > 0`` certifies ``g(t) < 1/mu(t)`` when the residual

    R(t) = (1/mu) * (gamma - mu'/mu) - alpha(t, 1/mu) - beta

is nonnegative for all ``t >= t0`` and ``mu(t0) g(t0) < 1``.  Here ``R`` is
sampled on a log-uniform grid, so a certificate covers ``[t0, horizon]``
only; :mod:`decaycert.search` supplies closed-form checks that remove the
horizon caveat for the power-law family.
"""

from __future__ import annotations

import enum
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Union

import numpy as np

from .expr import DomainError, Expression, diff_expr, parse_expr

Coefficient = Union[Expression, Callable[..., float]]

MONOTONE_TOL = 1e-12
DEFAULT_GRID_POINTS = 2048


_HORIZON_NOTE = "the condition was sampled, not proved,"


class NonpositiveEnvelopeError(ValueError):
    pass


class Verdict(str, enum.Enum):
    CERTIFIED_STRICT = "CertifiedStrict"
    CERTIFIED_NONSTRICT = "CertifiedNonstrict"
    INFEASIBLE = "Infeasible"
    INCONCLUSIVE = "Inconclusive"

    @property
    def certified(self) -> bool:
        return self in (Verdict.CERTIFIED_STRICT, Verdict.CERTIFIED_NONSTRICT)

    def __str__(self) -> str:
        return self.value


# --- coefficient evaluation ----------------------------------------------------

def eval_coef(coef: Coefficient, t: float, y: float | None = None) -> float:
    if isinstance(coef, Expression):
        env = {"t": t} if y is None else {"t": t, "y": y}
        return coef.evaluate(env)
    value = float(coef(t) if y is None else coef(t, y))
    if not math.isfinite(value):
        raise DomainError(f"non-finite coefficient value at t={t!r}", nonfinite=True)
    return value


def eval_coef_array(coef: Coefficient, t: np.ndarray, y: np.ndarray | None = None) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if isinstance(coef, Expression):
        env = {"t": t} if y is None else {"t": t, "y": np.asarray(y, dtype=float)}
        return coef.evaluate_array(env)
    if y is None:
        return np.array([eval_coef(coef, float(ti)) for ti in t.ravel()]).reshape(t.shape)
    tb, yb = np.broadcast_arrays(t, np.asarray(y, dtype=float))
    flat = [eval_coef(coef, float(a), float(b)) for a, b in zip(tb.ravel(), yb.ravel())]
    return np.array(flat).reshape(tb.shape)


def describe_coef(coef: Coefficient) -> str:
    if isinstance(coef, Expression):
        return str(coef)
    return getattr(coef, "description", None) or repr(coef)


# --- data types ------------------------------------------------------------------

@dataclass(frozen=True)
class ContinuousProblem:
    """Data of ``g' <= -gamma(t) g + alpha(t, g) + beta(t)`` for ``t >= t0``.

    ``gamma`` and ``beta`` are expressions in ``t`` (or callables of ``t``);
    ``alpha`` is an expression in ``t, y`` (or a callable of ``t, y``).
    """

    gamma: Coefficient
    beta: Coefficient
    alpha: Coefficient
    t0: float = 0.0

    @classmethod
    def from_strings(cls, gamma: str, beta: str, alpha: str, t0: float = 0.0,
                     params: Mapping[str, float] | None = None) -> "ContinuousProblem":
        return cls(
            gamma=parse_expr(gamma, {"t"}, params),
            beta=parse_expr(beta, {"t"}, params),
            alpha=parse_expr(alpha, {"t", "y"}, params),
            t0=float(t0),
        )

    def gamma_at(self, t: float) -> float:
        return eval_coef(self.gamma, t)

    def beta_at(self, t: float) -> float:
        return eval_coef(self.beta, t)

    def alpha_at(self, t: float, y: float) -> float:
        return eval_coef(self.alpha, t, y)

    def extremal_rhs(self, t: float, g: float) -> float:
        """Right-hand side of the inequality taken with equality."""
        return -self.gamma_at(t) * g + self.alpha_at(t, g) + self.beta_at(t)

    def describe(self) -> str:
        return (f"gamma(t) = {describe_coef(self.gamma)}\n"
                f"beta(t) = {describe_coef(self.beta)}\n"
                f"alpha(t, y) = {describe_coef(self.alpha)}\n"
                f"t0 = {self.t0!r}")


@dataclass(frozen=True)
class Envelope:
    """Candidate envelope ``mu(t)``; ``mu_dot`` defaults to the symbolic derivative."""

    mu: Expression
    mu_dot: Expression | None = None
    description: str = ""

    def __post_init__(self):
        if self.mu_dot is None:
            object.__setattr__(self, "mu_dot", diff_expr(self.mu, "t"))
        if not self.description:
            object.__setattr__(self, "description", f"mu(t) = {self.mu}")

    @classmethod
    def from_string(cls, mu: str, params: Mapping[str, float] | None = None,
                    mu_dot: str | None = None, description: str = "") -> "Envelope":
        dot = parse_expr(mu_dot, {"t"}, params) if mu_dot else None
        return cls(parse_expr(mu, {"t"}, params), dot, description)

    def mu_at(self, t: float) -> float:
        value = self.mu.evaluate({"t": t})
        if value <= 0.0:
            raise NonpositiveEnvelopeError(f"mu({t!r}) = {value!r} is not positive")
        return value

    def mu_dot_at(self, t: float) -> float:
        return self.mu_dot.evaluate({"t": t})

    def mu_array(self, t: np.ndarray) -> np.ndarray:
        values = self.mu.evaluate_array({"t": t})
        bad = values <= 0.0
        if np.any(bad):
            i = int(np.argmax(bad))
            raise NonpositiveEnvelopeError(
                f"mu({float(np.ravel(t)[i])!r}) = {float(values.ravel()[i])!r} is not positive")
        return values

    def mu_dot_array(self, t: np.ndarray) -> np.ndarray:
        return self.mu_dot.evaluate_array({"t": t})


@dataclass
class AlphaCheck:
    ok: bool
    monotonicity_violations: list[tuple[float, float, float]] = field(default_factory=list)
    negative_alpha: list[tuple[float, float]] = field(default_factory=list)
    negative_beta: list[float] = field(default_factory=list)

    def summary(self) -> str:
        if self.ok:
            return "alpha nondecreasing in y and alpha, beta nonnegative at all samples"
        parts = []
        if self.monotonicity_violations:
            t, y1, y2 = self.monotonicity_violations[0]
            parts.append(f"alpha decreases in y at {len(self.monotonicity_violations)} samples "
                         f"(first: t={t!r}, y1={y1!r} < y2={y2!r})")
        if self.negative_alpha:
            t, y = self.negative_alpha[0]
            parts.append(f"alpha negative at {len(self.negative_alpha)} samples (first: t={t!r}, y={y!r})")
        if self.negative_beta:
            parts.append(f"beta negative at {len(self.negative_beta)} samples "
                         f"(first: t={self.negative_beta[0]!r})")
        return "; ".join(parts)


@dataclass
class CertificateReport:
    verdict: Verdict
    min_residual: float
    argmin_t: float
    grid: str
    margin: float
    notes: list[str] = field(default_factory=list)
    failure: str | None = None          # "initial", "residual", "assumption", "precondition"
    initial_product: float = math.nan   # mu(t0) * g0 (continuous) or mu_0 * g0 (discrete)
    mode: str = "strict"
    lipschitz_attested: bool = False
    horizon_limited: bool = True
    sample_points: np.ndarray = field(default_factory=lambda: np.empty(0), repr=False)
    residuals: np.ndarray = field(default_factory=lambda: np.empty(0), repr=False)
    sample_name: str = "t"

    @property
    def certified(self) -> bool:
        return self.verdict.certified

    def mark_global(self, reason: str) -> None:
        """Drop the horizon caveat once an analytic argument covers all ``t >= t0``."""
        self.horizon_limited = False
        self.notes = [n for n in self.notes if _HORIZON_NOTE not in n]
        self.notes.append(reason)

    def to_text(self) -> str:
        lines = [
            f"verdict: {self.verdict}",
            f"mode: {self.mode}",
            f"min_residual: {self.min_residual!r}",
            f"argmin_{self.sample_name}: "
            f"{int(self.argmin_t) if self.sample_name == 'n' else self.argmin_t!r}",
            f"margin: {self.margin!r}",
            f"initial_product: {self.initial_product!r}",
            f"grid: {self.grid}",
            f"lipschitz_attested: {str(self.lipschitz_attested).lower()}",
            f"horizon_limited: {str(self.horizon_limited).lower()}",
        ]
        if self.failure:
            lines.append(f"failure: {self.failure}")
        lines.extend(f"note: {n}" for n in self.notes)
        return "\n".join(lines) + "\n"

    def residuals_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"{self.sample_name},residual\n")
        for a, r in zip(self.sample_points, self.residuals):
            x = int(a) if self.sample_name == "n" else float(a)
            buf.write(f"{x!r},{float(r)!r}\n")
        return buf.getvalue()


# --- operations -------------------------------------------------------------------

def log_grid(t0: float, horizon: float, n: int) -> np.ndarray:
    """``n`` points on ``[t0, horizon]``, uniform in ``log(1 + t - t0)``; both ends exact."""
    if n < 2:
        raise ValueError("grid needs at least 2 points")
    if not horizon > t0:
        raise ValueError("horizon must exceed t0")
    ts = t0 + np.expm1(np.linspace(0.0, math.log1p(horizon - t0), n))
    ts[0], ts[-1] = t0, horizon
    return ts


def condition_residual(p: ContinuousProblem, env: Envelope, t: float) -> float:
    mu = env.mu_at(t)
    inv = 1.0 / mu
    bracket = p.gamma_at(t) - env.mu_dot_at(t) / mu
    return inv * bracket - p.alpha_at(t, inv) - p.beta_at(t)


def condition_sides(p: ContinuousProblem, env: Envelope, t: float) -> tuple[float, float]:
    """Left side ``alpha(t, 1/mu) + beta`` and right side ``(1/mu)(gamma - mu'/mu)``."""
    mu = env.mu_at(t)
    lhs = p.alpha_at(t, 1.0 / mu) + p.beta_at(t)
    rhs = (p.gamma_at(t) - env.mu_dot_at(t) / mu) / mu
    return lhs, rhs


def residual_array(p: ContinuousProblem, env: Envelope, ts: np.ndarray) -> np.ndarray:
    mu = env.mu_array(ts)
    inv = 1.0 / mu
    bracket = eval_coef_array(p.gamma, ts) - env.mu_dot_array(ts) / mu
    return inv * bracket - eval_coef_array(p.alpha, ts, inv) - eval_coef_array(p.beta, ts)


def envelope_bound(env: Envelope, t: float) -> float:
    return 1.0 / env.mu_at(t)


def check_alpha_assumptions(p: ContinuousProblem, t_samples: int, y_samples: int, y_max: float,
                            t_max: float | None = None) -> AlphaCheck:
    """Sample alpha on a ``t x y`` grid and report monotonicity and sign violations.

    ``t`` is log-spaced on ``[t0, t_max]`` (default ``t0 + 1e4``), ``y`` uniform on
    ``[0, y_max]``.  A violation is any ``y1 < y2`` at a common ``t`` with
    ``alpha(t, y1) > alpha(t, y2) + 1e-12``.
    """
    if t_samples < 2 or y_samples < 2:
        raise ValueError("sample counts must be at least 2")
    if not y_max > 0:
        raise ValueError("y_max must be positive")
    ts = log_grid(p.t0, p.t0 + 1e4 if t_max is None else t_max, t_samples)
    ys = np.linspace(0.0, y_max, y_samples)
    A = eval_coef_array(p.alpha, ts[:, None], ys[None, :])
    B = eval_coef_array(p.beta, ts)

    report = AlphaCheck(ok=True)
    running = np.maximum.accumulate(A, axis=1)
    drop = A[:, 1:] < running[:, :-1] - MONOTONE_TOL
    for i, j in zip(*np.nonzero(drop)):
        k = int(np.argmax(A[i, : j + 1]))
        report.monotonicity_violations.append((float(ts[i]), float(ys[k]), float(ys[j + 1])))
    for i, j in zip(*np.nonzero(A < 0.0)):
        report.negative_alpha.append((float(ts[i]), float(ys[j])))
    report.negative_beta = [float(t) for t in ts[B < 0.0]]
    report.ok = not (report.monotonicity_violations or report.negative_alpha or report.negative_beta)
    return report


def verify_certificate(p: ContinuousProblem, env: Envelope, g0: float, horizon: float,
                       grid_points: int = DEFAULT_GRID_POINTS, margin: float = 0.0,
                       mode: str = "strict", lipschitz: bool = False,
                       alpha_samples: tuple[int, int] = (64, 65)) -> CertificateReport:
    """Check the envelope certificate on ``[t0, horizon]``.

    ``mode="strict"`` needs ``mu(t0) g0 < 1`` and yields ``g < 1/mu``;
    ``mode="nonstrict"`` accepts ``mu(t0) g0 <= 1`` for ``g <= 1/mu`` but only
    when the caller attests (``lipschitz=True``) that alpha is locally
    Lipschitz in ``y``, which cannot be read off an expression in general.
    """
    if g0 < 0 or not math.isfinite(g0):
        raise ValueError("g0 must be a finite nonnegative number")
    if margin < 0:
        raise ValueError("margin must be nonnegative")
    if mode not in ("strict", "nonstrict"):
        raise ValueError(f"unknown mode {mode!r}")
    if grid_points < 2:
        raise ValueError("grid_points must be at least 2")
    ts = log_grid(p.t0, horizon, grid_points)

    mu = env.mu_array(ts)
    residuals = residual_array(p, env, ts)
    i = int(np.argmin(residuals))
    report = CertificateReport(
        verdict=Verdict.INCONCLUSIVE,
        min_residual=float(residuals[i]),
        argmin_t=float(ts[i]),
        grid=f"{grid_points} points log-uniform in (1 + t - t0) on [{p.t0!r}, {float(horizon)!r}]",
        margin=float(margin),
        mode=mode,
        lipschitz_attested=bool(lipschitz),
        initial_product=float(mu[0] * g0),
        sample_points=ts,
        residuals=residuals,
    )
    notes = report.notes
    infeasible: list[str] = []
    inconclusive: list[str] = []

    prod = report.initial_product
    if mode == "strict":
        if prod > 1.0:
            infeasible.append("initial")
            notes.append(f"initial condition fails: mu(t0)*g0 = {prod!r} > 1")
        elif prod == 1.0:
            inconclusive.append("initial")
            notes.append("mu(t0)*g0 = 1: the strict bound needs mu(t0)*g0 < 1; "
                         "rerun in nonstrict mode with a Lipschitz attestation")
    else:
        if not lipschitz:
            inconclusive.append("precondition")
            notes.append("nonstrict mode requires attesting that alpha is locally Lipschitz in y")
        if prod > 1.0:
            infeasible.append("initial")
            notes.append(f"initial condition fails: mu(t0)*g0 = {prod!r} > 1")

    if report.min_residual < 0.0:
        infeasible.append("residual")
        notes.append(f"envelope condition violated: residual {report.min_residual!r} "
                     f"at t = {report.argmin_t!r}")
    elif report.min_residual < margin:
        inconclusive.append("residual")
        notes.append(f"residual {report.min_residual!r} below requested margin {margin!r}")

    y_max = max(float(np.max(1.0 / mu)), g0)
    alpha_report = check_alpha_assumptions(p, alpha_samples[0], alpha_samples[1], y_max, t_max=horizon)
    if not alpha_report.ok:
        inconclusive.append("assumption")
        notes.append("standing assumptions fail: " + alpha_report.summary())

    if mode == "nonstrict":
        inv = 1.0 / mu
        if np.any(eval_coef_array(p.alpha, ts, inv) == 0.0):
            notes.append("alpha vanishes at sampled points; treated as admissible (alpha >= 0)")

    if infeasible:
        report.verdict = Verdict.INFEASIBLE
        report.failure = infeasible[0]
    elif inconclusive:
        report.verdict = Verdict.INCONCLUSIVE
        report.failure = inconclusive[0]
    else:
        report.verdict = Verdict.CERTIFIED_STRICT if mode == "strict" else Verdict.CERTIFIED_NONSTRICT
        bound = "g(t) < 1/mu(t)" if mode == "strict" else "g(t) <= 1/mu(t)"
        notes.append(f"{bound} certified on [{p.t0!r}, {float(horizon)!r}] only; "
                     f"{_HORIZON_NOTE} beyond the grid")
    return report
