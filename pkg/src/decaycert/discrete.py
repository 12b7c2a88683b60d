"""Difference inequality ``(g[n+1] - g[n]) / h[n] <= -gamma[n] g[n] + alpha(n, g[n]) + beta[n]``.

A positive sequence ``mu`` certifies ``0 <= g[n] <= 1/mu[n]`` for every ``n``
when ``g[0] <= 1/mu[0]`` and

    alpha(n, 1/mu[n]) + beta[n] <= (1/mu[n]) * (gamma[n] - (mu[n+1] - mu[n]) / (mu[n] h[n]))

holds with ``h[n] > 0`` and ``0 < h[n] gamma[n] < 1``.  The equality-case
recurrence is the brute-force oracle for that induction.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence, Union

import numpy as np

from .expr import Const, DomainError, Expression, parse_expr
from .inequality import MONOTONE_TOL, CertificateReport, NonpositiveEnvelopeError, Verdict

DEFAULT_N_MAX = 100_000


class PreconditionError(ValueError):
    """``h[n] > 0`` and ``0 < h[n] gamma[n] < 1`` fails somewhere."""

    def __init__(self, message: str, indices: Sequence[int]):
        super().__init__(message)
        self.indices = list(indices)


@dataclass(frozen=True)
class IndexedSequence:
    """A sequence given by a closed form in ``n`` or by an explicit finite table."""

    expr: Expression | None = None
    table: tuple[float, ...] | None = None

    def __post_init__(self):
        if (self.expr is None) == (self.table is None):
            raise ValueError("give exactly one of expr or table")
        if self.table is not None:
            object.__setattr__(self, "table", tuple(float(x) for x in self.table))

    @classmethod
    def of(cls, value, params: Mapping[str, float] | None = None) -> "IndexedSequence":
        if isinstance(value, IndexedSequence):
            return value
        if isinstance(value, Expression):
            return cls(expr=value)
        if isinstance(value, str):
            return cls(expr=parse_expr(value, {"n"}, params))
        if isinstance(value, (int, float)):
            return cls(expr=Const(float(value)))
        return cls(table=tuple(value))

    @property
    def length(self) -> int | None:
        return None if self.table is None else len(self.table)

    def at(self, n: int) -> float:
        if self.table is not None:
            return self.table[n]
        return self.expr.evaluate({"n": float(n)})

    def values(self, count: int) -> np.ndarray:
        """Entries ``0 .. count-1``."""
        if self.table is not None:
            if count > len(self.table):
                raise IndexError(f"table has {len(self.table)} entries, {count} requested")
            return np.array(self.table[:count])
        return self.expr.evaluate_array({"n": np.arange(count, dtype=float)})

    def __str__(self) -> str:
        if self.table is not None:
            return f"table[{len(self.table)}]"
        return str(self.expr)


AlphaN = Union[Expression, Callable[[float, float], float]]


def _alpha_scalar(alpha: AlphaN) -> Callable[[float, float], float]:
    if isinstance(alpha, Expression):
        fn = alpha._fn
        return lambda n, y: fn({"n": n, "y": y})

    def call(n, y):
        v = float(alpha(n, y))
        if not math.isfinite(v):
            raise DomainError("non-finite alpha", nonfinite=True)
        return v
    return call


def _alpha_array(alpha: AlphaN, n: np.ndarray, y: np.ndarray) -> np.ndarray:
    if isinstance(alpha, Expression):
        return alpha.evaluate_array({"n": n, "y": y})
    f = _alpha_scalar(alpha)
    nb, yb = np.broadcast_arrays(n, y)
    return np.array([f(float(a), float(b)) for a, b in zip(nb.ravel(), yb.ravel())]).reshape(nb.shape)


@dataclass(frozen=True)
class DiscreteProblem:
    gamma: IndexedSequence
    beta: IndexedSequence
    h: IndexedSequence
    alpha: AlphaN
    n_max: int = DEFAULT_N_MAX

    def __post_init__(self):
        for name in ("gamma", "beta", "h"):
            object.__setattr__(self, name, IndexedSequence.of(getattr(self, name)))
        lengths = [s.length for s in (self.gamma, self.beta, self.h) if s.length is not None]
        if lengths:
            # tables cover indices 0..len-1
            object.__setattr__(self, "n_max", min(int(self.n_max), min(lengths) - 1))
        if self.n_max < 0:
            raise ValueError("n_max must be nonnegative")

    @classmethod
    def from_strings(cls, gamma, beta, h, alpha: str, n_max: int = DEFAULT_N_MAX,
                     params: Mapping[str, float] | None = None) -> "DiscreteProblem":
        return cls(IndexedSequence.of(gamma, params), IndexedSequence.of(beta, params),
                   IndexedSequence.of(h, params), parse_expr(alpha, {"n", "y"}, params), n_max)

    def arrays(self, count: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.gamma.values(count), self.beta.values(count), self.h.values(count)

    def describe(self) -> str:
        alpha = str(self.alpha) if isinstance(self.alpha, Expression) else repr(self.alpha)
        return (f"gamma_n = {self.gamma}\nbeta_n = {self.beta}\nh_n = {self.h}\n"
                f"alpha(n, y) = {alpha}\nn_max = {self.n_max}")


@dataclass(frozen=True)
class DiscreteEnvelope:
    mu: IndexedSequence
    description: str = ""

    def __post_init__(self):
        object.__setattr__(self, "mu", IndexedSequence.of(self.mu))
        if not self.description:
            object.__setattr__(self, "description", f"mu_n = {self.mu}")

    @classmethod
    def from_string(cls, mu, params: Mapping[str, float] | None = None) -> "DiscreteEnvelope":
        return cls(IndexedSequence.of(mu, params))

    def values(self, count: int) -> np.ndarray:
        mu = self.mu.values(count)
        bad = mu <= 0.0
        if np.any(bad):
            i = int(np.argmax(bad))
            raise NonpositiveEnvelopeError(f"mu_{i} = {mu[i]!r} is not positive")
        return mu


def discrete_residual(p: DiscreteProblem, env: DiscreteEnvelope, n: int) -> float:
    if not 0 <= n <= p.n_max:
        raise IndexError(f"n={n} outside 0..{p.n_max}")
    mu0, mu1 = env.mu.at(n), env.mu.at(n + 1)
    if mu0 <= 0 or mu1 <= 0:
        raise NonpositiveEnvelopeError(f"mu is not positive at n={n} or n={n + 1}")
    gamma, beta, h = p.gamma.at(n), p.beta.at(n), p.h.at(n)
    inv = 1.0 / mu0
    return inv * (gamma - (mu1 - mu0) / (mu0 * h)) - _alpha_scalar(p.alpha)(float(n), inv) - beta


def residual_array(p: DiscreteProblem, env: DiscreteEnvelope, count: int | None = None) -> np.ndarray:
    """Residuals for ``n = 0 .. count-1`` (default ``n_max + 1`` entries)."""
    count = p.n_max + 1 if count is None else count
    mu = env.values(count + 1)
    gamma, beta, h = p.arrays(count)
    inv = 1.0 / mu[:-1]
    ns = np.arange(count, dtype=float)
    with np.errstate(all="ignore"):
        growth = (mu[1:] - mu[:-1]) / (mu[:-1] * h)
    return inv * (gamma - growth) - _alpha_array(p.alpha, ns, inv) - beta


def check_preconditions(p: DiscreteProblem, count: int | None = None) -> list[int]:
    """Indices where ``h > 0`` and ``0 < h gamma < 1`` fail."""
    count = p.n_max + 1 if count is None else count
    gamma, _, h = p.arrays(count)
    hg = h * gamma
    bad = (h <= 0.0) | (hg <= 0.0) | (hg >= 1.0)
    return np.nonzero(bad)[0].tolist()


def verify_discrete_certificate(p: DiscreteProblem, env: DiscreteEnvelope, g0: float,
                                margin: float = 0.0, alpha_samples: tuple[int, int] = (64, 65)
                                ) -> CertificateReport:
    """Check ``g0 <= 1/mu_0`` and the envelope condition for ``n = 0 .. n_max``.

    Raises :class:`PreconditionError` if ``0 < h_n gamma_n < 1`` fails.
    """
    if g0 < 0 or not math.isfinite(g0):
        raise ValueError("g0 must be a finite nonnegative number")
    bad = check_preconditions(p)
    if bad:
        n = bad[0]
        raise PreconditionError(
            f"need h_n > 0 and 0 < h_n*gamma_n < 1; fails at n={n} "
            f"(h={p.h.at(n)!r}, gamma={p.gamma.at(n)!r}) and {len(bad) - 1} other indices", bad)

    count = p.n_max + 1
    residuals = residual_array(p, env, count)
    mu = env.values(count + 1)
    i = int(np.argmin(residuals))
    report = CertificateReport(
        verdict=Verdict.INCONCLUSIVE,
        min_residual=float(residuals[i]),
        argmin_t=float(i),
        grid=f"every n in 0..{p.n_max}",
        margin=float(margin),
        mode="nonstrict",
        initial_product=float(mu[0] * g0),
        sample_points=np.arange(count),
        residuals=residuals,
        sample_name="n",
    )
    notes = report.notes
    infeasible, inconclusive = [], []
    if g0 > 1.0 / mu[0]:
        infeasible.append("initial")
        notes.append(f"initial condition fails: g0 = {g0!r} > 1/mu_0 = {1.0 / mu[0]!r}")
    if report.min_residual < 0.0:
        infeasible.append("residual")
        notes.append(f"envelope condition violated: residual {report.min_residual!r} at n = {i}")
    elif report.min_residual < margin:
        inconclusive.append("residual")
        notes.append(f"residual {report.min_residual!r} below requested margin {margin!r}")

    summary = _check_alpha(p, float(max(np.max(1.0 / mu), g0)), *alpha_samples)
    if summary:
        inconclusive.append("assumption")
        notes.append("standing assumptions fail: " + summary)

    if infeasible:
        report.verdict, report.failure = Verdict.INFEASIBLE, infeasible[0]
    elif inconclusive:
        report.verdict, report.failure = Verdict.INCONCLUSIVE, inconclusive[0]
    else:
        report.verdict = Verdict.CERTIFIED_NONSTRICT
        notes.append(f"g_n <= 1/mu_n certified for n <= {p.n_max} only")
    return report


def _check_alpha(p: DiscreteProblem, y_max: float, n_samples: int, y_samples: int) -> str:
    count = p.n_max + 1
    ns = np.unique(np.round(np.geomspace(1, count, min(n_samples, count)) - 1))
    ys = np.linspace(0.0, y_max, y_samples)
    A = _alpha_array(p.alpha, ns[:, None], ys[None, :])
    problems = []
    running = np.maximum.accumulate(A, axis=1)
    drop = A[:, 1:] < running[:, :-1] - MONOTONE_TOL
    if np.any(drop):
        i, j = (int(v[0]) for v in np.nonzero(drop))
        problems.append(f"alpha decreases in y at n={int(ns[i])}, y={ys[j + 1]!r}")
    if np.any(A < 0):
        problems.append("alpha negative at sampled points")
    beta = p.beta.values(count)
    if np.any(beta < 0):
        problems.append(f"beta negative at n={int(np.argmax(beta < 0))}")
    return "; ".join(problems)


@dataclass
class RecurrenceResult:
    g: np.ndarray
    status: str = "Completed"       # or "BlewUp"
    notes: list[str] = field(default_factory=list)

    @property
    def blew_up(self) -> bool:
        return self.status == "BlewUp"


def run_recurrence(p: DiscreteProblem, g0: float, N: int | None = None) -> RecurrenceResult:
    """Iterate ``g[n+1] = g[n] (1 - h gamma) + h alpha(n, g[n]) + h beta`` for ``n < N``.

    Returns all ``N + 1`` values; on overflow the sequence is truncated and
    the status is ``BlewUp``.
    """
    N = p.n_max if N is None else N
    if g0 < 0:
        raise ValueError("g0 must be nonnegative")
    if N > p.n_max:
        raise ValueError(f"N={N} exceeds n_max={p.n_max}")
    gamma, beta, h = p.arrays(N)
    contraction = (1.0 - h * gamma).tolist()
    hb = (h * beta).tolist()
    hs = h.tolist()
    alpha = _alpha_scalar(p.alpha)
    out = [float(g0)]
    g = float(g0)
    for n in range(N):
        try:
            g = g * contraction[n] + hs[n] * alpha(float(n), g) + hb[n]
        except (DomainError, OverflowError) as exc:
            return RecurrenceResult(np.array(out), "BlewUp", [f"evaluation failed at n={n}: {exc}"])
        if not math.isfinite(g):
            return RecurrenceResult(np.array(out), "BlewUp", [f"overflow at n={n + 1}"])
        out.append(g)
    return RecurrenceResult(np.array(out))


def unit_step_view(p: DiscreteProblem) -> DiscreteProblem:
    """Same problem with ``h_n = 1``; ``gamma`` and ``beta`` are not rescaled."""
    return replace(p, h=IndexedSequence(expr=Const(1.0)))


def sequence_csv(g: np.ndarray, env: DiscreteEnvelope | None = None,
                 residuals: np.ndarray | None = None) -> str:
    """CSV with header ``n,g_n,bound_n,residual_n``; missing entries are left empty."""
    buf = io.StringIO()
    buf.write("n,g_n,bound_n,residual_n\n")
    bounds = 1.0 / env.values(len(g)) if env is not None else None
    for n, value in enumerate(g):
        b = repr(float(bounds[n])) if bounds is not None else ""
        r = repr(float(residuals[n])) if residuals is not None and n < len(residuals) else ""
        buf.write(f"{n},{float(value)!r},{b},{r}\n")
    return buf.getvalue()
