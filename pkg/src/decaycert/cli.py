"""Command-line front end: ``decaycert {verify,simulate,search,reduce} --config FILE``.

Configs are TOML files; the schema lives in ``docs/config_schema.md``.  Every
command collects its output files in memory and writes them at the end,
each through a temporary file and an atomic rename.

Exit codes
    verify    0 certified, 2 infeasible, 3 inconclusive
    simulate  0 clean, 2 envelope violations, 4 blow-up
    search    0 nonempty region, 2 empty region
    reduce    0 ok, 2 alpha bound refuted by sampling, else the chained verify code
    any       1 usage, config or evaluation error
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from types import SimpleNamespace
from typing import Any, Mapping

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:         # Python < 3.11
    import tomli as tomllib

from . import discrete as dc
from .expr import Const, ExpressionError, ParseError, parse_expr
from .inequality import (
    DEFAULT_GRID_POINTS, ContinuousProblem, Envelope, NonpositiveEnvelopeError, Verdict, log_grid,
    verify_certificate,
)
from .ode import Status, check_envelope, integrate_extremal, integrate_scalar
from .reduction import (
    AsymmetryError, DimensionError, VectorSystem, build_example2, example2_system, falsify_alpha_bound,
    integrate_vector, reduce_to_scalar,
)
from .search import (
    FAMILY_PARAMS, EnvelopeFamily, InvalidRangeError, NoSignChangeError, PowerLawShape, WrongShapeError,
    search_feasible,
)

EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE, EXIT_INCONCLUSIVE, EXIT_BLOWUP = 0, 1, 2, 3, 4
VERDICT_EXIT = {
    Verdict.CERTIFIED_STRICT: EXIT_OK,
    Verdict.CERTIFIED_NONSTRICT: EXIT_OK,
    Verdict.INFEASIBLE: EXIT_INFEASIBLE,
    Verdict.INCONCLUSIVE: EXIT_INCONCLUSIVE,
}
DISCRETE_TOL = 1e-12

_ALLOWED = {
    "problem": {"kind", "builder", "gamma", "beta", "alpha", "t0", "h", "n_max", "A", "f",
                "alpha_bound", "u0"},
    "params": None,
    "envelope": {"mu", "mu_dot", "description", "family", "lam", "nu", "c", "b"},
    "initial": {"g0", "u0"},
    "verify": {"horizon", "grid", "margin", "mode", "lipschitz"},
    "simulate": {"horizon", "rel_tol", "abs_tol", "N", "grid"},
    "search": {"family", "objective", "resolution", "ranges", "shape", "g0", "horizon", "grid",
               "margin", "workers"},
    "reduce": {"chain_verify", "beta_samples", "radii", "directions", "horizon"},
}


class ConfigError(ValueError):
    pass


# --- config -----------------------------------------------------------------------

@dataclass
class RunConfig:
    """Parsed config plus command-line overrides."""

    path: str
    data: dict[str, Any]
    out: Path = Path("out")
    horizon: float | None = None
    grid: int | None = None
    margin: float | None = None
    seed: int = 0
    _cache: dict[str, Any] = field(default_factory=dict, repr=False)

    @classmethod
    def load(cls, path: str, **overrides) -> "RunConfig":
        try:
            raw = Path(path).read_bytes()
        except OSError as exc:
            raise ConfigError(f"{path}: cannot read config: {exc.strerror}") from exc
        try:
            data = tomllib.loads(raw.decode("utf-8"))
        except UnicodeDecodeError as exc:
            raise ConfigError(f"{path}: not UTF-8 at byte offset {exc.start}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        cfg = cls(path, data, **overrides)
        cfg._validate()
        return cfg

    # helpers
    def error(self, where: str, msg: str) -> ConfigError:
        return ConfigError(f"{self.path}: {where}: {msg}")

    def section(self, name: str) -> dict[str, Any]:
        sec = self.data.get(name, {})
        if not isinstance(sec, dict):
            raise self.error(f"[{name}]", "must be a table")
        return sec

    def number(self, sec: str, key: str, default=None, positive: bool = False, integer: bool = False):
        value = self.section(sec).get(key, default)
        if value is None:
            return None
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise self.error(f"[{sec}].{key}", f"expected a number, got {value!r}")
        if integer:
            if float(value) != int(value):
                raise self.error(f"[{sec}].{key}", f"expected an integer, got {value!r}")
            value = int(value)
        else:
            value = float(value)
        if not math.isfinite(value) or (positive and value <= 0):
            raise self.error(f"[{sec}].{key}", f"must be {'positive' if positive else 'finite'}, got {value!r}")
        return value

    def _validate(self):
        for name, sec in self.data.items():
            if name not in _ALLOWED:
                raise self.error(f"[{name}]", f"unknown section; expected one of {sorted(_ALLOWED)}")
            if not isinstance(sec, dict):
                raise self.error(f"[{name}]", "must be a table")
            keys = _ALLOWED[name]
            for key in sec:
                if keys is not None and key not in keys:
                    raise self.error(f"[{name}].{key}", f"unknown key; expected one of {sorted(keys)}")
        kind = self.kind
        if kind not in ("continuous", "discrete", "vector"):
            raise self.error("[problem].kind", f"must be continuous, discrete or vector, got {kind!r}")
        for key, value in self.section("params").items():
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise self.error(f"[params].{key}", f"expected a number, got {value!r}")
        if self.horizon is not None and not self.horizon > 0:
            raise ConfigError("--horizon must be positive")
        if self.grid is not None and self.grid < 2:
            raise ConfigError("--grid must be at least 2")

    @property
    def kind(self) -> str:
        return self.section("problem").get("kind", "continuous")

    @property
    def builder(self) -> str | None:
        b = self.section("problem").get("builder")
        if b not in (None, "example1", "example2"):
            raise self.error("[problem].builder", f"unknown builder {b!r}; use example1 or example2")
        return b

    @property
    def params(self) -> dict[str, float]:
        return {k: float(v) for k, v in self.section("params").items()}

    def param(self, name: str, default: float | None = None) -> float:
        value = self.params.get(name, default)
        if value is None:
            raise self.error(f"[params].{name}", "required by the builder")
        return value

    def expr(self, sec: str, key: str, variables, default: str | None = None):
        text = self.section(sec).get(key, default)
        if text is None:
            raise self.error(f"[{sec}].{key}", "missing")
        if not isinstance(text, str):
            text = repr(float(text)) if isinstance(text, (int, float)) and not isinstance(text, bool) else text
        if not isinstance(text, str):
            raise self.error(f"[{sec}].{key}", f"expected an expression string, got {text!r}")
        try:
            return parse_expr(text, variables, self.params)
        except ParseError as exc:
            raise self.error(f"[{sec}].{key}", f"{exc} in {text!r}") from exc

    def sequence(self, sec: str, key: str, default=None) -> dc.IndexedSequence:
        value = self.section(sec).get(key, default)
        if value is None:
            raise self.error(f"[{sec}].{key}", "missing")
        if isinstance(value, list):
            if not value or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in value):
                raise self.error(f"[{sec}].{key}", "a table must be a nonempty list of numbers")
            return dc.IndexedSequence.of(value)
        if isinstance(value, bool) or not isinstance(value, (str, int, float)):
            raise self.error(f"[{sec}].{key}", f"expected a number, list or expression, got {value!r}")
        try:
            return dc.IndexedSequence.of(value, self.params)
        except ParseError as exc:
            raise self.error(f"[{sec}].{key}", f"{exc} in {value!r}") from exc

    # settings with overrides
    def horizon_for(self, sec: str, default: float = 1e4) -> float:
        if self.horizon is not None:
            return self.horizon
        return self.number(sec, "horizon", default, positive=True)

    def grid_for(self, sec: str, default: int = DEFAULT_GRID_POINTS) -> int:
        if self.grid is not None:
            return self.grid
        n = self.number(sec, "grid", default, positive=True, integer=True)
        if n < 2:
            raise self.error(f"[{sec}].grid", "must be at least 2")
        return n

    def margin_for(self, sec: str) -> float:
        if self.margin is not None:
            return self.margin
        return self.number(sec, "margin", 0.0)

    # --- problem construction ----------------------------------------------------

    def shape(self) -> PowerLawShape | None:
        if self.builder != "example1":
            return None
        return PowerLawShape(m=self.param("m"), q=self.param("q"), c=self.param("c"), p=self.param("p"),
                             b=self.param("b", 1.0))

    def problem(self):
        if "problem" not in self._cache:
            self._cache["problem"] = self._build_problem()
        return self._cache["problem"]

    def _example2_args(self):
        return (self.param("c"), self.param("lam"), self.param("b"), self.param("theta"), self.param("p"))

    def _build_problem(self):
        kind, builder = self.kind, self.builder
        sec = self.section("problem")
        t0 = self.number("problem", "t0", 0.0)
        if builder == "example1":
            if kind != "continuous":
                raise self.error("[problem].builder", "example1 needs kind = continuous")
            return self.shape().problem()
        if builder == "example2":
            if kind == "continuous":
                return build_example2(*self._example2_args())[0]
            if kind == "vector":
                return example2_system(*self._example2_args(), u0=self._u0_scalar())
            raise self.error("[problem].builder", "example2 needs kind = continuous or vector")
        if kind == "continuous":
            return ContinuousProblem(gamma=self.expr("problem", "gamma", {"t"}),
                                     beta=self.expr("problem", "beta", {"t"}, "0"),
                                     alpha=self.expr("problem", "alpha", {"t", "y"}, "0"), t0=t0)
        if kind == "discrete":
            n_max = self.number("problem", "n_max", dc.DEFAULT_N_MAX, positive=True, integer=True)
            if self.horizon is not None:
                n_max = int(self.horizon)
            return dc.DiscreteProblem(gamma=self.sequence("problem", "gamma"),
                                      beta=self.sequence("problem", "beta", 0.0),
                                      h=self.sequence("problem", "h", 1.0),
                                      alpha=self.expr("problem", "alpha", {"n", "y"}, "0"), n_max=n_max)
        # vector
        u0 = sec.get("u0")
        if not isinstance(u0, list) or not u0:
            raise self.error("[problem].u0", "expected a nonempty list of numbers")
        d = len(u0)
        names = {"t", *(f"u{i + 1}" for i in range(d))}
        A = sec.get("A")
        if not isinstance(A, list) or not all(isinstance(r, list) for r in A):
            raise self.error("[problem].A", "expected a list of rows")
        rows = []
        for i, row in enumerate(A):
            out = []
            for j, x in enumerate(row):
                if isinstance(x, str):
                    try:
                        out.append(parse_expr(x, {"t"}, self.params))
                    except ParseError as exc:
                        raise self.error(f"[problem].A[{i}][{j}]", f"{exc} in {x!r}") from exc
                else:
                    out.append(float(x))
            rows.append(out)
        if all(isinstance(x, float) for r in rows for x in r):
            A_val = np.array(rows, dtype=float) if len({len(r) for r in rows}) == 1 else rows
        else:
            A_val = [[Const(x) if isinstance(x, float) else x for x in r] for r in rows]
        h_list = sec.get("h", ["0"] * d)
        f_list = sec.get("f", ["0"] * d)
        for key, lst in (("h", h_list), ("f", f_list)):
            if not isinstance(lst, list):
                raise self.error(f"[problem].{key}", "expected a list of expression strings")
        h = []
        for i, x in enumerate(h_list):
            try:
                h.append(parse_expr(str(x), names, self.params))
            except ParseError as exc:
                raise self.error(f"[problem].h[{i}]", f"{exc} in {x!r}") from exc
        f = []
        for i, x in enumerate(f_list):
            try:
                f.append(parse_expr(str(x), {"t"}, self.params))
            except ParseError as exc:
                raise self.error(f"[problem].f[{i}]", f"{exc} in {x!r}") from exc
        return VectorSystem(A=A_val, h_field=tuple(h), f_field=tuple(f),
                            alpha_bound=self.expr("problem", "alpha_bound", {"t", "y"}),
                            u0=[float(x) for x in u0], t0=t0)

    def _u0_scalar(self) -> float:
        u0 = self.section("problem").get("u0", self.section("initial").get("u0"))
        if isinstance(u0, list):
            if len(u0) != 1:
                raise self.error("[problem].u0", "example2 is one-dimensional")
            u0 = u0[0]
        if u0 is None:
            g0 = self.number("initial", "g0")
            if g0 is None:
                raise self.error("[initial].g0", "missing")
            return g0
        return float(u0)

    def scalar_problem(self):
        """The continuous or discrete problem; vector systems are reduced first."""
        p = self.problem()
        return reduce_to_scalar(p) if isinstance(p, VectorSystem) else p

    def envelope(self, required: bool = True):
        sec = self.section("envelope")
        if not sec:
            if self.builder == "example2" and self.kind in ("continuous", "vector"):
                return build_example2(*self._example2_args())[1]
            if required:
                raise self.error("[envelope]", "missing; this command needs an envelope")
            return None
        if self.kind == "discrete":
            if "family" in sec:
                fam = EnvelopeFamily(sec["family"], {k: (sec[k], sec[k] + 1.0) for k in FAMILY_PARAMS.get(
                    sec["family"], ()) if k in sec})
                return fam.envelope({k: sec[k] for k in fam.names})
            return dc.DiscreteEnvelope(self.sequence("envelope", "mu"))
        if "family" in sec:
            family = sec["family"]
            if family not in ("power_law", "shifted"):
                raise self.error("[envelope].family", f"expected power_law or shifted, got {family!r}")
            point = {}
            for k in FAMILY_PARAMS[family]:
                if k not in sec:
                    raise self.error(f"[envelope].{k}", f"required by family {family}")
                point[k] = self.number("envelope", k)
            try:
                fam = EnvelopeFamily(family, {k: (v, v + 1.0) for k, v in point.items()})
            except InvalidRangeError as exc:
                raise self.error("[envelope]", str(exc)) from exc
            return fam.envelope(point)
        mu = self.expr("envelope", "mu", {"t"})
        mu_dot = self.expr("envelope", "mu_dot", {"t"}) if "mu_dot" in sec else None
        return Envelope(mu, mu_dot, str(sec.get("description", "")))

    def g0(self, sec: str | None = None) -> float:
        if sec is not None and "g0" in self.section(sec):
            value = self.number(sec, "g0")
        elif "g0" in self.section("initial"):
            value = self.number("initial", "g0")
        elif "u0" in self.section("initial") and self.builder == "example1":
            value = self.number("initial", "u0") ** 2
        elif self.kind == "vector":
            value = float(np.linalg.norm(self.problem().u0))
        else:
            raise self.error("[initial].g0", "missing")
        if value < 0:
            raise self.error("[initial].g0", "must be nonnegative")
        return value


# --- output -----------------------------------------------------------------------

def write_outputs(out: Path, files: Mapping[str, str]) -> None:
    """Write every file to a temporary name, then rename them all into place."""
    out.mkdir(parents=True, exist_ok=True)
    staged = []
    try:
        for name, text in files.items():
            tmp = out / f".{name}.tmp"
            with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
                fh.flush()
                os.fsync(fh.fileno())
            staged.append((tmp, out / name))
        for tmp, final in staged:
            os.replace(tmp, final)
    finally:
        for tmp, _ in staged:
            if tmp.exists():
                tmp.unlink()


def _header(command: str, cfg: RunConfig, problem, env=None, g0=None) -> list[str]:
    lines = [f"command: {command}", f"config: {Path(cfg.path).name}", f"kind: {cfg.kind}"]
    lines += problem.describe().splitlines()
    if env is not None:
        lines.append(f"envelope: {_describe_env(env)}")
    if g0 is not None:
        lines.append(f"g0: {g0!r}")
    return lines


def _describe_env(env) -> str:
    if isinstance(env, Envelope):
        return env.description or f"mu(t) = {env.mu}"
    return env.description or f"mu_n = {env.mu}"


# --- commands ---------------------------------------------------------------------

def _closed_form_note(cfg: RunConfig, report) -> None:
    shape = cfg.shape()
    sec = cfg.section("envelope")
    if shape is None or sec.get("family") != "power_law" or not report.certified:
        return
    lam, nu = float(sec["lam"]), float(sec["nu"])
    if shape.b != 1.0:
        report.notes.append("closed-form power-law check not applicable (b != 1)")
    elif shape.closed_form(lam, nu):
        report.mark_global("closed-form power-law check passed: bound holds for all t >= t0")
    else:
        report.notes.append("closed-form power-law check fails: certificate limited to the grid")


def _run_verify(cfg: RunConfig, problem, env, g0: float):
    if isinstance(problem, dc.DiscreteProblem):
        report = dc.verify_discrete_certificate(problem, env, g0, cfg.margin_for("verify"))
    else:
        mode = cfg.section("verify").get("mode", "strict")
        if mode not in ("strict", "nonstrict"):
            raise cfg.error("[verify].mode", f"must be strict or nonstrict, got {mode!r}")
        lipschitz = cfg.section("verify").get("lipschitz", False)
        if not isinstance(lipschitz, bool):
            raise cfg.error("[verify].lipschitz", "expected true or false")
        report = verify_certificate(problem, env, g0, cfg.horizon_for("verify"), cfg.grid_for("verify"),
                                    cfg.margin_for("verify"), mode, lipschitz)
        _closed_form_note(cfg, report)
    return report


def cmd_verify(cfg: RunConfig) -> int:
    problem = cfg.scalar_problem()
    env = cfg.envelope()
    g0 = cfg.g0()
    report = _run_verify(cfg, problem, env, g0)
    text = "\n".join(_header("verify", cfg, problem, env, g0)) + "\n" + report.to_text()
    write_outputs(cfg.out, {"report.txt": text, "residuals.csv": report.residuals_csv()})
    print(f"{report.verdict}: min_residual={report.min_residual!r}")
    return VERDICT_EXIT[report.verdict]


def _sim_settings(cfg: RunConfig) -> tuple[float, float, float]:
    return (cfg.horizon_for("simulate", 1e3), cfg.number("simulate", "rel_tol", 1e-8, positive=True),
            cfg.number("simulate", "abs_tol", 1e-10, positive=True))


def cmd_simulate(cfg: RunConfig) -> int:
    problem = cfg.problem()
    if isinstance(problem, dc.DiscreteProblem):
        return _simulate_discrete(cfg, problem)
    env = cfg.envelope(required=False)
    horizon, rel_tol, abs_tol = _sim_settings(cfg)
    strict = cfg.section("verify").get("mode", "strict") == "strict"
    files, lines = {}, []
    if isinstance(problem, VectorSystem):
        traj = integrate_vector(problem, horizon, rel_tol, abs_tol)
        files["trajectory.csv"] = traj.to_csv()
        view = SimpleNamespace(t=traj.t, g=traj.norm, abs_tol=abs_tol)
        lines = _header("simulate", cfg, reduce_to_scalar(problem), env, float(traj.norm[0]))
    else:
        g0 = cfg.g0()
        traj = integrate_extremal(problem, g0, horizon, rel_tol, abs_tol)
        files["trajectory.csv"] = traj.to_csv()
        view = traj
        lines = _header("simulate", cfg, problem, env, g0)
    lines += [f"horizon: {horizon!r}", f"rel_tol: {rel_tol!r}", f"abs_tol: {abs_tol!r}",
              f"status: {traj.status.value}", f"steps: {len(traj.t) - 1}",
              f"t_end: {float(traj.t[-1])!r}"]
    if traj.escape_time is not None:
        lines.append(f"escape_time: {traj.escape_time!r}")
    lines += [f"note: {n}" for n in traj.notes]

    violations = 0
    if env is not None:
        check = check_envelope(view, env, strict=strict)
        violations += len(check.violations)
        vtext = "trajectory: extremal\n" + check.to_text()
        shape = cfg.shape()
        if shape is not None and "u0" in cfg.section("initial"):
            u = integrate_scalar(shape.u_rhs(), cfg.number("initial", "u0"), 0.0, horizon, rel_tol, abs_tol)
            files["u_trajectory.csv"] = u.to_csv().replace("t,g,g_dot", "t,u,u_dot", 1)
            sq = SimpleNamespace(t=u.t, g=u.g ** 2, abs_tol=abs_tol)
            ucheck = check_envelope(sq, env, strict=strict)
            violations += len(ucheck.violations)
            vtext += "trajectory: u^2\n" + ucheck.to_text()
        files["violations.txt"] = vtext
        lines.append(f"violations: {violations}")
    files["report.txt"] = "\n".join(lines) + "\n"
    write_outputs(cfg.out, files)
    print(f"{traj.status.value}: {len(traj.t) - 1} steps, {violations} violations")
    if traj.status == Status.BLEW_UP:
        return EXIT_BLOWUP
    if traj.status == Status.DOMAIN_ERROR:
        return EXIT_ERROR
    return EXIT_INFEASIBLE if violations else EXIT_OK


def _simulate_discrete(cfg: RunConfig, problem: dc.DiscreteProblem) -> int:
    N = cfg.number("simulate", "N", problem.n_max, positive=True, integer=True)
    if cfg.horizon is not None:
        N = min(int(cfg.horizon), problem.n_max)
    if N > problem.n_max:
        raise cfg.error("[simulate].N", f"exceeds n_max = {problem.n_max}")
    g0 = cfg.g0()
    env = cfg.envelope(required=False)
    result = dc.run_recurrence(problem, g0, N)
    lines = _header("simulate", cfg, problem, env, g0)
    lines += [f"N: {N}", f"status: {result.status}", f"last_index: {len(result.g) - 1}",
              f"g_max: {float(np.max(result.g))!r}", f"g_last: {float(result.g[-1])!r}"]
    lines += [f"note: {n}" for n in result.notes]
    files = {}
    violations = []
    residuals = None
    if env is not None:
        bound = 1.0 / env.values(len(result.g))
        bad = np.nonzero(result.g > bound + DISCRETE_TOL)[0]
        violations = bad.tolist()
        if len(result.g) - 1 <= problem.n_max:
            residuals = dc.residual_array(problem, env, len(result.g))
        vlines = [f"samples: {len(result.g)}", f"violations (g_n > 1/mu_n + {DISCRETE_TOL!r}): {len(bad)}",
                  f"worst_slack: {float(np.min(bound - result.g))!r}"]
        vlines += [f"violation: n={n} g={float(result.g[n])!r} bound={float(bound[n])!r}" for n in bad[:20]]
        files["violations.txt"] = "\n".join(vlines) + "\n"
        lines.append(f"violations: {len(bad)}")
    files["sequence.csv"] = dc.sequence_csv(result.g, env, residuals)
    files["report.txt"] = "\n".join(lines) + "\n"
    write_outputs(cfg.out, files)
    print(f"{result.status}: N={N}, {len(violations)} violations")
    if result.blew_up:
        return EXIT_BLOWUP
    return EXIT_INFEASIBLE if violations else EXIT_OK


def cmd_search(cfg: RunConfig) -> int:
    sec = cfg.section("search")
    problem = cfg.scalar_problem()
    kind = sec.get("family")
    if kind is None:
        raise cfg.error("[search].family", "missing")
    ranges = sec.get("ranges")
    if not isinstance(ranges, dict):
        raise cfg.error("[search.ranges]", "missing")
    try:
        family = EnvelopeFamily(kind, {k: tuple(v) for k, v in ranges.items()})
    except (InvalidRangeError, TypeError, ValueError) as exc:
        raise cfg.error("[search.ranges]", str(exc)) from exc
    resolution = sec.get("resolution", 17)
    if isinstance(resolution, dict):
        missing = set(family.names) - set(resolution)
        if missing:
            raise cfg.error("[search.resolution]", f"missing {sorted(missing)}")
        resolution = {k: int(resolution[k]) for k in family.names}
    shape = None
    if "shape" in sec:
        s = sec["shape"]
        shape = PowerLawShape(m=s["m"], q=s["q"], c=s["c"], p=s["p"], b=s.get("b", 1.0))
    elif kind == "power_law":
        shape = cfg.shape()
    objective = sec.get("objective", "max_decay")
    try:
        region = search_feasible(problem, family, cfg.g0("search"), resolution, objective,
                                 cfg.horizon_for("search"), cfg.grid_for("search"), cfg.margin_for("search"),
                                 shape=shape, workers=int(sec.get("workers", 1)))
    except InvalidRangeError as exc:
        raise cfg.error("[search]", str(exc)) from exc
    lines = _header("search", cfg, problem, g0=cfg.g0("search"))
    if shape is not None:
        lines.append(f"closed_form_shape: m={shape.m!r} q={shape.q!r} c={shape.c!r} p={shape.p!r} b={shape.b!r}")
    text = "\n".join(lines) + "\n" + region.summary()
    write_outputs(cfg.out, {"region.csv": region.to_csv(), "best.txt": text})
    best = region.best_point()
    print("empty region" if best is None else "best: " + ", ".join(f"{k}={v!r}" for k, v in best.items()))
    return EXIT_INFEASIBLE if region.empty else EXIT_OK


def cmd_reduce(cfg: RunConfig) -> int:
    system = cfg.problem()
    if not isinstance(system, VectorSystem):
        raise cfg.error("[problem].kind", "reduce needs kind = vector")
    sec = cfg.section("reduce")
    problem = reduce_to_scalar(system)
    horizon = cfg.horizon_for("reduce")
    n_beta = cfg.number("reduce", "beta_samples", 33, positive=True, integer=True)
    ts = log_grid(system.t0, horizon, max(n_beta, 2))
    gamma0 = problem.gamma_at(system.t0)
    lines = ["command: reduce", f"config: {Path(cfg.path).name}", f"dimension: {system.dim}",
             f"A: {'constant' if system.constant_A else 'time-varying'}"]
    lines += problem.describe().splitlines()
    lines.append(f"gamma(t0): {gamma0!r}")

    radii = sec.get("radii", [1e-3, 1e-2, 1e-1, 1.0, 10.0])
    directions = cfg.number("reduce", "directions", 64, positive=True, integer=True)
    times = log_grid(system.t0, horizon, 9)
    bad = falsify_alpha_bound(system, [float(r) for r in radii], times, directions, cfg.seed)
    lines += [f"alpha_bound_check: radii={len(radii)} times={len(times)} directions={directions} "
              f"seed={cfg.seed}", f"alpha_bound_counterexamples: {len(bad)}"]
    for t, r, norm_h, bound in bad[:10]:
        lines.append(f"counterexample: t={t!r} r={r!r} |h|={norm_h!r} alpha={bound!r}")

    beta_vals = [float(problem.beta_at(float(t))) for t in ts]
    table = "t,beta\n" + "".join(f"{float(t)!r},{b!r}\n" for t, b in zip(ts, beta_vals))
    files = {"problem.txt": "", "beta_table.csv": table}
    code = EXIT_INFEASIBLE if bad else EXIT_OK
    chain = sec.get("chain_verify", False)
    if chain:
        env = cfg.envelope()
        g0 = cfg.g0()
        report = _run_verify(cfg, problem, env, g0)
        files["report.txt"] = "\n".join(_header("verify", cfg, problem, env, g0)) + "\n" + report.to_text()
        files["residuals.csv"] = report.residuals_csv()
        lines.append(f"chained_verify: {report.verdict}")
        if not bad:
            code = VERDICT_EXIT[report.verdict]
    files["problem.txt"] = "\n".join(lines) + "\n"
    write_outputs(cfg.out, files)
    print(f"gamma(t0)={gamma0!r}" + (f", verify: {report.verdict}" if chain else ""))
    return code


COMMANDS = {"verify": cmd_verify, "simulate": cmd_simulate, "search": cmd_search, "reduce": cmd_reduce}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="decaycert",
                                     description="Certify decay envelopes for nonlinear differential inequalities.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, metavar="PATH", help="TOML run configuration")
    parser.add_argument("--out", default="out", metavar="DIR", help="output directory (default: out)")
    parser.add_argument("--horizon", type=float, help="override the time horizon (n_max for discrete problems)")
    parser.add_argument("--grid", type=int, help="override the residual grid size")
    parser.add_argument("--margin", type=float, help="override the required residual margin")
    parser.add_argument("--seed", type=int, default=0, help="seed for sampling-based checks")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_ERROR if exc.code else EXIT_OK
    try:
        cfg = RunConfig.load(args.config, out=Path(args.out), horizon=args.horizon, grid=args.grid,
                             margin=args.margin, seed=args.seed)
        return COMMANDS[args.command](cfg)
    except (ConfigError, ExpressionError, dc.PreconditionError, AsymmetryError, DimensionError,
            InvalidRangeError, WrongShapeError, NoSignChangeError, NonpositiveEnvelopeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (ValueError, KeyError, TypeError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
