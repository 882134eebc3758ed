"""Command-line front end: verification sweeps, solves, probes and kernel bounds.

Every run writes a self-describing table (CSV by default, JSON on request)
whose header carries the tool version, the resolved configuration and the
column schema.  Exit status: 0 pass, 1 assertion violation, 2 numeric or
configuration failure.

Configuration files are flat ``key = value`` lines (``#`` starts a comment);
keys are the long option names with dashes or underscores.  Flags override
file values, which override defaults.  The worker-pool size is read from the
``HARDYLERAY_WORKERS`` environment variable; output order always follows the
configuration order.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Optional, Sequence

import numpy as np

from . import __version__
from .core import RadialFunction, bump_library, default_library, derive_params, phi
from .errors import (HardyError, InvalidDimension, NoLimit, NoSolution, ProbeFailure)

WORKERS_ENV = "HARDYLERAY_WORKERS"

DEFAULTS = {
    "dim": "3",
    "mu": "sweep",
    "radius": "1.0",
    "f": "const",
    "k": "0.0",
    "tol": "1e-6",
    "identity": "both",
    "library": "default",
    "points": "20",
    "a0": "1.0",
    "eps": "1e-2,1e-3,1e-4",
    "zeros": "12",
    "x0": "0.5",
    "n_max": "256",
    "samples": "1000",
    "seed": "0",
    "format": "csv",
    "output": "-",
}


class ConfigError(HardyError, ValueError):
    pass


class Violation(Exception):
    """Raised to end a run with exit status 1 after the report is written."""


# --------------------------------------------------------------------------
# configuration


def read_config_file(path: str) -> dict:
    """Flat key = value pairs; blank lines and # comments are ignored."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


def resolve_config(args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS)
    if args.config:
        cfg.update(read_config_file(args.config))
    for key, value in vars(args).items():
        if key in ("config", "func") or value is None:
            continue
        cfg[key] = str(value)
    return cfg


def _floats(text: str) -> list:
    try:
        return [float(t) for t in str(text).split(",") if t.strip()]
    except ValueError as exc:
        raise ConfigError(f"cannot parse number list {text!r}") from exc


def _ints(text: str) -> list:
    try:
        return [int(t) for t in str(text).split(",") if t.strip()]
    except ValueError as exc:
        raise ConfigError(f"cannot parse integer list {text!r}") from exc


def _float(cfg: dict, key: str) -> float:
    try:
        return float(cfg[key])
    except ValueError as exc:
        raise ConfigError(f"{key} must be a number, got {cfg[key]!r}") from exc


def _int(cfg: dict, key: str) -> int:
    try:
        return int(cfg[key])
    except ValueError as exc:
        raise ConfigError(f"{key} must be an integer, got {cfg[key]!r}") from exc


def workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError as exc:
        raise ConfigError(f"{WORKERS_ENV} must be an integer") from exc


def ordered_map(fn: Callable, items: Sequence) -> list:
    """Map over a worker pool, keeping results in input order."""
    n = workers()
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


# --------------------------------------------------------------------------
# source registry


def parse_source(text: str, p) -> RadialFunction:
    """Named radial sources.

    ``const[:c]``, ``zero``, ``power:<offset>`` (r^(tau_- - 2 + offset)),
    ``abspower:<exponent>``, ``sin:<k>`` (sin(k pi r)) and ``table:<path>``
    (two columns r, f; linear interpolation).
    """
    name, _, arg = text.partition(":")
    try:
        if name == "const":
            return RadialFunction.constant(float(arg) if arg else 1.0)
        if name == "zero":
            return RadialFunction.constant(0.0)
        if name == "power":
            return RadialFunction.power(p.tau_minus - 2.0 + float(arg))
        if name == "abspower":
            return RadialFunction.power(float(arg))
        if name == "sin":
            w = float(arg) * math.pi
            return RadialFunction(lambda r: np.sin(w * r), lambda r: w * np.cos(w * r),
                                  lambda r: -w * w * np.sin(w * r), name=text)
        if name == "table":
            data = np.loadtxt(arg, delimiter=",", comments="#", ndmin=2)
            rr, ff = data[:, 0], data[:, 1]
            order = np.argsort(rr)
            rr, ff = rr[order], ff[order]
            return RadialFunction(lambda r: np.interp(r, rr, ff), name=text,
                                  breakpoints=tuple(float(x) for x in rr))
    except (ValueError, OSError) as exc:
        raise ConfigError(f"bad source specification {text!r}: {exc}") from exc
    raise ConfigError(f"unknown source {text!r}")


def _params(cfg: dict, mu: Optional[float] = None):
    N = _int(cfg, "dim")
    m = _float(cfg, "mu") if mu is None else mu
    return derive_params(N, m)


def _single_mu_default(cfg: dict) -> float:
    """mu used when a single-parameter command gets no --mu."""
    if cfg["command"] == "probe oscillation":
        N = _int(cfg, "dim")
        return -((N - 2) ** 2) / 4.0 - 1.0
    return 2.0


def _mu_list(cfg: dict, N: int) -> list:
    from .verifier import sweep_mus
    text = cfg["mu"]
    if text == "sweep":
        return list(sweep_mus(N))
    return _floats(text)


# --------------------------------------------------------------------------
# output


class Report:
    def __init__(self, command: str, cfg: dict, columns: Sequence[str]):
        self.command = command
        self.cfg = cfg
        self.columns = list(columns)
        self.rows: list = []
        self.summary: dict = {}

    def add(self, *row):
        self.rows.append(list(row))

    @staticmethod
    def _plain(v):
        if isinstance(v, (bool, np.bool_)):
            return bool(v)
        if isinstance(v, np.integer):
            return int(v)
        if isinstance(v, (float, np.floating)):
            return float(v)
        return v

    @classmethod
    def _fmt(cls, v):
        v = cls._plain(v)
        if isinstance(v, float):
            return repr(v)
        return str(v)

    def render(self) -> str:
        if self.cfg.get("format", "csv") == "json":
            doc = {"tool": "hardyleray", "version": __version__, "command": self.command,
                   "config": self.cfg, "columns": self.columns,
                   "rows": [[self._plain(v) for v in row] for row in self.rows],
                   "summary": {k: self._plain(v) for k, v in self.summary.items()}}
            return json.dumps(doc, indent=2, sort_keys=True, default=str) + "\n"
        buf = io.StringIO()
        buf.write(f"# hardyleray {__version__} {self.command}\n")
        buf.write("# config: " + json.dumps(self.cfg, sort_keys=True) + "\n")
        buf.write("# columns: " + ",".join(self.columns) + "\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([self._fmt(v) for v in row])
        for key in sorted(self.summary):
            buf.write(f"# {key}: {self._fmt(self.summary[key])}\n")
        return buf.getvalue()

    def write(self):
        text = self.render()
        target = self.cfg.get("output", "-")
        if target == "-":
            sys.stdout.write(text)
        else:
            with open(target, "w", encoding="utf-8") as fh:
                fh.write(text)


# --------------------------------------------------------------------------
# commands


def _library(cfg: dict, R: float):
    text = cfg["library"]
    if text == "default":
        return default_library(R)
    return [bump_library(kind.strip(), R) for kind in text.split(",")]


def cmd_verify(cfg: dict) -> Report:
    from .verifier import verify_fundamental_identity, verify_green_identity
    dims = _ints(cfg["dim"])
    R = _float(cfg, "radius")
    tol = _float(cfg, "tol")
    which = cfg["identity"]
    if which not in ("both", "fundamental", "green"):
        raise ConfigError("identity must be both, fundamental or green")
    jobs = []
    for N in dims:
        for mu in _mu_list(cfg, N):
            p = derive_params(N, mu)
            for xi in _library(cfg, R):
                if which in ("both", "fundamental"):
                    jobs.append((p, xi, "fundamental"))
                if which in ("both", "green"):
                    jobs.append((p, xi, "green"))

    def run(job):
        p, xi, kind = job
        if kind == "fundamental":
            return verify_fundamental_identity(p, xi)
        return verify_green_identity(p, R, xi)

    results = ordered_map(run, jobs)
    rep = Report("verify", cfg, ["dim", "mu", "xi", "identity", "lhs", "rhs", "abs_residual",
                                 "rel_residual", "budget", "status"])
    failed = []
    for (p, xi, kind), res in zip(jobs, results):
        bad = res.violates(tol)
        rep.add(p.dim, p.mu, xi.kind, kind, res.lhs, res.rhs, res.abs_residual,
                res.rel_residual, res.quadrature_error_budget, "FAIL" if bad else "ok")
        if bad:
            failed.append(f"{kind} identity N={p.dim} mu={p.mu:g} xi={xi.kind}")
    rep.summary["checks"] = len(jobs)
    rep.summary["violations"] = len(failed)
    if failed:
        rep.summary["failing"] = "; ".join(failed)
    return rep


def cmd_solve(cfg: dict) -> Report:
    from .solver import solve_radial_bvp
    from .verifier import classify_solution, verify_weak_solution
    p = _params(cfg)
    R = _float(cfg, "radius")
    k = _float(cfg, "k")
    f = parse_source(cfg["f"], p)
    rep = Report("solve", cfg, ["r", "u", "u_over_phi"])
    try:
        sol = solve_radial_bvp(p, 0, f, R, k)
    except NoSolution as exc:
        rep.summary["status"] = "no-solution"
        rep.summary["reason"] = str(exc)
        if exc.fit is not None:
            rep.summary["growth_model"] = exc.fit.model
            rep.summary["growth_coefficient"] = exc.fit.coefficient
        raise Violation(rep)
    radii = np.linspace(R / _int(cfg, "points"), R, _int(cfg, "points"))
    vals = np.asarray(sol.profile(radii))
    for r, u in zip(radii, vals):
        rep.add(float(r), float(u), float(u / phi(p, r)) if r < R else 0.0)
    try:
        cls = classify_solution(p, sol, f)
        rep.summary["k_hat"] = cls.k_hat
        rep.summary["k_error"] = cls.k_error
        rep.summary["decomposition_residual"] = cls.decomposition_residual
    except NoLimit as exc:
        rep.summary["k_hat"] = f"no-limit: {exc}"
    weak = verify_weak_solution(p, sol, f, k, default_library(R))
    rep.summary["residual_norm"] = sol.residual_norm
    rep.summary["weak_max_rel_residual"] = max(w.rel_residual for w in weak)
    tol = _float(cfg, "tol")
    ok = sol.residual_norm <= tol and not any(w.violates(tol) for w in weak)
    rep.summary["status"] = "ok" if ok else "violation"
    if not ok:
        raise Violation(rep)
    return rep


def cmd_probe_eigen(cfg: dict) -> Report:
    from .probes import eigen_closed_form, principal_eigenvalue
    N = _int(cfg, "dim")
    a0 = _float(cfg, "a0")
    eps = sorted(_floats(cfg["eps"]), reverse=True)
    lams = ordered_map(lambda e: principal_eigenvalue(N, a0, e), eps)
    hardy = (N - 2) ** 2 / (4.0 * a0)
    rep = Report("probe eigen", cfg, ["eps", "lambda1", "closed_form", "rel_diff", "gap"])
    worst = 0.0
    for e, lam in zip(eps, lams):
        ref = eigen_closed_form(N, a0, e)
        worst = max(worst, abs(lam / ref - 1.0))
        rep.add(e, lam, ref, abs(lam / ref - 1.0), lam - hardy)
    decreasing = all(b < a for a, b in zip(lams, lams[1:]))
    above = all(l > hardy for l in lams)
    rep.summary.update(hardy_constant=hardy, strictly_decreasing=decreasing,
                       above_hardy=above, max_rel_diff=worst)
    if not (decreasing and above and worst <= 5e-3):
        raise Violation(rep)
    return rep


def cmd_probe_oscillation(cfg: dict) -> Report:
    from .probes import sub_hardy_probe
    N = _int(cfg, "dim")
    mu = _float(cfg, "mu")
    r = sub_hardy_probe(N, mu, _float(cfg, "radius"), n_zeros=_int(cfg, "zeros"))
    rep = Report("probe oscillation", cfg, ["index", "zero_radius", "ratio", "predicted",
                                            "rel_error"])
    for i, z in enumerate(r.zero_locations):
        if i < len(r.consecutive_ratios):
            ratio = r.consecutive_ratios[i]
            rep.add(i, z, ratio, r.predicted_ratio, abs(ratio / r.predicted_ratio - 1.0))
        else:
            rep.add(i, z, "", r.predicted_ratio, "")
    errs = r.relative_errors()
    rep.summary["predicted_ratio"] = r.predicted_ratio
    rep.summary["zeros_found"] = len(r.zero_locations)
    if len(errs) < 8 or errs[7] > 1e-3:
        raise Violation(rep)
    return rep


def cmd_probe_blowup(cfg: dict) -> Report:
    from .probes import classify_source, exhaustion_values, fit_growth
    p = _params(cfg)
    R = _float(cfg, "radius")
    f = parse_source(cfg["f"], p)
    x0 = _float(cfg, "x0")
    n_max = _int(cfg, "n_max")
    ns = [4]
    while ns[-1] * 2 <= n_max:
        ns.append(ns[-1] * 2)
    vals = ordered_map(lambda n: exhaustion_values(p, f, x0, [n], R)[0], ns)
    fit = fit_growth(ns, vals)
    src = classify_source(p, f, R)
    rep = Report("probe blowup", cfg, ["n", "inner_radius", "u_n"])
    for n, v in zip(ns, vals):
        rep.add(n, 1.0 / n, v)
    rep.summary.update(model=fit.model, coefficient=fit.coefficient, exponent=fit.exponent,
                       asymptote=fit.asymptote, r_squared=fit.r_squared,
                       f1_finite=src.f1_finite, f2_divergent=src.f2_divergent)
    unbounded = fit.model in ("log", "power")
    if src.f2_divergent and not unbounded:
        rep.summary["status"] = "bounded series for a divergent source"
        raise Violation(rep)
    if src.f1_finite and unbounded:
        rep.summary["status"] = "unbounded series for an integrable source"
        raise Violation(rep)
    rep.summary["status"] = "ok"
    return rep


def cmd_green(cfg: dict) -> Report:
    from .green import GreenKernelSeries, check_kernel_bounds
    p = _params(cfg)
    gk = GreenKernelSeries(p, _float(cfg, "radius"))
    rep_b = check_kernel_bounds(gk, _int(cfg, "samples"), _int(cfg, "seed"))
    N = p.dim
    cols = [f"x{i}" for i in range(N)] + [f"y{i}" for i in range(N)] + \
        ["kernel", "upper_envelope", "lower_envelope"]
    rep = Report("green", cfg, cols)
    for x, y, v, up, lo in rep_b.samples:
        rep.add(*[float(c) for c in x], *[float(c) for c in y], v, up, lo)
    rep.summary.update(regime=rep_b.regime, fitted_upper_c=rep_b.fitted_upper_c,
                       fitted_lower_c=rep_b.fitted_lower_c, violations=rep_b.violations,
                       max_tail=rep_b.max_tail)
    if rep_b.violations:
        raise Violation(rep)
    return rep


def cmd_selftest(cfg: dict) -> Report:
    from .quadrature import integrate_radial
    from .verifier import verify_fundamental_identity
    from .core import quartic_bump
    rep = Report("selftest", cfg, ["check", "value", "expected", "error", "status"])
    bad = 0
    rng = np.random.default_rng(_int(cfg, "seed"))
    for a in np.concatenate([[-0.99, -0.5, 0.0, 2.0], rng.uniform(-0.95, 3.0, 6)]):
        val = integrate_radial(lambda r, a=a: r ** a, 0.0, 1.0).value
        exp = 1.0 / (a + 1.0)
        err = abs(val / exp - 1.0)
        ok = err <= 1e-9
        bad += not ok
        rep.add(f"power {a:.6g}", val, exp, err, "ok" if ok else "FAIL")
        val = integrate_radial(lambda r, a=a: -math.log(r) * r ** a, 0.0, 1.0).value
        exp = 1.0 / (a + 1.0) ** 2
        err = abs(val / exp - 1.0)
        ok = err <= 1e-9
        bad += not ok
        rep.add(f"log-power {a:.6g}", val, exp, err, "ok" if ok else "FAIL")
    for N, mu in ((3, 2.0), (3, -0.25), (2, 0.0)):
        res = verify_fundamental_identity(derive_params(N, mu), quartic_bump())
        ok = res.rel_residual <= 1e-8
        bad += not ok
        rep.add(f"identity N={N} mu={mu:g}", res.lhs, res.rhs, res.rel_residual,
                "ok" if ok else "FAIL")
    rep.summary["failures"] = bad
    if bad:
        raise Violation(rep)
    return rep


# --------------------------------------------------------------------------
# argument parsing


def _common(sp: argparse.ArgumentParser):
    sp.add_argument("--config", help="flat key = value configuration file")
    sp.add_argument("--format", choices=("csv", "json"), help="output format (default csv)")
    sp.add_argument("--output", "-o", help="output path, '-' for stdout")
    sp.add_argument("--dim", help="dimension N (comma list for verify)")
    sp.add_argument("--radius", help="ball radius R")
    sp.add_argument("--tol", help="relative tolerance")
    sp.add_argument("--seed", help="random seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hardyleray", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"hardyleray {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("verify", help="fundamental and Green identity sweep")
    _common(sp)
    sp.add_argument("--mu", help="comma list of mu values or 'sweep'")
    sp.add_argument("--identity", choices=("both", "fundamental", "green"))
    sp.add_argument("--library", help="'default' or comma list of test-function kinds")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("solve", help="radial solve with classification")
    _common(sp)
    sp.add_argument("--mu")
    sp.add_argument("--f", help="source: const[:c], zero, power:<offset>, abspower:<e>, "
                                "sin:<k>, table:<path>")
    sp.add_argument("--k", help="singularity coefficient")
    sp.add_argument("--points", help="number of output radii")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("probe", help="nonexistence and threshold probes")
    psub = sp.add_subparsers(dest="probe", required=True)
    pe = psub.add_parser("eigen", help="principal eigenvalue on shrinking annuli")
    _common(pe)
    pe.add_argument("--a0")
    pe.add_argument("--eps", help="comma list of inner radii")
    pe.set_defaults(func=cmd_probe_eigen)
    po = psub.add_parser("oscillation", help="zeros below the Hardy threshold")
    _common(po)
    po.add_argument("--mu")
    po.add_argument("--zeros", help="number of zeros to locate")
    po.set_defaults(func=cmd_probe_oscillation)
    pb = psub.add_parser("blowup", help="exhaustion series growth")
    _common(pb)
    pb.add_argument("--mu")
    pb.add_argument("--f")
    pb.add_argument("--x0")
    pb.add_argument("--n-max", dest="n_max")
    pb.set_defaults(func=cmd_probe_blowup)

    sp = sub.add_parser("green", help="kernel sampling and envelope bounds")
    _common(sp)
    sp.add_argument("--mu")
    sp.add_argument("--samples")
    sp.set_defaults(func=cmd_green)

    sp = sub.add_parser("selftest", help="quadrature and identity self-tests")
    _common(sp)
    sp.set_defaults(func=cmd_selftest)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    cfg: dict = {}
    try:
        cfg = resolve_config(args)
        cfg["command"] = args.command + (f" {args.probe}" if args.command == "probe" else "")
        if cfg["command"] != "verify" and cfg["mu"] == "sweep":
            cfg["mu"] = str(_single_mu_default(cfg))
        report = args.func(cfg)
        report.write()
        return 0
    except Violation as v:
        v.args[0].write()
        sys.stderr.write(f"hardyleray: assertion violated in {cfg.get('command')}\n")
        return 1
    except ProbeFailure as exc:
        sys.stderr.write(f"hardyleray: probe failure: {exc}\n")
        return 1
    except (InvalidDimension, ConfigError) as exc:
        sys.stderr.write(f"hardyleray: invalid configuration: {exc}\n")
        return 2
    except (HardyError, OSError, ValueError, ArithmeticError) as exc:
        sys.stderr.write(f"hardyleray: numeric failure ({type(exc).__name__}): {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
