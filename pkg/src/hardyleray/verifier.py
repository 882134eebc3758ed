"""Quantified checks of the weighted distributional identities.

Every check returns the two sides, their difference and a quadrature error
budget.  A check is a *violation* only when the residual exceeds both the
requested tolerance and the propagated budget.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
from scipy import integrate, optimize

from .core import (HardyParams, TestFunction, apply_dual, apply_dual_point, derive_params,
                   green_ball_closed, phi, quartic_bump, sphere_area)
from .errors import DivergentIntegral, DomainError, NoSolution
from .quadrature import DEFAULT_SPEC, QuadratureSpec, integrate_radial, weighted_l1_norm
from .solver import RadialSolution, extract_singularity_coefficient

ABS_FLOOR = 1e-12


@dataclass(frozen=True)
class IdentityResidual:
    lhs: float
    rhs: float
    abs_residual: float
    rel_residual: float
    quadrature_error_budget: float
    label: str = ""

    def violates(self, rel_tol: float, abs_floor: float = ABS_FLOOR) -> bool:
        allowed = max(rel_tol * abs(self.rhs), abs_floor, self.quadrature_error_budget)
        return self.abs_residual > allowed


def _residual(lhs: float, rhs: float, budget: float, label: str = "") -> IdentityResidual:
    diff = abs(lhs - rhs)
    rel = diff / abs(rhs) if rhs != 0.0 else diff
    return IdentityResidual(float(lhs), float(rhs), float(diff), float(rel), float(budget), label)


# --------------------------------------------------------------------------
# dual-operator evaluation


def dual_fd(p: HardyParams, xi: TestFunction, r: float, lo: float = 0.0,
            hi: float = math.inf) -> float:
    """L* xi at r from profile values only, with stencils kept inside [lo, hi]."""
    n_eff = p.effective_dim
    h = min(1e-3, 0.25 * r)
    f = lambda t: float(xi.profile(t))  # noqa: E731
    if r - h < lo:
        f0, f1, f2, f3 = (f(r + i * h) for i in range(4))
        d1 = (-3 * f0 + 4 * f1 - f2) / (2 * h)
        d2 = (2 * f0 - 5 * f1 + 4 * f2 - f3) / (h * h)
    elif r + h > hi:
        f0, f1, f2, f3 = (f(r - i * h) for i in range(4))
        d1 = (3 * f0 - 4 * f1 + f2) / (2 * h)
        d2 = (2 * f0 - 5 * f1 + 4 * f2 - f3) / (h * h)
    else:
        fm, f0, fp = f(r - h), f(r), f(r + h)
        d1 = (fp - fm) / (2 * h)
        d2 = (fp - 2 * f0 + fm) / (h * h)
    return -d2 - (n_eff - 1.0) * d1 / r


def _pieces(xi: TestFunction, limit: float):
    edges = sorted({b for b in xi.profile.breakpoints if 0.0 < b < limit} | {limit})
    return list(zip([0.0] + edges[:-1], edges))


def _weighted_dual_integral(p: HardyParams, weight: Callable, xi: TestFunction, limit: float,
                            spec: QuadratureSpec, finite_difference: bool = False):
    """|S| int_0^limit weight(r) L*xi(r) Gamma(r) r^(N-1) dr, split at the kinks of xi."""
    area, expo = p.sphere_area, p.tau_plus + p.dim - 1.0
    total, budget = 0.0, 0.0
    for lo, hi in _pieces(xi, limit):
        if finite_difference:
            dual = lambda r, lo=lo, hi=hi: dual_fd(p, xi, r, lo, hi)  # noqa: E731
        else:
            dual = lambda r: float(apply_dual(p, xi, r))  # noqa: E731

        def h(r, dual=dual):
            return area * weight(r) * dual(r) * r ** expo
        res = integrate_radial(h, lo, hi, spec)
        total += res.value
        budget += res.error
    return total, budget


def _translated_integral(p: HardyParams, weight: Callable, xi: TestFunction,
                         spec: QuadratureSpec):
    """int weight(|x|) L* xi(x) d(mu) for a bump centred off the origin.

    Polar coordinates about the axis through the centre: the angular measure is
    |S^{N-2}| sin^{N-2}(theta) d theta (for N = 2, twice d theta on [0, pi]).
    """
    N, tp = p.dim, p.tau_plus
    c = np.asarray(xi.center, float)
    dc = float(np.linalg.norm(c))
    rho = xi.support_radius
    axis = c / dc
    # an orthonormal partner for placing points at angle theta from the axis
    trial = np.eye(N)[int(np.argmin(np.abs(axis)))]
    perp = trial - np.dot(trial, axis) * axis
    perp /= np.linalg.norm(perp)
    ang_area = 2.0 if N == 2 else sphere_area(N - 1)

    def theta_max(r):
        cosm = (r * r + dc * dc - rho * rho) / (2.0 * r * dc)
        return math.acos(min(1.0, max(-1.0, cosm)))

    def shell(r):
        tmax = theta_max(r)
        if tmax <= 0.0:
            return 0.0

        def g(t):
            x = r * (math.cos(t) * axis + math.sin(t) * perp)
            return float(apply_dual_point(p, xi, x)) * math.sin(t) ** (N - 2)
        with warnings.catch_warnings():
            # roundoff warnings at the 1e-14 floor are expected for tiny shells
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, _ = integrate.quad(g, 0.0, tmax, epsabs=1e-14, epsrel=1e-11, limit=200)
        return ang_area * val * weight(r) * r ** (tp + N - 1.0)

    lo = max(0.0, dc - rho)
    hi = dc + rho
    brk = [x for x in (rho - dc,) if lo < x < hi]
    res = integrate_radial(shell, lo, hi, spec, brk)
    return res.value, res.error


def _identity(p, weight, xi, spec, rhs, label, limit=None, finite_difference=False):
    if xi.is_centered:
        lim = xi.support_radius if limit is None else min(limit, xi.support_radius)
        lhs, budget = _weighted_dual_integral(p, weight, xi, lim, spec, finite_difference)
    else:
        lhs, budget = _translated_integral(p, weight, xi, spec)
    return _residual(lhs, rhs, budget, label)


def verify_fundamental_identity(p: HardyParams, xi: TestFunction,
                                spec: QuadratureSpec = DEFAULT_SPEC,
                                finite_difference: bool = False) -> IdentityResidual:
    """int Phi_mu L*_mu(xi) d(mu) against c_mu xi(0)."""
    rhs = p.c_mu * xi.value_at_zero
    return _identity(p, lambda r: phi(p, r), xi, spec, rhs,
                     f"fundamental N={p.dim} mu={p.mu:g} xi={xi.kind}",
                     finite_difference=finite_difference)


def verify_green_identity(p: HardyParams, R: float, xi: TestFunction,
                          spec: QuadratureSpec = DEFAULT_SPEC,
                          finite_difference: bool = False) -> IdentityResidual:
    """int_{B_R} G_mu L*_mu(xi) d(mu) against c_mu xi(0)."""
    if xi.is_centered and xi.support_radius > R * (1 + 1e-12):
        raise DomainError("test function must be supported in the ball")
    rhs = p.c_mu * xi.value_at_zero
    return _identity(p, lambda r: green_ball_closed(p, R, r), xi, spec, rhs,
                     f"green N={p.dim} mu={p.mu:g} xi={xi.kind}", limit=R,
                     finite_difference=finite_difference)


def _source_integral(p: HardyParams, f: Callable, xi: TestFunction, spec, breaks=()):
    """int f xi d(mu) over the support of a centred xi."""
    area, expo = p.sphere_area, p.tau_plus + p.dim - 1.0
    pts = tuple(xi.profile.breakpoints) + tuple(breaks)

    def h(r):
        return area * float(f(r)) * float(xi.profile(r)) * r ** expo
    res = integrate_radial(h, 0.0, xi.support_radius, spec, pts)
    return res.value, res.error


def verify_weak_solution(p: HardyParams, sol: RadialSolution, f: Callable, k: float,
                         xis: Sequence[TestFunction], spec: QuadratureSpec = DEFAULT_SPEC
                         ) -> list:
    """int u L*(xi) d(mu) against int f xi d(mu) + c_mu k xi(0) for each xi."""
    out = []
    u = sol.profile
    fb = tuple(getattr(f, "breakpoints", ()))
    for xi in xis:
        if not xi.is_centered:
            raise DomainError("weak-solution checks use centred test functions")
        lim = min(xi.support_radius, sol.R)
        lhs, b1 = _weighted_dual_integral(p, lambda r: float(u(r)), xi, lim, spec)
        src, b2 = _source_integral(p, f, xi, spec, fb)
        rhs = src + p.c_mu * k * xi.value_at_zero
        out.append(_residual(lhs, rhs, b1 + b2, f"weak k={k:g} xi={xi.kind}"))
    return out


# --------------------------------------------------------------------------
# Kato inequalities


@dataclass(frozen=True)
class InequalityReport:
    """Slack of the |u| and u_+ inequalities: slack = rhs - lhs (>= -budget)."""

    lhs_abs: float
    rhs_abs: float
    lhs_plus: float
    rhs_plus: float
    budget: float

    @property
    def slack_abs(self) -> float:
        return self.rhs_abs - self.lhs_abs

    @property
    def slack_plus(self) -> float:
        return self.rhs_plus - self.lhs_plus

    @property
    def holds(self) -> bool:
        return self.slack_abs >= -self.budget and self.slack_plus >= -self.budget


def sign_changes(u: Callable, a: float, b: float, samples: int = 400) -> list:
    """Zeros of u in (a, b) located by sampling and Brent refinement."""
    grid = np.unique(np.concatenate([np.geomspace(max(a, 1e-6 * b), b, samples // 2),
                                     np.linspace(a, b, samples)[1:-1]]))
    grid = grid[(grid > a) & (grid < b)]
    vals = np.asarray(u(grid), float)
    roots = []
    for i in range(len(grid) - 1):
        if vals[i] == 0.0:
            roots.append(float(grid[i]))
        elif vals[i] * vals[i + 1] < 0.0:
            roots.append(optimize.brentq(lambda t: float(u(t)), grid[i], grid[i + 1],
                                         xtol=1e-15, rtol=1e-14))
    return roots


def check_kato(p: HardyParams, sol: RadialSolution, f: Callable, xi: TestFunction,
               spec: QuadratureSpec = DEFAULT_SPEC) -> InequalityReport:
    """Both Kato-type inequalities for a nonnegative centred test function."""
    u = sol.profile
    lim = min(xi.support_radius, sol.R)
    zeros = sign_changes(u, 0.0, lim)
    area, expo = p.sphere_area, p.tau_plus + p.dim - 1.0
    brk = tuple(sorted(set(zeros) | set(xi.profile.breakpoints)
                       | set(getattr(f, "breakpoints", ()))))

    def integral(g):
        res = integrate_radial(lambda r: area * g(r) * r ** expo, 0.0, lim, spec, brk)
        return res.value, res.error

    def dual(r):
        return float(apply_dual(p, xi, r))

    la, e1 = integral(lambda r: abs(float(u(r))) * dual(r))
    ra, e2 = integral(lambda r: float(np.sign(u(r))) * float(f(r)) * float(xi.profile(r)))
    lp, e3 = integral(lambda r: max(float(u(r)), 0.0) * dual(r))
    rp, e4 = integral(lambda r: float(u(r) > 0) * float(f(r)) * float(xi.profile(r)))
    scale = max(abs(la), abs(ra), abs(lp), abs(rp), 1.0)
    budget = e1 + e2 + e3 + e4 + 1e-10 * scale
    return InequalityReport(la, ra, lp, rp, budget)


# --------------------------------------------------------------------------
# classification


@dataclass(frozen=True)
class Classification:
    k_hat: float
    k_error: float
    decomposition_residual: float


def green_operator_values(p: HardyParams, f: Callable, R: float, radii,
                          spec: QuadratureSpec = DEFAULT_SPEC) -> np.ndarray:
    """G_mu[f] at the given radii by direct quadrature of the l = 0 kernel."""
    from .green import _radial_green_value
    try:
        weighted_l1_norm(p, f, R, spec)
    except DivergentIntegral as exc:
        raise NoSolution(f"source is not in L1(d mu): {exc}", exc.fit) from exc
    return np.array([_radial_green_value(p, R, f, float(r), spec) for r in np.atleast_1d(radii)])


def classify_solution(p: HardyParams, sol: RadialSolution, f: Callable,
                      spec: QuadratureSpec = DEFAULT_SPEC, grid=None) -> Classification:
    """Singularity coefficient and the defect of u - k_hat G_mu - G_mu[f]."""
    k_hat, k_err = extract_singularity_coefficient(sol, p, return_error=True)
    R = sol.R
    radii = np.geomspace(1e-2 * R, 0.95 * R, 15) if grid is None else np.asarray(grid, float)
    gf = green_operator_values(p, f, R, radii, spec)
    resid = np.abs(np.asarray(sol.profile(radii)) - k_hat * green_ball_closed(p, R, radii) - gf)
    return Classification(float(k_hat), float(k_err), float(np.max(resid)))


# --------------------------------------------------------------------------
# shrinking bumps


@dataclass(frozen=True)
class DiracOrderReport:
    """Weak-form defect F(eps) = int u L* xi_eps d(mu) - int f xi_eps d(mu).

    For a genuine solution with coefficient k it equals c_mu k xi(0); a
    derivative of the Dirac mass would make it grow like eps^-1.
    """

    eps: tuple
    values: tuple
    expected: float
    log_slope: float
    bounded: bool


def dirac_order_check(p: HardyParams, sol: RadialSolution, f: Callable,
                      levels: Iterable[int] = range(3, 11),
                      spec: QuadratureSpec = DEFAULT_SPEC) -> DiracOrderReport:
    """Evaluate the defect on xi((x)/eps) for eps = 2^-k."""
    eps = tuple(2.0 ** -k for k in levels)
    vals = []
    fb = tuple(getattr(f, "breakpoints", ()))
    u = sol.profile
    for e in eps:
        xi = quartic_bump(e)
        lhs, _ = _weighted_dual_integral(p, lambda r: float(u(r)), xi, e, spec)
        src, _ = _source_integral(p, f, xi, spec, fb)
        vals.append(lhs - src)
    vals = np.array(vals)
    logs = -np.log(np.array(eps))
    slope = float(np.polyfit(logs, np.abs(vals), 1)[0])
    if p.dim >= 3:
        bounded = bool(np.max(np.abs(vals)) <= 2.0 * max(abs(vals[0]), ABS_FLOOR))
    else:
        bounded = slope <= 1.1
    return DiracOrderReport(eps, tuple(float(v) for v in vals), p.c_mu * sol.k, slope, bounded)


# --------------------------------------------------------------------------
# sweeps


SWEEP_DIMS = (2, 3, 4)


def sweep_mus(N: int) -> tuple:
    mu0 = -((N - 2) ** 2) / 4.0
    return tuple(dict.fromkeys((mu0, mu0 + 0.5, 0.0, 1.0, 5.0)))


def identity_sweep(dims: Sequence[int] = SWEEP_DIMS, mus: Optional[Sequence[float]] = None,
                   library: Optional[Sequence[TestFunction]] = None, which: str = "both",
                   spec: QuadratureSpec = DEFAULT_SPEC) -> list:
    """Rows (N, mu, xi kind, identity name, IdentityResidual) over a parameter grid."""
    from .core import default_library
    lib = default_library(1.0) if library is None else list(library)
    rows = []
    for N in dims:
        for mu in (sweep_mus(N) if mus is None else mus):
            p = derive_params(N, mu)
            for xi in lib:
                if which in ("both", "fundamental"):
                    rows.append((N, mu, xi.kind, "fundamental",
                                 verify_fundamental_identity(p, xi, spec)))
                if which in ("both", "green"):
                    rows.append((N, mu, xi.kind, "green", verify_green_identity(p, 1.0, xi, spec)))
    return rows
