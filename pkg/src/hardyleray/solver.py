"""Radial solves of L_mu u = f and of the dual problem on balls and annuli.

Solutions are built by variation of parameters on the explicit power basis
r**sigma_+, r**sigma_- (or r**tau, -r**tau ln r at the double root), so the
singular behaviour at the origin is imposed analytically and only the kernel
integrals are computed numerically.  Those integrals run on a graded mesh of
Gauss-Legendre panels with left and right cumulative sums, which keeps
evaluation vectorised and free of cancellation near the origin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .core import HardyParams, RadialFunction, eta0, phi
from .errors import (DivergentIntegral, DomainError, NoLimit, NoSolution,
                     UnsupportedRegime)
from .quadrature import DEFAULT_SPEC, QuadratureSpec, integrate_radial, shell_scan

GAUSS_ORDER = 20
# panels reach below the radius where quadrature switches to a fitted tail
GEOMETRIC_LEVELS = 200
UNIFORM_PANELS = 32
RESIDUAL_TOL = 1e-6


class RadialKernel:
    """Homogeneous basis and 1D Green function of -u'' - (d-1)u'/r + m u/r^2.

    ``dim`` may be any real d >= 2 (the dual problem lives in dimension
    N + 2 tau_+).  The Green function is taken with respect to r**(d-1) dr,
    regular at the origin and vanishing at ``R``.
    """

    def __init__(self, dim: float, mu: float, R: float):
        self.dim = float(dim)
        self.mu = float(mu)
        self.R = float(R)
        mu0 = -((self.dim - 2.0) ** 2) / 4.0
        if self.mu < mu0 - 1e-13 * max(1.0, abs(mu0)):
            raise UnsupportedRegime(f"mu={mu} below threshold {mu0} in dimension {dim}")
        gap = math.sqrt(max(self.mu - mu0, 0.0))
        self.degenerate = gap <= 1e-12 * max(1.0, abs(mu0))
        half = (self.dim - 2.0) / 2.0
        if self.degenerate:
            gap = 0.0
        self.gap = gap
        self.sigma_plus = -half + gap
        self.sigma_minus = -half - gap
        # -p W[y_reg, y_bnd] with p = r^(d-1)
        self.wronskian = 1.0 if self.degenerate else 2.0 * gap

    def y_reg(self, r):
        return r ** self.sigma_plus

    def y_reg_d1(self, r):
        return self.sigma_plus * r ** (self.sigma_plus - 1.0)

    def y_bnd(self, r):
        sp, sm, R = self.sigma_plus, self.sigma_minus, self.R
        if self.degenerate:
            return -(r ** sp) * np.log(r / R)
        return r ** sm - R ** (sm - sp) * r ** sp

    def y_bnd_d1(self, r):
        sp, sm, R = self.sigma_plus, self.sigma_minus, self.R
        if self.degenerate:
            return -sp * r ** (sp - 1.0) * np.log(r / R) - r ** (sp - 1.0)
        return sm * r ** (sm - 1.0) - R ** (sm - sp) * sp * r ** (sp - 1.0)

    def green(self, r, s):
        r, s = np.asarray(r, float), np.asarray(s, float)
        lo, hi = np.minimum(r, s), np.maximum(r, s)
        return self.y_reg(lo) * self.y_bnd(hi) / self.wronskian


class _Panels:
    """Gauss-Legendre panels on [a, b], graded geometrically toward ``a``."""

    def __init__(self, a: float, b: float, extra: Sequence[float] = ()):
        if a == 0.0:
            geo = b * 2.0 ** -np.arange(GEOMETRIC_LEVELS + 1)
        else:
            n_geo = max(int(math.ceil(math.log2(b / a))), 1)
            geo = np.minimum(a * 2.0 ** np.arange(n_geo + 1), b)
        uni = np.linspace(a, b, UNIFORM_PANELS + 1)
        pts = np.concatenate([geo, uni, [x for x in extra if a < x < b], [b]])
        start = geo.min() if a == 0.0 else a
        pts = np.unique(pts[(pts >= start) & (pts <= b)])
        self.a, self.b = a, b
        self.edges = pts
        x, w = np.polynomial.legendre.leggauss(GAUSS_ORDER)
        self._x, self._w = x, w
        lo, hi = pts[:-1, None], pts[1:, None]
        self.nodes = lo + (hi - lo) * (x + 1.0) / 2.0
        self.weights = (hi - lo) / 2.0 * w

    @property
    def start(self) -> float:
        return float(self.edges[0])

    def locate(self, r):
        i = np.searchsorted(self.edges, r, side="right") - 1
        return np.clip(i, 0, len(self.edges) - 2)

    def segment(self, h: Callable, lo, hi):
        """int_lo^hi h for arrays lo, hi lying inside a single panel each."""
        lo, hi = np.asarray(lo, float), np.asarray(hi, float)
        t = lo[..., None] + (hi - lo)[..., None] * (self._x + 1.0) / 2.0
        return ((hi - lo) / 2.0) * np.sum(h(t) * self._w, axis=-1)


class _Cumulative:
    """Running integrals of ``h`` from the left end and to the right end."""

    def __init__(self, panels: _Panels, h: Callable, head: float = 0.0):
        self.panels = panels
        self.h = h
        with np.errstate(all="ignore"):
            per = np.sum(h(panels.nodes) * panels.weights, axis=1)
        self.left_cum = head + np.concatenate([[0.0], np.cumsum(per)])
        self.right_cum = np.concatenate([np.cumsum(per[::-1])[::-1], [0.0]])

    def left(self, r):
        i = self.panels.locate(r)
        return self.left_cum[i] + self.panels.segment(self.h, self.panels.edges[i], r)

    def right(self, r):
        i = self.panels.locate(r)
        return self.right_cum[i + 1] + self.panels.segment(self.h, r, self.panels.edges[i + 1])


def _vectorised(f: Callable) -> Callable:
    def g(r):
        return np.asarray(f(r), dtype=float) * np.ones_like(r)
    return g


@dataclass(frozen=True)
class RadialSolution:
    """A solved radial profile with its singularity coefficient and metadata."""

    profile: RadialFunction
    k: float
    boundary_value: float
    mode: int
    residual_norm: float
    params: Optional[HardyParams] = None
    R: float = 1.0
    inner_radius: float = 0.0
    kernel: Optional[RadialKernel] = field(default=None, repr=False)

    def __call__(self, r):
        return self.profile(r)


def _ode_residual(kernel: RadialKernel, u: RadialFunction, f: Callable, grid) -> float:
    """Max relative residual of the ODE with u'' from differencing analytic u'."""
    r = np.asarray(grid, float)
    h = 1e-4 * r
    d2 = (np.asarray(u.deriv1(r + h)) - np.asarray(u.deriv1(r - h))) / (2.0 * h)
    d1 = np.asarray(u.deriv1(r))
    val = np.asarray(u(r))
    fv = np.asarray(f(r), float) * np.ones_like(r)
    terms = [-d2, -(kernel.dim - 1.0) * d1 / r, kernel.mu * val / r ** 2, -fv]
    res = np.abs(sum(terms))
    scale = sum(np.abs(t) for t in terms) + 1e-300
    return float(np.max(res / scale))


def _check_integrable(kernel: RadialKernel, f: Callable, R: float, spec: QuadratureSpec):
    def h(r):
        return abs(float(f(r))) * kernel.y_reg(r) * r ** (kernel.dim - 1.0)
    fit = shell_scan(h, R, spec, "origin")
    if fit.model != "bounded":
        raise NoSolution(
            f"source is not integrable against the regular branch ({fit.model} growth)", fit)


def _ball_profile(kernel: RadialKernel, f: Callable, k: float, breaks,
                  spec: QuadratureSpec):
    R = kernel.R
    fv = _vectorised(f)
    w = lambda r: r ** (kernel.dim - 1.0)  # noqa: E731
    panels = _Panels(0.0, R, breaks)
    start = panels.start
    try:
        head = integrate_radial(lambda r: (kernel.y_reg(r) * w(r)) * float(fv(np.asarray(r))),
                                0.0, start, spec).value
    except DivergentIntegral as exc:
        raise NoSolution(str(exc)) from exc
    # (basis * weight) first: it stays moderate where f and the basis overflow
    reg = _Cumulative(panels, lambda r: (kernel.y_reg(r) * w(r)) * fv(r), head)
    bnd = _Cumulative(panels, lambda r: (kernel.y_bnd(r) * w(r)) * fv(r))
    C = kernel.wronskian

    def coeffs(r):
        r = np.asarray(r, float)
        deep = r < start
        if not np.any(deep):
            return reg.left(r) / C, bnd.right(r) / C
        a_out = np.empty_like(r)
        b_out = np.empty_like(r)
        flat = r.reshape(-1)
        for idx, rv in np.ndenumerate(flat):
            if rv < start:
                a_val = integrate_radial(
                    lambda s: (kernel.y_reg(s) * w(s)) * float(fv(np.asarray(s))),
                    0.0, rv, spec).value
                b_val = bnd.right_cum[0] + integrate_radial(
                    lambda s: (kernel.y_bnd(s) * w(s)) * float(fv(np.asarray(s))),
                    rv, start, spec).value
            else:
                a_val = float(reg.left(np.array(rv)))
                b_val = float(bnd.right(np.array(rv)))
            a_out.reshape(-1)[idx] = a_val / C
            b_out.reshape(-1)[idx] = b_val / C
        return a_out, b_out

    def u(r):
        r = np.asarray(r, float)
        A, B = coeffs(r)
        return kernel.y_bnd(r) * (A + k) + kernel.y_reg(r) * B

    def du(r):
        r = np.asarray(r, float)
        A, B = coeffs(r)
        return kernel.y_bnd_d1(r) * (A + k) + kernel.y_reg_d1(r) * B

    return u, du


def _make_profile(kernel: RadialKernel, u, du, f: Callable, R: float, breaks, name):
    fv = _vectorised(f)

    def d2u(r):
        r = np.asarray(r, float)
        return -(kernel.dim - 1.0) * du(r) / r + kernel.mu * u(r) / r ** 2 - fv(r)

    return RadialFunction(u, du, d2u, R, tuple(breaks), name)


def _probe_grid(a: float, R: float):
    lo = max(a, 1e-2 * R) if a == 0.0 else a + 1e-3 * (R - a)
    return np.geomspace(lo * 1.05, 0.95 * R, 25)


def solve_radial_bvp(p: HardyParams, l: int, f: Callable, R: float = 1.0, k: float = 0.0,
                     spec: QuadratureSpec = DEFAULT_SPEC) -> RadialSolution:
    """Solve the mode-l radial problem with u(R) = 0 and u / Phi -> k at 0.

    The mode operator carries mu + l(l + N - 2) in place of mu.  The result
    is u = k * G + (variation-of-parameters particular solution).
    """
    if int(l) != l or l < 0:
        raise DomainError("mode index must be a non-negative integer")
    mu_eff = p.mu + l * (l + p.dim - 2)
    p.tau_plus  # raises in the sub-Hardy regime
    kernel = RadialKernel(p.dim, mu_eff, R)
    _check_integrable(kernel, f, R, spec)
    breaks = getattr(f, "breakpoints", ())
    u, du = _ball_profile(kernel, f, k, breaks, spec)
    prof = _make_profile(kernel, u, du, f, R, breaks, f"u[l={l},k={k}]")
    res = _ode_residual(kernel, prof, f, _probe_grid(0.0, R))
    return RadialSolution(prof, float(k), float(u(np.array(R))), int(l), res, p, R, 0.0,
                          kernel)


def solve_dual_radial(p: HardyParams, g: Callable, R: float = 1.0,
                      spec: QuadratureSpec = DEFAULT_SPEC) -> RadialSolution:
    """Solve L*_mu xi = g on B_R, xi(R) = 0, bounded at the origin."""
    kernel = RadialKernel(p.effective_dim, 0.0, R)
    breaks = getattr(g, "breakpoints", ())
    u, du = _ball_profile(kernel, g, 0.0, breaks, spec)
    prof = _make_profile(kernel, u, du, g, R, breaks, "xi")
    res = _ode_residual(kernel, prof, g, _probe_grid(0.0, R))
    return RadialSolution(prof, 0.0, float(u(np.array(R))), 0, res, p, R, 0.0, kernel)


def solve_annulus(p: HardyParams, f: Callable, a: float, R: float = 1.0,
                  inner_bc: float = 0.0, l: int = 0) -> RadialSolution:
    """Two-point problem on [a, R] with u(a) = inner_bc and u(R) = 0."""
    if not 0.0 < a < R:
        raise DomainError("annulus needs 0 < a < R")
    kernel = RadialKernel(p.dim, p.mu + l * (l + p.dim - 2), R)
    fv = _vectorised(f)
    w = lambda r: r ** (kernel.dim - 1.0)  # noqa: E731
    ya = kernel.y_bnd(a)
    yra = kernel.y_reg(a)

    def y_left(r):
        return kernel.y_reg(r) - yra * kernel.y_bnd(r) / ya

    def y_left_d1(r):
        return kernel.y_reg_d1(r) - yra * kernel.y_bnd_d1(r) / ya

    breaks = getattr(f, "breakpoints", ())
    panels = _Panels(a, R, breaks)
    left = _Cumulative(panels, lambda r: fv(r) * y_left(r) * w(r))
    right = _Cumulative(panels, lambda r: fv(r) * kernel.y_bnd(r) * w(r))
    C = kernel.wronskian
    lift = inner_bc / ya

    def u(r):
        r = np.clip(np.asarray(r, float), a, R)
        return (kernel.y_bnd(r) * left.left(r) + y_left(r) * right.right(r)) / C \
            + lift * kernel.y_bnd(r)

    def du(r):
        r = np.clip(np.asarray(r, float), a, R)
        return (kernel.y_bnd_d1(r) * left.left(r) + y_left_d1(r) * right.right(r)) / C \
            + lift * kernel.y_bnd_d1(r)

    prof = _make_profile(kernel, u, du, f, R, breaks, f"annulus[{a:g},{R:g}]")
    res = _ode_residual(kernel, prof, f, _probe_grid(a, R))
    return RadialSolution(prof, 0.0, float(u(np.array(R))), int(l), res, p, R, a, kernel)


def mollifier_mass(N: int) -> float:
    """Lebesgue mass of x -> eta0(|x|) in R^N."""
    from .core import sphere_area
    val = integrate_radial(lambda t: float(eta0(t)) * t ** (N - 1), 0.0, 2.0,
                           breakpoints=(1.0,)).value
    return sphere_area(N) * val


def mollifier_source(p: HardyParams, n: int) -> RadialFunction:
    """Unit-mass mollifier delta_n divided by Gamma_mu.

    With this source the classical equation L_mu w = delta_n / Gamma_mu is the
    d(mu)-weak statement  int w L* xi d(mu) = int delta_n xi dx.
    """
    N, tp = p.dim, p.tau_plus
    mass = mollifier_mass(N)

    def f(r):
        r = np.asarray(r, float)
        return n ** N * eta0(n * r) / mass * r ** (-tp)

    # the transition shell needs its own panels once it is thinner than the uniform ones
    shell = tuple(float(t) for t in np.linspace(1.0 / n, 2.0 / n, 17))
    return RadialFunction(f, None, None, 2.0 / n, shell, f"mollifier:{n}")


def approximate_green_mollifier(p: HardyParams, R: float = 1.0, n: int = 8,
                                spec: QuadratureSpec = DEFAULT_SPEC) -> RadialSolution:
    if n < 1 or 2.0 / n >= R:
        raise DomainError("mollifier support 2/n must lie inside the ball")
    return solve_radial_bvp(p, 0, mollifier_source(p, n), R, 0.0, spec)


# --------------------------------------------------------------------------
# singularity coefficient


def _aitken(x: np.ndarray, noise: float) -> np.ndarray:
    d1 = x[1:-1] - x[:-2]
    d2 = x[2:] - x[1:-1]
    den = d2 - d1
    out = x[2:].copy()
    ok = (np.abs(den) > noise) & (np.abs(d2) > noise)
    out[ok] = x[2:][ok] - d2[ok] ** 2 / den[ok]
    return out


def _oscillates(x: np.ndarray, noise: float) -> bool:
    d = np.diff(x)
    sig = d[np.abs(d) > noise]
    changes = np.count_nonzero(np.sign(sig[1:]) != np.sign(sig[:-1]))
    return changes >= 2


def singularity_sequence(profile: Callable, p: HardyParams, r0: float = 0.1,
                         q: float = 0.5, levels: int = 20):
    """Raw sequence whose limit is the Phi_mu coefficient of ``profile``.

    Above the threshold this is u/Phi on the geometric grid.  At the double
    root the Gamma-component decays only like 1/ln r in u/Phi, so the
    sequence is the log-slope of u/r**tau between neighbouring grid points,
    which removes that component exactly.
    """
    r = r0 * q ** np.arange(levels + 1)
    u = np.array([float(profile(x)) for x in r])
    if p.is_critical:
        t = u / r ** p.tau_minus
        lr = np.log(r)
        return -(t[:-1] - t[1:]) / (lr[:-1] - lr[1:])
    return (u / phi(p, r))[:-1]


def extract_singularity_coefficient(sol, p: HardyParams, r0: float = 0.1, q: float = 0.5,
                                    levels: int = 20, passes: int = 3,
                                    return_error: bool = False):
    """Extrapolated lim_{r->0} u(r)/Phi_mu(r) via iterated Aitken sweeps."""
    profile = sol.profile if isinstance(sol, RadialSolution) else sol
    seq = singularity_sequence(profile, p, r0, q, levels)
    if not np.all(np.isfinite(seq)):
        raise NoLimit("profile is not finite on the extraction grid")
    scale = max(1.0, float(np.max(np.abs(seq))))
    noise = 1e-12 * scale
    if _oscillates(seq, noise):
        raise NoLimit("ratio to Phi oscillates toward the origin")
    x = seq
    for _ in range(passes):
        if len(x) < 3:
            break
        x = _aitken(x, noise)
    est = float(x[-1])
    err = float(abs(x[-1] - x[-2])) if len(x) > 1 else math.inf
    if err > 1e-3 * max(1.0, abs(est)):
        raise NoLimit(f"extrapolation did not settle (spread {err:.3g})")
    return (est, err) if return_error else est
