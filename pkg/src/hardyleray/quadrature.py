"""Radial integration against d(mu) = Gamma_mu dx with endpoint singularities.

Near r = 0 the substitution r = exp(-s) turns integrable power and
power-log singularities into exponentially decaying tails, which the adaptive
Gauss-Kronrod driver of :func:`scipy.integrate.quad` handles uniformly.
Divergence is never guessed: it is declared only after a dyadic shell scan
shows the truncated integral growing like a logarithm or a power.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate

from .core import HardyParams, RadialFunction
from .errors import DivergentIntegral, Inconclusive, ToleranceNotMet

# Smallest radius ever handed to an integrand.
R_FLOOR = 1e-300
UNDERFLOW_ZONE = 1e-100
# Below this radius integrals are closed with a fitted power-law tail.
TAIL_RADIUS = 1e-60


@dataclass(frozen=True)
class QuadratureSpec:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-14
    max_subdivisions: int = 200
    log_substitution_cut: Optional[float] = None
    # shell-scan settings used by divergence detection
    scan_levels: int = 48
    scan_fit_levels: int = 16
    log_slope_band: float = 2e-3
    converge_slope: float = 5e-3

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be positive")


DEFAULT_SPEC = QuadratureSpec()


@dataclass(frozen=True)
class QuadResult:
    value: float
    error: float

    def __float__(self):
        return self.value


@dataclass(frozen=True)
class GrowthFit:
    """How a truncated integral behaves as the cut radius shrinks.

    ``model`` is ``"bounded"``, ``"log"`` or ``"power"``.  For ``log`` the
    coefficient is the growth per unit of ln(1/r); for ``power`` it is the
    exponent p in r**(-p); for ``bounded`` it is the decay exponent of the
    shell contributions.
    """

    model: str
    coefficient: float
    slope_per_level: float = 0.0
    shells: tuple = ()


def _quad(h, a, b, spec, *, points=None):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", integrate.IntegrationWarning)
        val, err = integrate.quad(h, a, b, epsabs=spec.abs_tol, epsrel=spec.rel_tol,
                                  limit=spec.max_subdivisions, points=points)
    budget = max(spec.abs_tol, spec.rel_tol * abs(val))
    if caught and err > 100.0 * budget:
        raise ToleranceNotMet(f"quadrature on [{a}, {b}] stalled: error {err:.3g}",
                              estimate=val, error=err)
    return val, err


def _log_sub(h: Callable) -> Callable:
    def g(s):
        r = math.exp(-s)
        if r < R_FLOOR:
            return 0.0
        with np.errstate(all="ignore"):
            val = float(h(r)) * r
        if not math.isfinite(val) and r < UNDERFLOW_ZONE:
            # integrable singularities contribute nothing measurable this deep
            return 0.0
        return val
    return g


def _tail_candidates(u, deg):
    """Roots x = e^(g d) making u_i x^i a degree-``deg`` polynomial in i."""
    if deg == 1:
        disc = max(u[1] ** 2 - u[0] * u[2], 0.0)
        return [(u[1] + sgn * math.sqrt(disc)) / u[2] for sgn in (1.0, -1.0)]
    # vanishing third difference: -u0 + 3 u1 x - 3 u2 x^2 + u3 x^3 = 0
    roots = np.roots([u[3], -3.0 * u[2], 3.0 * u[1], -u[0]])
    return [float(z.real) for z in roots if abs(z.imag) <= 1e-8 * abs(z)]


def _power_tail(h: Callable, r0: float):
    """int_0^r0 h for h(r) ~ r**beta P(ln r) with P of degree <= 2, fitted below r0.

    In t = -ln r the transformed integrand is e^{-g t} P(t), so for samples
    u_i spaced by d the sequence u_i x^i with x = e^{g d} is polynomial in i.
    The linear model is tried first; the quadratic one is used when the
    extra sample rejects it.  One sample beyond each fit measures the error.
    """
    d = 2.0
    t0 = -math.log(r0)
    with np.errstate(all="ignore"):
        u = [float(h(math.exp(-(t0 + i * d)))) * math.exp(-(t0 + i * d))
             for i in range(5)]
    if all(abs(v) < 1e-250 for v in u):
        # only underflow-scale mass remains below r0
        return 0.0, 0.0
    if not all(math.isfinite(v) for v in u) or len({math.copysign(1.0, v) for v in u}) > 1 \
            or 0.0 in u:
        raise ToleranceNotMet(f"integrand not resolvable below r={r0:g}")
    best = None
    for deg in (1, 2):
        for x in _tail_candidates(u, deg):
            if not x > 0.0:
                continue
            v = np.array([u[i] * x ** i for i in range(5)])
            coef = np.polyfit(np.arange(deg + 1), v[:deg + 1], deg)
            check = deg + 2
            mismatch = abs(v[check] - np.polyval(coef, check)) / x ** check
            g = math.log(x) / d
            if best is None or mismatch < best[0]:
                best = (mismatch, g, coef, deg)
        if best is not None and best[0] <= 1e-12 * abs(u[0]):
            break
    if best is None:
        raise ToleranceNotMet(f"integrand not resolvable below r={r0:g}")
    mismatch, g, coef, deg = best
    if g <= 0.0:
        raise DivergentIntegral(f"integrand decays like r**{g - 1.0:.3g}: not integrable at 0")
    # int_0^inf e^{-g s} sum c_k (s/d)^k ds = sum c_k k! / (g^(k+1) d^k)
    tail = sum(c * math.factorial(k) / (g ** (k + 1) * d ** k)
               for k, c in enumerate(coef[::-1]))
    return tail, mismatch / g + 1e-12 * abs(tail)


def _deep_tail(h: Callable, r0: float, spec: QuadratureSpec):
    """Tail below r0, descending while a mixture of power laws defeats the model."""
    val, err = 0.0, 0.0
    while True:
        try:
            tail, tail_err = _power_tail(h, r0)
            return val + tail, err + tail_err
        except ToleranceNotMet:
            # the slowest-decaying component takes over further down
            nxt = r0 * 1e-30
            if nxt < 1e-280:
                raise
            v, e = _quad(_log_sub(h), -math.log(r0), -math.log(nxt), spec)
            val, err, r0 = val + v, err + e, nxt


def _finite_depth(h: Callable, deep: float, cut: float) -> float:
    """Largest radius <= ``deep`` whose tail samples are finite, raised toward ``cut``."""
    while deep < cut:
        with np.errstate(all="ignore"):
            ok = all(math.isfinite(float(h(deep * math.exp(-2.0 * i)))) for i in range(4))
        if ok:
            return deep
        deep = min(deep * 1e10, cut)
    return deep


def integrate_radial(h: Callable, a: float, b: float, spec: QuadratureSpec = DEFAULT_SPEC,
                     breakpoints: Sequence[float] = ()) -> QuadResult:
    """Plain integral of a scalar radial integrand ``h`` over [a, b].

    When a == 0 the piece (0, cut) is integrated in the variable s = -ln r.
    """
    if b <= a:
        return QuadResult(0.0, 0.0)
    cuts = sorted({float(x) for x in breakpoints if a < x < b})
    if a == 0.0:
        cut = spec.log_substitution_cut
        if cut is None:
            cut = 0.25 * (cuts[0] if cuts else b)
        cut = min(cut, cuts[0] if cuts else b)
        deep = _finite_depth(h, min(cut, TAIL_RADIUS), cut)
        total, err = 0.0, 0.0
        if deep < cut:
            total, err = _quad(_log_sub(h), -math.log(cut), -math.log(deep), spec)
        tail, tail_err = _deep_tail(h, deep, spec)
        total += tail
        err += tail_err
        edges = [cut] + [c for c in cuts if c > cut] + [b]
    else:
        total, err = 0.0, 0.0
        edges = [a] + cuts + [b]
    scalar = lambda r: float(h(r))  # noqa: E731
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi > lo:
            v, e = _quad(scalar, lo, hi, spec)
            total += v
            err += e
    return QuadResult(total, err)


def _weighted_integrand(p: HardyParams, g: Callable, extra: Optional[Callable] = None):
    expo = p.tau_plus + p.dim - 1.0
    area = p.sphere_area

    def h(r):
        val = area * float(g(r)) * r ** expo
        if extra is not None:
            val *= extra(r)
        return val
    return h


def _breaks(g) -> tuple:
    return tuple(getattr(g, "breakpoints", ()))


def integrate_weighted(p: HardyParams, g: Callable, a: float, b: float,
                       spec: QuadratureSpec = DEFAULT_SPEC, *, full: bool = False):
    """|S^{N-1}| * int_a^b g(r) r**tau_+ r**(N-1) dr.

    Returns a float, or a :class:`QuadResult` with the error estimate when
    ``full`` is true.
    """
    res = integrate_radial(_weighted_integrand(p, g), a, b, spec, _breaks(g))
    if not math.isfinite(res.value):
        raise DivergentIntegral(f"weighted integral over [{a}, {b}] is not finite")
    return res if full else res.value


# --------------------------------------------------------------------------
# divergence detection


def shell_scan(h: Callable, R: float, spec: QuadratureSpec = DEFAULT_SPEC,
               toward: str = "origin") -> GrowthFit:
    """Classify int h over shrinking neighbourhoods of an endpoint of (0, R).

    Dyadic shells [R 2^-(j+1), R 2^-j] (or their mirror images at r = R) are
    integrated one by one; the log of their contributions is fitted linearly
    in j over the deepest levels.  A flat slope means logarithmic divergence,
    a rising slope power divergence and a falling slope convergence.
    """
    shells = []
    for j in range(spec.scan_levels):
        lo, hi = R * 2.0 ** -(j + 1), R * 2.0 ** -j
        if toward == "origin":
            val, _ = _quad(_log_sub(h), -math.log(hi), -math.log(lo), spec)
        else:
            mirrored = lambda t: float(h(R - t))  # noqa: E731
            val, _ = _quad(_log_sub(mirrored), -math.log(hi), -math.log(lo), spec)
        shells.append(abs(val))
        if not math.isfinite(val) or abs(val) > 1e250:
            return GrowthFit("power", math.inf, math.inf, tuple(shells))
    shells = np.array(shells)
    tail = shells[-spec.scan_fit_levels:]
    scale = max(shells.max(), 1e-300)
    if np.all(tail <= 1e-300 + 1e-15 * scale):
        return GrowthFit("bounded", math.inf, -math.inf, tuple(shells))
    nz = tail > 0
    if nz.sum() < 3:
        return GrowthFit("bounded", math.inf, -math.inf, tuple(shells))
    j = np.arange(len(tail))[nz]
    slope, _ = np.polyfit(j, np.log(tail[nz]), 1)
    if abs(slope) <= spec.log_slope_band:
        return GrowthFit("log", float(np.mean(tail) / math.log(2.0)), float(slope),
                         tuple(shells))
    if slope > spec.log_slope_band:
        return GrowthFit("power", float(slope / math.log(2.0)), float(slope), tuple(shells))
    if slope < -spec.converge_slope:
        return GrowthFit("bounded", float(-slope / math.log(2.0)), float(slope),
                         tuple(shells))
    raise Inconclusive(f"shell contributions decay too slowly to decide (slope {slope:.3g})")


def _l1_with_scan(h_abs: Callable, h_signed: Callable, R: float, spec, sides,
                  breakpoints=()) -> float:
    for side in sides:
        fit = shell_scan(h_abs, R, spec, side)
        if fit.model != "bounded":
            raise DivergentIntegral(
                f"integral diverges at the {side} ({fit.model} growth)", fit)
    if "boundary" in sides:
        half = 0.5 * R
        left = integrate_radial(h_signed, 0.0, half, spec, breakpoints).value
        right = integrate_radial(lambda t: h_signed(R - t), 0.0, half, spec,
                                 tuple(R - b for b in breakpoints)).value
        return left + right
    return integrate_radial(h_signed, 0.0, R, spec, breakpoints).value


def weighted_l1_norm(p: HardyParams, f: Callable, R: float,
                     spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """int_{B_R} |f| d(mu); raises :class:`DivergentIntegral` with the growth fit."""
    h = _weighted_integrand(p, lambda r: abs(float(f(r))))
    return _l1_with_scan(h, h, R, spec, ("origin",), _breaks(f))


def rho_weighted_l1_norm(p: HardyParams, f: Callable, R: float,
                         spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """int_{B_R} |f| (R - |x|) d(mu), checking both the origin and the sphere."""
    h = _weighted_integrand(p, lambda r: abs(float(f(r))), lambda r: R - r)
    return _l1_with_scan(h, h, R, spec, ("origin", "boundary"), _breaks(f))


def truncated_weighted_integral(p: HardyParams, f: Callable, R: float,
                                spec: QuadratureSpec = DEFAULT_SPEC) -> GrowthFit:
    """Growth of int_{B_R minus B_r} f d(mu) as r -> 0 (signed f)."""
    return shell_scan(_weighted_integrand(p, f), R, spec, "origin")


def as_radial(f) -> RadialFunction:
    return f if isinstance(f, RadialFunction) else RadialFunction(f)
