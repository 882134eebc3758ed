"""Green kernel of L_mu on a ball by zonal-harmonic mode series.

Each angular mode l reduces to the radial operator with mu + l(l + N - 2),
whose Dirichlet Green function is explicit in the power basis.  The series is
accelerated by subtracting the free Laplace modes and adding back the closed
free-space kernel, so only the (much smaller) mu-dependent correction is
summed.  Two kernels are exposed:

* the Lebesgue kernel ``G(x, y)``, symmetric, with u(x) = int G(x, y) f(y) dy;
* the d(mu)-kernel ``K(x, y) = G(x, y) / Gamma_mu(|y|)``, for which
  u(x) = int K(x, y) f(y) d(mu)(y) and K(x, y) -> G_mu(|x|) / c_mu as y -> 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .core import HardyParams
from .errors import (DivergentIntegral, DomainError, InvalidDimension, NoSolution,
                     SingularDiagonal, TruncationError)
from .quadrature import DEFAULT_SPEC, QuadratureSpec, integrate_radial, weighted_l1_norm
from .solver import RadialKernel

DEFAULT_MAX_MODE = 64
BOUND_MAX_MODE = 512
DIAGONAL_FLOOR = 1e-2


def _mode_kernel(p: HardyParams, l: int, R: float) -> RadialKernel:
    p.tau_plus  # raises in the sub-Hardy regime
    return RadialKernel(p.dim, p.mu + l * (l + p.dim - 2), R)


def mode_green_lebesgue(p: HardyParams, l: int, R: float, r, s):
    """Symmetric mode-l Green function with respect to s**(N-1) ds."""
    r, s = np.asarray(r, float), np.asarray(s, float)
    if np.any(r <= 0) or np.any(s <= 0) or np.any(r > R) or np.any(s > R):
        raise DomainError("radii must lie in (0, R]")
    return _mode_kernel(p, l, R).green(r, s)


def mode_green(p: HardyParams, l: int, R: float, r, s):
    """Mode-l Green function with respect to the 1D weight Gamma_mu(s) s**(N-1) ds.

    ``mode_green(r, s) * Gamma_mu(s)`` is symmetric in (r, s).
    """
    s_arr = np.asarray(s, float)
    val = mode_green_lebesgue(p, l, R, r, s) / s_arr ** p.tau_plus
    return float(val) if np.ndim(val) == 0 else val


# --------------------------------------------------------------------------
# series machinery (vectorised over pairs)


def _free_kernel(N: int, dist):
    if N == 3:
        return 1.0 / (4.0 * math.pi * dist)
    return -np.log(dist) / (2.0 * math.pi)


def _mode_orders(p: HardyParams, l: int):
    """(sigma_+, sigma_-, C) for mode l and the free Laplace counterpart."""
    N = p.dim
    half = (N - 2) / 2.0
    nu = math.sqrt((l + half) ** 2 + p.mu)
    sp, sm = -half + nu, -half - nu
    return sp, sm, 2.0 * nu


def _expansion_coeffs(p: HardyParams, rho):
    """Coefficients a, a^2/2 - b of the 1/lambda expansion of (lambda/nu) rho^(nu-lambda)."""
    a = 0.5 * p.mu * np.log(rho)
    return a, 0.5 * a * a - 0.5 * p.mu


def _mode_remainder(p: HardyParams, l: int, rho):
    """(lambda/nu) rho^(nu - lambda) - 1 minus its first two 1/lambda terms."""
    half = (p.dim - 2) / 2.0
    lam = l + half
    nu = math.sqrt(lam * lam + p.mu)
    lr = np.log(rho)
    expo = (p.mu / (nu + lam)) * lr - 0.5 * math.log1p(p.mu / (lam * lam))
    a, a2 = _expansion_coeffs(p, rho)
    return np.expm1(expo) - a / lam - a2 / (lam * lam)


def _free_scale(p: HardyParams, l: int, lo, hi):
    """Z_l-free coefficient multiplying P_l (N = 3) or cos(l theta) (N = 2)."""
    if p.dim == 3:
        return np.exp((l + 0.5) * (np.log(lo) - np.log(hi))) / (4 * math.pi * np.sqrt(lo * hi))
    return np.exp(l * (np.log(lo) - np.log(hi))) / (2 * math.pi * l)


def _regular_term(p: HardyParams, l: int, R: float, lo, hi):
    sp, sm, C = _mode_orders(p, l)
    return np.exp(sp * (np.log(lo) + np.log(hi)) + (sm - sp) * math.log(R)) / C


def _expansion_sums(N: int, rho: float, c: float):
    """sum_{l>=1} T_l / lambda and sum_{l>=1} T_l / lambda^2 for the free modes.

    T_l = P_l(c) rho^(l+1/2) (N = 3) or cos(l theta) rho^l / l (N = 2); both
    follow from integrating the Legendre / Fourier generating function.
    """
    opts = dict(epsabs=1e-15, epsrel=1e-12, limit=400)
    if N == 3:
        su = math.sqrt(rho)

        def gen(u):
            return 2.0 / math.sqrt(max(1.0 - 2.0 * c * u * u + u ** 4, 1e-300))
        s1 = integrate.quad(gen, 0.0, su, **opts)[0]
        s2 = integrate.quad(lambda u: gen(u) * 2.0 * math.log(su / u) if u > 0 else 0.0,
                            0.0, su, **opts)[0]
        return s1 - 2.0 * su, s2 - 4.0 * su

    def gen2(t):
        return (c - t) / (1.0 - 2.0 * c * t + t * t)
    s2 = integrate.quad(lambda t: gen2(t) * math.log(rho / t) if t > 0 else 0.0,
                        0.0, rho, **opts)[0]
    s3 = integrate.quad(lambda t: gen2(t) * 0.5 * math.log(rho / t) ** 2 if t > 0 else 0.0,
                        0.0, rho, **opts)[0]
    return s2, s3


def _asymptotic_part(p: HardyParams, lo, hi, cos):
    """Closed sum of the subtracted 1/lambda and 1/lambda^2 mode terms."""
    if p.mu == 0.0:
        return np.zeros_like(lo)
    rho = lo / hi
    a, a2 = _expansion_coeffs(p, rho)
    out = np.empty_like(lo)
    for i in range(lo.size):
        s1, s2 = _expansion_sums(p.dim, float(rho.flat[i]), float(cos.flat[i]))
        out.flat[i] = a.flat[i] * s1 + a2.flat[i] * s2
    if p.dim == 3:
        return out / (4 * math.pi * np.sqrt(lo * hi))
    return out / (2 * math.pi)


def _correction_term(p: HardyParams, l: int, R: float, lo, hi):
    """Mode-l Green function minus its free and expansion parts (per unit zonal factor)."""
    scale = _free_scale(p, l, lo, hi) * _mode_remainder(p, l, lo / hi)
    # the zonal normalisation is folded into the free scale
    Z = (2 * l + 1) / (4 * math.pi) if p.dim == 3 else 1.0 / math.pi
    return scale / Z - _regular_term(p, l, R, lo, hi)


def _zonal(N: int, L: int, c):
    """Z_l(cos theta) for l = 0..L; rows indexed by l."""
    c = np.asarray(c, float)
    out = np.empty((L + 1,) + c.shape)
    if N == 3:
        p_prev, p_cur = np.ones_like(c), c.copy()
        out[0] = p_prev / (4 * math.pi)
        if L >= 1:
            out[1] = 3 * p_cur / (4 * math.pi)
        for l in range(1, L):
            p_prev, p_cur = p_cur, ((2 * l + 1) * c * p_cur - l * p_prev) / (l + 1)
            out[l + 1] = (2 * (l + 1) + 1) * p_cur / (4 * math.pi)
    else:
        theta = np.arccos(np.clip(c, -1.0, 1.0))
        out[0] = 1.0 / (2 * math.pi)
        for l in range(1, L + 1):
            out[l] = np.cos(l * theta) / math.pi
    return out


def _zonal_sup(N: int, l: int) -> float:
    return (2 * l + 1) / (4 * math.pi) if N == 3 else 1.0 / math.pi


def _tail_estimate(mags: np.ndarray, rho, L: int, order: float):
    """Bound sum_{l > L} of terms whose magnitudes are ``mags`` (rows by l, up to 4 L).

    Rows L+1..4L are summed as they stand.  Beyond 4L the envelope
    A rho^l l^-p is closed in form, with A a window maximum over [3L, 4L]
    rescaled by rho^(l' - l), and p the smaller of the slope seen on
    [2L, 4L] and the asymptotic ``order`` of the subtracted series.
    """
    rho_c = np.clip(rho, 1e-300, 1.0)
    top = 4 * L
    explicit = mags[L + 1:top + 1].sum(axis=0)

    def anchor(l, width):
        ls = np.arange(max(l - width, 1), l + 1)
        with np.errstate(all="ignore"):
            scaled = mags[ls] * rho_c[None, ...] ** (l - ls)[:, None]
        return np.max(np.where(np.isfinite(scaled), scaled, 0.0), axis=0)

    a_top = anchor(top, L)
    a_mid = anchor(2 * L, L)
    with np.errstate(all="ignore"):
        p_fit = -np.log((a_top / a_mid) / rho_c ** (2 * L)) / math.log(2.0)
    p_fit = np.where(np.isfinite(p_fit), p_fit, order)
    p_use = np.clip(np.minimum(p_fit, order), 1.1, None)
    j = np.arange(1, 20 * top + 1)[:, None]
    with np.errstate(under="ignore"):
        w = rho_c[None, :] ** j * (top / (top + j)) ** p_use[None, :]
    s = w.sum(axis=0)
    # integral of (top/(top+j))^p beyond 21 top for rho = 1
    rest = np.where(rho_c >= 1.0 - 1e-12,
                    top * (1.0 / 21.0) ** (p_use - 1.0) / (p_use - 1.0), 0.0)
    return explicit + a_top * (s + rest)


def _series(p: HardyParams, R: float, r, s, cos, L: int):
    """Lebesgue kernel and truncation-tail estimate for arrays of pairs."""
    N = p.dim
    r, s, cos = (np.atleast_1d(np.asarray(a, float)) for a in (r, s, cos))
    lo, hi = np.minimum(r, s), np.maximum(r, s)
    dist = np.sqrt(np.maximum(r * r + s * s - 2 * r * s * cos, 0.0))
    Z = _zonal(N, L, cos)
    k0 = _mode_kernel(p, 0, R)
    g0 = k0.green(lo, hi)
    if N == 3:
        free0 = 1.0 / hi
    else:
        free0 = -np.log(hi)
    total = Z[0] * g0 + _free_kernel(N, dist) - Z[0] * free0 + _asymptotic_part(p, lo, hi, cos)
    mags = np.zeros((4 * L + 1,) + r.shape)
    for l in range(1, 4 * L + 1):
        corr = _correction_term(p, l, R, lo, hi)
        if l <= L:
            total = total + Z[l] * corr
        mags[l] = _zonal_sup(N, l) * np.abs(corr)
    # after two subtracted orders the terms decay like rho^l l^-order
    order = 3.0 if N == 3 else 4.0
    tail = _tail_estimate(mags, lo / hi, L, order) if L >= 2 else np.full_like(r, np.inf)
    return total, tail


def _sum_terms(p: HardyParams, R: float, r, s, cos, l_from: int, l_to: int):
    """Explicit partial sum of correction terms l_from..l_to (tail validation)."""
    r, s, cos = (np.atleast_1d(np.asarray(a, float)) for a in (r, s, cos))
    lo, hi = np.minimum(r, s), np.maximum(r, s)
    Z = _zonal(p.dim, l_to, cos)
    acc = np.zeros_like(r)
    for l in range(l_from, l_to + 1):
        acc = acc + Z[l] * _correction_term(p, l, R, lo, hi)
    return acc


@dataclass
class GreenKernelSeries:
    """Truncated mode series for the Green kernel of L_mu on B_R (N = 2 or 3).

    ``rel_tol`` is the relative truncation budget checked on every kernel
    evaluation; ``tail_bound`` holds the last estimate.
    """

    params: HardyParams
    R: float = 1.0
    max_mode: int = DEFAULT_MAX_MODE
    rel_tol: float = 1e-6
    mode_cache: dict = field(default_factory=dict, repr=False)
    tail_bound: float = 0.0

    def __post_init__(self):
        if self.params.dim not in (2, 3):
            raise InvalidDimension("full Green kernel is available for N = 2 and 3 only")
        if self.max_mode < 0:
            raise DomainError("max_mode must be non-negative")
        self.params.tau_plus  # regime check
        for l in range(self.max_mode + 1):
            self.mode_cache[l] = _mode_orders(self.params, l)

    def lebesgue(self, x, y, max_mode: Optional[int] = None):
        """Symmetric Lebesgue kernel at (x, y); raises on the diagonal or truncation."""
        r, s, cos = _polar_pair(self, x, y)
        L = self.max_mode if max_mode is None else max_mode
        val, tail = _series(self.params, self.R, r, s, cos, L)
        val, tail = float(val[0]), float(tail[0])
        self.tail_bound = tail
        if tail > self.rel_tol * abs(val):
            raise TruncationError(
                f"mode series tail {tail:.3g} exceeds budget at L={L}", estimate=val, tail=tail)
        return val


def _polar_pair(gk: GreenKernelSeries, x, y):
    x, y = np.asarray(x, float), np.asarray(y, float)
    N = gk.params.dim
    if x.shape != (N,) or y.shape != (N,):
        raise DomainError(f"points must have {N} coordinates")
    r, s = float(np.linalg.norm(x)), float(np.linalg.norm(y))
    if r == 0.0 or s == 0.0:
        raise DomainError("points must avoid the origin")
    if r > gk.R or s > gk.R:
        raise DomainError("points must lie in the ball")
    if np.linalg.norm(x - y) <= 1e-14 * gk.R:
        raise SingularDiagonal("kernel is singular on the diagonal x = y")
    cos = float(np.clip(np.dot(x, y) / (r * s), -1.0, 1.0))
    return r, s, cos


def green_kernel(gk: GreenKernelSeries, x, y) -> float:
    """d(mu)-kernel K(x, y) = G(x, y) / Gamma_mu(|y|)."""
    val = gk.lebesgue(x, y)
    s = float(np.linalg.norm(y))
    return val / s ** gk.params.tau_plus


def _radial_green_value(p: HardyParams, R: float, f: Callable, r: float,
                        spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """int_0^R g_0(r, s) f(s) s^(N-1) ds by adaptive quadrature."""
    kern = _mode_kernel(p, 0, R)
    N = p.dim
    breaks = tuple(getattr(f, "breakpoints", ()))
    inner = integrate_radial(lambda s: kern.y_reg(s) * float(f(s)) * s ** (N - 1),
                             0.0, r, spec, breaks).value
    outer = 0.0
    if r < R:
        outer = integrate_radial(lambda s: kern.y_bnd(s) * float(f(s)) * s ** (N - 1),
                                 r, R, spec, breaks).value
    return float((kern.y_bnd(r) * inner + kern.y_reg(r) * outer) / kern.wronskian)


def green_apply(gk: GreenKernelSeries, f: Callable, x,
                spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """G_mu[f](x) = int G(x, y) f(y) dy for a radial source f.

    Only the l = 0 mode survives the angular integration, so the value is the
    radial Green function integrated against f with adaptive quadrature
    (independently of the panel machinery used by the radial solver).
    """
    p, R = gk.params, gk.R
    x = np.atleast_1d(np.asarray(x, float))
    r = float(np.linalg.norm(x))
    if not 0.0 < r <= R:
        raise DomainError("evaluation point must lie in the punctured ball")
    try:
        weighted_l1_norm(p, f, R, spec)
    except DivergentIntegral as exc:
        raise NoSolution(f"source is not in L1(d mu): {exc}", exc.fit) from exc
    return _radial_green_value(p, R, f, r, spec)


# --------------------------------------------------------------------------
# two-sided bounds


@dataclass(frozen=True)
class BoundReport:
    """Envelope fit for sampled kernel values.

    ``samples`` rows are (x, y, kernel, upper_envelope, lower_envelope);
    for mu >= 0 the lower envelope is reported for information only.
    """

    samples: tuple
    fitted_upper_c: float
    fitted_lower_c: float
    violations: int
    max_tail: float
    regime: str


def envelopes(p: HardyParams, R: float, r, s, dist):
    """Upper and lower comparison envelopes evaluated on arrays of pairs."""
    N, tp = p.dim, p.tau_plus
    if N == 2:
        # diameter-normalised logarithm keeps the term positive inside the ball
        a = -np.log(dist / (2.0 * R))
    else:
        a = dist ** (2.0 - N)
    b = r ** tp / dist ** (N - 2 + tp)
    c = s ** tp / dist ** (N - 2 + tp)
    d = (r * s) ** tp / dist ** (N - 2 + 2 * tp)
    summed = a + b + c + d
    if p.mu >= 0.0:
        return np.minimum.reduce([a, b, c, d]), summed
    return summed, summed


def sample_pairs(N: int, R: float, count: int, seed: int = 0, radius_fraction: float = 0.8,
                 floor: float = DIAGONAL_FLOOR):
    """Random pairs in the closed ball of radius ``radius_fraction * R``, off-diagonal."""
    rng = np.random.default_rng(seed)
    xs, ys = [], []
    while len(xs) < count:
        pts = rng.normal(size=(2, N))
        pts /= np.linalg.norm(pts, axis=1)[:, None]
        rad = radius_fraction * R * rng.uniform(size=2) ** (1.0 / N)
        rad = np.maximum(rad, 1e-3 * R)
        x, y = pts[0] * rad[0], pts[1] * rad[1]
        if np.linalg.norm(x - y) >= floor:
            xs.append(x)
            ys.append(y)
    return np.array(xs), np.array(ys)


def check_kernel_bounds(gk: GreenKernelSeries, sample_count: int = 1000, seed: int = 0,
                        max_mode: int = BOUND_MAX_MODE, rel_tol: float = 1e-4) -> BoundReport:
    """Fit the constants of the kernel envelopes over random admissible pairs."""
    p, R = gk.params, gk.R
    xs, ys = sample_pairs(p.dim, R, sample_count, seed)
    r = np.linalg.norm(xs, axis=1)
    s = np.linalg.norm(ys, axis=1)
    cos = np.clip(np.sum(xs * ys, axis=1) / (r * s), -1.0, 1.0)
    dist = np.linalg.norm(xs - ys, axis=1)
    vals, tails = _series(p, R, r, s, cos, max_mode)
    bad_tail = tails > rel_tol * np.abs(vals)
    if np.any(bad_tail):
        i = int(np.argmax(tails / np.abs(vals)))
        raise TruncationError(f"bound sample {i} not resolved at L={max_mode}",
                              estimate=float(vals[i]), tail=float(tails[i]))
    upper, lower = envelopes(p, R, r, s, dist)
    with np.errstate(all="ignore"):
        up_ratio = vals / upper
        lo_ratio = vals / lower
    violations = int(np.count_nonzero(~np.isfinite(vals) | (vals <= 0.0)
                                      | ~np.isfinite(up_ratio)))
    c_up = float(np.max(up_ratio))
    c_lo = float(np.min(lo_ratio))
    if p.mu < 0.0 and not c_lo > 0.0:
        violations += 1
    rows = tuple((tuple(x), tuple(y), float(v), float(u), float(lw))
                 for x, y, v, u, lw in zip(xs, ys, vals, upper, lower))
    regime = "sum" if p.mu < 0.0 else "min"
    return BoundReport(rows, c_up, c_lo, violations, float(np.max(tails)), regime)


def classical_ball_green(x, y, R: float = 1.0) -> float:
    """Image-charge Green function of -Delta on the 3-ball of radius R."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    s = np.linalg.norm(y)
    image = R * R * y / (s * s)
    return (1.0 / np.linalg.norm(x - y) - R / (s * np.linalg.norm(x - image))) / (4 * math.pi)
