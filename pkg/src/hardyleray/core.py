"""Parameters, closed-form radial solutions and the test-function library.

Everything here is a pure function of immutable inputs.  Radial profiles are
plain callables of the radius that accept numpy arrays.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DomainError, InvalidDimension, UnknownKind, UnsupportedRegime


# Relative distance to the threshold below which mu is snapped onto it.
CRITICAL_SNAP = 1e-13


class Regime(enum.Enum):
    SUPERCRITICAL = "supercritical"
    CRITICAL = "critical"
    SUBHARDY = "subhardy"


def sphere_area(dim: int) -> float:
    """Surface area of the unit sphere in R^dim."""
    return 2.0 * math.pi ** (dim / 2.0) / math.gamma(dim / 2.0)


@dataclass(frozen=True)
class HardyParams:
    """Dimension, potential strength and everything derived from them.

    Build instances with :func:`derive_params`.  In the sub-Hardy regime the
    exponents and the constant ``c_mu`` do not exist and reading them raises
    :class:`UnsupportedRegime`.
    """

    dim: int
    mu: float
    mu0: float
    regime: Regime
    sphere_area: float
    _tau_minus: Optional[float] = field(default=None, repr=False)
    _tau_plus: Optional[float] = field(default=None, repr=False)

    def _require_real_roots(self):
        if self.regime is Regime.SUBHARDY:
            raise UnsupportedRegime(
                f"mu={self.mu} < mu0={self.mu0}: exponents are complex")

    @property
    def tau_minus(self) -> float:
        self._require_real_roots()
        return self._tau_minus

    @property
    def tau_plus(self) -> float:
        self._require_real_roots()
        return self._tau_plus

    @property
    def root_gap(self) -> float:
        """sqrt(mu - mu0), half the distance between the two exponents."""
        self._require_real_roots()
        return 0.5 * (self._tau_plus - self._tau_minus)

    @property
    def c_mu(self) -> float:
        self._require_real_roots()
        if self.regime is Regime.CRITICAL:
            return self.sphere_area
        return 2.0 * self.root_gap * self.sphere_area

    @property
    def effective_dim(self) -> float:
        """N + 2 tau_+, the dimension in which the dual operator is a Laplacian."""
        return self.dim + 2.0 * self.tau_plus

    @property
    def is_critical(self) -> bool:
        return self.regime is Regime.CRITICAL


def derive_params(N: int, mu: float) -> HardyParams:
    if int(N) != N or N < 2:
        raise InvalidDimension(f"dimension must be an integer >= 2, got {N}")
    N = int(N)
    mu = float(mu)
    mu0 = -((N - 2) ** 2) / 4.0
    area = sphere_area(N)
    if abs(mu - mu0) <= CRITICAL_SNAP * max(1.0, abs(mu0)):
        tau = (2.0 - N) / 2.0
        return HardyParams(N, mu0, mu0, Regime.CRITICAL, area, tau, tau)
    if mu < mu0:
        return HardyParams(N, mu, mu0, Regime.SUBHARDY, area)
    gap = math.sqrt(mu - mu0)
    half = (N - 2) / 2.0
    return HardyParams(N, mu, mu0, Regime.SUPERCRITICAL, area,
                       -half - gap, -half + gap)


def _positive_radius(r):
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise DomainError("radius must be positive")
    return r


def _scalar_or_array(x):
    return float(x) if np.ndim(x) == 0 else x


def phi(p: HardyParams, r):
    """Singular fundamental solution Phi_mu."""
    tm = p.tau_minus
    r = _positive_radius(r)
    if p.is_critical:
        return _scalar_or_array(-(r ** tm) * np.log(r))
    return _scalar_or_array(r ** tm)


def gamma_branch(p: HardyParams, r):
    """Regular branch Gamma_mu(r) = r**tau_plus."""
    tp = p.tau_plus
    r = _positive_radius(r)
    return _scalar_or_array(r ** tp)


def green_ball_closed(p: HardyParams, R: float, r):
    """Radial Green function G_mu on the ball B_R with G/Phi -> 1 at 0."""
    tm, tp = p.tau_minus, p.tau_plus
    r = _positive_radius(r)
    if np.any(r > R * (1 + 1e-14)):
        raise DomainError("radius outside the ball")
    if p.is_critical:
        return _scalar_or_array(-(r ** tm) * np.log(r / R))
    return _scalar_or_array(r ** tm - R ** (tm - tp) * r ** tp)


def xi0_ball_closed(p: HardyParams, R: float, r):
    """Solution of the dual problem L*xi = 1 on B_R with zero boundary data."""
    n_eff = p.effective_dim
    r = np.asarray(r, dtype=float)
    if np.any(r < 0) or np.any(r > R * (1 + 1e-14)):
        raise DomainError("radius outside [0, R]")
    return _scalar_or_array((R * R - r * r) / (2.0 * n_eff))


# --------------------------------------------------------------------------
# radial functions


def _fd_first(fn, r, h):
    return (fn(r + h) - fn(r - h)) / (2.0 * h)


@dataclass(frozen=True)
class RadialFunction:
    """A function of the radius with optional analytic derivatives.

    Missing derivatives fall back to central differences.  ``breakpoints``
    lists radii where the function or a derivative is not smooth; quadrature
    routines split there.
    """

    fn: Callable
    d1: Optional[Callable] = None
    d2: Optional[Callable] = None
    support_radius: float = math.inf
    breakpoints: tuple = ()
    name: str = ""

    def __call__(self, r):
        return _scalar_or_array(self.fn(np.asarray(r, dtype=float)))

    def deriv1(self, r):
        r = np.asarray(r, dtype=float)
        if self.d1 is not None:
            return _scalar_or_array(self.d1(r))
        h = 1e-6 * np.maximum(np.abs(r), 1e-3)
        return _scalar_or_array(_fd_first(self.fn, r, h))

    def deriv2(self, r):
        r = np.asarray(r, dtype=float)
        if self.d2 is not None:
            return _scalar_or_array(self.d2(r))
        h = 1e-4 * np.maximum(np.abs(r), 1e-3)
        if self.d1 is not None:
            return _scalar_or_array(_fd_first(self.d1, r, h))
        return _scalar_or_array(
            (self.fn(r + h) - 2.0 * self.fn(r) + self.fn(r - h)) / (h * h))

    @classmethod
    def constant(cls, c: float = 1.0) -> "RadialFunction":
        return cls(lambda r: np.full_like(r, c, dtype=float),
                   lambda r: np.zeros_like(r, dtype=float),
                   lambda r: np.zeros_like(r, dtype=float), name=f"const:{c}")

    @classmethod
    def power(cls, exponent: float, scale: float = 1.0) -> "RadialFunction":
        a = float(exponent)
        return cls(lambda r: scale * r ** a,
                   lambda r: scale * a * r ** (a - 1.0),
                   lambda r: scale * a * (a - 1.0) * r ** (a - 2.0),
                   name=f"power:{a}")

    def __add__(self, other: "RadialFunction") -> "RadialFunction":
        return RadialFunction(
            lambda r: self.fn(r) + other.fn(r),
            lambda r: np.asarray(self.deriv1(r)) + np.asarray(other.deriv1(r)),
            lambda r: np.asarray(self.deriv2(r)) + np.asarray(other.deriv2(r)),
            min(self.support_radius, other.support_radius),
            tuple(sorted(set(self.breakpoints) | set(other.breakpoints))),
            f"({self.name}+{other.name})")

    def scaled(self, c: float) -> "RadialFunction":
        return RadialFunction(
            lambda r: c * self.fn(r),
            lambda r: c * np.asarray(self.deriv1(r)),
            lambda r: c * np.asarray(self.deriv2(r)),
            self.support_radius, self.breakpoints, f"{c}*{self.name}")


# --------------------------------------------------------------------------
# operators


def apply_hardy(p: HardyParams, u: RadialFunction, r):
    """Pointwise -u'' - (N-1)u'/r + mu u / r**2."""
    r = _positive_radius(r)
    N = p.dim
    val = -np.asarray(u.deriv2(r)) - (N - 1) * np.asarray(u.deriv1(r)) / r \
        + p.mu * np.asarray(u(r)) / (r * r)
    return _scalar_or_array(val)


@dataclass(frozen=True)
class TestFunction:
    """Compactly supported C^{1,1} radial profile, optionally translated.

    ``profile`` is a function of the distance to ``center`` (origin when
    ``center`` is None).
    """

    __test__ = False

    profile: RadialFunction
    support_radius: float
    center: Optional[tuple] = None
    kind: str = ""

    @property
    def is_centered(self) -> bool:
        return self.center is None or not np.any(self.center)

    @property
    def value_at_zero(self) -> float:
        if self.is_centered:
            return float(self.profile(0.0))
        dist = float(np.linalg.norm(self.center))
        return float(self.profile(dist)) if dist < self.support_radius else 0.0

    def __call__(self, r):
        return self.profile(r)


def apply_dual(p: HardyParams, xi: TestFunction, r):
    """Radial dual operator -xi'' - (N + 2 tau_+ - 1) xi'/r for centred xi.

    At r = 0 the limit -(N + 2 tau_+) xi''(0) is returned.
    """
    n_eff = p.effective_dim
    if not xi.is_centered:
        raise DomainError("apply_dual needs a centred test function; "
                          "use apply_dual_point for translated bumps")
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise DomainError("radius must be non-negative")
    prof = xi.profile
    safe = np.where(r > 0, r, 1.0)
    d2 = np.asarray(prof.deriv2(safe))
    val = -d2 - (n_eff - 1.0) * np.asarray(prof.deriv1(safe)) / safe
    at_zero = -n_eff * float(prof.deriv2(np.array(0.0)))
    return _scalar_or_array(np.where(r > 0, val, at_zero))


def apply_dual_point(p: HardyParams, xi: TestFunction, x):
    """Dual operator at Cartesian points ``x`` (shape (..., N)) for any bump.

    Uses L* xi = -Lap xi - 2 tau_+ (x . grad xi) / |x|^2 with xi(x) = b(|x-c|).
    """
    tp = p.tau_plus
    x = np.asarray(x, dtype=float)
    c = np.zeros(p.dim) if xi.center is None else np.asarray(xi.center, float)
    d = x - c
    rho = np.linalg.norm(d, axis=-1)
    safe_rho = np.where(rho > 0, rho, 1.0)
    prof = xi.profile
    b1 = np.asarray(prof.deriv1(safe_rho))
    b2 = np.asarray(prof.deriv2(safe_rho))
    lap = np.where(rho > 0, b2 + (p.dim - 1) * b1 / safe_rho,
                   p.dim * np.asarray(prof.deriv2(np.zeros_like(rho))))
    r2 = np.sum(x * x, axis=-1)
    if np.any(r2 <= 0):
        raise DomainError("apply_dual_point is undefined at the origin")
    x_dot_grad = np.where(rho > 0, b1 * np.sum(x * d, axis=-1) / safe_rho, 0.0)
    return _scalar_or_array(-lap - 2.0 * tp * x_dot_grad / r2)


# --------------------------------------------------------------------------
# test-function library


def _smooth_step_h(s):
    s = np.asarray(s, dtype=float)
    pos = s > 0
    out = np.zeros_like(s)
    out[pos] = np.exp(-1.0 / s[pos])
    return out


def _h_d1(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    pos = s > 0
    sp = s[pos]
    out[pos] = np.exp(-1.0 / sp) / sp ** 2
    return out


def _h_d2(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    pos = s > 0
    sp = s[pos]
    out[pos] = np.exp(-1.0 / sp) * (1.0 / sp ** 4 - 2.0 / sp ** 3)
    return out


def eta0(t):
    """Smooth decreasing cutoff: 1 on [0, 1], 0 on [2, inf)."""
    t = np.asarray(t, dtype=float)
    a = _smooth_step_h(2.0 - t)
    b = _smooth_step_h(t - 1.0)
    return _scalar_or_array(a / (a + b))


def eta0_d1(t):
    t = np.asarray(t, dtype=float)
    a, b = _smooth_step_h(2.0 - t), _smooth_step_h(t - 1.0)
    da, db = -_h_d1(2.0 - t), _h_d1(t - 1.0)
    d = a + b
    return _scalar_or_array((da * b - a * db) / d ** 2)


def eta0_d2(t):
    t = np.asarray(t, dtype=float)
    a, b = _smooth_step_h(2.0 - t), _smooth_step_h(t - 1.0)
    da, db = -_h_d1(2.0 - t), _h_d1(t - 1.0)
    dda, ddb = _h_d2(2.0 - t), _h_d2(t - 1.0)
    d, dd, ddd = a + b, da + db, dda + ddb
    num = da * d - a * dd
    return _scalar_or_array((dda * d - a * ddd) / d ** 2 - 2.0 * dd * num / d ** 3)


def quartic_bump(R: float = 1.0) -> TestFunction:
    def f(r):
        u = (r / R) ** 2
        return np.where(r <= R, (1.0 - u) ** 2, 0.0)

    def f1(r):
        u = (r / R) ** 2
        return np.where(r <= R, -4.0 * r / R ** 2 * (1.0 - u), 0.0)

    def f2(r):
        u = (r / R) ** 2
        return np.where(r <= R, -4.0 / R ** 2 * (1.0 - u) + 8.0 * r ** 2 / R ** 4, 0.0)

    prof = RadialFunction(f, f1, f2, R, (R,), "quartic")
    return TestFunction(prof, R, None, "quartic")


def quartic_poly_bump(R: float = 1.0, coeffs: Sequence[float] = (1.0, 1.0)) -> TestFunction:
    """Quartic bump times a polynomial in (r/R)^2 with the given coefficients."""
    base = quartic_bump(R).profile
    c = np.asarray(coeffs, dtype=float)
    poly = np.polynomial.Polynomial(c)
    dpoly = poly.deriv()
    ddpoly = dpoly.deriv()

    def q(r):
        return poly((r / R) ** 2)

    def q1(r):
        return dpoly((r / R) ** 2) * 2.0 * r / R ** 2

    def q2(r):
        u = (r / R) ** 2
        return ddpoly(u) * (2.0 * r / R ** 2) ** 2 + dpoly(u) * 2.0 / R ** 2

    def f(r):
        return base.fn(r) * q(r)

    def f1(r):
        return base.d1(r) * q(r) + base.fn(r) * q1(r)

    def f2(r):
        return base.d2(r) * q(r) + 2.0 * base.d1(r) * q1(r) + base.fn(r) * q2(r)

    name = "quartic_poly" + ":" + ",".join(f"{v:g}" for v in c)
    return TestFunction(RadialFunction(f, f1, f2, R, (R,), name), R, None, name)


def cutoff_bump(R: float = 1.0) -> TestFunction:
    """eta0(r/R): equal to 1 on [0, R], vanishing from 2R on."""
    prof = RadialFunction(lambda r: eta0(r / R),
                          lambda r: eta0_d1(r / R) / R,
                          lambda r: eta0_d2(r / R) / R ** 2,
                          2.0 * R, (R, 2.0 * R), "cutoff")
    return TestFunction(prof, 2.0 * R, None, "cutoff")


def _phi_sigma(t, sigma):
    t = np.abs(t)
    return np.where(t < sigma, t * t / (2.0 * sigma), t - sigma / 2.0)


def _phi_sigma_d1(t, sigma):
    return np.where(np.abs(t) < sigma, t / sigma, np.sign(t))


def _phi_sigma_d2(t, sigma):
    return np.where(np.abs(t) < sigma, 1.0 / sigma, 0.0)


def cone_bump(R: float = 1.0, sigma: float = 0.1) -> TestFunction:
    """Regularised cone (R - phi_sigma(r)) * eta0(2r/R), supported in B_R.

    On sigma <= r < R/2 it equals R + sigma/2 - r, so its dual image is
    (N - 1 + 2 tau_+)/r there.
    """
    if not 0 < sigma < R / 2:
        raise DomainError("cone needs 0 < sigma < R/2")
    n0 = 2.0 / R

    def f(r):
        return (R - _phi_sigma(r, sigma)) * eta0(n0 * r)

    def f1(r):
        return -_phi_sigma_d1(r, sigma) * eta0(n0 * r) \
            + (R - _phi_sigma(r, sigma)) * n0 * eta0_d1(n0 * r)

    def f2(r):
        return (-_phi_sigma_d2(r, sigma) * eta0(n0 * r)
                - 2.0 * _phi_sigma_d1(r, sigma) * n0 * eta0_d1(n0 * r)
                + (R - _phi_sigma(r, sigma)) * n0 ** 2 * eta0_d2(n0 * r))

    prof = RadialFunction(f, f1, f2, R, (sigma, R / 2.0, R), f"cone:{sigma:g}")
    return TestFunction(prof, R, None, f"cone:{sigma:g}")


def xi0_test_function(p: HardyParams, R: float = 1.0) -> TestFunction:
    """The dual torsion profile (R^2 - r^2)/(2(N + 2 tau_+)).

    It vanishes on the sphere of radius R but its slope does not, so it is an
    admissible test function on the ball B_R only.
    """
    n_eff = p.effective_dim

    def f(r):
        return np.where(r < R, (R * R - r * r) / (2.0 * n_eff), 0.0)

    def f1(r):
        return np.where(r <= R, -r / n_eff, 0.0)

    def f2(r):
        return np.where(r <= R, -1.0 / n_eff, 0.0)

    return TestFunction(RadialFunction(f, f1, f2, R, (R,), "xi0"), R, None, "xi0")


def translated(xi: TestFunction, center: Sequence[float]) -> TestFunction:
    return TestFunction(xi.profile, xi.support_radius, tuple(float(c) for c in center),
                        xi.kind + "@" + ",".join(f"{c:g}" for c in center))


LIBRARY_KINDS = ("quartic", "quartic_poly", "cone", "cutoff")


def bump_library(kind: str, R: float = 1.0, **options) -> TestFunction:
    if R <= 0:
        raise DomainError("support radius must be positive")
    if kind == "quartic":
        return quartic_bump(R)
    if kind == "quartic_poly":
        return quartic_poly_bump(R, options.get("coeffs", (1.0, 1.0)))
    if kind == "cone":
        return cone_bump(R, options.get("sigma", 0.1))
    if kind == "cutoff":
        return cutoff_bump(R)
    raise UnknownKind(f"unknown test function kind {kind!r}")


def default_library(R: float = 1.0) -> list:
    """Finite library over which identity checks are quantified."""
    return [quartic_bump(R), quartic_poly_bump(R, (1.0, -0.5, 0.25)),
            cone_bump(R, 0.1), cutoff_bump(R / 2.0)]
