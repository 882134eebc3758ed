"""Numerical probes of the existence thresholds and nonexistence mechanisms.

* source classification by weighted integrability at the origin;
* exhaustion on annuli B_R minus B_{1/n}, with growth-model selection on the
  probe values u_n(x0);
* oscillation of radial solutions below the Hardy threshold;
* principal Dirichlet eigenvalue of -Delta u = lambda a0 |x|^-2 u on annuli.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate, optimize

from .core import HardyParams
from .errors import (DivergentIntegral, NumericFailure, ProbeFailure, WrongRegime)
from .quadrature import (DEFAULT_SPEC, QuadratureSpec, GrowthFit, truncated_weighted_integral,
                         weighted_l1_norm)
from .solver import solve_annulus

DEFAULT_EXHAUSTION_N = (4, 8, 16, 32, 64, 128, 256)


# --------------------------------------------------------------------------
# source classification


@dataclass(frozen=True)
class SourceClass:
    """Integrability evidence for a source term.

    ``f1_value`` is the weighted L1 norm when finite; ``f1_fit`` and
    ``f2_fit`` carry the shell-scan growth fits.
    """

    f1_finite: bool
    f1_value: float
    f1_fit: Optional[GrowthFit]
    cond_413: bool
    f2_divergent: bool
    f2_fit: Optional[GrowthFit]


def _vanishes_against_phi(p: HardyParams, f: Callable, levels=range(10, 31)) -> bool:
    """Whether |f(r)| r^(2 - tau_-) -> 0, judged by the log-log slope deep down."""
    r = 10.0 ** -np.asarray(list(levels), float)
    with np.errstate(all="ignore"):
        g = np.abs(np.array([float(f(x)) for x in r])) * r ** (2.0 - p.tau_minus)
    if np.all(g == 0.0):
        return True
    if not np.all(np.isfinite(g)) or np.any(g == 0.0):
        return bool(g[-1] == 0.0)
    slope = np.polyfit(np.log(r), np.log(g), 1)[0]
    return bool(slope > 1e-3)


def classify_source(p: HardyParams, f: Callable, R: float = 1.0,
                    spec: QuadratureSpec = DEFAULT_SPEC) -> SourceClass:
    """Evidence-backed integrability classes of f near the origin.

    Signed sources are judged through |f| for integrability; the divergence of
    int_{B_R minus B_r} f d(mu) is tested on f itself.
    """
    try:
        val, fit1, finite = weighted_l1_norm(p, f, R, spec), None, True
    except DivergentIntegral as exc:
        val, fit1, finite = math.inf, exc.fit, False
    fit2 = truncated_weighted_integral(p, f, R, spec) if not finite else None
    divergent = fit2 is not None and fit2.model in ("log", "power")
    return SourceClass(finite, float(val), fit1, _vanishes_against_phi(p, f), divergent, fit2)


# --------------------------------------------------------------------------
# growth-model selection


@dataclass(frozen=True)
class GrowthModelFit:
    """Best of bounded (A + B n^-p), log (A + B ln n) and power (A + B n^p).

    ``aic`` maps every model to its Akaike score.  For the bounded model
    ``asymptote`` is the extrapolated limit (see :func:`_tail_asymptote`);
    otherwise it is inf.
    """

    model: str
    coefficient: float
    exponent: float
    asymptote: float
    r_squared: float
    aic: dict = field(default_factory=dict)
    asymptote_error: float = math.inf


def _linear_fit(basis: np.ndarray, y: np.ndarray):
    X = np.column_stack([np.ones_like(basis), basis])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    rss = float(np.sum((X @ coef - y) ** 2))
    return coef, rss


def _exponent_fit(n: np.ndarray, y: np.ndarray, sign: float):
    """Fit A + B n^(sign p) with p in [0.05, 4]."""
    logn = np.log(n)

    def rss(p):
        return _linear_fit(np.exp(sign * p * logn), y)[1]
    grid = np.linspace(0.05, 4.0, 80)
    vals = [rss(p) for p in grid]
    i = int(np.argmin(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    res = optimize.minimize_scalar(rss, bounds=(lo, hi), method="bounded",
                                   options={"xatol": 1e-10})
    p = float(res.x) if res.fun <= vals[i] else float(grid[i])
    coef, r = _linear_fit(np.exp(sign * p * logn), y)
    return p, coef, r


def fit_growth(n_values: Sequence[float], values: Sequence[float]) -> GrowthModelFit:
    n = np.asarray(n_values, float)
    y = np.asarray(values, float)
    m = len(y)
    if m < 3:
        raise ValueError("growth fits need at least three points")
    scale = max(float(np.max(np.abs(y))), 1e-300)
    tss = float(np.sum((y - y.mean()) ** 2))
    floor = m * (1e-12 * scale) ** 2
    if tss <= floor:
        return GrowthModelFit("bounded", 0.0, math.inf, float(y.mean()), 1.0,
                              {"bounded": -math.inf}, 0.0)
    pb, cb, rb = _exponent_fit(n, y, -1.0)
    cl, rl = _linear_fit(np.log(n), y)
    pp, cp, rp = _exponent_fit(n, y, +1.0)
    fits = {"bounded": (rb, 3, cb[1], pb, cb[0]),
            "log": (rl, 2, cl[1], 0.0, math.inf),
            "power": (rp, 3, cp[1], pp, math.inf)}
    aic = {k: m * math.log(max(v[0], floor) / m) + 2 * v[1] for k, v in fits.items()}
    best = min(aic, key=aic.get)
    rss, _, coef, expo, asym = fits[best]
    asym_err = math.inf
    if best == "bounded":
        asym, asym_err = _tail_asymptote(n, y, asym)
    return GrowthModelFit(best, float(coef), float(expo), float(asym), 1.0 - rss / tss, aic,
                          asym_err)


def _tail_asymptote(n: np.ndarray, y: np.ndarray, fallback: float):
    """Limit of a bounded series on a geometric n-grid by iterated Aitken sweeps.

    Faster-decaying corrections distort a global A + B n^-p fit at small n;
    each Aitken sweep removes one geometric component of the sequence.  The
    spread of the last sweep is returned as the error estimate.
    """
    ratios = n[1:] / n[:-1]
    if len(n) < 3 or not np.allclose(ratios, ratios[0], rtol=1e-12):
        return fallback, math.inf
    passes = min(2, (len(y) - 1) // 2)
    x = np.asarray(y, float)
    for _ in range(passes):
        d1 = x[1:-1] - x[:-2]
        d2 = x[2:] - x[1:-1]
        den = d2 - d1
        if np.any(den == 0.0):
            break
        x = x[2:] - d2 * d2 / den
    err = float(abs(x[-1] - x[-2])) if len(x) > 1 else math.inf
    return float(x[-1]), err


@dataclass(frozen=True)
class ExhaustionSeries:
    inner_radii: tuple
    n_values: tuple
    values_at_probe: tuple
    growth_fit: GrowthModelFit

    @property
    def unbounded(self) -> bool:
        return self.growth_fit.model in ("log", "power")


def exhaustion_values(p: HardyParams, f: Callable, x0_radius: float, n_values,
                      R: float = 1.0) -> list:
    """u_n(x0) for the annulus problems with zero data on both spheres."""
    vals = []
    for n in n_values:
        a = 1.0 / n
        if not a < x0_radius < R:
            raise ValueError("probe radius must lie inside every annulus")
        sol = solve_annulus(p, f, a, R, 0.0)
        vals.append(float(sol.profile(x0_radius)))
    return vals


def nonexistence_probe(p: HardyParams, f: Callable, x0_radius: float = 0.5,
                       n_max: int = 256, R: float = 1.0, n_values: Optional[Sequence] = None,
                       certified_divergent: Optional[bool] = None) -> ExhaustionSeries:
    """Exhaustion series at x0 with a growth-model fit over n = 4, 8, ..., n_max.

    When ``certified_divergent`` is true (or left None and the source
    classification certifies divergence) a bounded fit is an inconsistency and
    raises :class:`ProbeFailure`.
    """
    if n_values is None:
        n_values = tuple(n for n in DEFAULT_EXHAUSTION_N if n <= n_max)
        k = DEFAULT_EXHAUSTION_N[-1]
        while 2 * k <= n_max:
            k *= 2
            n_values += (k,)
    n_values = tuple(int(n) for n in n_values)
    vals = exhaustion_values(p, f, x0_radius, n_values, R)
    fit = fit_growth(n_values, vals)
    series = ExhaustionSeries(tuple(1.0 / n for n in n_values), n_values, tuple(vals), fit)
    if certified_divergent is None:
        certified_divergent = classify_source(p, f, R).f2_divergent
    if certified_divergent and not series.unbounded:
        raise ProbeFailure("bounded exhaustion series for a source certified divergent")
    return series


# --------------------------------------------------------------------------
# oscillation below the threshold


@dataclass(frozen=True)
class OscillationReport:
    zero_locations: tuple
    consecutive_ratios: tuple
    predicted_ratio: float

    def relative_errors(self) -> np.ndarray:
        return np.abs(np.asarray(self.consecutive_ratios) / self.predicted_ratio - 1.0)


def _ode_zeros(rhs, y0, t_end, rtol=1e-12, atol=1e-14):
    """Zeros of the first component along a dense ODE solution from t = 0."""
    sol = integrate.solve_ivp(rhs, (0.0, t_end), y0, method="DOP853", rtol=rtol, atol=atol,
                              dense_output=True)
    if not sol.success:
        raise NumericFailure(f"ODE integration failed: {sol.message}")
    grid = np.linspace(0.0, t_end, max(200, int(abs(t_end) * 50)))
    u = sol.sol(grid)[0]
    zeros = []
    for i in range(len(grid) - 1):
        if u[i] == 0.0 and i > 0:
            zeros.append(grid[i])
        elif u[i] * u[i + 1] < 0.0:
            zeros.append(optimize.brentq(lambda t: sol.sol(t)[0], grid[i], grid[i + 1],
                                         xtol=1e-14, rtol=1e-15))
    return zeros, sol


def sub_hardy_probe(N: int, mu: float, r_max: float = 1.0, r_min: Optional[float] = None,
                    n_zeros: int = 12) -> OscillationReport:
    """Zeros of the radial homogeneous solution for mu below the threshold.

    In t = ln r the equation is u_tt + (N - 2) u_t - mu u = 0, started from
    u = 1, u_t = -(N - 2)/2 at r = r_max and integrated toward the origin.
    Zero radii are listed in decreasing order.
    """
    mu0 = -((N - 2) ** 2) / 4.0
    if not mu < mu0:
        raise WrongRegime(f"oscillation probe needs mu < {mu0}")
    omega = math.sqrt(mu0 - mu)
    predicted = math.exp(math.pi / omega)
    if r_min is None:
        t_end = -(n_zeros + 0.75) * math.pi / omega
    else:
        t_end = math.log(r_min / r_max)

    def rhs(t, y):
        return [y[1], -(N - 2) * y[1] + mu * y[0]]

    zeros_t, _ = _ode_zeros(rhs, [1.0, -(N - 2) / 2.0], t_end)
    radii = tuple(r_max * math.exp(t) for t in zeros_t)
    ratios = tuple(radii[i] / radii[i + 1] for i in range(len(radii) - 1))
    return OscillationReport(radii, ratios, predicted)


# --------------------------------------------------------------------------
# principal eigenvalue on annuli


@dataclass(frozen=True)
class EigenCurve:
    eps_list: tuple
    lambda1: tuple
    hardy_constant: float

    @property
    def gaps(self) -> tuple:
        return tuple(l - self.hardy_constant for l in self.lambda1)


def _shoot(N: int, a0: float, lam: float, t0: float):
    """Zero count in (t0, 0] and end value for u(t0) = 0, u_t(t0) = 1."""
    def rhs(t, y):
        return [y[1], -(N - 2) * y[1] - lam * a0 * y[0]]
    sol = integrate.solve_ivp(rhs, (t0, 0.0), [0.0, 1.0], method="DOP853", rtol=1e-12,
                              atol=1e-14, dense_output=True)
    if not sol.success:
        raise NumericFailure(f"shooting failed at lambda={lam}")
    grid = np.linspace(t0, 0.0, 400)[1:]
    u = sol.sol(grid)[0]
    count = int(np.count_nonzero(np.sign(u[1:]) != np.sign(u[:-1])))
    if u[-1] == 0.0:
        count += 1
    return count, float(sol.y[0, -1])


def principal_eigenvalue(N: int, a0: float, eps: float) -> float:
    """Smallest lambda with a radial Dirichlet eigenfunction on (eps, 1)."""
    if not 0.0 < eps < 1.0 or a0 <= 0.0:
        raise ValueError("need 0 < eps < 1 and a0 > 0")
    t0 = math.log(eps)
    lo = (N - 2) ** 2 / (4.0 * a0)
    hi = max(2.0 * lo, 1.0 / a0)
    for _ in range(200):
        if _shoot(N, a0, hi, t0)[0] >= 1:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise NumericFailure("no sign change found while expanding the bracket", (lo, hi))
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        cnt, _ = _shoot(N, a0, mid, t0)
        if cnt >= 1:
            hi = mid
        else:
            lo = mid
        if hi - lo < 1e-6 * hi:
            break
    end = lambda lam: _shoot(N, a0, lam, t0)[1]  # noqa: E731
    f_lo, f_hi = end(lo), end(hi)
    if f_lo * f_hi > 0.0:
        raise NumericFailure("eigenvalue bracket lost its sign change", (lo, hi))
    return float(optimize.brentq(end, lo, hi, xtol=1e-15, rtol=1e-13))


def eigen_scan(N: int, a0: float, eps_list: Sequence[float]) -> EigenCurve:
    """Principal eigenvalues along a sequence of shrinking inner radii."""
    hardy = (N - 2) ** 2 / (4.0 * a0)
    eps_sorted = tuple(sorted(eps_list, reverse=True))
    lams = tuple(principal_eigenvalue(N, a0, e) for e in eps_sorted)
    if any(l <= hardy for l in lams):
        raise ProbeFailure("eigenvalue at or below the Hardy constant")
    if any(b >= a for a, b in zip(lams, lams[1:])):
        raise ProbeFailure("eigenvalues fail to decrease as the hole shrinks")
    return EigenCurve(eps_sorted, lams, hardy)


def eigen_closed_form(N: int, a0: float, eps: float) -> float:
    return ((N - 2) ** 2 / 4.0 + math.pi ** 2 / math.log(eps) ** 2) / a0
