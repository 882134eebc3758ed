import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hardyleray import (RadialFunction, approximate_green_mollifier,
                        extract_singularity_coefficient, derive_params, green_ball_closed, phi,
                        solve_annulus, solve_dual_radial, solve_radial_bvp)
from hardyleray.errors import DomainError, NoLimit, NoSolution, UnsupportedRegime
from hardyleray.solver import RESIDUAL_TOL, RadialKernel, mollifier_mass, mollifier_source
from hardyleray.quadrature import integrate_weighted

GRID = np.geomspace(1e-3, 0.999, 60)
REGIMES = [(3, 2.0), (3, 0.0), (3, -0.25), (2, 0.0), (2, 1.0), (4, 1.0), (5, -2.0)]


def test_constant_source_closed_form():
    sol = solve_radial_bvp(derive_params(3, 2.0), 0, RadialFunction.constant(1.0))
    assert sol.profile(0.5) == pytest.approx(0.0625, rel=1e-14)
    assert np.allclose(sol.profile(GRID), (GRID - GRID ** 2) / 4, atol=1e-15)
    assert abs(sol.boundary_value) <= 1e-15
    assert sol.residual_norm <= RESIDUAL_TOL


@pytest.mark.parametrize("N, mu", REGIMES)
def test_pure_green_function(N, mu):
    p = derive_params(N, mu)
    sol = solve_radial_bvp(p, 0, RadialFunction.constant(0.0), 1.0, 1.0)
    assert np.allclose(sol.profile(GRID), green_ball_closed(p, 1.0, GRID), rtol=1e-13, atol=0)


def test_green_value_at_half():
    sol = solve_radial_bvp(derive_params(3, 2.0), 0, RadialFunction.constant(0.0), 1.0, 1.0)
    assert sol.profile(0.5) == pytest.approx(3.5, rel=1e-14)


def test_edge_source_has_no_solution():
    p = derive_params(3, 2.0)
    with pytest.raises(NoSolution) as info:
        solve_radial_bvp(p, 0, RadialFunction.power(p.tau_minus - 2.0))
    assert info.value.fit.model == "log"


def test_sub_hardy_and_bad_mode():
    with pytest.raises(UnsupportedRegime):
        solve_radial_bvp(derive_params(3, -1.0), 0, RadialFunction.constant(1.0))
    with pytest.raises(DomainError):
        solve_radial_bvp(derive_params(3, 2.0), -1, RadialFunction.constant(1.0))


@pytest.mark.parametrize("N, mu, n_eff", [(3, 2.0, 5.0), (3, 0.0, 3.0), (3, -0.25, 2.0)])
def test_dual_solve_closed_forms(N, mu, n_eff):
    p = derive_params(N, mu)
    xi = solve_dual_radial(p, RadialFunction.constant(1.0))
    r = np.linspace(0.0, 1.0, 41)[1:]
    assert np.allclose(xi.profile(r), (1 - r ** 2) / (2 * n_eff), atol=1e-15)
    zero = solve_dual_radial(p, RadialFunction.constant(0.0))
    assert np.all(zero.profile(r) == 0.0)


@pytest.mark.parametrize("N, mu", REGIMES)
def test_residual_within_tolerance(N, mu):
    p = derive_params(N, mu)
    f = RadialFunction(lambda r: np.cos(3 * np.asarray(r, float)) + 2.0, name="cos")
    assert solve_radial_bvp(p, 0, f, 1.0, 0.7).residual_norm <= RESIDUAL_TOL


@pytest.mark.parametrize("N", [2, 3, 4])
def test_mu_equal_two_n(N):
    # the polynomial particular branch degenerates here; the kernel method must not care
    sol = solve_radial_bvp(derive_params(N, 2.0 * N), 0, RadialFunction.constant(1.0))
    assert sol.residual_norm <= RESIDUAL_TOL
    assert abs(sol.boundary_value) <= 1e-14


@pytest.mark.parametrize("l", [1, 2, 5])
def test_higher_modes_use_shifted_potential(l):
    p = derive_params(3, 2.0)
    mu_eff = 2.0 + l * (l + 1)
    sol = solve_radial_bvp(p, l, RadialFunction.constant(1.0))
    # closed form: r^2 / (mu_eff - 6) is particular; add the decaying boundary correction
    k = RadialKernel(3, mu_eff, 1.0)
    part = GRID ** 2 / (mu_eff - 6.0)
    exact = part - k.y_reg(GRID) / (mu_eff - 6.0)
    assert np.allclose(sol.profile(GRID), exact, atol=1e-13)


sources = st.tuples(st.floats(0.0, 2.0), st.floats(0.0, 2.0), st.floats(0.0, 3.0))


@settings(max_examples=20, deadline=None)
@given(a=sources, b=sources)
def test_comparison_principle(a, b):
    p = derive_params(3, 0.5)
    hi = (max(a[0], b[0]), max(a[1], b[1]), max(a[2], b[2]))
    lo = (min(a[0], b[0]), min(a[1], b[1]), min(a[2], b[2]))

    def src(c):
        return RadialFunction(lambda r: c[0] + c[1] * np.asarray(r, float) ** 2)
    u_hi = solve_radial_bvp(p, 0, src(hi), 1.0, hi[2])
    u_lo = solve_radial_bvp(p, 0, src(lo), 1.0, lo[2])
    assert np.all(u_hi.profile(GRID) >= u_lo.profile(GRID) - 1e-9)


@settings(max_examples=20, deadline=None)
@given(c1=st.floats(-2, 2), c2=st.floats(-2, 2), k1=st.floats(-3, 3), k2=st.floats(-3, 3))
def test_linearity(c1, c2, k1, k2):
    p = derive_params(3, -0.25)
    f1 = RadialFunction(lambda r: c1 * np.sin(4 * np.asarray(r, float)))
    f2 = RadialFunction.power(p.tau_minus - 1.5, c2)
    both = RadialFunction(lambda r: f1(r) + f2(r))
    lhs = solve_radial_bvp(p, 0, both, 1.0, k1 + k2).profile(GRID)
    rhs = solve_radial_bvp(p, 0, f1, 1.0, k1).profile(GRID) + \
        solve_radial_bvp(p, 0, f2, 1.0, k2).profile(GRID)
    assert np.allclose(lhs, rhs, rtol=1e-9, atol=1e-9)


def test_uniqueness_is_deterministic():
    p = derive_params(3, 2.0)
    f = RadialFunction.power(p.tau_minus - 1.5)
    a = solve_radial_bvp(p, 0, f, 1.0, 2.0).profile(GRID)
    solve_radial_bvp(p, 0, RadialFunction.constant(5.0), 1.0, -1.0)  # unrelated solve in between
    b = solve_radial_bvp(p, 0, f, 1.0, 2.0).profile(GRID)
    assert np.array_equal(a, b)


@pytest.mark.parametrize("eps", [0.25, 0.5, 1.0])
@pytest.mark.parametrize("N, mu", [(3, 2.0), (3, -0.25), (2, 0.5)])
def test_admissible_sources_leave_no_singular_part(N, mu, eps):
    p = derive_params(N, mu)
    sol = solve_radial_bvp(p, 0, RadialFunction.power(p.tau_minus - 2.0 + eps))
    assert abs(extract_singularity_coefficient(sol, p)) <= 1e-6


@pytest.mark.parametrize("k", [0.0, 2.5])
def test_extraction_examples(k):
    p = derive_params(3, 2.0)
    green = RadialFunction(lambda r: green_ball_closed(p, 1.0, r))
    assert extract_singularity_coefficient(green, p) == pytest.approx(1.0, abs=1e-10)
    sol = solve_radial_bvp(p, 0, RadialFunction.constant(1.0), 1.0, k)
    assert extract_singularity_coefficient(sol, p) == pytest.approx(k, abs=1e-4)


def test_oscillating_ratio_has_no_limit():
    p = derive_params(3, 2.0)
    bad = RadialFunction(lambda r: phi(p, r) * (1 + 0.1 * np.sin(np.log(r))))
    with pytest.raises(NoLimit):
        extract_singularity_coefficient(bad, p)


def test_annulus_reproduces_green_and_ball_solution():
    p = derive_params(3, 2.0)
    a = 0.25
    g = solve_annulus(p, RadialFunction.constant(0.0), a, 1.0, green_ball_closed(p, 1.0, a))
    r = np.linspace(a, 1.0, 31)
    assert np.allclose(g.profile(r), green_ball_closed(p, 1.0, r), atol=1e-9)
    v = solve_annulus(p, RadialFunction.constant(1.0), a, 1.0, (a - a * a) / 4)
    assert np.allclose(v.profile(r), (r - r * r) / 4, atol=1e-9)
    z = solve_annulus(p, RadialFunction.constant(0.0), a, 1.0, 0.0)
    assert np.all(z.profile(r) == 0.0)
    with pytest.raises(DomainError):
        solve_annulus(p, RadialFunction.constant(1.0), 1.5, 1.0)


@pytest.mark.parametrize("N, mu", [(3, 0.0), (3, 2.0), (2, 0.0), (3, -0.25)])
def test_mollifier_source_and_limit(N, mu):
    p = derive_params(N, mu)
    n = 16
    # delta_n / Gamma integrates to one against d(mu)
    assert integrate_weighted(p, mollifier_source(p, n), 0.0, 2.0 / n) == \
        pytest.approx(1.0, rel=1e-10)
    w = approximate_green_mollifier(p, 1.0, n)
    r = np.linspace(0.2, 1.0, 17)
    assert np.all(w.profile(np.geomspace(1e-6, 1.0, 50)) >= -1e-15)
    assert np.allclose(w.profile(r), green_ball_closed(p, 1.0, r) / p.c_mu, atol=1e-13)


def test_mollifier_worked_value():
    p = derive_params(3, 0.0)
    w = approximate_green_mollifier(p, 1.0, 64)
    # G_0(0.5) = 1/0.5 - 1 = 1 and c_0 = 4 pi
    assert w.profile(0.5) == pytest.approx(1.0 / (4 * math.pi), rel=1e-12)
    assert mollifier_mass(3) > 4 * math.pi / 3  # eta0 = 1 on the unit ball and positive beyond
    with pytest.raises(DomainError):
        approximate_green_mollifier(p, 1.0, 2)
