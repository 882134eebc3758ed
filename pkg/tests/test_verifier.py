import math

import numpy as np
import pytest

from hardyleray import (RadialFunction, check_kato, classify_solution, default_library,
                        derive_params, green_ball_closed, phi, solve_radial_bvp, translated,
                        verify_fundamental_identity, verify_green_identity,
                        verify_weak_solution)
from hardyleray.core import cutoff_bump, quartic_bump, xi0_test_function
from hardyleray.errors import DomainError, NoLimit
from hardyleray.solver import RadialSolution
from hardyleray.verifier import (IdentityResidual, dirac_order_check, identity_sweep,
                                 sign_changes, sweep_mus)


def test_fundamental_worked_values():
    # N=3, mu=2: int_0^1 r (20 - 28 r^2) dr = 3, so lhs = 3 |S^2| = c_mu
    res = verify_fundamental_identity(derive_params(3, 2.0), quartic_bump())
    assert res.lhs == pytest.approx(3.0 * 4 * math.pi, rel=1e-12)
    assert res.abs_residual <= 1e-8
    # threshold branch: int_0^1 (-ln r) r (8 - 16 r^2) dr = 1
    crit = verify_fundamental_identity(derive_params(3, -0.25), quartic_bump())
    assert crit.lhs == pytest.approx(4 * math.pi, rel=1e-10)


@pytest.mark.parametrize("N, mu", [(3, 2.0), (3, -0.25), (2, 0.5), (4, 1.0)])
def test_off_origin_bump_gives_zero(N, mu):
    c = np.zeros(N)
    c[0] = 0.5
    res = verify_fundamental_identity(derive_params(N, mu), translated(quartic_bump(0.2), c))
    assert res.rhs == 0.0
    assert abs(res.lhs) <= 1e-8


@pytest.mark.parametrize("N, mu", [(3, 2.0), (3, -0.25), (2, 0.0), (4, 5.0)])
def test_finite_difference_cross_check(N, mu):
    p = derive_params(N, mu)
    for xi in default_library(1.0):
        exact = verify_fundamental_identity(p, xi)
        fd = verify_fundamental_identity(p, xi, finite_difference=True)
        assert fd.lhs == pytest.approx(exact.lhs, rel=1e-5, abs=1e-5 * p.c_mu)


@pytest.mark.parametrize("N, mu", [(3, 2.0), (3, -0.25), (2, 0.0)])
def test_green_identity_library(N, mu):
    p = derive_params(N, mu)
    for xi in default_library(1.0) + [xi0_test_function(p, 1.0), cutoff_bump(0.5)]:
        res = verify_green_identity(p, 1.0, xi)
        assert not res.violates(1e-6)
    with pytest.raises(DomainError):
        verify_green_identity(p, 0.5, quartic_bump(1.0))


def test_violation_needs_budget_and_tolerance():
    r = IdentityResidual(1.0, 1.1, 0.1, 0.1 / 1.1, 0.2)
    assert not r.violates(1e-6)
    assert IdentityResidual(1.0, 1.1, 0.1, 0.1 / 1.1, 0.0).violates(1e-6)


def test_weak_solution_constant_source():
    p = derive_params(3, 2.0)
    f = RadialFunction.constant(1.0)
    sol = solve_radial_bvp(p, 0, f)
    for res in verify_weak_solution(p, sol, f, 0.0, default_library(1.0)):
        assert res.abs_residual <= 1e-8


def test_weak_solution_with_point_mass():
    p = derive_params(3, 2.0)
    f = RadialFunction.power(p.tau_minus - 1.5)
    sol = solve_radial_bvp(p, 0, f, 1.0, 2.0)
    for res in verify_weak_solution(p, sol, f, 2.0, default_library(1.0)):
        assert res.abs_residual <= 1e-6 * max(1.0, abs(res.rhs))
    assert classify_solution(p, sol, f).k_hat == pytest.approx(2.0, abs=1e-4)
    # f = 0, k = 1 is the Green identity
    zero = RadialFunction.constant(0.0)
    g = solve_radial_bvp(p, 0, zero, 1.0, 1.0)
    weak = verify_weak_solution(p, g, zero, 1.0, [quartic_bump()])[0]
    green = verify_green_identity(p, 1.0, quartic_bump())
    assert weak.lhs == pytest.approx(green.lhs, rel=1e-10)
    with pytest.raises(DomainError):
        verify_weak_solution(p, g, zero, 1.0, [translated(quartic_bump(0.2), (0.5, 0, 0))])


@pytest.mark.parametrize("N, mu", [(3, 2.0), (3, 0.0), (3, -0.25), (2, 0.5)])
def test_kato_examples(N, mu):
    p = derive_params(N, mu)
    xi = xi0_test_function(p, 1.0)
    f = RadialFunction(lambda r: np.sin(6 * math.pi * np.asarray(r, float)), name="sin6")
    rep = check_kato(p, solve_radial_bvp(p, 0, f), f, xi)
    assert rep.holds
    assert rep.slack_abs > 10 * rep.budget  # strict
    zero = RadialFunction.constant(0.0)
    rz = check_kato(p, solve_radial_bvp(p, 0, zero), zero, xi)
    assert rz.lhs_abs == rz.rhs_abs == rz.lhs_plus == rz.rhs_plus == 0.0


def test_sign_changes_finds_roots():
    roots = sign_changes(lambda r: np.cos(5 * math.pi * np.asarray(r, float)), 0.0, 1.0)
    assert np.allclose(roots, [(2 * j + 1) / 10 for j in range(5)], atol=1e-12)


def test_classification_examples():
    p = derive_params(3, 2.0)
    f = RadialFunction.constant(1.0)
    r = lambda t: np.asarray(t, float)  # noqa: E731
    prof = RadialFunction(lambda t: 3.0 * green_ball_closed(p, 1.0, r(t)) + (r(t) - r(t) ** 2) / 4)
    cls = classify_solution(p, RadialSolution(prof, 3.0, 0.0, 0, 0.0, p), f)
    assert cls.k_hat == pytest.approx(3.0, abs=1e-4)
    assert cls.decomposition_residual <= 1e-6
    v = classify_solution(p, solve_radial_bvp(p, 0, f), f)
    assert v.k_hat == pytest.approx(0.0, abs=1e-4)
    bad = RadialFunction(lambda t: phi(p, r(t)) * (1 + 0.1 * np.sin(np.log(r(t)))))
    with pytest.raises(NoLimit):
        classify_solution(p, RadialSolution(bad, 0.0, 0.0, 0, 0.0, p), f)


@pytest.mark.parametrize("N, mu", [(3, 2.0), (3, -0.25), (2, 0.5)])
def test_dirac_mass_has_order_zero(N, mu):
    p = derive_params(N, mu)
    f = RadialFunction.power(p.tau_minus - 1.5)
    rep = dirac_order_check(p, solve_radial_bvp(p, 0, f, 1.0, 1.0), f)
    assert rep.bounded
    # the defect is c_mu k xi(0) for every eps
    assert np.allclose(rep.values, rep.expected, rtol=1e-5)


def test_identity_sweep_grid():
    assert sweep_mus(3) == (-0.25, 0.25, 0.0, 1.0, 5.0)
    assert sweep_mus(2) == (0.0, 0.5, 1.0, 5.0)
    rows = identity_sweep(dims=(3,), mus=(2.0, -0.25), which="fundamental")
    assert len(rows) == 2 * len(default_library(1.0))
    assert all(res.rel_residual <= 1e-6 for *_, res in rows)
