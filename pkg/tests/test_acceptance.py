"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""

import math

import numpy as np
from scipy import integrate

from hardyleray import (GreenKernelSeries, RadialFunction, approximate_green_mollifier,
                        check_kato, check_kernel_bounds, classify_solution, derive_params,
                        green_ball_closed, green_kernel, nonexistence_probe, solve_dual_radial,
                        solve_radial_bvp, sub_hardy_probe, verify_fundamental_identity,
                        verify_green_identity)
from hardyleray.core import quartic_bump, sphere_area
from hardyleray.green import classical_ball_green, sample_pairs
from hardyleray.probes import eigen_closed_form, eigen_scan
from hardyleray.verifier import dirac_order_check, green_operator_values, sweep_mus

DIMS = (2, 3, 4)


def _grid():
    return [(N, mu) for N in DIMS for mu in sweep_mus(N)]


def test_criterion_01_fundamental_identity(criterion):
    worst = 0.0
    for N, mu in _grid():
        res = verify_fundamental_identity(derive_params(N, mu), quartic_bump())
        worst = max(worst, res.abs_residual / derive_params(N, mu).c_mu)
    # hand-derived radial integrals, evaluated on explicit polynomials
    # N=3, mu=2: tau_+ = 1, effective dimension 5, L* xi = 20 - 28 r^2, weight r
    oracle_a = integrate.quad(lambda r: r * (20.0 - 28.0 * r * r), 0.0, 1.0)[0]
    # N=3, mu=mu0: effective dimension 2, L* xi = 8 - 16 r^2, weight -r ln r
    oracle_b = integrate.quad(lambda r: -r * math.log(r) * (8.0 - 16.0 * r * r), 0.0, 1.0)[0]
    area = sphere_area(3)
    got_a = verify_fundamental_identity(derive_params(3, 2.0), quartic_bump()).lhs / area
    got_b = verify_fundamental_identity(derive_params(3, -0.25), quartic_bump()).lhs / area
    sym = max(abs(got_a - 3.0), abs(oracle_a - 3.0), abs(got_b - 1.0), abs(oracle_b - 1.0))
    ok = worst <= 1e-6 and sym <= 1e-8
    criterion(1, ok, f"max |res|/c_mu = {worst:.2e} (<= 1e-6); symbolic err = {sym:.2e} (<= 1e-8)")


def test_criterion_02_green_identity(criterion):
    worst = 0.0
    for N, mu in _grid():
        worst = max(worst, verify_green_identity(derive_params(N, mu), 1.0,
                                                 quartic_bump()).rel_residual)
    criterion(2, worst <= 1e-6, f"max relative residual = {worst:.2e} (<= 1e-6, incl. mu0)")


def test_criterion_03_closed_form_roundtrip(criterion):
    p = derive_params(3, 2.0)
    r = np.unique(np.concatenate([np.geomspace(1e-12, 1.0, 400), np.linspace(1e-3, 1.0, 400)]))
    u = solve_radial_bvp(p, 0, RadialFunction.constant(1.0))
    e_u = float(np.max(np.abs(u.profile(r) - (r - r * r) / 4.0)))
    xi = solve_dual_radial(p, RadialFunction.constant(1.0))
    e_xi = float(np.max(np.abs(xi.profile(r) - (1.0 - r * r) / 10.0)))
    ok = e_u <= 1e-9 and e_xi <= 1e-10
    criterion(3, ok, f"solve sup err = {e_u:.2e} (<= 1e-9); dual sup err = {e_xi:.2e} (<= 1e-10)")


def test_criterion_04_classification_roundtrip(criterion):
    worst_k, worst_res = 0.0, 0.0
    for N, mu in ((3, 2.0), (3, -0.25), (2, 0.5), (4, 1.0)):
        p = derive_params(N, mu)
        f = RadialFunction.power(p.tau_minus - 2.0 + 0.5)
        for k in (0.0, 1.0, 2.5):
            cls = classify_solution(p, solve_radial_bvp(p, 0, f, 1.0, k), f)
            worst_k = max(worst_k, abs(cls.k_hat - k))
            worst_res = max(worst_res, cls.decomposition_residual)
    ok = worst_k <= 1e-4 and worst_res <= 1e-6
    criterion(4, ok, f"max |k_hat - k| = {worst_k:.2e} (<= 1e-4); "
                     f"decomposition residual = {worst_res:.2e} (<= 1e-6)")


def test_criterion_05_sharpness_dichotomy(criterion):
    p = derive_params(3, 2.0)
    x0 = 0.5
    edge = nonexistence_probe(p, RadialFunction.power(p.tau_minus - 2.0), x0, 256)
    f = RadialFunction.power(p.tau_minus - 2.0 + 0.2)
    inside = nonexistence_probe(p, f, x0, 256)
    target = float(green_operator_values(p, f, 1.0, [x0])[0])
    gap = abs(inside.growth_fit.asymptote - target)
    fit = edge.growth_fit
    ok = (fit.model == "log" and fit.r_squared >= 0.999 and not inside.unbounded
          and gap <= 1e-4)
    criterion(5, ok, f"edge source: {fit.model} fit, R^2 = {fit.r_squared:.6f} (>= 0.999); "
                     f"interior source: {inside.growth_fit.model}, |limit - G[f]| = {gap:.2e} "
                     "(<= 1e-4)")


def _random_sign_changing(rng):
    while True:
        a = rng.normal(size=4)
        c = rng.normal()

        def f(r, a=a, c=c):
            r = np.asarray(r, float)
            return c + sum(aj * np.cos((j + 1) * math.pi * r) for j, aj in enumerate(a))
        vals = f(np.linspace(0.0, 1.0, 501))
        if vals.min() < 0.0 < vals.max():
            return RadialFunction(f, name="random-cosine")


def test_criterion_06_kato_inequalities(criterion):
    rng = np.random.default_rng(2024)
    regimes = [derive_params(3, 2.0), derive_params(3, 0.0), derive_params(3, -0.25),
               derive_params(2, 0.5)]
    xi = quartic_bump()
    worst_slack = math.inf
    failures = 0
    for i in range(50):
        p = regimes[i % len(regimes)]
        f = _random_sign_changing(rng)
        rep = check_kato(p, solve_radial_bvp(p, 0, f), f, xi)
        failures += not rep.holds
        worst_slack = min(worst_slack, rep.slack_abs + rep.budget, rep.slack_plus + rep.budget)
    eq = 0.0
    for p in regimes:
        f = RadialFunction(lambda r: 1.0 + np.asarray(r, float) ** 2, name="positive")
        rep = check_kato(p, solve_radial_bvp(p, 0, f), f, xi)
        eq = max(eq, abs(rep.slack_abs) / max(abs(rep.rhs_abs), 1.0))
    ok = failures == 0 and eq <= 1e-8
    criterion(6, ok, f"{50 - failures}/50 random sources hold (min slack + budget = "
                     f"{worst_slack:.2e}); nonnegative-source equality err = {eq:.2e} (<= 1e-8)")


def test_criterion_07_mollifier_convergence(criterion):
    r = np.linspace(0.4, 0.9, 201)
    ns = (8, 16, 32, 64)
    monotone, final = True, 0.0
    floor = 1e-14  # roundoff level of the comparison itself
    for N, mu in ((3, 2.0), (3, -0.25), (3, 0.0), (2, 0.0), (4, 1.0)):
        p = derive_params(N, mu)
        G = green_ball_closed(p, 1.0, r)
        errs = [float(np.max(np.abs(p.c_mu * approximate_green_mollifier(p, 1.0, n).profile(r)
                                    - G))) for n in ns]
        monotone &= all(b <= a + floor for a, b in zip(errs, errs[1:]))
        final = max(final, errs[-1])
    ok = monotone and final <= 1e-3
    criterion(7, ok, f"sup errors non-increasing in n (roundoff floor {floor:g}): {monotone}; "
                     f"error at n=64 = {final:.2e} (<= 1e-3)")


def test_criterion_08_kernel_bounds(criterion):
    violations = 0
    for mu in (2.0, 0.0, -0.25):
        rep = check_kernel_bounds(GreenKernelSeries(derive_params(3, mu)), 1000, seed=0)
        violations += rep.violations
    # the pole limit is approached at rate |y|^(tau_+(l=1) - tau_+(l=0)), slowest for mu=2
    rng = np.random.default_rng(7)
    pole = {}
    for mu in (2.0, 0.0, -0.25):
        p = derive_params(3, mu)
        gk = GreenKernelSeries(p, max_mode=128)
        dev = 0.0
        for _ in range(20):
            x = rng.normal(size=3)
            x *= rng.uniform(0.1, 0.8) / np.linalg.norm(x)
            y = rng.normal(size=3)
            y *= 10.0 ** rng.uniform(-5.0, -3.0) / np.linalg.norm(y)
            ratio = green_kernel(gk, x, y) / (green_ball_closed(p, 1.0, np.linalg.norm(x))
                                              / p.c_mu)
            dev = max(dev, abs(ratio - 1.0))
        pole[mu] = dev
    gk0 = GreenKernelSeries(derive_params(3, 0.0), max_mode=256)
    xs, ys = sample_pairs(3, 1.0, 200, seed=3)
    classical = max(abs(gk0.lebesgue(x, y) / classical_ball_green(x, y) - 1.0)
                    for x, y in zip(xs, ys))
    ok = violations == 0 and max(pole.values()) <= 0.01 and classical <= 1e-6
    devs = ", ".join(f"mu={m:g}: {d:.2e}" for m, d in pole.items())
    criterion(8, ok, f"violations = {violations}; max |pole ratio - 1| ({devs}) (<= 1e-2); "
                     f"mu=0 vs classical rel err = {classical:.2e} (<= 1e-6)")


def test_criterion_09_eigenvalue_mechanism(criterion):
    eps = (1e-2, 1e-3, 1e-4)
    curve = eigen_scan(3, 1.0, eps)
    rel = max(abs(l / eigen_closed_form(3, 1.0, e) - 1.0)
              for e, l in zip(curve.eps_list, curve.lambda1))
    dec = all(b < a for a, b in zip(curve.lambda1, curve.lambda1[1:]))
    above = all(l > 0.25 for l in curve.lambda1)
    ok = rel <= 5e-3 and dec and above
    criterion(9, ok, f"max rel diff to closed form = {rel:.2e} (<= 5e-3); decreasing: {dec}; "
                     f"> 1/4: {above}")


def test_criterion_10_sub_hardy_oscillation(criterion):
    rep = sub_hardy_probe(3, -1.25, n_zeros=12)
    errs = rep.relative_errors()
    tail = float(np.max(errs[6:])) if len(errs) > 6 else math.inf
    ok = len(errs) >= 7 and tail <= 1e-3 and abs(rep.predicted_ratio - math.exp(math.pi)) < 1e-9
    criterion(10, ok, f"{len(rep.zero_locations)} zeros; max ratio rel err from the 8th zero on "
                      f"= {tail:.2e} (<= 1e-3) vs e^pi")


def test_criterion_11_dirac_order_zero(criterion):
    p3 = derive_params(3, 2.0)
    f3 = RadialFunction.power(p3.tau_minus - 2.0 + 0.5)
    r3 = dirac_order_check(p3, solve_radial_bvp(p3, 0, f3, 1.0, 1.0), f3)
    p2 = derive_params(2, 0.5)
    f2 = RadialFunction.power(p2.tau_minus - 2.0 + 0.5)
    r2 = dirac_order_check(p2, solve_radial_bvp(p2, 0, f2, 1.0, 1.0), f2)
    ok = r3.bounded and r2.bounded and r2.log_slope <= 1.1
    criterion(11, ok, f"N=3 max|F| = {max(map(abs, r3.values)):.4g} (bounded: {r3.bounded}); "
                      f"N=2 slope in |ln eps| = {r2.log_slope:.2e} (<= 1.1)")
