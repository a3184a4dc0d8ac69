import math

import numpy as np
import pytest

from dislocore.errors import SingularGammaError, ToleranceError
from dislocore.gamma import GammaSurface
from dislocore.pn import (
    apply_second_variation,
    displacement,
    el_residual,
    el_residual_profile,
    first_integral_residual,
    pn_energy,
    pn_stability_kappa,
    ramp_profile,
    solve_pn,
    zero_mode,
)

SQRT8PI = math.pi * math.sqrt(8.0)


def closed_form(x):
    return 2.0 / math.pi * np.arctan(np.exp(SQRT8PI * np.asarray(x)))


def test_closed_form_profile(sinusoid_sol):
    x = np.linspace(-5, 5, 4001)
    assert np.max(np.abs(sinusoid_sol(x) - closed_form(x))) <= 1e-8
    assert abs(sinusoid_sol(0.25) - closed_form(0.25)) <= 1e-8
    assert sinusoid_sol(0.0) == 0.5


def test_closed_form_derivatives(sinusoid_sol):
    x = np.linspace(-1, 1, 201)
    z = SQRT8PI * x
    d1 = 2.0 / math.pi * SQRT8PI / (2 * np.cosh(z))
    assert np.max(np.abs(sinusoid_sol.deriv(1, x) - d1)) <= 1e-8 * np.max(d1)


def test_closed_form_energy(sinusoid_sol):
    assert abs(pn_energy(sinusoid_sol) - 2 * math.sqrt(2) / math.pi) <= 1e-8


def test_symmetry(gamma_lj):
    sol = solve_pn(gamma_lj)
    x = np.random.default_rng(5).uniform(0, sol.L, 50)
    assert np.max(np.abs(sol(x) + sol(-x) - 1.0)) <= 1e-10


def test_displacement(sinusoid_sol):
    up, um = displacement(sinusoid_sol, 0.0)
    assert (up, um) == (0.25, -0.25)
    up, um = displacement(sinusoid_sol, 50.0)
    assert abs(up - 0.5) < 1e-12 and abs(um + 0.5) < 1e-12
    up, um = displacement(sinusoid_sol, 1.0)
    assert abs(up - 0.5 * closed_form(1.0)) <= 1e-8


def test_monotone_and_first_integral(gamma_lj):
    sol = solve_pn(gamma_lj)
    x = np.linspace(-sol.L, sol.L, 5001)
    assert np.all(np.diff(sol(x)) >= 0)
    assert first_integral_residual(sol) <= sol.tol
    assert first_integral_residual(sol, x) <= sol.tol


def test_energy_scaling():
    g1 = GammaSurface.sinusoidal(0.3, 1.5)
    g2 = GammaSurface.sinusoidal(0.6, 3.0)
    e1 = pn_energy(solve_pn(g1))
    e2 = pn_energy(solve_pn(g2))
    assert math.isclose(e2, 2 * e1, rel_tol=1e-10)


def test_energy_positive(gamma_lj):
    assert pn_energy(solve_pn(gamma_lj)) > 0


def test_el_residual(sinusoid_sol, gamma_lj):
    assert el_residual(sinusoid_sol, 2048) <= 1e-7
    assert el_residual(solve_pn(gamma_lj), 2048) <= 1e-7


@pytest.mark.parametrize("order", [4, 6])
def test_el_residual_order(sinusoid_sol, order):
    r1 = el_residual(sinusoid_sol, 513, order=order)
    r2 = el_residual(sinusoid_sol, 1025, order=order)
    assert r1 / r2 >= 0.9 * 2**order


def test_el_residual_rejects_other_profiles(sinusoid, sinusoid_sol):
    x = np.linspace(-2, 2, 801)
    # the constant 1/2 is a critical point but carries no dislocation
    half = np.full_like(x, 0.5)
    assert el_residual_profile(half, x, sinusoid, 1.0) <= 1e-12
    assert sinusoid(0.5) > 0
    assert el_residual_profile(ramp_profile(x), x, sinusoid, 1.0) > 1.0


def test_zero_mode():
    g = GammaSurface.sinusoidal(1.0 / (8 * math.pi**2), 1.0)
    sol = solve_pn(g)
    assert math.isclose(sol.tail_rate, 1.0, rel_tol=1e-14)
    z1 = zero_mode(sol, 1e-2)
    z2 = zero_mode(sol, 5e-3)
    assert z1.residual <= 1e-4
    assert 3.5 <= z1.residual / z2.residual <= 4.5
    assert math.isclose(sol.deriv(1, 0.0), math.sqrt(4 * g(0.5) / g.alpha), rel_tol=1e-14)


def test_constants_are_in_the_kernel(sinusoid_sol):
    x = np.linspace(-2, 2, 401)
    c = np.full_like(x, 0.3)
    rp, rm = apply_second_variation(sinusoid_sol, x, c, c)
    assert np.max(np.abs(rp)) == 0 and np.max(np.abs(rm)) == 0


def test_kappa(sinusoid_sol, baselines):
    k1 = pn_stability_kappa(sinusoid_sol, 512)
    k2 = pn_stability_kappa(sinusoid_sol, 1024)
    assert k1 > 0
    assert abs(k2 - k1) <= 0.05 * k1
    assert math.isclose(k1, baselines["kappa_sinusoid_A1_alpha1_N512"], rel_tol=1e-9)
    g = sinusoid_sol.gamma
    assert k1 <= min(sinusoid_sol.alpha, 0.5 * g.gamma2_at_0)


def test_unpinned_kappa_sees_the_zero_mode(sinusoid_sol):
    k = pn_stability_kappa(sinusoid_sol, 1024)
    k_free = pn_stability_kappa(sinusoid_sol, 1024, pin="left")
    assert abs(k_free) <= 1e-3 * k


def test_tail_rate(gamma_lj):
    sol = solve_pn(gamma_lj)
    x = np.linspace(-sol.L, -sol.L / 2, 200)
    slope = np.polyfit(x, np.log(sol(x)), 1)[0]
    assert abs(slope - sol.tail_rate) <= 0.02 * sol.tail_rate
    xr = -x
    slope_r = np.polyfit(xr, np.log(1 - sol(xr)), 1)[0]
    assert abs(slope_r + sol.tail_rate) <= 0.02 * sol.tail_rate


def test_singular_gamma():
    # period 1/2: gamma vanishes at phi = 1/2
    g = GammaSurface(np.array([0.0, 1.0]), 1.0)
    with pytest.raises(SingularGammaError):
        solve_pn(g)


def test_unreachable_tolerance(sinusoid):
    with pytest.raises(ToleranceError):
        solve_pn(sinusoid, tol=1e-30)
