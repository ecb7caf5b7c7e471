import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oscdecay import fourier as F
from oscdecay.core import BivariatePolynomial, Surface, SectorRegion, SurfaceMap, Weights
from oscdecay.errors import BudgetExceeded, InvalidArgument

# mpmath quad at 20 digits, frozen
ORACLE_I = {
    (5.0, -3.0, 50.0): -0.10459772601119574596 - 0.16107006133189254607j,
    (0.0, 0.0, 1000.0): 0.099413948558376012126 - 0.041027717772355309006j,
}
ORACLE_MU = {
    (0.0, 0.0, 0.0, 100.0): 0.0035286619961725612046 - 0.0012221889280900241534j,
    (3.0, -2.0, 40.0, -70.0): 0.0033413924230347555553 - 0.0022958454157380798804j,
}
MU0 = 2.0 / 297.0


def _trapezoid_I(w, A1, A2, A3, n=1_000_000):
    a1, a2, m = w.floats()
    t = np.linspace(0.0, 1.0, n + 1)
    f = np.exp(-1j * (A1 * t**a1 + A2 * t**a2 + A3 * t**m)) * t ** (a1 + a2 - 1)
    return complex(np.trapezoid(f, t) if hasattr(np, "trapezoid") else np.trapz(f, t))


# one-dimensional integral

def test_I_at_zero_is_exact(w):
    res = F.oscillatory_integral_1d(w, 0, 0, 0)
    assert res.value == pytest.approx(1.0 / 1.5, abs=1e-14)


def test_I_matches_fine_trapezoid(w):
    res = F.oscillatory_integral_1d(w, 5, -3, 50)
    assert abs(res.value - _trapezoid_I(w, 5, -3, 50)) < 1e-7


@pytest.mark.parametrize("args", sorted(ORACLE_I))
def test_I_matches_mpmath(w, args):
    res = F.oscillatory_integral_1d(w, *args)
    assert abs(res.value - ORACLE_I[args]) < 1e-10
    assert res.abs_error_estimate < 1e-9


def test_I_with_tolerance_refines(w):
    res = F.oscillatory_integral_1d(w, 5, -3, 50, tol=1e-13)
    assert res.abs_error_estimate <= 1e-13
    assert abs(res.value - ORACLE_I[(5.0, -3.0, 50.0)]) < 1e-12


def test_I_budget_exceeded_keeps_best(w, monkeypatch):
    monkeypatch.setattr(F, "MAX_PANELS", 2000)
    with pytest.raises(BudgetExceeded) as info:
        F.oscillatory_integral_1d(w, 0, 0, 1000, tol=1e-15)
    best = info.value.best
    assert best is not None
    assert abs(best.value - ORACLE_I[(0.0, 0.0, 1000.0)]) < 1e-8


def test_I_budget_exceeded_without_value(w, monkeypatch):
    monkeypatch.setattr(F, "MAX_PANELS", 10)
    with pytest.raises(BudgetExceeded):
        F.oscillatory_integral_1d(w, 0, 0, 1e6)


def test_I_conjugate_symmetry(w):
    a = F.oscillatory_integral_1d(w, 2, 7, -30).value
    b = F.oscillatory_integral_1d(w, -2, -7, 30).value
    assert abs(a - b.conjugate()) < 1e-13


# surface transform

def test_mu_hat_at_zero_is_area(phi, w, region):
    res = F.mu_hat(phi, w, region, F.Frequency4.of(0, 0, 0, 0))
    assert res.value == pytest.approx(MU0, abs=1e-12)


@pytest.mark.parametrize("xi", sorted(ORACLE_MU))
def test_mu_hat_matches_mpmath(phi, w, region, xi):
    res = F.mu_hat(phi, w, region, F.Frequency4.of(*xi))
    err = abs(res.value - ORACLE_MU[xi])
    assert err <= res.abs_error_estimate
    assert err < 1e-8


def test_mu_hat_empty_region(phi, w):
    res = F.mu_hat(phi, w, SectorRegion(0.5, 0.5), F.Frequency4.of(1, 2, 3, 4))
    assert res.value == 0


freq = st.floats(-60, 60, allow_nan=False)


@settings(max_examples=15)
@given(freq, freq, freq, freq)
def test_mu_hat_conjugate_symmetry_and_bound(phi, w, region, a, b, c, d):
    xi = F.Frequency4.of(a, b, c, d)
    v = F.mu_hat(phi, w, region, xi).value
    u = F.mu_hat(phi, w, region, -xi).value
    assert abs(v - u.conjugate()) < 1e-10
    assert abs(v) <= MU0 + 1e-10


@pytest.mark.parametrize("xi", [(0, 0, 0, 100), (3, -2, 40, -70), (10, 10, -500, 200)])
def test_mu_hat_halving_step_within_estimate(phi, w, region, xi):
    f = F.Frequency4.of(*xi)
    coarse = F.mu_hat(phi, w, region, f, h_max=0.125)
    fine = F.mu_hat(phi, w, region, f, h_max=0.0625)
    assert abs(coarse.value - fine.value) <= max(coarse.abs_error_estimate, 1e-13)


def test_frequency_negation_and_norm():
    f = F.Frequency4.of(1, 2, 3, 4)
    assert (-f).xi_prime == (-1.0, -2.0)
    assert f.dprime_norm == pytest.approx(5.0)


# van der Corput scan

def test_vdc_single_point_is_plain_modulus(w):
    scan = F.vdc_constant_scan(w, [1.0], A12_grid=(0.0, 1), exponent=0.0)
    ref = abs(F.oscillatory_integral_1d(w, 0, 0, 1, order=F.GAUSS_ORDER).value)
    assert scan.decade_sups[0] == pytest.approx(ref, rel=1e-10)


def test_vdc_scan_bounded_at_decay_exponent(w):
    scan = F.vdc_constant_scan(w, [10, 1e2, 1e3], A12_grid=(3.0, 3))
    assert scan.bounded and not scan.growth_flag


def test_vdc_scan_flags_growth_for_large_exponent(w):
    scan = F.vdc_constant_scan(w, [10, 1e2, 1e3], A12_grid=(3.0, 3), exponent=0.5)
    assert scan.growth_flag and not scan.bounded


def test_vdc_rejects_small_A3(w):
    with pytest.raises(InvalidArgument):
        F.vdc_constant_scan(w, [0.5, 10])


# singular integral

def test_section_integral_closed_form():
    g = np.polynomial.Polynomial([-0.5, 1.0])
    res = F.section_integral(g, 0.0, 1.0, 0.25)
    exact = 2 * 0.5**0.75 / 0.75
    assert res.value == pytest.approx(exact, rel=1e-12)
    assert res.zeros == [pytest.approx(0.5)]


def test_section_integral_double_root_closed_form():
    g = np.polynomial.Polynomial([0.0, 0.0, 1.0])
    res = F.section_integral(g, 0.0, 1.0, 0.25)
    assert res.value == pytest.approx(2.0, rel=1e-12)


def test_section_integral_divergent():
    g = np.polynomial.Polynomial([0.0, 0.0, 0.0, 0.0, 1.0])
    assert F.section_integral(g, 0.0, 1.0, 0.25).divergent
    assert F.section_integral(np.polynomial.Polynomial([0.0]), 0.0, 1.0, 0.25).divergent


def test_section_integral_without_zero_matches_gauss():
    g = np.polynomial.Polynomial([2.0, 1.0, 0.5])
    x, wt = np.polynomial.legendre.leggauss(60)
    s = 0.5 + 0.5 * x
    ref = float(np.sum(0.5 * wt * g(s) ** -0.25))
    assert F.section_integral(g, 0.0, 1.0, 0.25).value == pytest.approx(ref, rel=1e-12)


def test_singular_sup_finite_on_example(phi, w, region):
    res = F.singular_integral_sup(phi, w, region, zeta_angles=360)
    assert math.isfinite(res.sup_value)
    assert not res.divergence_suspected
    assert abs(res.refinement_ratio - 1) < 0.01


def test_singular_sup_flags_divergence(w, region):
    # phi2 vanishes identically and phi1 has a fourth-order zero in s
    p1 = BivariatePolynomial(((0, 4, 1.0),))
    p2 = BivariatePolynomial(((0, 4, 0.0),))
    res = F.singular_integral_sup(SurfaceMap(p1, p2), w, SectorRegion(-1.0, 1.0), zeta_angles=360)
    assert res.divergence_suspected


def test_singular_sup_rejects_coarse_grid(phi, w, region):
    with pytest.raises(InvalidArgument):
        F.singular_integral_sup(phi, w, region, zeta_angles=100)


# decay fits

def test_decay_fit_requires_eight_radii(surface):
    with pytest.raises(InvalidArgument):
        F.decay_fit(surface, [0.0], [(0, 0)], [1e2, 1e5])


def test_decay_fit_requires_three_decades(surface):
    with pytest.raises(InvalidArgument):
        F.decay_fit(surface, [0.0], [(0, 0)], np.geomspace(1e2, 1e4, 8))


def test_decay_fit_direction_pair_conjugate(surface):
    radii = np.geomspace(1e2, 1e5, 8)
    rep = F.decay_fit(surface, [0.3, 0.3 + math.pi], [(0, 0)], radii)
    a, b = rep.fits
    assert a.values == pytest.approx(b.values, rel=1e-9)
    assert rep.predicted_slope == -0.25
    assert a.fit.r_squared > 0.99
    assert a.fit.slope == pytest.approx(-0.25, abs=0.05)


def test_map_ordered_preserves_order():
    assert F.map_ordered(abs, [-3, 1, -2], jobs=2) == [3, 1, 2]
