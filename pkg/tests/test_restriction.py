import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oscdecay import restriction as Rs
from oscdecay.core import Weights
from oscdecay.errors import InvalidArgument, PreconditionViolated
from oscdecay.fourier import Frequency4

EPS_LIST = [2.0**-k for k in range(1, 9)]


@pytest.fixture(scope="module")
def eta(phi, w, region):
    return Rs.find_eta(phi, w, Rs.default_s_band(region))


def test_default_band_is_middle_third(region):
    lo, hi = Rs.default_s_band(region)
    assert hi - lo == pytest.approx((region.d - region.c) / 3)
    assert lo - region.c == pytest.approx(region.d - hi)


def test_patch_measure_matches_grid(w, region):
    band = Rs.default_s_band(region)
    # x = (t^a1, t^a2 s) has Jacobian a1 t^(a1+a2-1)
    t = np.linspace(0.5, 1.0, 200001)
    trap = getattr(np, "trapezoid", None) or np.trapz
    ref = trap(0.5 * t**0.5, t) * (band[1] - band[0])
    assert Rs.patch_measure(w, band) == pytest.approx(ref, rel=1e-9)


def test_eta_is_admissible_half_of_sup(phi, w, region, eta):
    band = Rs.default_s_band(region)
    assert Rs.eta_admissible(phi, w, eta, band)
    assert not Rs.eta_admissible(phi, w, 1.0, band)
    assert eta == pytest.approx(0.5, abs=1e-9)


def test_box_transform_at_origin_is_volume(w):
    assert Rs.knapp_box_transform(w, 0.5, Frequency4.of(0, 0, 0, 0)) == pytest.approx(2**13.5)


def test_box_transform_vanishes_at_side_frequency(w):
    L = Rs.box_sides(w, 0.5)
    for j in range(4):
        xi = [0.0] * 4
        xi[j] = 2 * math.pi / L[j]
        assert abs(Rs.knapp_box_transform(w, 0.5, xi)) < 1e-9 * 2**13.5


def test_box_transform_monte_carlo(w):
    rng = np.random.default_rng(7)
    L = Rs.box_sides(w, 0.5)
    n = 400_000
    pts = rng.random((n, 4)) * L
    xi = np.array([0.3, -0.4, 0.01, -0.02])
    samples = np.exp(-1j * pts @ xi)
    vol = float(np.prod(L))
    est = vol * samples.mean()
    sigma = vol * samples.std() / math.sqrt(n)
    assert abs(est - Rs.knapp_box_transform(w, 0.5, xi)) < 5 * sigma


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-0.1, 0.1), st.floats(-0.1, 0.1))
def test_box_transform_conjugate_symmetry(a, b, c, d):
    w = Weights(Fraction(1, 2), 1, 6)
    u = Rs.knapp_box_transform(w, 0.25, [a, b, c, d])
    v = Rs.knapp_box_transform(w, 0.25, [-a, -b, -c, -d])
    assert abs(u - np.conj(v)) <= 1e-9 * abs(Rs.knapp_box_transform(w, 0.25, [0, 0, 0, 0]))


def test_box_rejects_bad_epsilon(phi, w, region):
    with pytest.raises(InvalidArgument):
        Rs.KnappBox.build(phi, w, region, 1.5)
    with pytest.raises(InvalidArgument):
        Rs.knapp_box_transform(w, 0.0, [0, 0, 0, 0])


def test_box_rejects_band_outside_sector(phi, w, region):
    with pytest.raises(InvalidArgument):
        Rs.KnappBox.build(phi, w, region, 0.5, s_band=(0.9, 0.99))


def test_box_rejects_inadmissible_eta(phi, w, region):
    with pytest.raises(PreconditionViolated):
        Rs.KnappBox.build(phi, w, region, 0.5, eta=1.0)


def test_constant_transform_gives_surface_area(phi, w, region, eta):
    box = Rs.KnappBox.build(phi, w, region, 0.5, eta)
    one = lambda eps, X: np.ones(X.shape[1:])
    total = Rs.restriction_norm(phi, w, region, box, 1.0, patch_only=False, transform=one)
    assert total == pytest.approx(2 / 297, rel=1e-12)
    patch = Rs.restriction_norm(phi, w, region, box, 1.0, transform=one)
    band = box.s_band
    assert patch == pytest.approx(Rs.patch_measure(w, band) * (box.epsilon * eta) ** 1.5, rel=1e-12)


@pytest.mark.parametrize("q", [1.0, 2.0, 4.0])
def test_full_norm_dominates_patch(phi, w, region, eta, q):
    box = Rs.KnappBox.build(phi, w, region, 0.5, eta)
    full = Rs.restriction_norm(phi, w, region, box, q, patch_only=False, n=96)
    patch = Rs.restriction_norm(phi, w, region, box, q)
    assert full >= patch


def test_patch_factors_bounded_below(phi, w, region, eta):
    for eps in EPS_LIST:
        box = Rs.KnappBox.build(phi, w, region, eps, eta)
        assert Rs.patch_factor_min(phi, w, box) >= Rs.SIN1


def test_restriction_norm_rejects_small_q(phi, w, region, eta):
    box = Rs.KnappBox.build(phi, w, region, 0.5, eta)
    with pytest.raises(InvalidArgument):
        Rs.restriction_norm(phi, w, region, box, 0.5)


@pytest.mark.parametrize("q, slope", [(1.0, -12.0), (2.0, -12.75)])
def test_knapp_fit_slopes(phi, w, region, q, slope):
    fit = Rs.knapp_exponent_fit(phi, w, region, q, EPS_LIST)
    assert fit.predicted_slope == slope
    assert fit.fit.slope == pytest.approx(slope, abs=1e-6)
    assert fit.fit.r_squared > 0.999999
    assert fit.factor_min >= Rs.SIN1
    assert fit.f_norms[0] == pytest.approx(0.5 ** (-13.5 / 2))


@pytest.mark.parametrize("eps_list", [
    EPS_LIST[:5],
    [2.0**-k for k in np.linspace(1, 5, 8)],
    [2.0**-k for k in range(6, 14)],
])
def test_knapp_fit_preconditions(phi, w, region, eps_list):
    with pytest.raises(InvalidArgument):
        Rs.knapp_exponent_fit(phi, w, region, 2.0, eps_list)


def test_critical_exponents_exact(w):
    table = Rs.critical_exponents(w)
    assert table.restriction_threshold == Fraction(17, 18)
    assert table.knapp_slope_factor == 9
    assert table.quadrilateral[2] == (Fraction(17, 18), 1)
    assert table.quadrilateral[3] == (Fraction(17, 18), Fraction(1, 2))


def test_knapp_line_at_threshold(w):
    thr = Rs.critical_exponents(w).restriction_threshold
    assert Rs.knapp_line(w, thr) == Fraction(1, 2)
    assert Rs.knapp_line(w, 1) == 0
