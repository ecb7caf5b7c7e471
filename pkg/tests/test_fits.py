import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oscdecay.errors import DegenerateFit, InvalidArgument
from oscdecay.fits import fit_loglog, geometric_list, parse_range


@given(st.floats(-3, 3), st.floats(0.1, 10))
def test_exact_power_law_recovered(slope, c):
    x = np.geomspace(1, 1e3, 8)
    fit = fit_loglog(x, c * x**slope)
    assert fit.slope == pytest.approx(slope, abs=1e-9)
    if abs(slope) > 1e-3:
        assert fit.r_squared == pytest.approx(1.0, abs=1e-9)


def test_r_squared_matches_points():
    rng = np.random.default_rng(0)
    x = np.geomspace(1, 100, 10)
    y = x**-0.5 * np.exp(rng.normal(0, 0.1, 10))
    fit = fit_loglog(x, y)
    pts = np.array(fit.points)
    pred = fit.intercept + fit.slope * pts[:, 0]
    ss_res = np.sum((pts[:, 1] - pred) ** 2)
    ss_tot = np.sum((pts[:, 1] - pts[:, 1].mean()) ** 2)
    assert fit.r_squared == pytest.approx(1 - ss_res / ss_tot)
    assert 0 <= fit.r_squared <= 1


def test_fit_needs_six_points():
    with pytest.raises(InvalidArgument):
        fit_loglog([1, 2, 3], [1, 2, 3])


def test_fit_rejects_nonpositive():
    with pytest.raises(DegenerateFit) as exc:
        fit_loglog([1, 2, 3, 4, 5, 6], [1, 0, 1, 1, 1, 1])
    assert len(exc.value.samples) == 6


def test_fit_base_two_units():
    x = 2.0 ** -np.arange(3, 10)
    fit = fit_loglog(x, x**2, base=2)
    assert fit.points[0][0] == pytest.approx(-3)
    assert fit.slope == pytest.approx(2)


def test_parse_range_geometric():
    assert parse_range("1e2:1e5:4") == pytest.approx([1e2, 1e3, 1e4, 1e5])


def test_parse_range_powers_of_two():
    assert parse_range("2^-3:2^-10") == [2.0**-k for k in range(3, 11)]


def test_parse_range_list():
    assert parse_range("1, 2.5,4") == [1, 2.5, 4]


def test_parse_range_errors():
    with pytest.raises(InvalidArgument):
        parse_range("1:2")
    with pytest.raises(InvalidArgument):
        geometric_list(0, 1, 3)
