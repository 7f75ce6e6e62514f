import math

import numpy as np
import pytest
import scipy.special as sc

from dagster_fracmonge.special_fn import (
    DomainError,
    PoleError,
    bessel_k,
    frac_params,
    gamma,
    profile,
    profile_derivative,
)


@pytest.mark.parametrize("x", [0.1, 0.5, 1.0, 2.5, 7.3, 20.0, -0.5, -1.5, -2.7])
def test_gamma_matches_scipy(x: float):
    assert gamma(x) == pytest.approx(sc.gamma(x), rel=1e-13)


@pytest.mark.parametrize("x", [0.0, -1.0, -4.0])
def test_gamma_rejects_poles(x: float):
    with pytest.raises(PoleError):
        gamma(x)


@pytest.mark.parametrize("nu", [0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0, 1.3, 1.75])
def test_bessel_k_matches_scipy(nu: float):
    r = np.logspace(-6, np.log10(50.0), 200)
    expected = sc.kv(nu, r)
    np.testing.assert_allclose(bessel_k(nu, r), expected, rtol=1e-12)


def test_bessel_k_half_order_closed_form():
    r = np.logspace(-6, np.log10(50.0), 400)
    exact = np.sqrt(math.pi / (2.0 * r)) * np.exp(-r)
    assert np.max(np.abs(bessel_k(0.5, r) / exact - 1.0)) <= 1e-12


def test_bessel_k_scalar_and_negative_order():
    value = bessel_k(-0.3, 1.7)
    assert isinstance(value, float)
    assert value == pytest.approx(sc.kv(0.3, 1.7), rel=1e-13)


@pytest.mark.parametrize("r", [0.0, -1.0, math.inf])
def test_bessel_k_rejects_bad_arguments(r: float):
    with pytest.raises(DomainError):
        bessel_k(0.5, r)


def test_bessel_k_rejects_large_order():
    with pytest.raises(DomainError):
        bessel_k(2.0, 1.0)


def test_frac_params_half_order():
    params = frac_params(0.5)
    assert params.a == 0.0
    assert params.d_s == pytest.approx(1.0, abs=1e-13)
    assert params.c_s == pytest.approx(1.0, abs=1e-13)


def test_trace_constant_identity_holds_on_a_fine_grid():
    residuals = [frac_params(k / 100).identity_residual for k in range(1, 100)]
    assert max(residuals) <= 1e-13


@pytest.mark.parametrize("s", [0.2, 0.5, 0.8])
def test_frac_params_against_scipy(s: float):
    params = frac_params(s)
    assert params.d_s == pytest.approx(s ** (2 * s) * sc.gamma(1 - s) / sc.gamma(1 + s), rel=1e-13)
    assert params.c_s == pytest.approx(sc.gamma(1 - s) / (4 ** (s - 0.5) * sc.gamma(s)), rel=1e-13)


@pytest.mark.parametrize("s", [0.0, 1.0, 1.5, -0.2])
def test_frac_params_rejects_orders_outside_unit_interval(s: float):
    with pytest.raises(DomainError, match=r"\(0,1\)"):
        frac_params(s)


@pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
def test_profile_is_one_at_zero_and_decays(s: float):
    t_values = np.array([0.0, 1e-8, 1.0, 5.0, 30.0])
    values = profile(s, t_values)
    assert values[0] == 1.0
    assert values[1] == pytest.approx(1.0, abs=1e-4)
    assert np.all(np.diff(values) < 0.0)
    assert values[-1] < 1e-10


@pytest.mark.parametrize("s", [0.3, 0.5, 0.7])
def test_profile_derivative_matches_finite_difference(s: float):
    t_values = np.array([0.3, 1.0, 2.5])
    h = 1e-5
    fd = (profile(s, t_values + h) - profile(s, t_values - h)) / (2 * h)
    np.testing.assert_allclose(profile_derivative(s, t_values), fd, rtol=1e-6)


def test_profile_derivative_limits_at_zero():
    assert profile_derivative(0.75, 0.0) == 0.0
    assert profile_derivative(0.5, 0.0) == pytest.approx(-1.0)
    assert profile_derivative(0.25, 0.0) == -math.inf
