import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from nfbif import kernels

etas = st.floats(min_value=0.0, max_value=40.0, allow_nan=False)


def test_values_at_zero():
    assert kernels.g_eta(0.0) == pytest.approx(1 - 2 / math.pi, abs=1e-15)
    assert kernels.h_eta(0.0) == pytest.approx(2 / math.pi, abs=1e-15)
    assert kernels.f_eta(0.0) == pytest.approx(1 / math.sqrt(math.pi), abs=1e-15)


def test_f_matches_quadrature():
    for eta in (0.0, 0.3, 1.7, 4.0):
        num, _ = integrate.quad(lambda t: math.exp(-t * t), -eta, np.inf)
        assert kernels.f_eta(eta) == pytest.approx(math.exp(-eta * eta) / (2 * num), rel=1e-12)


@given(etas)
def test_f_prime_identity(eta):
    h = 1e-6 * max(1.0, eta)
    fd = (kernels.f_eta(eta + h) - kernels.f_eta(max(eta - h, 0.0))) / (eta + h - max(eta - h, 0.0))
    assert kernels.f_prime(eta) == pytest.approx(fd, rel=1e-5, abs=1e-300)


@given(etas)
def test_h_above_half_and_g_below_one(eta):
    assert kernels.h_eta(eta) > 0.5
    assert kernels.g_eta(eta) <= 1.0
    assert math.isfinite(kernels.log_one_minus_g(eta))


@given(st.floats(min_value=0.0, max_value=5.0))
def test_log_one_minus_g_consistent(eta):
    assert math.exp(kernels.log_one_minus_g(eta)) == pytest.approx(1 - kernels.g_eta(eta), rel=1e-10)


@settings(max_examples=50)
@given(st.floats(min_value=0.01, max_value=3.0))
def test_g_derivatives_match_differences(eta):
    h = 1e-5
    g, g1, g2 = kernels.g_derivatives(eta)
    gp, gm = kernels.g_eta(eta + h), kernels.g_eta(eta - h)
    assert g1 == pytest.approx((gp - gm) / (2 * h), rel=1e-6, abs=1e-12)
    assert g2 == pytest.approx((gp - 2 * g + gm) / h**2, rel=1e-3, abs=1e-6)


def test_log_f_large_eta_finite():
    assert kernels.log_f_eta(100.0) == pytest.approx(-100.0**2 - math.log(2 * math.sqrt(math.pi)), rel=1e-12)


def test_rejects_negative_and_nan():
    with pytest.raises(ValueError):
        kernels.g_eta(-1.0)
    with pytest.raises(ValueError):
        kernels.f_eta(float("nan"))


def test_erf_odd_total():
    x = np.linspace(-5, 5, 101)
    assert np.allclose(kernels.erf(x), -kernels.erf(-x), atol=0)
