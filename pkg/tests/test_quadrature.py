import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ultraflat.errors import QuadratureError
from ultraflat.quadrature import QuadConfig, QuadResult, integrate


def test_polynomial_exact():
    res = integrate(lambda x: x**5 - 3 * x**2 + 1, -1.0, 2.0)
    assert res.value == pytest.approx(2**6 / 6 - 1 / 6 - (8 + 1) + 3, rel=1e-13)
    assert res.converged


def test_peaked_integrand_with_breakpoint():
    # int_0^2 |x - 1|^(1/2) dx = 4/3
    res = integrate(lambda x: np.sqrt(np.abs(x - 1)), 0.0, 2.0, QuadConfig(1e-12, 1e-12), points=[1.0])
    assert res.value == pytest.approx(4 / 3, rel=1e-11)


def test_complex_integrand():
    res = integrate(lambda x: np.exp(1j * x), 0.0, math.pi)
    assert res.value == pytest.approx(2j, abs=1e-12)


def test_error_estimate_covers_truth():
    res = integrate(lambda x: 1 / (1 + 1e4 * x * x), -1.0, 1.0, QuadConfig(1e-10, 1e-10))
    exact = 2 * math.atan(100) / 100
    assert abs(res.value - exact) <= max(res.error, 1e-14)


def test_nonconvergence_raises_or_reports():
    f = lambda x: np.sin(1 / np.maximum(x, 1e-300))
    cfg = QuadConfig(1e-14, 1e-14, max_intervals=20)
    with pytest.raises(QuadratureError):
        integrate(f, 1e-6, 1.0, cfg)
    res = integrate(f, 1e-6, 1.0, cfg, strict=False)
    assert not res.converged


def test_results_add():
    a = QuadResult(1.0, 1e-9, 3)
    b = QuadResult(2.0, 2e-9, 4)
    c = a + b
    assert c.value == 3.0 and c.error == pytest.approx(3e-9)


@given(st.floats(0.1, 20), st.floats(0.5, 5))
def test_exponential_moments(lam, b):
    res = integrate(lambda x: np.exp(-lam * x), 0.0, b, QuadConfig(1e-13, 1e-12))
    assert res.value == pytest.approx(-math.expm1(-lam * b) / lam, rel=1e-10)


def test_rejects_bad_config():
    with pytest.raises(Exception):
        QuadConfig(abs_tol=0.0)
