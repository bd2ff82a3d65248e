import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from flowholo.errors import ConvergenceError, DomainError
from flowholo.quadrature import (QuadratureConfig, erfc, gauss_legendre_panels, integrate_1d,
                                 probe_pole_divergence)

SQRT_PI = math.sqrt(math.pi)


def test_linear_integrand():
    assert integrate_1d(lambda x: x, 0, 1)[0] == pytest.approx(0.5, abs=1e-14)


@pytest.mark.parametrize("kind", ["exp_decay", "rational"])
def test_erfc_moments(kind):
    cfg = QuadratureConfig(semi_infinite_map=kind)
    v0, _ = integrate_1d(erfc, 0, math.inf, cfg)
    v2, _ = integrate_1d(lambda x: x * x * erfc(x), 0, math.inf, cfg)
    assert v0 == pytest.approx(1 / SQRT_PI, rel=1e-10)
    assert v2 == pytest.approx(1 / (3 * SQRT_PI), rel=1e-10)


def test_erfc_moment_against_riemann_sum():
    x = np.linspace(0.0, 8.0, 800001)
    y = erfc(x)
    riemann = float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(x)))
    assert riemann == pytest.approx(integrate_1d(erfc, 0, math.inf)[0], rel=1e-9)


def test_infinite_both_sides():
    v, _ = integrate_1d(lambda x: math.exp(-x * x), -math.inf, math.inf)
    assert v == pytest.approx(SQRT_PI, rel=1e-10)


def test_bad_limits():
    with pytest.raises(DomainError):
        integrate_1d(lambda x: x, 1, 0)


def test_nonconvergence_carries_partial():
    cfg = QuadratureConfig(rel_tol=1e-14, abs_tol=1e-16, max_subdivisions=1)
    with pytest.raises(ConvergenceError) as info:
        integrate_1d(lambda x: math.sin(1 / x), 1e-4, 1, cfg)
    assert math.isfinite(info.value.partial)


def test_config_validation():
    with pytest.raises(DomainError):
        QuadratureConfig(rel_tol=0)
    with pytest.raises(DomainError):
        QuadratureConfig(max_subdivisions=0)
    with pytest.raises(DomainError):
        QuadratureConfig(semi_infinite_map="tan")


@pytest.mark.parametrize("x", [0.0, 0.1, 0.5, 1.0, 2.5, 5.0, 9.5, -1.0, -3.0])
def test_erfc_reference(x):
    ref = float(mpmath.erfc(mpmath.mpf(x)))
    assert erfc(x) == pytest.approx(ref, rel=1e-12)


def test_erfc_examples():
    assert erfc(0.0) == 1.0
    assert erfc(1.0) == pytest.approx(0.15729920705028513, rel=1e-14)


@given(st.floats(-10, 10))
def test_erfc_reflection_and_range(x):
    assert erfc(x) + erfc(-x) == pytest.approx(2.0, abs=1e-12)
    assert 0.0 <= erfc(x) <= 2.0


@given(st.floats(-5, 5), st.floats(0.001, 5))
def test_erfc_decreasing(x, h):
    assert erfc(x + h) <= erfc(x)


@settings(max_examples=30, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.1, 4))
def test_linearity(alpha, beta, b):
    f = lambda x: math.cos(3 * x) * math.exp(-x)
    g = lambda x: x ** 2 / (1 + x)
    lhs, e1 = integrate_1d(lambda x: alpha * f(x) + beta * g(x), 0, b)
    vf, ef = integrate_1d(f, 0, b)
    vg, eg = integrate_1d(g, 0, b)
    tol = 2 * (max(1e-12, 1e-8 * abs(lhs)) + abs(alpha) * max(1e-12, 1e-8 * abs(vf))
               + abs(beta) * max(1e-12, 1e-8 * abs(vg)))
    assert abs(lhs - (alpha * vf + beta * vg)) <= tol


@settings(max_examples=30, deadline=None)
@given(st.floats(-2, 0), st.floats(0.01, 0.99), st.floats(0.1, 3))
def test_additivity(a, frac, width):
    f = lambda x: math.exp(math.sin(x)) * (1 + x * x)
    b = a + width
    c = a + frac * width
    whole = integrate_1d(f, a, b)[0]
    parts = integrate_1d(f, a, c)[0] + integrate_1d(f, c, b)[0]
    assert abs(whole - parts) <= 3 * max(1e-12, 1e-8 * abs(whole))


def test_pole_probe_second_order():
    out = probe_pole_divergence(lambda x: 1 / (x * x), 0.0, [0.1, 0.01])
    for d, v in out:
        assert v == pytest.approx(2 / d - 2, rel=1e-9)


def test_pole_probe_slope():
    windows = [10.0 ** -k for k in range(1, 6)]
    out = probe_pole_divergence(lambda x: 1 / (x * x), 0.0, windows)
    d = np.log([w for w, _ in out])
    v = np.log([val for _, val in out])
    slope = np.polyfit(d[1:], v[1:], 1)[0]
    assert abs(slope + 1.0) < 0.05


def test_pole_probe_constant_function():
    out = probe_pole_divergence(lambda x: 1.0, 0.0, [0.1, 0.01, 0.001])
    for d, v in out:
        assert v == pytest.approx(2 - 2 * d, abs=1e-12)


def test_pole_probe_integrable_singularity_converges():
    out = probe_pole_divergence(lambda x: abs(x) ** -0.5, 0.0, [1e-2, 1e-4, 1e-6, 1e-8])
    vals = [v for _, v in out]
    # int_{-1}^{1} |x|^{-1/2} = 4, approached as 4 - 4 sqrt(d)
    for (d, v) in out:
        assert v == pytest.approx(4 - 4 * math.sqrt(d), rel=1e-8)
    assert abs(vals[-1] - 4) < abs(vals[0] - 4)


@pytest.mark.parametrize("windows", [[0.01, 0.1], [0.1, 0.1], [0.1, -0.01], []])
def test_pole_probe_window_validation(windows):
    with pytest.raises(DomainError):
        probe_pole_divergence(lambda x: 1.0, 0.0, windows)


def test_gauss_legendre_panels_polynomial_exact():
    x, w = gauss_legendre_panels([0.0, 0.3, 2.0], order=8)
    assert np.dot(w, x ** 7) == pytest.approx(2.0 ** 8 / 8, rel=1e-13)
