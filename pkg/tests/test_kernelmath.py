import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from bregsmooth import (
    Kernel,
    SingularMatrixError,
    cp_constant,
    equivalent_kernel,
    equivalent_kernel_at_zero,
    get_kernel,
    moment,
    moment_matrix,
)
from bregsmooth.quadrature import adaptive_simpson

KINDS = ["epanechnikov", "uniform", "triangular"]


# quadrature -----------------------------------------------------------------


@pytest.mark.parametrize("f, a, b", [
    (np.sin, 0.0, math.pi),
    (lambda t: math.exp(-t * t), -3.0, 2.0),
    (lambda t: abs(t) ** 0.5, -1.0, 1.0),
    (lambda t: 1.0 / (1.0 + 25 * t * t), -1.0, 1.0),
])
def test_simpson_matches_scipy(f, a, b):
    ref, _ = quad(f, a, b, epsabs=1e-13, limit=200)
    assert adaptive_simpson(f, a, b, 1e-11) == pytest.approx(ref, abs=1e-8)


def test_simpson_edge_cases():
    assert adaptive_simpson(math.cos, 1.0, 1.0) == 0.0
    assert adaptive_simpson(math.cos, 1.0, 0.0) == pytest.approx(-math.sin(1.0), abs=1e-10)
    with pytest.raises(FloatingPointError):
        adaptive_simpson(lambda t: math.inf, 0.0, 1.0)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=1, max_size=6), st.floats(-2, 0), st.floats(0.1, 2))
def test_simpson_exact_on_polynomials(coefs, a, width):
    f = lambda t: float(np.polynomial.polynomial.polyval(t, coefs))
    anti = np.polynomial.polynomial.polyint(coefs)
    b = a + width
    exact = np.polynomial.polynomial.polyval(b, anti) - np.polynomial.polynomial.polyval(a, anti)
    assert adaptive_simpson(f, a, b, 1e-12) == pytest.approx(exact, abs=1e-9)


# kernels ----------------------------------------------------------------------


@pytest.mark.parametrize("kind", KINDS)
def test_kernel_is_density(kind):
    k = get_kernel(kind)
    ref, _ = quad(lambda t: float(k(t)), -1, 1, points=[0.0])
    assert ref == pytest.approx(1.0, abs=1e-10)
    t = np.linspace(-1.5, 1.5, 301)
    assert np.allclose(k(t), k(-t))
    assert np.all(k(t) >= 0) and np.all(k(t[np.abs(t) > 1]) == 0)


def test_unknown_kernel():
    with pytest.raises(ValueError):
        Kernel("gaussian")


@pytest.mark.parametrize("k, expected", [(0, 1.0), (1, 0.0), (2, 0.2), (4, 3 / 35)])
def test_epanechnikov_moments(k, expected):
    assert moment("epanechnikov", k) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("k", range(0, 9))
def test_moments_match_scipy(kind, k):
    kern = get_kernel(kind)
    ref, _ = quad(lambda t: t**k * float(kern(t)), -1, 1, points=[0.0], epsabs=1e-14)
    assert moment(kind, k) == pytest.approx(ref, abs=1e-12)


@pytest.mark.parametrize("p, expected", [(0, 0.75), (1, 0.75), (2, 1.40625), (3, 1.40625)])
def test_equivalent_kernel_at_zero(p, expected):
    assert equivalent_kernel_at_zero("epanechnikov", p) == pytest.approx(expected, abs=1e-12)


def test_equivalent_kernel_at_zero_moment_oracle():
    # e1' S^{-1} e1 = mu4 / (mu4 - mu2^2) for p = 2
    mu2, mu4 = 0.2, 3 / 35
    assert equivalent_kernel_at_zero("epanechnikov", 2) == pytest.approx(0.75 * mu4 / (mu4 - mu2**2), abs=1e-12)
    with pytest.raises(ValueError):
        equivalent_kernel_at_zero("epanechnikov", 4)


def test_k0_nondecreasing_in_p():
    vals = [equivalent_kernel_at_zero("epanechnikov", p) for p in range(4)]
    assert all(b >= a - 1e-15 for a, b in zip(vals, vals[1:]))


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("p", [0, 1, 2, 3])
def test_equivalent_kernel_reproduces_polynomials(kind, p):
    for j in range(p + 1):
        val, _ = quad(lambda t: t**j * float(equivalent_kernel(kind, p, t)), -1, 1, points=[0.0], epsabs=1e-13)
        assert val == pytest.approx(1.0 if j == 0 else 0.0, abs=1e-8)


def test_moment_matrix_shape():
    S = moment_matrix("uniform", 2)
    assert S.shape == (3, 3) and np.allclose(S, S.T)


def test_cp_constant_closed_forms():
    assert cp_constant("epanechnikov", 1) == pytest.approx(15 ** 0.2, abs=1e-9)
    assert cp_constant("uniform", 1) == pytest.approx(4.5 ** 0.2, abs=1e-9)


def test_cp_constant_p3_oracle():
    # brute-force oracle: scipy quadrature on the equivalent kernel at two tolerances
    def brute(eps):
        r, _ = quad(lambda t: float(equivalent_kernel("epanechnikov", 3, t)) ** 2, -1, 1, epsabs=eps)
        mu, _ = quad(lambda t: t**4 * float(equivalent_kernel("epanechnikov", 3, t)), -1, 1, epsabs=eps)
        return (math.factorial(4) ** 2 * r / (8 * mu**2)) ** (1 / 9)

    a, b = brute(1e-6), brute(1e-12)
    assert abs(a - b) / b < 0.005
    assert cp_constant("epanechnikov", 3) == pytest.approx(b, rel=1e-8)


def test_cp_constant_even_degree():
    with pytest.raises(ValueError):
        cp_constant("epanechnikov", 2)


def test_cp_constant_tolerance_invariance():
    # a refined quadrature gives the same constant
    assert cp_constant("triangular", 1, tol=1e-8) == pytest.approx(cp_constant("triangular", 1, tol=1e-12), rel=1e-7)


def test_singular_error_type():
    assert issubclass(SingularMatrixError, np.linalg.LinAlgError)
