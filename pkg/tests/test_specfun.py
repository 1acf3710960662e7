import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from heisenflux.errors import DomainError
from heisenflux.specfun import (bessel_i_scaled, bessel_j, bessel_j_scaled, gamma_fn, laguerre,
                                log_gamma)

# frozen from mpmath at 40 digits
GAMMA_3_7 = 4.170651783796603165
J1_2 = 0.5767248077568733872
# exact rational recurrence
L2_3_AT_1_5 = 1.0 / 16.0


@pytest.mark.parametrize("x, expected", [(1.0, 1.0), (0.5, math.sqrt(math.pi)), (3.7, GAMMA_3_7)])
def test_gamma_examples(x, expected):
    assert gamma_fn(x) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("x", [0.0, -1.0, -0.5, math.inf, math.nan])
def test_gamma_domain(x):
    with pytest.raises(DomainError):
        gamma_fn(x)


def test_gamma_against_mpmath():
    xs = np.concatenate([np.linspace(1e-3, 1, 37), np.linspace(1, 60, 91), [123.4, 170.3]])
    for x in xs:
        assert gamma_fn(x) == pytest.approx(float(mp.gamma(x)), rel=1e-12)
        assert log_gamma(x) == pytest.approx(float(mp.loggamma(x)), rel=1e-12, abs=1e-12)


@given(st.floats(min_value=1e-3, max_value=30.0))
def test_gamma_recurrence(x):
    assert gamma_fn(x + 1.0) == pytest.approx(x * gamma_fn(x), rel=1e-12)


@pytest.mark.parametrize("order, x, expected", [
    (0.0, 0.0, 1.0),
    (0.5, math.pi / 2, 2.0 / math.pi),
    (1.0, 2.0, J1_2),
])
def test_bessel_examples(order, x, expected):
    assert bessel_j(order, x) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("order, x", [(-0.5, 1.0), (1.0, -1.0), (0.0, math.nan)])
def test_bessel_domain(order, x):
    with pytest.raises(DomainError):
        bessel_j(order, x)


def test_bessel_against_mpmath():
    rng = np.random.default_rng(7)
    orders = np.concatenate([[0, 0.5, 1, 2.5, 10, 33.3, 60], rng.uniform(0, 60, 20)])
    xs = np.concatenate([[0, 1e-8, 0.3, 2, 12, 25, 49.9, 50], rng.uniform(0, 50, 30)])
    worst = 0.0
    for nu in orders:
        got = bessel_j(nu, xs)
        ref = np.array([float(mp.besselj(nu, x)) for x in xs])
        worst = max(worst, np.max(np.abs(got - ref)))
    assert worst <= 1e-12


@given(st.floats(min_value=1e-6, max_value=30.0))
def test_half_order_closed_forms(x):
    s = math.sqrt(2.0 / (math.pi * x))
    assert bessel_j(0.5, x) == pytest.approx(s * math.sin(x), abs=1e-12)
    assert bessel_j(1.5, x) == pytest.approx(s * (math.sin(x) / x - math.cos(x)), abs=1e-12)


@given(st.floats(min_value=0.0, max_value=40.0), st.floats(min_value=0.0, max_value=1.0))
def test_small_argument_bound(nu, x):
    bound = (x / 2.0) ** nu / gamma_fn(nu + 1.0)
    assert abs(bessel_j(nu, x)) <= bound * (1 + 1e-12) + 1e-300


@pytest.mark.parametrize("nu, z", [
    (0.0, 0.5), (0.3, 3.0), (2.5, 45.0), (7.0, 200.0), (0.6, 1.5 + 2.0j), (3.2, 10.0 - 40.0j), (12.0, 0.1 + 0.05j),
])
def test_scaled_modified_bessel(nu, z):
    ref = complex(mp.exp(-z) * mp.besseli(nu, z))
    assert complex(bessel_i_scaled(nu, z)) == pytest.approx(ref, rel=1e-12)


@pytest.mark.parametrize("nu, w", [(0.4, 3.0 + 0.0j), (1.7, 2.0 - 5.0j), (0.0, -1.0j * 8.0), (5.5, 20.0 + 1.0j)])
def test_scaled_bessel_j_complex(nu, w):
    ref = complex(mp.exp(-abs(w.imag)) * mp.besselj(nu, w))
    assert bessel_j_scaled(nu, w) == pytest.approx(ref, rel=1e-11, abs=1e-14)


def test_laguerre_examples():
    assert laguerre(2.0, 3, 1.5) == pytest.approx(L2_3_AT_1_5, abs=1e-15)
    for a, x in [(0.3, 2.0), (4.0, -1.0)]:
        assert laguerre(a, 0, x) == 1.0
        assert laguerre(a, 1, x) == pytest.approx(1.0 + a - x, abs=1e-15)


def test_laguerre_domain():
    with pytest.raises(DomainError):
        laguerre(-1.0, 2, 0.5)


@settings(max_examples=200)
@given(st.floats(min_value=-0.9, max_value=10.0), st.integers(min_value=1, max_value=19),
       st.floats(min_value=0.0, max_value=30.0))
def test_laguerre_recurrence(a, n, x):
    lhs = (n + 1) * laguerre(a, n + 1, x)
    rhs = (2 * n + 1 + a - x) * laguerre(a, n, x) - (n + a) * laguerre(a, n - 1, x)
    assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))


def test_vectorized_shapes():
    x = np.linspace(0, 10, 12).reshape(3, 4)
    assert bessel_j(1.0, x).shape == (3, 4)
    assert laguerre(0.5, 4, x).shape == (3, 4)
    assert isinstance(bessel_j(1.0, 2.0), float)
