from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from steadytrunc import faulhaber
from steadytrunc.polynomial import Polynomial, squared_norm


def test_arithmetic_and_format():
    x = Polynomial.variable(2, 0)
    y = Polynomial.variable(2, 1)
    p = (x + 1) * (y - 2) + x**2 / 2
    assert p.evaluate_exact([3, 5]) == Fraction(4 * 3) + Fraction(9, 2)
    assert p.total_degree() == 2
    assert p.axis_degrees() == (2, 1)
    assert "1/2" in p.format(["A", "B"])


def test_shift_matches_evaluation():
    x = Polynomial.variable(2, 0)
    y = Polynomial.variable(2, 1)
    p = x**3 - 2 * x * y + y**2
    q = p.shift((1, -2))
    for pt in [(0, 0), (3, 7), (10, 2)]:
        assert q.evaluate_exact(pt) == p.evaluate_exact((pt[0] + 1, pt[1] - 2))


def test_binomial_polynomial():
    b = Polynomial.binomial(1, 0, 3)
    assert [b.evaluate_exact([n]) for n in range(6)] == [0, 0, 0, 1, 4, 10]


def test_vectorized_call():
    p = squared_norm(2)
    x = np.array([[1, 2], [3, 4]])
    assert np.allclose(p(x), [5, 25])


def test_substitute_and_derivative():
    x = Polynomial.variable(2, 0)
    y = Polynomial.variable(2, 1)
    p = x**2 * y + 3 * y
    assert p.substitute({1: 2}) == 2 * x**2 + 6
    assert p.derivative(0) == 2 * x * y


@pytest.mark.parametrize("p", range(faulhaber.MAX_DEGREE + 1))
def test_power_sum_small(p):
    for n in range(0, 12):
        assert faulhaber.power_sum(p, n) == sum(x**p for x in range(n + 1))


def test_worked_example_binomial_sum():
    # sum of C(x, 2) over [0, 3]
    assert faulhaber.interval_binomial_sum(2, 0, 3) == 4


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 4), st.integers(0, 10**6), st.integers(0, 300))
def test_interval_sum_matches_naive(p, lo, w):
    hi = lo + w
    assert faulhaber.interval_power_sum(p, lo, hi) == sum(x**p for x in range(lo, hi + 1))
