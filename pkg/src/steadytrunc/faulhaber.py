"""Closed-form power sums.

``power_sum_poly(p)`` holds the coefficients of ``F_p(n) = sum_{x=0}^{n} x**p``
as exact fractions.  Interval sums are differences of two evaluations, done
in integer arithmetic so nothing cancels before the final float conversion.
"""
from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from math import comb

import numpy as np

MAX_DEGREE = 8


@lru_cache(maxsize=None)
def bernoulli_plus(n: int) -> Fraction:
    """Bernoulli numbers with the ``B_1 = +1/2`` convention."""
    if n == 0:
        return Fraction(1)
    # B_n^- via the standard recurrence, then flip the sign of B_1
    b = [Fraction(1)]
    for m in range(1, n + 1):
        b.append(-sum(comb(m + 1, k) * b[k] for k in range(m)) / (m + 1))
    return -b[1] if n == 1 else b[n]


@lru_cache(maxsize=None)
def power_sum_poly(p: int) -> tuple[Fraction, ...]:
    """Coefficients ``c_q`` (index = power of n) of ``sum_{x=0}^{n} x**p``."""
    if p < 0:
        raise ValueError("power must be nonnegative")
    coeffs = [Fraction(0)] * (p + 2)
    for j in range(p + 1):
        coeffs[p + 1 - j] += Fraction(comb(p + 1, j)) * bernoulli_plus(j) / (p + 1)
    if p == 0:
        # 0**0 == 1 contributes the x = 0 term
        coeffs[0] += 1
    return tuple(coeffs)


@lru_cache(maxsize=None)
def _integer_form(p: int) -> tuple[tuple[int, ...], int]:
    coeffs = power_sum_poly(p)
    den = 1
    for c in coeffs:
        den = den * c.denominator // _gcd(den, c.denominator)
    return tuple(int(c * den) for c in coeffs), den


def _gcd(a: int, b: int) -> int:
    while b:
        a, b = b, a % b
    return a


def _eval_numerator(p: int, n: int) -> int:
    nums, _ = _integer_form(p)
    acc = 0
    for c in reversed(nums):
        acc = acc * n + c
    return acc


def power_sum(p: int, n: int) -> int:
    """``sum_{x=0}^{n} x**p`` exactly; zero for ``n < 0``."""
    if n < 0:
        return 0
    nums, den = _integer_form(p)
    num = _eval_numerator(p, n)
    assert num % den == 0
    return num // den


def interval_power_sum(p: int, lower: int, upper: int) -> int:
    """``sum_{x=lower}^{upper} x**p`` exactly (0 for an empty interval)."""
    if upper < lower:
        return 0
    lo = max(lower, 0)
    if lower < 0:
        # negative part handled by symmetry; only needed for generic polynomials
        neg = sum(x ** p for x in range(lower, min(upper, -1) + 1))
        if upper < 0:
            return neg
    else:
        neg = 0
    _, den = _integer_form(p)
    num = _eval_numerator(p, upper) - (_eval_numerator(p, lo - 1) if lo > 0 else 0)
    return neg + num // den


@lru_cache(maxsize=None)
def binomial_power_coeffs(k: int) -> tuple[Fraction, ...]:
    """Power-basis coefficients of ``C(x, k)``."""
    coeffs = [Fraction(1)]
    for i in range(k):
        # multiply by (x - i)
        nxt = [Fraction(0)] * (len(coeffs) + 1)
        for q, c in enumerate(coeffs):
            nxt[q + 1] += c
            nxt[q] -= i * c
        coeffs = nxt
    fact = 1
    for i in range(2, k + 1):
        fact *= i
    return tuple(c / fact for c in coeffs)


def interval_binomial_sum(k: int, lower: int, upper: int) -> Fraction:
    """``sum_{x=lower}^{upper} C(x, k)`` via power sums (exact)."""
    return sum(
        (c * interval_power_sum(q, lower, upper) for q, c in enumerate(binomial_power_coeffs(k)) if c),
        Fraction(0),
    )


def float_tables(max_degree: int = MAX_DEGREE) -> np.ndarray:
    """Power-sum coefficients as a ``(max_degree+1, max_degree+2)`` float array."""
    table = np.zeros((max_degree + 1, max_degree + 2))
    for p in range(max_degree + 1):
        for q, c in enumerate(power_sum_poly(p)):
            table[p, q] = float(c)
    return table
