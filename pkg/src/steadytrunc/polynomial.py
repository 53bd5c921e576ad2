"""Sparse multivariate polynomials with exact rational coefficients."""
from __future__ import annotations

from fractions import Fraction
from math import comb
from typing import Iterable, Mapping, Sequence

import numpy as np

Monomial = tuple[int, ...]


def _frac(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(repr(value))
    return Fraction(value)


class Polynomial:
    """Polynomial in ``nvars`` variables stored as ``{exponents: coefficient}``.

    Zero coefficients are never stored, so two polynomials are equal iff
    their term dictionaries are equal.
    """

    __slots__ = ("nvars", "terms")

    def __init__(self, nvars: int, terms: Mapping[Monomial, Fraction] | None = None):
        self.nvars = nvars
        self.terms: dict[Monomial, Fraction] = {}
        for mono, coef in (terms or {}).items():
            if len(mono) != nvars:
                raise ValueError(f"monomial {mono} does not have {nvars} exponents")
            coef = _frac(coef)
            if coef != 0:
                self.terms[tuple(mono)] = coef

    @classmethod
    def constant(cls, nvars: int, value) -> Polynomial:
        return cls(nvars, {(0,) * nvars: _frac(value)})

    @classmethod
    def variable(cls, nvars: int, index: int) -> Polynomial:
        mono = [0] * nvars
        mono[index] = 1
        return cls(nvars, {tuple(mono): Fraction(1)})

    @classmethod
    def binomial(cls, nvars: int, index: int, k: int) -> Polynomial:
        """``C(x_index, k)`` expanded in the power basis."""
        poly = cls.constant(nvars, 1)
        x = cls.variable(nvars, index)
        for i in range(k):
            poly = poly * (x - i)
        return poly * Fraction(1, _factorial(k))

    def _coerce(self, other) -> Polynomial:
        if isinstance(other, Polynomial):
            if other.nvars != self.nvars:
                raise ValueError("polynomials over different variable counts")
            return other
        return Polynomial.constant(self.nvars, other)

    def __add__(self, other) -> Polynomial:
        other = self._coerce(other)
        out = dict(self.terms)
        for mono, coef in other.terms.items():
            out[mono] = out.get(mono, Fraction(0)) + coef
        return Polynomial(self.nvars, out)

    __radd__ = __add__

    def __neg__(self) -> Polynomial:
        return Polynomial(self.nvars, {m: -c for m, c in self.terms.items()})

    def __sub__(self, other) -> Polynomial:
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> Polynomial:
        return self._coerce(other) - self

    def __mul__(self, other) -> Polynomial:
        other = self._coerce(other)
        out: dict[Monomial, Fraction] = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                mono = tuple(a + b for a, b in zip(m1, m2))
                out[mono] = out.get(mono, Fraction(0)) + c1 * c2
        return Polynomial(self.nvars, out)

    __rmul__ = __mul__

    def __truediv__(self, other) -> Polynomial:
        if isinstance(other, Polynomial):
            if not other.is_constant():
                raise ValueError("division by a non-constant polynomial")
            other = other.constant_term()
        return self * (1 / _frac(other))

    def __pow__(self, exponent: int) -> Polynomial:
        if not isinstance(exponent, int) or exponent < 0:
            raise ValueError("polynomial exponent must be a nonnegative integer")
        out = Polynomial.constant(self.nvars, 1)
        for _ in range(exponent):
            out = out * self
        return out

    def __eq__(self, other) -> bool:
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.nvars == other.nvars and self.terms == other.terms

    def __hash__(self) -> int:
        return hash((self.nvars, frozenset(self.terms.items())))

    def __repr__(self) -> str:
        return f"Polynomial({self.nvars}, {self.terms!r})"

    def is_zero(self) -> bool:
        return not self.terms

    def is_constant(self) -> bool:
        return all(not any(m) for m in self.terms)

    def constant_term(self) -> Fraction:
        return self.terms.get((0,) * self.nvars, Fraction(0))

    def total_degree(self) -> int:
        return max((sum(m) for m in self.terms), default=0)

    def axis_degrees(self) -> tuple[int, ...]:
        degs = [0] * self.nvars
        for mono in self.terms:
            for i, e in enumerate(mono):
                degs[i] = max(degs[i], e)
        return tuple(degs)

    def variables(self) -> set[int]:
        return {i for mono in self.terms for i, e in enumerate(mono) if e}

    def shift(self, offset: Sequence[int]) -> Polynomial:
        """Return ``p(x + offset)``."""
        out: dict[Monomial, Fraction] = {}
        for mono, coef in self.terms.items():
            # expand prod_i (x_i + o_i)^e_i term by term
            partial: dict[Monomial, Fraction] = {(0,) * self.nvars: coef}
            for i, e in enumerate(mono):
                if e == 0:
                    continue
                o = offset[i]
                nxt: dict[Monomial, Fraction] = {}
                for pm, pc in partial.items():
                    for k in range(e + 1):
                        scale = comb(e, k) * (o ** (e - k))
                        if scale == 0:
                            continue
                        nm = list(pm)
                        nm[i] += k
                        nm = tuple(nm)
                        nxt[nm] = nxt.get(nm, Fraction(0)) + pc * scale
                partial = nxt
            for pm, pc in partial.items():
                out[pm] = out.get(pm, Fraction(0)) + pc
        return Polynomial(self.nvars, out)

    def substitute(self, values: Mapping[int, int | Fraction]) -> Polynomial:
        """Fix some variables to constants; remaining variables keep their slots."""
        out: dict[Monomial, Fraction] = {}
        for mono, coef in self.terms.items():
            nm = list(mono)
            c = coef
            for i, v in values.items():
                if nm[i]:
                    c *= _frac(v) ** nm[i]
                    nm[i] = 0
            nm = tuple(nm)
            out[nm] = out.get(nm, Fraction(0)) + c
        return Polynomial(self.nvars, out)

    def derivative(self, index: int) -> Polynomial:
        out: dict[Monomial, Fraction] = {}
        for mono, coef in self.terms.items():
            e = mono[index]
            if e == 0:
                continue
            nm = list(mono)
            nm[index] -= 1
            nm = tuple(nm)
            out[nm] = out.get(nm, Fraction(0)) + coef * e
        return Polynomial(self.nvars, out)

    def evaluate_exact(self, x: Sequence[int]) -> Fraction:
        total = Fraction(0)
        for mono, coef in self.terms.items():
            term = coef
            for xi, e in zip(x, mono):
                if e:
                    term *= xi ** e
            total += term
        return total

    def __call__(self, x) -> float | np.ndarray:
        """Evaluate in floating point; ``x`` may be a vector or an ``(n, nvars)`` array."""
        arr = np.asarray(x, dtype=float)
        if arr.ndim == 1:
            return float(self(arr[None, :])[0])
        out = np.zeros(arr.shape[0])
        for mono, coef in self.terms.items():
            term = np.full(arr.shape[0], float(coef))
            for i, e in enumerate(mono):
                if e:
                    term *= arr[:, i] ** e
            out += term
        return out

    def format(self, names: Sequence[str]) -> str:
        if not self.terms:
            return "0"
        parts = []
        for mono in sorted(self.terms, key=lambda m: (-sum(m), tuple(-e for e in m))):
            coef = self.terms[mono]
            factors = []
            for name, e in zip(names, mono):
                if e == 1:
                    factors.append(name)
                elif e > 1:
                    factors.append(f"{name}^{e}")
            mag = abs(coef)
            ctext = str(mag.numerator) if mag.denominator == 1 else f"{mag.numerator}/{mag.denominator}"
            if not factors:
                body = ctext
            elif mag == 1:
                body = "*".join(factors)
            else:
                body = ctext + "*" + "*".join(factors)
            sign = "-" if coef < 0 else "+"
            parts.append((sign, body))
        text = ("-" if parts[0][0] == "-" else "") + parts[0][1]
        for sign, body in parts[1:]:
            text += f" {sign} {body}"
        return text


def _factorial(k: int) -> int:
    out = 1
    for i in range(2, k + 1):
        out *= i
    return out


def squared_norm(nvars: int, indices: Iterable[int] | None = None) -> Polynomial:
    idx = range(nvars) if indices is None else indices
    out = Polynomial(nvars)
    for i in idx:
        out = out + Polynomial.variable(nvars, i) ** 2
    return out
