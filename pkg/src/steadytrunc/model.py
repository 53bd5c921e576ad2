"""Reaction-network data model and propensity evaluation."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from math import comb
from typing import Callable, ClassVar, Sequence

import numpy as np

from .polynomial import Polynomial


class ModelError(ValueError):
    """A network violates a structural or semantic constraint."""


@dataclass(frozen=True)
class Species:
    name: str
    mode_flag: bool = False


@dataclass(frozen=True)
class MassAction:
    constant: Fraction

    def __post_init__(self):
        if self.constant < 0:
            raise ModelError(f"negative rate constant {self.constant}")


@dataclass(frozen=True)
class PolynomialRate:
    """Arbitrary polynomial propensity; forced to zero where reactants are missing."""

    poly: Polynomial


class CustomLaw:
    """Named non-polynomial rate law.

    Subclasses evaluate exactly on micro-states and provide a coarse
    ``box_sum`` used for macro-states of volume > 1, plus polynomial lower and
    upper bounds used when bounding the Lyapunov drift.
    """

    name: ClassVar[str] = ""

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def box_sum(self, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def bound_polynomials(self, nvars: int) -> tuple[Polynomial, Polynomial]:
        raise NotImplementedError

    def ssa_form(self, nvars: int):
        """``(order vector, saturating species, saturation constant)`` or ``None``."""
        return None

    def format(self, names: Sequence[str]) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class MichaelisMenten(CustomLaw):
    """``k * x_enzyme * x_substrate / (x_substrate + km)``.

    The coarse sum replaces the saturating factor by the indicator
    ``[x_substrate >= 1]``, which is accurate when ``km`` is small; summing
    ``i / (i + km)`` exactly would need digamma evaluations.
    """

    name: ClassVar[str] = "michaelis_menten"
    k: Fraction
    enzyme: int
    substrate: int
    km: Fraction

    def __post_init__(self):
        if self.k < 0 or self.km <= 0:
            raise ModelError("michaelis_menten needs k >= 0 and km > 0")
        if self.enzyme == self.substrate:
            raise ModelError("michaelis_menten enzyme and substrate must differ")

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        s = x[..., self.substrate]
        return float(self.k) * x[..., self.enzyme] * s / (s + float(self.km))

    def box_sum(self, lower, upper):
        lower = np.asarray(lower, dtype=np.int64)
        upper = np.asarray(upper, dtype=np.int64)
        widths = (upper - lower + 1).astype(float)
        e, s = self.enzyme, self.substrate
        le, ue = lower[..., e].astype(float), upper[..., e].astype(float)
        enzyme_sum = (le + ue) * widths[..., e] / 2.0
        active = np.clip(upper[..., s] - np.maximum(lower[..., s], 1) + 1, 0, None).astype(float)
        others = np.ones(widths.shape[:-1])
        for axis in range(widths.shape[-1]):
            if axis not in (e, s):
                others = others * widths[..., axis]
        return float(self.k) * enzyme_sum * active * others

    def bound_polynomials(self, nvars):
        upper = Polynomial.variable(nvars, self.enzyme) * self.k
        return Polynomial(nvars), upper

    def ssa_form(self, nvars):
        order = [0] * nvars
        order[self.enzyme] = 1
        return order, self.substrate, float(self.km)

    def format(self, names):
        return f"{self.name}({_fmt(self.k)}, {names[self.enzyme]}, {names[self.substrate]}, {_fmt(self.km)})"


CUSTOM_LAWS: dict[str, Callable[..., CustomLaw]] = {"michaelis_menten": MichaelisMenten}
# argument kinds per law: "c" constant expression, "s" species name
CUSTOM_SIGNATURES: dict[str, str] = {"michaelis_menten": "cssc"}


@dataclass(frozen=True)
class CustomRate:
    law: CustomLaw


RateLaw = MassAction | PolynomialRate | CustomRate


@dataclass(frozen=True)
class Reaction:
    consume: tuple[int, ...]
    produce: tuple[int, ...]
    rate: RateLaw

    def __post_init__(self):
        if len(self.consume) != len(self.produce):
            raise ModelError("reactant and product vectors differ in length")
        if min(self.consume + self.produce, default=0) < 0:
            raise ModelError("stoichiometric coefficients must be nonnegative")

    @property
    def change(self) -> tuple[int, ...]:
        return tuple(p - c for p, c in zip(self.produce, self.consume))


@dataclass(frozen=True)
class ReactionNetwork:
    species: tuple[Species, ...]
    reactions: tuple[Reaction, ...]
    parameters: dict[str, Fraction] = field(default_factory=dict, compare=True, hash=False)
    mode_values: tuple[tuple[int, ...], ...] = ()
    lyapunov: Polynomial | None = None

    def __post_init__(self):
        if not self.species:
            raise ModelError("network has no species")
        if not self.reactions:
            raise ModelError("network has no reactions")
        names = [s.name for s in self.species]
        if len(set(names)) != len(names):
            raise ModelError("duplicate species names")
        n = len(self.species)
        for r in self.reactions:
            if len(r.consume) != n:
                raise ModelError("reaction dimension does not match species count")
        nmodes = len(self.mode_indices)
        if nmodes and not self.mode_values:
            raise ModelError("mode species need an enumeration of feasible values")
        for combo in self.mode_values:
            if len(combo) != nmodes or min(combo) < 0:
                raise ModelError(f"invalid mode combination {combo}")
        if self.lyapunov is not None and self.lyapunov.nvars != n:
            raise ModelError("Lyapunov polynomial has the wrong number of variables")

    @property
    def n_species(self) -> int:
        return len(self.species)

    @property
    def names(self) -> list[str]:
        return [s.name for s in self.species]

    @cached_property
    def mode_indices(self) -> tuple[int, ...]:
        return tuple(i for i, s in enumerate(self.species) if s.mode_flag)

    @cached_property
    def aggregated_indices(self) -> tuple[int, ...]:
        return tuple(i for i, s in enumerate(self.species) if not s.mode_flag)

    @cached_property
    def consume_matrix(self) -> np.ndarray:
        return np.array([r.consume for r in self.reactions], dtype=np.int64)

    @cached_property
    def change_matrix(self) -> np.ndarray:
        return np.array([r.change for r in self.reactions], dtype=np.int64)

    def index(self, name: str) -> int:
        for i, s in enumerate(self.species):
            if s.name == name:
                return i
        raise KeyError(name)

    def rate_polynomial(self, j: int) -> Polynomial | None:
        """Power-basis polynomial of a mass-action or polynomial law."""
        rate = self.reactions[j].rate
        n = self.n_species
        if isinstance(rate, MassAction):
            poly = Polynomial.constant(n, rate.constant)
            for i, k in enumerate(self.reactions[j].consume):
                if k:
                    poly = poly * Polynomial.binomial(n, i, k)
            return poly
        if isinstance(rate, PolynomialRate):
            return rate.poly
        return None

    def propensities(self, j: int, x) -> np.ndarray:
        """Vectorized ``alpha_j`` over an ``(n, n_species)`` array of states."""
        x = np.atleast_2d(np.asarray(x, dtype=np.int64))
        reaction = self.reactions[j]
        consume = np.asarray(reaction.consume)
        feasible = np.all(x >= consume, axis=1)
        rate = reaction.rate
        if isinstance(rate, MassAction):
            out = np.full(x.shape[0], float(rate.constant))
            for i, k in enumerate(reaction.consume):
                for m in range(k):
                    out *= (x[:, i] - m) / (m + 1.0)
        elif isinstance(rate, PolynomialRate):
            out = rate.poly(x)
        else:
            out = rate.law.evaluate(x)
        return np.where(feasible, out, 0.0)


def propensity(network: ReactionNetwork, j: int, x: Sequence[int]) -> float:
    """Rate of reaction ``j`` in micro-state ``x``; zero if reactants are missing."""
    reaction = network.reactions[j]
    if any(xi < k for xi, k in zip(x, reaction.consume)):
        return 0.0
    rate = reaction.rate
    if isinstance(rate, MassAction):
        combos = 1
        for xi, k in zip(x, reaction.consume):
            combos *= comb(int(xi), k)
        return float(rate.constant * combos)
    if isinstance(rate, PolynomialRate):
        return float(rate.poly.evaluate_exact([int(v) for v in x]))
    return float(rate.law.evaluate(np.asarray(x)))


def _fmt(value: Fraction) -> str:
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def validate_polynomial_rates(network: ReactionNetwork, samples: int = 2000, seed: int = 0) -> None:
    """Check polynomial laws are nonnegative on sampled feasible states."""
    rng = np.random.default_rng(seed)
    n = network.n_species
    for j, r in enumerate(network.reactions):
        if not isinstance(r.rate, PolynomialRate):
            continue
        consume = np.asarray(r.consume)
        small = rng.integers(0, 30, size=(samples // 2, n))
        large = rng.integers(0, 10_000, size=(samples // 2, n))
        x = np.vstack([small, large]) + consume
        vals = r.rate.poly(x)
        if np.any(vals < -1e-9 * np.maximum(1.0, np.abs(vals))):
            bad = x[np.argmin(vals)]
            raise ModelError(f"polynomial rate of reaction {j} is negative at {tuple(bad)}")
