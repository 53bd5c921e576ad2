"""Drift of a polynomial Lyapunov function and the box it certifies."""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .model import CustomRate, ReactionNetwork, propensity
from .polynomial import Polynomial, squared_norm

log = logging.getLogger(__name__)

DEFAULT_HORIZON = 2**31
GRID_POINTS = 65


class LyapunovError(ValueError):
    pass


@dataclass(frozen=True)
class SymbolicDrift:
    """Drift split into a polynomial part and custom-law terms ``coef * law(x)``."""

    polynomial: Polynomial
    custom: tuple[tuple[Fraction, object], ...]

    def upper_bound(self) -> Polynomial:
        """Polynomial majorant: each custom term uses the law bound matching the sign of its coefficient."""
        poly = self.polynomial
        for coef, law in self.custom:
            lo, hi = law.bound_polynomials(poly.nvars)
            poly = poly + (lo if coef < 0 else hi) * coef
        return poly


def default_function(network: ReactionNetwork) -> Polynomial:
    """Unweighted squared norm over the aggregated species."""
    return squared_norm(network.n_species, network.aggregated_indices)


def symbolic_drift(network: ReactionNetwork, g: Polynomial) -> SymbolicDrift:
    poly = Polynomial(network.n_species)
    custom = []
    for j, reaction in enumerate(network.reactions):
        v = reaction.change
        if not any(v):
            continue
        delta = g.shift(v) - g
        if delta.is_zero():
            continue
        rate = network.rate_polynomial(j)
        if rate is not None:
            poly = poly + rate * delta
            continue
        if not delta.is_constant():
            raise LyapunovError("custom rate laws need an increment of g that is constant along their change vector")
        assert isinstance(reaction.rate, CustomRate)
        custom.append((delta.constant_term(), reaction.rate.law))
    return SymbolicDrift(poly, tuple(custom))


def drift(network: ReactionNetwork, g: Polynomial, x: Sequence[int]) -> float:
    """``sum_j alpha_j(x) * (g(x + v_j) - g(x))`` at one micro-state."""
    x = [int(a) for a in x]
    gx = g.evaluate_exact(x)
    total = 0.0
    for j, reaction in enumerate(network.reactions):
        a = propensity(network, j, x)
        if a == 0:
            continue
        y = [a_ + b for a_, b in zip(x, reaction.change)]
        total += a * float(g.evaluate_exact(y) - gx)
    return total


def drift_many(network: ReactionNetwork, g: Polynomial, x: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=np.int64))
    gx = g(x)
    out = np.zeros(x.shape[0])
    for j, v in enumerate(network.change_matrix):
        if not v.any():
            continue
        out += network.propensities(j, x) * (g(x + v) - gx)
    return out


def _quadratic_form(poly: Polynomial, free: Sequence[int]):
    """Constant, gradient at zero and Hessian of a degree <= 2 polynomial over ``free`` axes."""
    k = len(free)
    pos = {a: i for i, a in enumerate(free)}
    const = 0.0
    grad = np.zeros(k)
    hess = np.zeros((k, k))
    for mono, coef in poly.terms.items():
        c = float(coef)
        axes = [(pos[a], e) for a, e in enumerate(mono) if e]
        if not axes:
            const += c
        elif len(axes) == 1 and axes[0][1] == 1:
            grad[axes[0][0]] += c
        elif len(axes) == 1:
            hess[axes[0][0], axes[0][0]] += 2 * c
        else:
            (i, _), (l, _) = axes
            hess[i, l] += c
            hess[l, i] += c
    return const, grad, hess


def _maximize_quadratic(const, grad, hess, upper) -> tuple[float, np.ndarray]:
    """Maximum of ``const + grad.x + x.H.x/2`` over ``[0, upper]`` by face enumeration.

    On every face the free coordinates solve the stationarity system; faces
    with a singular reduced Hessian attain their maximum on a sub-face.
    """
    k = len(grad)
    best, arg = -np.inf, np.zeros(k)
    for choice in itertools.product((0, 1, 2), repeat=k):
        x = np.array([0.0 if c == 0 else float(u) for c, u in zip(choice, upper)])
        free = [i for i, c in enumerate(choice) if c == 2]
        if free:
            fixed = [i for i in range(k) if choice[i] != 2]
            h = hess[np.ix_(free, free)]
            rhs = -(grad[free] + hess[np.ix_(free, fixed)] @ x[fixed])
            try:
                sol = np.linalg.solve(h, rhs)
            except np.linalg.LinAlgError:
                continue
            if not np.allclose(h @ sol, rhs, rtol=1e-9, atol=1e-9):
                continue
            ub = np.asarray(upper, dtype=float)[free]
            if np.any(sol < 0) or np.any(sol > ub):
                continue
            x[free] = sol
        val = const + grad @ x + 0.5 * x @ hess @ x
        if val > best:
            best, arg = val, x
    return float(best), arg


def _grid_maximize(poly: Polynomial, free: Sequence[int], upper) -> tuple[float, np.ndarray]:
    axes = []
    for u in upper:
        lin = np.linspace(0, u, GRID_POINTS)
        geo = np.geomspace(1, max(u, 1), GRID_POINTS)
        axes.append(np.unique(np.round(np.concatenate([lin, geo, np.arange(min(u, 64) + 1)]))))
    mesh = np.stack([m.ravel() for m in np.meshgrid(*axes, indexing="ij")], axis=1)
    full = np.zeros((mesh.shape[0], poly.nvars))
    full[:, list(free)] = mesh
    vals = poly(full)
    i = int(np.argmax(vals))
    return float(vals[i]), mesh[i]


def _maximize(poly: Polynomial, free: Sequence[int], upper) -> tuple[float, np.ndarray]:
    if not free:
        return float(poly.constant_term()), np.zeros(0)
    if poly.total_degree() <= 2:
        return _maximize_quadratic(*_quadratic_form(poly, free), upper)
    return _grid_maximize(poly, free, upper)


def _mode_slices(network: ReactionNetwork, poly: Polynomial):
    combos = network.mode_values or [()]
    for combo in combos:
        yield combo, poly.substitute(dict(zip(network.mode_indices, combo)))


def _sup_over(network: ReactionNetwork, bound: Polynomial, upper: Sequence[int]) -> tuple[float, np.ndarray]:
    free = network.aggregated_indices
    best, arg = -np.inf, None
    for combo, poly in _mode_slices(network, bound):
        val, x = _maximize(poly, free, [upper[a] for a in free])
        if val > best:
            best = val
            arg = np.zeros(network.n_species)
            arg[list(free)] = x
            arg[list(network.mode_indices)] = combo
    return best, arg


def drift_supremum(network: ReactionNetwork, g: Polynomial, horizon: int | Sequence[int] = DEFAULT_HORIZON) -> float:
    """Upper bound on the drift over ``[0, horizon]`` (per aggregated axis).

    Exact continuous maximization for total degree <= 2, grid scan otherwise.
    Raises :class:`LyapunovError` if the bound keeps growing past the horizon.
    """
    upper = _horizon_vector(network, horizon)
    bound = symbolic_drift(network, g).upper_bound()
    c, _ = _sup_over(network, bound, upper)
    c2, _ = _sup_over(network, bound, [2 * u for u in upper])
    if c2 > c + 1e-9 * max(1.0, abs(c)):
        raise LyapunovError("drift grows beyond the horizon: not a valid Lyapunov certificate")
    return c


def _horizon_vector(network: ReactionNetwork, horizon) -> list[int]:
    if np.isscalar(horizon):
        return [int(horizon)] * network.n_species
    horizon = [int(h) for h in horizon]
    if len(horizon) != network.n_species:
        raise ValueError("horizon dimension does not match species count")
    return horizon


@dataclass(frozen=True)
class LyapunovSpec:
    g: Polynomial
    epsilon_l: float
    c: float
    horizon: int = DEFAULT_HORIZON

    @classmethod
    def build(cls, network: ReactionNetwork, epsilon_l: float, g: Polynomial | None = None, horizon: int = DEFAULT_HORIZON) -> LyapunovSpec:
        if not 0 < epsilon_l < 1:
            raise ValueError("epsilon_l must lie in (0, 1)")
        if g is None:
            g = network.lyapunov if network.lyapunov is not None else default_function(network)
        _check_radially_unbounded(network, g, horizon)
        return cls(g, epsilon_l, drift_supremum(network, g, horizon), horizon)

    @property
    def threshold(self) -> float:
        """Drift level ``c - c / epsilon_l`` bounding the certified set from below."""
        return self.c - self.c / self.epsilon_l

    def contains(self, network: ReactionNetwork, x) -> np.ndarray:
        return drift_many(network, self.g, x) > self.threshold


def _check_radially_unbounded(network: ReactionNetwork, g: Polynomial, horizon: int) -> None:
    for a in network.aggregated_indices:
        x0 = np.zeros(network.n_species)
        x1 = x0.copy()
        x1[a] = horizon
        if not g(x1) > g(x0):
            raise LyapunovError(f"g does not grow along species {network.names[a]}")


def lyapunov_box(network: ReactionNetwork, spec: LyapunovSpec) -> tuple[int, ...]:
    """Per-species inclusive upper bounds of a box containing the certified set.

    For each aggregated axis, the bound is the last ``t`` at which the drift
    majorant, maximized over the other coordinates, still exceeds the
    threshold; found by exponential search and bisection.  Mode axes get
    their largest feasible value.
    """
    if spec.c <= 0:
        raise LyapunovError("drift supremum must be positive to define a bounded set")
    bound = symbolic_drift(network, spec.g).upper_bound()
    thresh = spec.threshold
    upper = _horizon_vector(network, spec.horizon)
    box = [0] * network.n_species
    for i, a in enumerate(network.mode_indices):
        box[a] = max(combo[i] for combo in network.mode_values)
    for a in network.aggregated_indices:
        others = [b for b in network.aggregated_indices if b != a]

        def profile(t: int) -> float:
            fixed = bound.substitute({a: t})
            best = -np.inf
            for _, poly in _mode_slices(network, fixed):
                val, _ = _maximize(poly, others, [upper[b] for b in others])
                best = max(best, val)
            return best

        if profile(upper[a]) > thresh:
            raise LyapunovError(f"certified set is not bounded within the horizon along {network.names[a]}")
        if profile(0) <= thresh:
            box[a] = 0
            continue
        lo, hi = 0, 1
        while hi < upper[a] and profile(hi) > thresh:
            lo, hi = hi, min(2 * hi, upper[a])
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if profile(mid) > thresh:
                lo = mid
            else:
                hi = mid
        box[a] = lo
    log.debug("lyapunov box %s (c=%.6g, threshold=%.6g)", box, spec.c, thresh)
    return tuple(box)
