"""Independent references: closed-form distributions, SSA occupancy, brute-force sums."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.stats import poisson

from . import kernels
from .aggregation import MacroState
from .generator import StateIndex
from .model import CustomRate, MassAction, ReactionNetwork
from .solver import Distribution

log = logging.getLogger(__name__)

BRUTE_FORCE_CAP = 10**6
CHUNK_JUMPS = 1 << 16
DEFAULT_MAX_JUMPS = 10**9


class OracleError(RuntimeError):
    pass


def poisson_rates(network: ReactionNetwork) -> np.ndarray | None:
    """Per-species Poisson means if the network is a set of independent birth-death processes."""
    n = network.n_species
    birth = np.full(n, np.nan)
    death = np.full(n, np.nan)
    for r in network.reactions:
        if not isinstance(r.rate, MassAction):
            return None
        c = float(r.rate.constant)
        if sum(r.consume) == 0 and sum(r.produce) == 1:
            s = r.produce.index(1)
            if not np.isnan(birth[s]):
                return None
            birth[s] = c
        elif sum(r.consume) == 1 and sum(r.produce) == 0:
            s = r.consume.index(1)
            if not np.isnan(death[s]):
                return None
            death[s] = c
        else:
            return None
    if np.any(np.isnan(birth)) or np.any(np.isnan(death)) or np.any(death <= 0):
        return None
    return birth / death


def poisson_product_pmf(rates, states: np.ndarray) -> np.ndarray:
    states = np.atleast_2d(np.asarray(states))
    out = np.ones(states.shape[0])
    for a, lam in enumerate(rates):
        out *= poisson.pmf(states[:, a], lam)
    return out


def analytic_stationary(network: ReactionNetwork, states: StateIndex) -> Distribution:
    """Exact stationary distribution restricted to ``states`` and renormalized."""
    rates = poisson_rates(network)
    if rates is None:
        raise OracleError("no closed-form stationary distribution for this model")
    pmf = poisson_product_pmf(rates, states.states)
    total = pmf.sum()
    if total <= 0:
        raise OracleError("support carries no mass under the reference")
    return Distribution(pmf / total, 0.0, "analytic")


def analytic_pmf(network: ReactionNetwork):
    """Untruncated pmf callable, or ``None`` if the model has no closed form."""
    rates = poisson_rates(network)
    if rates is None:
        return None
    return lambda x: poisson_product_pmf(rates, x)


@dataclass
class OccupancyEstimate:
    states: np.ndarray
    fractions: np.ndarray
    horizon: float
    burn_in: float
    seed: int
    jumps: int

    def as_mapping(self) -> dict[tuple, float]:
        return {tuple(s): float(f) for s, f in zip(self.states.tolist(), self.fractions)}

    def distribution_on(self, states: StateIndex) -> np.ndarray:
        out = np.zeros(len(states))
        idx = states.lookup(self.states)
        inside = idx >= 0
        np.add.at(out, idx[inside], self.fractions[inside])
        return out


def _ssa_arrays(network: ReactionNetwork):
    nr, d = len(network.reactions), network.n_species
    order = np.zeros((nr, d), dtype=np.int64)
    rates = np.zeros(nr)
    sat_species = np.full(nr, -1, dtype=np.int64)
    sat_const = np.zeros(nr)
    for j, r in enumerate(network.reactions):
        if isinstance(r.rate, MassAction):
            order[j] = r.consume
            rates[j] = float(r.rate.constant)
        elif isinstance(r.rate, CustomRate) and r.rate.law.ssa_form(d) is not None:
            o, s, k = r.rate.law.ssa_form(d)
            order[j] = o
            rates[j] = float(r.rate.law.k)
            sat_species[j] = s
            sat_const[j] = k
        else:
            raise OracleError(f"reaction {j} has a rate law the simulator does not support")
    return order, network.change_matrix.copy(), rates, sat_species, sat_const


def ssa_trajectory(network: ReactionNetwork, x0, t_end: float, seed: int = 0, max_jumps: int = DEFAULT_MAX_JUMPS):
    """Yield ``(states, entry_times, t_after)`` chunks of an exact SSA path."""
    order, change, rates, sat_species, sat_const = _ssa_arrays(network)
    rng = np.random.Generator(np.random.Philox(seed))
    x = np.array(x0, dtype=np.int64)
    if x.shape != (network.n_species,) or np.any(x < 0):
        raise ValueError("initial state must be a nonnegative vector of species counts")
    t = 0.0
    jumps = 0
    states = np.empty((CHUNK_JUMPS, network.n_species), dtype=np.int64)
    times = np.empty(CHUNK_JUMPS)
    while t < t_end:
        uniforms = rng.random(2 * CHUNK_JUMPS)
        records, t = kernels.ssa_chunk(
            x, t, t_end, order, change, rates, sat_species, sat_const, uniforms, states, times
        )
        jumps += records - 1
        if jumps > max_jumps:
            raise OracleError(f"jump cap {max_jumps} exceeded before time {t_end}; possible explosion")
        yield states[:records], times[:records], t


def _sum_by_state(states: np.ndarray, weights: np.ndarray):
    """Distinct rows of ``states`` and the summed weights of each."""
    lo = states.min(axis=0)
    span = states.max(axis=0) - lo + 1
    if np.prod(span.astype(float)) > 2.0**40:
        uniq, inv = np.unique(states, axis=0, return_inverse=True)
        return uniq, np.bincount(inv.ravel(), weights=weights)
    strides = np.ones(len(span), dtype=np.int64)
    for a in range(len(span) - 2, -1, -1):
        strides[a] = strides[a + 1] * span[a + 1]
    keys = (states - lo) @ strides
    ukeys, inv = np.unique(keys, return_inverse=True)
    sums = np.bincount(inv, weights=weights)
    rows = np.empty((len(ukeys), len(span)), dtype=np.int64)
    rest = ukeys.copy()
    for a in range(len(span)):
        rows[:, a], rest = np.divmod(rest, strides[a])
    return rows + lo, sums


def ssa_occupancy(
    network: ReactionNetwork,
    x0,
    horizon: float,
    burn_in: float = 0.1,
    seed: int = 0,
    max_jumps: int = DEFAULT_MAX_JUMPS,
) -> OccupancyEstimate:
    """Fraction of time spent in each state on ``[burn_in * horizon, horizon]``."""
    if horizon <= 0 or not 0 <= burn_in < 1:
        raise ValueError("need horizon > 0 and burn-in fraction in [0, 1)")
    start = burn_in * horizon
    acc: dict[tuple, float] = {}
    jumps = 0
    for states, times, t_after in ssa_trajectory(network, x0, horizon, seed, max_jumps):
        leave = np.append(times[1:], t_after)
        dur = np.clip(leave, start, None) - np.clip(times, start, None)
        live = dur > 0
        jumps += len(times) - 1
        if not live.any():
            continue
        uniq, sums = _sum_by_state(states[live], dur[live])
        for row, s in zip(uniq.tolist(), sums):
            key = tuple(row)
            acc[key] = acc.get(key, 0.0) + s
    span = horizon - start
    keys = np.array(list(acc.keys()), dtype=np.int64).reshape(len(acc), network.n_species)
    fractions = np.array(list(acc.values())) / span
    return OccupancyEstimate(keys, fractions, horizon, burn_in, seed, jumps)


def brute_force_lumped_rate(network: ReactionNetwork, j: int, region: MacroState | None) -> float:
    """``sum alpha_j(x)`` over ``region`` by explicit enumeration."""
    if region is None:
        return 0.0
    if region.volume > BRUTE_FORCE_CAP:
        raise OracleError(f"region volume {region.volume} exceeds the enumeration cap {BRUTE_FORCE_CAP}")
    states = StateIndex.from_box(region.upper, region.lower).states
    return float(np.sum(network.propensities(j, states)))


def total_variation(a: np.ndarray, b: np.ndarray) -> float:
    return 0.5 * float(np.abs(np.asarray(a) - np.asarray(b)).sum())
