"""State-wise bounds on conditional stationary probabilities of a truncation."""
from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .generator import SparseGenerator, StateIndex, apply_uniform_reentry, build_generator, inboundary_states
from .model import ReactionNetwork
from .solver import (
    RESIDUAL_TOL,
    SolverError,
    StationarySystem,
    _pick_method,
    check_residual,
    normalize,
    solve_stationary,
)

log = logging.getLogger(__name__)

CHUNK = 64


@dataclass
class IntervalResult:
    lower: np.ndarray
    upper: np.ndarray
    uniform: np.ndarray
    targets: np.ndarray
    failed: list[int] = field(default_factory=list)

    @property
    def total_width(self) -> float:
        return float(np.sum(self.upper - self.lower))

    @property
    def max_width(self) -> float:
        return float(np.max(self.upper - self.lower)) if len(self.lower) else 0.0

    @property
    def partial(self) -> bool:
        return bool(self.failed)


def worker_count() -> int:
    cap = os.environ.get("STEADYTRUNC_THREADS")
    n = os.cpu_count() or 1
    if cap:
        n = min(n, max(1, int(cap)))
    return n


def _target_solutions(system: StationarySystem, gen: SparseGenerator, targets: np.ndarray, tol: float):
    """Normalized solutions for single-target redirections, one column per target."""
    n = gen.n
    rhs = np.zeros((n, len(targets)))
    rhs[targets, np.arange(len(targets))] = 1.0
    rhs[system.k, :] = 0.0
    z = system.solve(None)
    t = system._solve(rhs)
    o = system.exit
    denom = 1.0 + o @ t
    raw = z[:, None] - t * ((o @ z) / denom)[None, :]
    out, ok = [], []
    for col, b in enumerate(targets):
        w = np.zeros(n)
        w[b] = 1.0
        single = SparseGenerator(gen.offdiag, gen.outflow, w, f"single:{b}")
        try:
            if denom[col] == 0:
                raise SolverError("singular reentry update")
            pi = normalize(raw[:, col])
            check_residual(single, pi, tol, f"target {b}")
        except SolverError:
            # fall back to a dedicated solve; the target may cut off transient states
            try:
                pi = solve_stationary(single, system.method if system.method != "iterative" else "auto", tol=tol).values
            except SolverError as err:
                log.warning("single-target solve for state %d failed: %s", b, err)
                out.append(None)
                ok.append(False)
                continue
        out.append(pi)
        ok.append(True)
    return out, ok


def bounds_from_generator(gen: SparseGenerator, inboundary: np.ndarray, method: str = "auto", tol: float = RESIDUAL_TOL) -> IntervalResult:
    """Envelope over every single-target redirection plus the uniform one.

    One factorization serves all targets: each redirection is a rank-one
    update of the same normalization system.
    """
    n = gen.n
    inboundary = np.asarray(inboundary, dtype=np.int64)
    uniform_gen = apply_uniform_reentry(gen, inboundary)
    uniform = solve_stationary(uniform_gen, method).values
    if not gen.exit_rates().any():
        return IntervalResult(uniform.copy(), uniform.copy(), uniform, inboundary)
    chosen = _pick_method(method, n)
    if chosen == "iterative":
        chosen = "sparse"
    system = StationarySystem(gen, chosen, int(np.argmax(uniform)))
    system.solve(None)
    chunks = [inboundary[i : i + CHUNK] for i in range(0, len(inboundary), CHUNK)]
    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        results = list(pool.map(lambda c: _target_solutions(system, gen, c, tol), chunks))
    lower = uniform.copy()
    upper = uniform.copy()
    failed = []
    for chunk, (sols, oks) in zip(chunks, results):
        for b, pi, good in zip(chunk, sols, oks):
            if not good:
                failed.append(int(b))
                continue
            np.minimum(lower, pi, out=lower)
            np.maximum(upper, pi, out=upper)
    return IntervalResult(lower, upper, uniform, inboundary, failed)


def statewise_bounds(network: ReactionNetwork, truncation: StateIndex, method: str = "auto") -> IntervalResult:
    """Bounds on the stationary distribution conditioned on ``truncation``."""
    gen = build_generator(network, truncation)
    inboundary = inboundary_states(network, truncation)
    if gen.exit_rates().any() and len(inboundary) == 0:
        raise ValueError("truncation has outflow but no in-boundary states")
    return bounds_from_generator(gen, inboundary, method)


def outside_mass_estimate(
    truncation: StateIndex,
    reference: Callable[[np.ndarray], np.ndarray] | Mapping[tuple, float],
) -> float:
    """Reference mass outside ``truncation``.

    ``reference`` is either a pmf evaluated on an array of states (its total
    mass is taken as one) or a mapping from states to probabilities, such as
    an occupancy estimate.
    """
    if callable(reference):
        inside = float(np.sum(reference(truncation.states)))
        return max(0.0, 1.0 - inside)
    total = float(sum(reference.values()))
    if total <= 0:
        raise ValueError("reference has no mass")
    keys = np.array(list(reference.keys()), dtype=np.int64).reshape(len(reference), -1)
    probs = np.array(list(reference.values()), dtype=float)
    outside = truncation.lookup(keys) < 0
    return float(probs[outside].sum() / total)

