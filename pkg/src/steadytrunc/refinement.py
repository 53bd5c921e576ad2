"""Iterative refine-and-truncate driver over grid partitions."""
from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .aggregation import LumpedGenerator, Partition, build_lumped_generator
from .generator import StateIndex
from .lyapunov import LyapunovSpec, lyapunov_box
from .model import ReactionNetwork
from .polynomial import Polynomial
from .solver import Distribution, ReducibleChainError, restrict, solve_stationary

log = logging.getLogger(__name__)


class RefinementError(RuntimeError):
    pass


@dataclass
class RefinementConfig:
    epsilon: float = 1e-2
    m: int = 4
    epsilon_l: float = 1e-4
    max_states: int = 2_000_000
    solver: str = "auto"
    reentry: str = "uniform"
    init_extent: int | None = None
    lyapunov: Polynomial | None = field(default=None, repr=False)
    max_levels: int | None = None

    def __post_init__(self):
        if not 0 <= self.epsilon < 1:
            raise ValueError("epsilon must lie in [0, 1)")
        if self.m < 0:
            raise ValueError("initial exponent must be nonnegative")
        if self.reentry != "uniform":
            raise ValueError(f"unsupported reentry scheme {self.reentry!r}")
        if self.init_extent is not None and self.init_extent < 1:
            raise ValueError("initial extent must be positive")


@dataclass
class IterationReport:
    level: int
    size: int
    cell_width: int
    residual: float
    kept_mass: float
    kept: int
    wall_time: float
    method: str
    warning: str = ""

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class RefinementResult:
    states: StateIndex
    distribution: Distribution
    reports: list[IterationReport]
    lumped: LumpedGenerator
    box: tuple[int, ...] | None = None
    lyapunov_c: float | None = None
    complete: bool = True

    @property
    def final_size(self) -> int:
        return len(self.states)


def cells_per_axis(box: Sequence[int], aggregated: Sequence[int], m: int) -> int:
    """Cube side in cells: enough width-``2**m`` cells to cover the widest axis."""
    w = 2**m
    return max(math.ceil((box[a] + 1) / w) for a in aggregated)


def initial_partition(network: ReactionNetwork, box: Sequence[int], m: int, max_states: int | None = None) -> Partition:
    """Origin-anchored cube of cells of width ``2**m`` covering ``box`` (inclusive bounds)."""
    n = cells_per_axis(box, network.aggregated_indices, m)
    count = n ** len(network.aggregated_indices) * max(1, len(network.mode_values))
    if max_states is not None and count > max_states:
        raise RefinementError(f"initial partition has {count} cells (cap {max_states}); use a larger exponent")
    return Partition.grid(network, n, m)


def filter_states(values: np.ndarray, epsilon: float, lower: np.ndarray | None = None) -> np.ndarray:
    """Indices of the smallest high-probability prefix with mass >= 1 - epsilon.

    Cells are ranked by probability, ties by lower corner; zero-mass cells
    are never kept.
    """
    values = np.asarray(values, dtype=float)
    n = len(values)
    if lower is None:
        lower = np.arange(n)[:, None]
    keys = [lower[:, a] for a in range(lower.shape[1] - 1, -1, -1)] + [-values]
    order = np.lexsort(keys)
    positive = int(np.count_nonzero(values > 0))
    if epsilon == 0:
        return np.sort(order[:positive])
    cum = np.cumsum(values[order])
    k = int(np.searchsorted(cum, 1.0 - epsilon, side="left")) + 1
    k = min(k, positive)
    return np.sort(order[:k])


def _solve(gen, method: str, x0) -> tuple[Distribution, str]:
    try:
        return solve_stationary(gen, method, x0), ""
    except ReducibleChainError as err:
        keep = err.classes[0]
        sub = restrict(gen, keep)
        inner = solve_stationary(sub, method, None if x0 is None else np.asarray(x0)[keep])
        values = np.zeros(gen.n)
        values[keep] = inner.values
        residual = float(np.max(np.abs(gen.apply_left(values))))
        msg = f"reducible generator ({len(err.classes)} closed classes); restricted to the largest ({len(keep)} states)"
        log.warning(msg)
        return Distribution(values, residual, inner.method), msg


def _inherit(parent: Partition, values: np.ndarray, keep: np.ndarray, child: Partition) -> np.ndarray:
    """Warm start: spread each kept parent's mass uniformly over its children by volume."""
    owner = np.zeros(len(child), dtype=np.int64)
    # children lie inside exactly one kept parent; locate it by lower corner
    w = np.asarray(parent.width)
    corner = child.lower - (child.lower % w)
    idx = parent.index.lookup(corner)
    if np.any(idx < 0):
        return np.full(len(child), 1.0 / len(child))
    owner[:] = idx
    x0 = values[owner] * child.volumes() / parent.volumes()[owner]
    total = x0.sum()
    return x0 / total if total > 0 else np.full(len(child), 1.0 / len(child))


def _report(level, part, dist, keep, t0, warning) -> IterationReport:
    kept_mass = float(dist.values[keep].sum()) if keep is not None else 1.0
    rep = IterationReport(
        level=level,
        size=len(part),
        cell_width=int(max(part.width)),
        residual=float(dist.residual),
        kept_mass=kept_mass,
        kept=len(keep) if keep is not None else len(part),
        wall_time=time.perf_counter() - t0,
        method=dist.method,
        warning=warning,
    )
    log.info(json.dumps({"event": "level", **rep.as_dict()}))
    return rep


def refine(network: ReactionNetwork, config: RefinementConfig, partition: Partition | None = None) -> RefinementResult:
    """Solve, filter and split level by level, then solve at unit granularity.

    With ``config.max_levels`` set, stops after that many coarse levels and
    returns the last lumped solution (``complete`` is then false).
    """
    box = None
    c = None
    if partition is None:
        if config.init_extent is not None:
            box = tuple(
                config.init_extent - 1 if a in network.aggregated_indices else 0 for a in range(network.n_species)
            )
        else:
            spec = LyapunovSpec.build(network, config.epsilon_l, config.lyapunov)
            box = lyapunov_box(network, spec)
            c = spec.c
        partition = initial_partition(network, box, config.m, config.max_states)
    part = partition
    reports: list[IterationReport] = []
    x0 = None
    levels = config.m if config.max_levels is None else min(config.m, config.max_levels)
    for level in range(levels):
        t0 = time.perf_counter()
        if len(part) > config.max_states:
            raise RefinementError(f"level {level} has {len(part)} cells (cap {config.max_states})")
        lumped = build_lumped_generator(network, part)
        try:
            dist, warning = _solve(lumped.generator, config.solver, x0)
        except Exception as err:
            raise RefinementError(f"level {level}: {err}") from err
        keep = filter_states(dist.values, config.epsilon, part.lower)
        if len(keep) == 0:
            raise RefinementError(f"level {level}: filter kept no cells")
        reports.append(_report(level, part, dist, keep, t0, warning))
        child = part.refine(keep)
        x0 = _inherit(part, dist.values, keep, child)
        part = child
    t0 = time.perf_counter()
    lumped = build_lumped_generator(network, part)
    try:
        dist, warning = _solve(lumped.generator, config.solver, x0)
    except Exception as err:
        raise RefinementError(f"final level: {err}") from err
    reports.append(_report(levels, part, dist, None, t0, warning))
    complete = part.is_unit()
    states = StateIndex(part.lower)
    return RefinementResult(states, dist, reports, lumped, box, c, complete)
