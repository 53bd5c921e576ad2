"""Hypercube macro-states and the lumped generator over a grid partition.

A macro-state is an integer box ``[lower, upper]``.  Mode species (never
aggregated) are ordinary axes whose boxes always have width one, so the
same interval algebra covers stacked grids.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from . import faulhaber, kernels
from .generator import Outflow, SparseGenerator, StateIndex, apply_uniform_reentry
from .model import CustomRate, MassAction, PolynomialRate, ReactionNetwork


class AggregationError(RuntimeError):
    pass


@dataclass(frozen=True)
class MacroState:
    lower: tuple[int, ...]
    upper: tuple[int, ...]

    def __post_init__(self):
        if len(self.lower) != len(self.upper):
            raise ValueError("corner dimensions differ")
        if any(lo > hi for lo, hi in zip(self.lower, self.upper)):
            raise ValueError(f"empty macro-state {self.lower}..{self.upper}")

    @property
    def volume(self) -> int:
        out = 1
        for lo, hi in zip(self.lower, self.upper):
            out *= hi - lo + 1
        return out

    @property
    def widths(self) -> tuple[int, ...]:
        return tuple(hi - lo + 1 for lo, hi in zip(self.lower, self.upper))

    def contains(self, x: Sequence[int]) -> bool:
        return all(lo <= xi <= hi for lo, xi, hi in zip(self.lower, x, self.upper))

    def micro_states(self):
        return itertools.product(*[range(lo, hi + 1) for lo, hi in zip(self.lower, self.upper)])

    def shifted(self, v: Sequence[int]) -> MacroState:
        return MacroState(tuple(a + b for a, b in zip(self.lower, v)), tuple(a + b for a, b in zip(self.upper, v)))

    def intersect(self, other: MacroState) -> MacroState | None:
        lo = tuple(max(a, b) for a, b in zip(self.lower, other.lower))
        hi = tuple(min(a, b) for a, b in zip(self.upper, other.upper))
        if any(a > b for a, b in zip(lo, hi)):
            return None
        return MacroState(lo, hi)

    def mode_assignment(self, network: ReactionNetwork) -> tuple[int, ...]:
        return tuple(self.lower[i] for i in network.mode_indices)


def transition_set(xi: MacroState, xk: MacroState, v: Sequence[int]) -> MacroState | None:
    """Micro-states of ``xi`` that land in ``xk`` under change ``v``."""
    if len(xi.lower) != len(xk.lower):
        raise ValueError("macro-states differ in dimension")
    hit = xi.shifted(v).intersect(xk)
    if hit is None:
        return None
    return hit.shifted([-a for a in v])


def box_difference(outer: MacroState, inner: MacroState | None) -> list[MacroState]:
    """``outer \\ inner`` as disjoint boxes (``inner`` must lie inside ``outer``)."""
    if inner is None:
        return [outer]
    pieces = []
    lo, hi = list(outer.lower), list(outer.upper)
    for a in range(len(lo)):
        if lo[a] < inner.lower[a]:
            piece_hi = list(hi)
            piece_hi[a] = inner.lower[a] - 1
            pieces.append(MacroState(tuple(lo), tuple(piece_hi)))
        if inner.upper[a] < hi[a]:
            piece_lo = list(lo)
            piece_lo[a] = inner.upper[a] + 1
            pieces.append(MacroState(tuple(piece_lo), tuple(hi)))
        lo[a], hi[a] = inner.lower[a], inner.upper[a]
    return pieces


def exit_set(xi: MacroState, v: Sequence[int]) -> list[MacroState]:
    """Micro-states of ``xi`` that leave ``xi`` under ``v``, as disjoint boxes.

    For a shift along one axis this is a single face; a diagonal shift gives
    an L-shaped set, hence the list.
    """
    stay = transition_set(xi, xi, v)
    return box_difference(xi, stay)


def _restrict_to_support(lower: np.ndarray, consume: np.ndarray) -> np.ndarray:
    return np.maximum(lower, consume)


def lumped_rate(network: ReactionNetwork, j: int, region: MacroState) -> float:
    """Sum of ``alpha_j`` over the micro-states of ``region``.

    Mass-action and polynomial laws use exact Faulhaber power sums; custom
    laws use their coarse sum unless the region is a single state.
    """
    reaction = network.reactions[j]
    rate = reaction.rate
    lower = list(region.lower)
    upper = list(region.upper)
    if isinstance(rate, MassAction):
        total = Fraction(rate.constant)
        for k, lo, hi in zip(reaction.consume, lower, upper):
            if k == 0:
                total *= hi - lo + 1
            else:
                total *= faulhaber.interval_binomial_sum(k, lo, hi)
        return float(total)
    if isinstance(rate, PolynomialRate):
        lower = [max(lo, k) for lo, k in zip(lower, reaction.consume)]
        if any(lo > hi for lo, hi in zip(lower, upper)):
            return 0.0
        total = Fraction(0)
        for mono, coef in rate.poly.terms.items():
            term = coef
            for p, lo, hi in zip(mono, lower, upper):
                term *= faulhaber.interval_power_sum(p, lo, hi)
            total += term
        return float(total)
    if region.volume == 1:
        return float(network.propensities(j, np.asarray(region.lower)[None, :])[0])
    return float(rate.law.box_sum(np.asarray(lower)[None, :], np.asarray(upper)[None, :])[0])


_FLOAT_TABLE = faulhaber.float_tables()


def _axis_power_sums(lower: np.ndarray, upper: np.ndarray, degree: int) -> np.ndarray:
    return kernels.interval_power_sums(lower, upper, degree, _FLOAT_TABLE)


def lumped_rates(network: ReactionNetwork, j: int, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    """Vectorized :func:`lumped_rate` over boxes given as ``(n, d)`` corner arrays.

    Power sums come from the compiled kernel in a cancellation-free shifted
    Faulhaber form, so results match the exact path to rounding.
    """
    lower = np.asarray(lower, dtype=np.int64)
    upper = np.asarray(upper, dtype=np.int64)
    n, d = lower.shape
    reaction = network.reactions[j]
    rate = reaction.rate
    consume = np.asarray(reaction.consume, dtype=np.int64)
    if n == 0:
        return np.zeros(0)
    if isinstance(rate, MassAction):
        out = np.full(n, float(rate.constant))
        for a in range(d):
            k = int(consume[a])
            if k == 0:
                out *= (upper[:, a] - lower[:, a] + 1).astype(float)
                continue
            sums = _axis_power_sums(lower[:, a], upper[:, a], k)
            coeffs = np.array([float(c) for c in faulhaber.binomial_power_coeffs(k)])
            out *= np.maximum(sums @ coeffs, 0.0)
        return out
    if isinstance(rate, PolynomialRate):
        lo = _restrict_to_support(lower, consume)
        valid = np.all(lo <= upper, axis=1)
        hi = np.where(valid[:, None], upper, lo - 1)
        degrees = rate.poly.axis_degrees()
        sums = [_axis_power_sums(lo[:, a], hi[:, a], degrees[a]) for a in range(d)]
        out = np.zeros(n)
        for mono, coef in rate.poly.terms.items():
            term = np.full(n, float(coef))
            for a, p in enumerate(mono):
                term *= sums[a][:, p]
            out += term
        return np.where(valid, out, 0.0)
    unit = np.all(lower == upper, axis=1)
    out = np.zeros(n)
    if unit.any():
        out[unit] = network.propensities(j, lower[unit])
    if (~unit).any():
        out[~unit] = rate.law.box_sum(lower[~unit], upper[~unit])
    return out


def split(cell: MacroState) -> list[MacroState]:
    """Halve every axis of width >= 2; the lower half gets ``width // 2`` states."""
    per_axis = []
    for lo, hi in zip(cell.lower, cell.upper):
        w = hi - lo + 1
        if w >= 2:
            mid = lo + w // 2
            per_axis.append([(lo, mid - 1), (mid, hi)])
        else:
            per_axis.append([(lo, hi)])
    return [
        MacroState(tuple(p[0] for p in combo), tuple(p[1] for p in combo))
        for combo in itertools.product(*per_axis)
    ]


class Partition:
    """Disjoint macro-states sorted by lower corner.

    ``width`` is the nominal per-axis cell width of the level.
    """

    def __init__(self, lower, upper, width: Sequence[int], level: int = 0):
        lower = np.atleast_2d(np.asarray(lower, dtype=np.int64))
        upper = np.atleast_2d(np.asarray(upper, dtype=np.int64))
        if lower.shape != upper.shape:
            raise ValueError("corner arrays differ in shape")
        if np.any(lower > upper):
            raise ValueError("empty cell in partition")
        order = np.lexsort(lower.T[::-1]) if len(lower) else np.zeros(0, dtype=np.int64)
        self.lower = lower[order]
        self.upper = upper[order]
        self.width = tuple(int(w) for w in width)
        self.level = level
        self.index = StateIndex(self.lower)
        if len(self.index) != len(self.lower):
            raise ValueError("duplicate cells in partition")

    @classmethod
    def from_cells(cls, cells: Sequence[MacroState], width=None, level: int = 0) -> Partition:
        lower = np.array([c.lower for c in cells], dtype=np.int64)
        upper = np.array([c.upper for c in cells], dtype=np.int64)
        if width is None:
            width = (upper - lower + 1).max(axis=0)
        return cls(lower, upper, width, level)

    @classmethod
    def grid(cls, network: ReactionNetwork, cells_per_axis: int, exponent: int) -> Partition:
        """Origin-anchored cube of ``cells_per_axis`` cells of width ``2**exponent``,
        stacked over every feasible mode combination."""
        w = 2**exponent
        agg = network.aggregated_indices
        modes = network.mode_indices
        d = network.n_species
        ranges = [range(cells_per_axis)] * len(agg)
        combos = network.mode_values or [()]
        count = cells_per_axis ** len(agg) * len(combos)
        lower = np.zeros((count, d), dtype=np.int64)
        row = 0
        for combo in combos:
            for cell in itertools.product(*ranges):
                for a, c in zip(agg, cell):
                    lower[row, a] = c * w
                for a, val in zip(modes, combo):
                    lower[row, a] = val
                row += 1
        width = np.ones(d, dtype=np.int64)
        width[list(agg)] = w
        return cls(lower, lower + width - 1, width, 0)

    def __len__(self) -> int:
        return self.lower.shape[0]

    @property
    def dim(self) -> int:
        return self.lower.shape[1]

    def cell(self, i: int) -> MacroState:
        return MacroState(tuple(self.lower[i].tolist()), tuple(self.upper[i].tolist()))

    def cells(self) -> list[MacroState]:
        return [self.cell(i) for i in range(len(self))]

    def volumes(self) -> np.ndarray:
        return np.prod((self.upper - self.lower + 1).astype(float), axis=1)

    def total_volume(self) -> int:
        return int(sum(int(np.prod([int(w) for w in row])) for row in (self.upper - self.lower + 1)))

    def is_unit(self) -> bool:
        return bool(np.all(self.lower == self.upper))

    def is_regular(self) -> bool:
        """Every cell has the nominal width and is aligned to the level grid."""
        w = np.asarray(self.width)
        return bool(np.all(self.upper - self.lower + 1 == w) and np.all(self.lower % w == 0))

    def states(self) -> StateIndex:
        if not self.is_unit():
            raise AggregationError("partition is not at unit granularity")
        return StateIndex(self.lower)

    def refine(self, keep: np.ndarray) -> Partition:
        """Split the kept cells (given by index) into the next level."""
        children = [c for i in np.asarray(keep, dtype=np.int64) for c in split(self.cell(int(i)))]
        width = tuple(max(1, w // 2) if w >= 2 else 1 for w in self.width)
        lower = np.array([c.lower for c in children], dtype=np.int64).reshape(-1, self.dim)
        upper = np.array([c.upper for c in children], dtype=np.int64).reshape(-1, self.dim)
        return Partition(lower, upper, width, self.level + 1)

    def subset(self, keep: np.ndarray) -> Partition:
        keep = np.asarray(keep, dtype=np.int64)
        return Partition(self.lower[keep], self.upper[keep], self.width, self.level)


@dataclass
class LumpedGenerator:
    partition: Partition
    generator: SparseGenerator
    inboundary: np.ndarray


def _grid_offsets(v: int, w: int) -> range:
    return range(v // w, (w - 1 + v) // w + 1)


def _mode_feasible(network: ReactionNetwork, lower: np.ndarray) -> np.ndarray:
    if not network.mode_indices:
        return np.ones(lower.shape[0], dtype=bool)
    modes = lower[:, list(network.mode_indices)]
    allowed = np.array(network.mode_values, dtype=np.int64)
    return (modes[:, None, :] == allowed[None, :, :]).all(axis=2).any(axis=1)


def _assemble_regular(network: ReactionNetwork, part: Partition):
    n = len(part)
    L, U = part.lower, part.upper
    w = np.asarray(part.width, dtype=np.int64)
    vol = part.volumes()
    own = np.arange(n)
    rows, cols, vals = [], [], []
    out_src, out_rx, out_rate = [], [], []
    inboundary = np.zeros(n, dtype=bool)
    for j, v in enumerate(network.change_matrix):
        if not v.any():
            continue
        consume = network.consume_matrix[j]
        for offset in itertools.product(*[_grid_offsets(int(va), int(wa)) for va, wa in zip(v, w)]):
            offset = np.asarray(offset, dtype=np.int64)
            if not offset.any():
                continue
            # forward: cells i -> grid cell L_i + offset * w
            target_lower = L + offset * w
            lo = np.maximum(L, target_lower - v)
            hi = np.minimum(U, target_lower + w - 1 - v)
            lo = np.maximum(lo, consume)
            nonempty = np.all(lo <= hi, axis=1)
            if nonempty.any():
                src = own[nonempty]
                rates = lumped_rates(network, j, lo[nonempty], hi[nonempty]) / vol[nonempty]
                tgt = part.index.lookup(target_lower[nonempty])
                pos = rates > 0
                inside = pos & (tgt >= 0)
                outside = pos & (tgt < 0)
                rows.append(src[inside])
                cols.append(tgt[inside])
                vals.append(rates[inside])
                out_src.append(src[outside])
                out_rx.append(np.full(int(outside.sum()), j, dtype=np.int64))
                out_rate.append(rates[outside])
            # backward: does a missing grid cell feed cell i?
            source_lower = L - offset * w
            candidates = np.all(source_lower >= 0, axis=1) & (part.index.lookup(source_lower) < 0)
            candidates &= _mode_feasible(network, source_lower)
            if candidates.any():
                idx = own[candidates]
                slo = np.maximum(source_lower[idx], L[idx] - v)
                shi = np.minimum(source_lower[idx] + w - 1, U[idx] - v)
                slo = np.maximum(slo, consume)
                ok = np.all(slo <= shi, axis=1)
                if ok.any():
                    feed = lumped_rates(network, j, slo[ok], shi[ok]) > 0
                    inboundary[idx[ok][feed]] = True
    return rows, cols, vals, out_src, out_rx, out_rate, inboundary


def _assemble_reference(network: ReactionNetwork, part: Partition):
    """Cell-by-cell assembly for arbitrary box partitions."""
    n = len(part)
    cells = part.cells()
    max_w = (part.upper - part.lower + 1).max(axis=0)
    axis_lowers = [np.unique(part.lower[:, a]) for a in range(part.dim)]
    rows, cols, vals = [], [], []
    out_src, out_rx, out_rate = [], [], []
    inboundary = np.zeros(n, dtype=bool)

    def overlapping(box: MacroState) -> list[int]:
        cand = []
        for a in range(part.dim):
            lows = axis_lowers[a]
            sel = lows[(lows >= box.lower[a] - max_w[a] + 1) & (lows <= box.upper[a])]
            cand.append(sel.tolist())
        found = []
        for corner in itertools.product(*cand):
            k = int(part.index.lookup(np.asarray(corner)[None, :])[0])
            if k >= 0 and cells[k].intersect(box) is not None:
                found.append(k)
        return found

    for j, v in enumerate(network.change_matrix):
        if not v.any():
            continue
        v = tuple(int(a) for a in v)
        consume = network.reactions[j].consume
        support = MacroState(tuple(consume), tuple(max(c, 2**62) for c in consume))
        for i, cell in enumerate(cells):
            active = cell.intersect(support)
            if active is None:
                continue
            covered = 0
            for k in overlapping(active.shifted(v)):
                if k == i:
                    covered += transition_set(active, cell, v).volume
                    continue
                region = transition_set(active, cells[k], v)
                covered += region.volume
                r = lumped_rate(network, j, region) / cell.volume
                if r > 0:
                    rows.append(np.array([i]))
                    cols.append(np.array([k]))
                    vals.append(np.array([r]))
            if covered < active.volume:
                inside = [transition_set(active, cells[k], v) for k in overlapping(active.shifted(v))]
                leaving = _subtract_all(active, inside)
                r = sum(lumped_rate(network, j, box) for box in leaving) / cell.volume
                if r > 0:
                    out_src.append(np.array([i]))
                    out_rx.append(np.array([j]))
                    out_rate.append(np.array([r]))
            # in-boundary: preimage of the cell not covered by the partition
            pre = cell.shifted([-a for a in v])
            lo = tuple(max(a, c, 0) for a, c in zip(pre.lower, consume))
            if any(a > b for a, b in zip(lo, pre.upper)):
                continue
            pre = MacroState(lo, pre.upper)
            inside = [pre.intersect(cells[k]) for k in overlapping(pre)]
            for box in _subtract_all(pre, [b for b in inside if b is not None]):
                feasible = _mode_feasible(network, np.asarray(box.lower)[None, :])[0]
                if feasible and lumped_rate(network, j, box) > 0:
                    inboundary[i] = True
                    break
    return rows, cols, vals, out_src, out_rx, out_rate, inboundary


def _subtract_all(box: MacroState, holes: list[MacroState]) -> list[MacroState]:
    pieces = [box]
    for hole in holes:
        nxt = []
        for piece in pieces:
            nxt.extend(box_difference(piece, piece.intersect(hole)))
        pieces = nxt
    return pieces


def build_lumped_generator(network: ReactionNetwork, partition: Partition, reentry: bool = True) -> LumpedGenerator:
    """Lumped generator of a partition, with uniform reentry onto in-boundary cells."""
    n = len(partition)
    if partition.is_regular():
        parts = _assemble_regular(network, partition)
    else:
        parts = _assemble_reference(network, partition)
    rows, cols, vals, out_src, out_rx, out_rate, inboundary = parts
    cat = lambda p, dtype: np.concatenate(p).astype(dtype) if p else np.zeros(0, dtype=dtype)
    offdiag = sp.csr_matrix((cat(vals, float), (cat(rows, np.int64), cat(cols, np.int64))), shape=(n, n))
    offdiag.sum_duplicates()
    offdiag.eliminate_zeros()
    outflow = Outflow(cat(out_src, np.int64), cat(out_rx, np.int64), cat(out_rate, float))
    gen = SparseGenerator(offdiag, outflow)
    targets = np.flatnonzero(inboundary)
    if reentry:
        gen = apply_uniform_reentry(gen, targets)
    return LumpedGenerator(partition, gen, targets)


def build_lumped_generator_reference(network: ReactionNetwork, partition: Partition, reentry: bool = True) -> LumpedGenerator:
    """Same as :func:`build_lumped_generator` but always cell by cell (test oracle)."""
    n = len(partition)
    rows, cols, vals, out_src, out_rx, out_rate, inboundary = _assemble_reference(network, partition)
    cat = lambda p, dtype: np.concatenate(p).astype(dtype) if p else np.zeros(0, dtype=dtype)
    offdiag = sp.csr_matrix((cat(vals, float), (cat(rows, np.int64), cat(cols, np.int64))), shape=(n, n))
    offdiag.sum_duplicates()
    offdiag.eliminate_zeros()
    outflow = Outflow(cat(out_src, np.int64), cat(out_rx, np.int64), cat(out_rate, float))
    gen = SparseGenerator(offdiag, outflow)
    targets = np.flatnonzero(inboundary)
    if reentry:
        gen = apply_uniform_reentry(gen, targets)
    return LumpedGenerator(partition, gen, targets)
