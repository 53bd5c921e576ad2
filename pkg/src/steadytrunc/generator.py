"""Truncated micro-state generators and reentry redirection."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable

import numpy as np
import scipy.sparse as sp

from .model import ReactionNetwork


class ReentryError(ValueError):
    """Outflow exists but there is no state to redirect it to."""


class StateIndex:
    """Bijection between a finite set of micro-states and ``0..n-1``.

    States are stored sorted lexicographically.  Lookups compress each axis
    to ranks and search a mixed-radix key, falling back to a dict if the key
    space would overflow 64 bits.
    """

    def __init__(self, states: Iterable):
        arr = np.asarray(list(states) if not isinstance(states, np.ndarray) else states, dtype=np.int64)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.size and arr.min() < 0:
            raise ValueError("micro-states must be nonnegative")
        if arr.shape[0]:
            order = np.lexsort(arr.T[::-1])
            arr = arr[order]
            dup = np.all(arr[1:] == arr[:-1], axis=1)
            if dup.any():
                arr = arr[np.concatenate([[True], ~dup])]
        self.states = arr
        self.dim = arr.shape[1]
        self._axes = [np.unique(arr[:, a]) for a in range(self.dim)]
        sizes = [max(len(u), 1) for u in self._axes]
        if np.prod([float(s) for s in sizes]) < 2.0**62:
            strides = np.ones(self.dim, dtype=np.int64)
            for a in range(self.dim - 2, -1, -1):
                strides[a] = strides[a + 1] * sizes[a + 1]
            self._strides = strides
            self._keys = self._encode(arr)[0] if arr.shape[0] else np.zeros(0, dtype=np.int64)
            self._dict = None
        else:
            self._strides = None
            self._dict = {tuple(row): i for i, row in enumerate(arr.tolist())}

    @classmethod
    def from_box(cls, upper, lower=None) -> StateIndex:
        upper = np.atleast_1d(np.asarray(upper, dtype=np.int64))
        lower = np.zeros_like(upper) if lower is None else np.atleast_1d(np.asarray(lower, dtype=np.int64))
        grids = np.meshgrid(*[np.arange(lo, hi + 1) for lo, hi in zip(lower, upper)], indexing="ij")
        return cls(np.stack([g.ravel() for g in grids], axis=1))

    def __len__(self) -> int:
        return self.states.shape[0]

    def __iter__(self):
        return (tuple(row) for row in self.states.tolist())

    def __contains__(self, state) -> bool:
        return self.lookup(np.asarray(state)[None, :])[0] >= 0

    def _encode(self, x: np.ndarray):
        key = np.zeros(x.shape[0], dtype=np.int64)
        valid = np.ones(x.shape[0], dtype=bool)
        for a in range(self.dim):
            uniq = self._axes[a]
            rank = np.searchsorted(uniq, x[:, a])
            rank_c = np.minimum(rank, len(uniq) - 1)
            valid &= (rank < len(uniq)) & (uniq[rank_c] == x[:, a])
            key += rank_c * self._strides[a]
        return key, valid

    def lookup(self, x) -> np.ndarray:
        """Indices of the rows of ``x``; ``-1`` where a row is not in the set."""
        x = np.atleast_2d(np.asarray(x, dtype=np.int64))
        if len(self) == 0:
            return np.full(x.shape[0], -1, dtype=np.int64)
        if self._dict is not None:
            return np.array([self._dict.get(tuple(r), -1) for r in x.tolist()], dtype=np.int64)
        key, valid = self._encode(x)
        pos = np.searchsorted(self._keys, key)
        pos_c = np.minimum(pos, len(self._keys) - 1)
        found = valid & (pos < len(self._keys)) & (self._keys[pos_c] == key)
        return np.where(found, pos_c, -1)

    def index(self, state) -> int:
        i = int(self.lookup(np.asarray(state)[None, :])[0])
        if i < 0:
            raise KeyError(tuple(state))
        return i


@dataclass
class Outflow:
    """Transitions that leave the state set: ``(source, reaction, rate)`` triples."""

    source: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    reaction: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    rate: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __len__(self) -> int:
        return len(self.source)

    def per_state(self, n: int) -> np.ndarray:
        return np.bincount(self.source, weights=self.rate, minlength=n).astype(float)

    def triples(self) -> list[tuple[int, int, float]]:
        return list(zip(self.source.tolist(), self.reaction.tolist(), self.rate.tolist()))


@dataclass
class SparseGenerator:
    """Generator over an indexed state set.

    ``offdiag`` holds internal transition rates.  Transitions leaving the set
    are kept in ``outflow`` until a reentry distribution ``reentry`` (weights
    over states, summing to one) redirects them.  With reentry the full matrix
    is ``offdiag + o w^T - diag(rowsum(offdiag) + o)`` where ``o`` is the
    outflow per state; a redirection onto the source itself cancels on the
    diagonal, which is the same as dropping the self-loop.
    """

    offdiag: sp.csr_matrix
    outflow: Outflow = field(default_factory=Outflow)
    reentry: np.ndarray | None = None
    scheme: str = "none"

    @property
    def n(self) -> int:
        return self.offdiag.shape[0]

    def exit_rates(self) -> np.ndarray:
        return self.outflow.per_state(self.n)

    def diagonal(self) -> np.ndarray:
        return -(np.asarray(self.offdiag.sum(axis=1)).ravel() + self.exit_rates())

    def to_matrix(self) -> sp.csr_matrix:
        """Explicit sparse Q (the reentry part may be dense; use for small sets)."""
        q = self.offdiag + sp.diags(self.diagonal())
        if self.reentry is not None:
            o = self.exit_rates()
            src = np.flatnonzero(o)
            dst = np.flatnonzero(self.reentry)
            if len(src) and len(dst):
                rows = np.repeat(src, len(dst))
                cols = np.tile(dst, len(src))
                vals = np.repeat(o[src], len(dst)) * np.tile(self.reentry[dst], len(src))
                q = q + sp.csr_matrix((vals, (rows, cols)), shape=(self.n, self.n))
        return sp.csr_matrix(q)

    def is_conservative(self) -> bool:
        return self.reentry is not None or len(self.outflow) == 0 or not self.exit_rates().any()

    def apply_left(self, pi: np.ndarray) -> np.ndarray:
        """``pi @ Q`` without forming the reentry block."""
        out = self.offdiag.T @ pi + self.diagonal() * pi
        if self.reentry is not None:
            out = out + float(pi @ self.exit_rates()) * self.reentry
        return out

    def max_abs_entry(self) -> float:
        m = float(np.max(np.abs(self.diagonal()))) if self.n else 0.0
        if self.offdiag.nnz:
            m = max(m, float(np.max(np.abs(self.offdiag.data))))
        return m


def _assemble(n, rows, cols, vals) -> sp.csr_matrix:
    m = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    m.sum_duplicates()
    m.eliminate_zeros()
    return m


def build_generator(network: ReactionNetwork, states: StateIndex) -> SparseGenerator:
    """Micro-level generator restricted to ``states`` with outflow kept separate."""
    if len(states) == 0:
        raise ValueError("empty state set")
    x = states.states
    n = len(states)
    rows, cols, vals = [], [], []
    out_src, out_rx, out_rate = [], [], []
    own = np.arange(n)
    for j, v in enumerate(network.change_matrix):
        if not v.any():
            continue
        a = network.propensities(j, x)
        active = a > 0
        target = states.lookup(x + v)
        inside = active & (target >= 0) & (target != own)
        outside = active & (target < 0)
        rows.append(own[inside])
        cols.append(target[inside])
        vals.append(a[inside])
        out_src.append(own[outside])
        out_rx.append(np.full(int(outside.sum()), j, dtype=np.int64))
        out_rate.append(a[outside])
    cat = lambda parts, dtype: np.concatenate(parts).astype(dtype) if parts else np.zeros(0, dtype=dtype)
    offdiag = _assemble(n, cat(rows, np.int64), cat(cols, np.int64), cat(vals, float))
    outflow = Outflow(cat(out_src, np.int64), cat(out_rx, np.int64), cat(out_rate, float))
    return SparseGenerator(offdiag, outflow)


def inboundary_states(network: ReactionNetwork, states: StateIndex) -> np.ndarray:
    """Indices of states entered by some transition from outside the set."""
    x = states.states
    hit = np.zeros(len(states), dtype=bool)
    for j, v in enumerate(network.change_matrix):
        if not v.any():
            continue
        pre = x - v
        valid = np.all(pre >= 0, axis=1)
        outside = valid & (states.lookup(pre) < 0)
        if outside.any():
            a = network.propensities(j, pre[outside])
            hit[np.flatnonzero(outside)[a > 0]] = True
    return np.flatnonzero(hit)


def uniform_weights(n: int, targets) -> np.ndarray:
    targets = np.asarray(targets, dtype=np.int64)
    w = np.zeros(n)
    if len(targets):
        w[targets] = 1.0 / len(targets)
    return w


def apply_reentry(gen: SparseGenerator, weights: np.ndarray, scheme: str) -> SparseGenerator:
    weights = np.asarray(weights, dtype=float)
    if len(gen.outflow) and gen.exit_rates().any():
        if weights.sum() <= 0:
            raise ReentryError("outflow present but no reentry target (in-boundary set is empty)")
        weights = weights / weights.sum()
    else:
        return replace(gen, reentry=None, scheme=scheme)
    return replace(gen, reentry=weights, scheme=scheme)


def apply_uniform_reentry(gen: SparseGenerator, inboundary) -> SparseGenerator:
    """Split every outflow rate evenly over the in-boundary states."""
    return apply_reentry(gen, uniform_weights(gen.n, inboundary), "uniform")


def apply_single_target(gen: SparseGenerator, target: int) -> SparseGenerator:
    """Redirect all outflow to one state."""
    return apply_reentry(gen, uniform_weights(gen.n, [target]), f"single:{target}")
