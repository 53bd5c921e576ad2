"""Stationary solutions of sparse generators."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import connected_components

from .generator import Outflow, SparseGenerator

log = logging.getLogger(__name__)

DENSE_LIMIT = 2000
# above this, sparse LU fill-in on 3-D grids outgrows desk memory
SPARSE_LIMIT = 50_000
RESIDUAL_TOL = 1e-10
CLAMP_TOL = 1e-12
ITERATIVE_MAXITER = 10_000
ITERATIVE_ATOL = 1e-16


class SolverError(RuntimeError):
    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


class ReducibleChainError(SolverError):
    """More than one closed communicating class; restrict to one of them."""

    def __init__(self, classes: list[np.ndarray]):
        sizes = ", ".join(str(len(c)) for c in classes)
        super().__init__(f"generator has {len(classes)} closed classes (sizes {sizes})")
        self.classes = classes


@dataclass
class Distribution:
    values: np.ndarray
    residual: float
    method: str = ""

    def __len__(self) -> int:
        return len(self.values)


def closed_classes(gen: SparseGenerator) -> tuple[list[np.ndarray], np.ndarray]:
    """Closed communicating classes (largest first) and the SCC label of every state.

    Reentry is modelled by a hub node so the graph stays sparse: every state
    with outflow points to the hub and the hub points to every reentry target.
    """
    n = gen.n
    coo = gen.offdiag.tocoo()
    rows, cols = [coo.row], [coo.col]
    if gen.reentry is not None:
        src = np.flatnonzero(gen.exit_rates())
        dst = np.flatnonzero(gen.reentry)
        rows += [src, np.full(len(dst), n)]
        cols += [np.full(len(src), n), dst]
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    graph = sp.csr_matrix((np.ones(len(r)), (r, c)), shape=(n + 1, n + 1))
    _, labels = connected_components(graph, directed=True, connection="strong")
    leaving = np.zeros(labels.max() + 1, dtype=bool)
    cross = labels[r] != labels[c]
    leaving[labels[r[cross]]] = True
    state_labels = labels[:n]
    classes = []
    for lab in np.unique(state_labels):
        if not leaving[lab]:
            classes.append(np.flatnonzero(state_labels == lab))
    classes.sort(key=len, reverse=True)
    return classes, state_labels


def restrict(gen: SparseGenerator, keep: np.ndarray) -> SparseGenerator:
    """Sub-generator on ``keep``; transitions into dropped states become outflow."""
    keep = np.asarray(keep, dtype=np.int64)
    mask = np.zeros(gen.n, dtype=bool)
    mask[keep] = True
    pos = np.full(gen.n, -1, dtype=np.int64)
    pos[keep] = np.arange(len(keep))
    coo = gen.offdiag.tocoo()
    inside = mask[coo.row] & mask[coo.col]
    leave = mask[coo.row] & ~mask[coo.col]
    offdiag = sp.csr_matrix(
        (coo.data[inside], (pos[coo.row[inside]], pos[coo.col[inside]])), shape=(len(keep), len(keep))
    )
    src_keep = mask[gen.outflow.source]
    outflow = Outflow(
        np.concatenate([pos[gen.outflow.source[src_keep]], pos[coo.row[leave]]]),
        np.concatenate([gen.outflow.reaction[src_keep], np.full(int(leave.sum()), -1, dtype=np.int64)]),
        np.concatenate([gen.outflow.rate[src_keep], coo.data[leave]]),
    )
    reentry = None
    if gen.reentry is not None:
        reentry = gen.reentry[keep]
        if reentry.sum() > 0:
            reentry = reentry / reentry.sum()
    return SparseGenerator(offdiag, outflow, reentry, gen.scheme)


def _pick_method(method: str, n: int) -> str:
    if method == "auto":
        if n <= DENSE_LIMIT:
            return "dense"
        return "sparse" if n <= SPARSE_LIMIT else "iterative"
    if method not in ("dense", "sparse", "iterative"):
        raise ValueError(f"unknown solver method {method!r}")
    return method


class StationarySystem:
    """Factorized normalization system for a fixed structure and column ``k``.

    The transposed generator ``A^T`` (outflow counted on the diagonal) gets
    row ``k`` replaced by ones.  Reentry adds the rank-one term ``w o^T``,
    handled with the Sherman-Morrison formula, so one factorization serves
    every reentry distribution over the same outflow.
    """

    def __init__(self, gen: SparseGenerator, method: str, k: int | None = None):
        self.gen = gen
        self.method = method
        self.k = _warm_start_column(gen) if k is None else k
        self.exit = gen.exit_rates()
        at = (gen.offdiag + sp.diags(gen.diagonal())).T.tocoo()
        keep = at.row != self.k
        n = gen.n
        self.matrix = sp.csr_matrix(
            (
                np.concatenate([at.data[keep], np.ones(n)]),
                (np.concatenate([at.row[keep], np.full(n, self.k)]), np.concatenate([at.col[keep], np.arange(n)])),
            ),
            shape=(n, n),
        )
        self._lu = None
        if method == "dense":
            self._lu = sla.lu_factor(self.matrix.toarray(), check_finite=False)
        elif method == "sparse":
            self._lu = spla.splu(sp.csc_matrix(self.matrix))
        self.unit = np.zeros(gen.n)
        self.unit[self.k] = 1.0
        self._z = None

    def _solve(self, rhs: np.ndarray) -> np.ndarray:
        if self.method == "dense":
            return sla.lu_solve(self._lu, rhs, check_finite=False)
        return self._lu.solve(rhs)

    def solve(self, weights: np.ndarray | None, x0=None) -> np.ndarray:
        """Unnormalized stationary vector for reentry ``weights`` (``None``: no reentry)."""
        has_reentry = weights is not None and self.exit.any()
        if self.method == "iterative":
            return self._iterate(weights if has_reentry else None, x0)
        if self._z is None:
            self._z = self._solve(self.unit)
        if not has_reentry:
            return self._z
        u = np.array(weights, dtype=float)
        u[self.k] = 0.0
        t = self._solve(u)
        denom = 1.0 + self.exit @ t
        if denom == 0:
            raise SolverError("singular reentry update")
        return self._z - t * (self.exit @ self._z) / denom

    def _iterate(self, weights, x0) -> np.ndarray:
        gen = self.gen
        k = self.k
        exit_rates = self.exit

        def matvec(x):
            out = gen.offdiag.T @ x + gen.diagonal() * x
            if weights is not None:
                out = out + float(x @ exit_rates) * weights
            out[k] = x.sum()
            return out

        diag = gen.diagonal().copy()
        if weights is not None:
            diag = diag + exit_rates * weights
        diag[k] = 1.0
        inv = np.where(diag != 0, 1.0 / np.where(diag != 0, diag, 1.0), 1.0)
        op = spla.LinearOperator((gen.n, gen.n), matvec=matvec, dtype=float)
        precond = spla.LinearOperator((gen.n, gen.n), matvec=lambda v: inv * v, dtype=float)
        if x0 is not None:
            x0 = np.asarray(x0, dtype=float)
            x0 = x0 / x0.sum() if x0.sum() > 0 else None
        sol, info = spla.bicgstab(
            op, self.unit, x0=x0, rtol=1e-14, atol=ITERATIVE_ATOL,
            maxiter=ITERATIVE_MAXITER, M=precond,
        )
        if info != 0:
            # breakdown usually means the residual already vanished; the caller's
            # residual check decides whether the iterate is usable
            resid = np.max(np.abs(op.matvec(sol) - self.unit))
            log.debug("BiCGSTAB stopped with info=%d, residual %.3e", info, resid)
            if not np.all(np.isfinite(sol)):
                raise SolverError(f"BiCGSTAB failed (info={info})", float(resid))
        return sol


def _warm_start_column(gen: SparseGenerator, steps: int = 30) -> int:
    """Index of the largest entry after a few uniformized power-iteration steps."""
    n = gen.n
    lam = float(np.max(-gen.diagonal())) or 1.0
    p = np.full(n, 1.0 / n)
    for _ in range(steps):
        p = p + gen.apply_left(p) / (1.05 * lam)
    return int(np.argmax(p))


def normalize(raw: np.ndarray) -> np.ndarray:
    total = raw.sum()
    if not np.isfinite(total) or total == 0:
        raise SolverError("linear solve produced a non-normalizable vector")
    pi = raw / total
    if pi.min() < -CLAMP_TOL:
        raise SolverError(f"negative stationary entry {pi.min():.3e}; chain may be reducible")
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def check_residual(gen: SparseGenerator, pi: np.ndarray, tol: float, label: str) -> float:
    residual = float(np.max(np.abs(gen.apply_left(pi))))
    scale = gen.max_abs_entry() or 1.0
    if residual > tol * scale:
        raise SolverError(f"residual {residual:.3e} exceeds {tol * scale:.3e} ({label})", residual)
    return residual


def solve_stationary(gen: SparseGenerator, method: str = "auto", x0=None, tol: float = RESIDUAL_TOL) -> Distribution:
    """Solve ``pi Q = 0, sum(pi) = 1``.

    Transient states get probability zero.  Raises :class:`ReducibleChainError`
    if there are several closed classes and :class:`SolverError` if the result
    misses the residual contract ``max|pi Q| <= tol * max|Q|``.
    """
    n = gen.n
    if not gen.is_conservative():
        raise ValueError("generator has unredirected outflow; apply a reentry scheme first")
    if n == 1:
        return Distribution(np.ones(1), 0.0, "trivial")
    classes, _ = closed_classes(gen)
    if len(classes) > 1:
        raise ReducibleChainError(classes)
    closed = classes[0]
    if len(closed) < n:
        sub = restrict(gen, closed)
        inner = solve_stationary(sub, method, None if x0 is None else np.asarray(x0)[closed], tol)
        values = np.zeros(n)
        values[closed] = inner.values
        return Distribution(values, float(np.max(np.abs(gen.apply_left(values)))), inner.method)
    chosen = _pick_method(method, n)
    k = int(np.argmax(x0)) if x0 is not None and np.max(x0) > 0 else None
    if method == "auto" and chosen == "iterative":
        try:
            return _solve_with(gen, chosen, k, x0, tol)
        except SolverError as err:
            log.warning("iterative solve failed (%s); falling back to sparse LU", err)
            chosen = "sparse"
    return _solve_with(gen, chosen, k, x0, tol)


def _solve_with(gen: SparseGenerator, chosen: str, k: int | None, x0, tol: float) -> Distribution:
    system = StationarySystem(gen, chosen, k)
    for attempt in range(3):
        raw = system.solve(gen.reentry, x0)
        try:
            pi = normalize(raw)
            residual = check_residual(gen, pi, tol, chosen)
            return Distribution(pi, residual, chosen)
        except SolverError:
            # a badly chosen normalization column stalls Krylov iterations;
            # retry with the current iterate's largest entry
            retry = int(np.argmax(np.abs(raw))) if np.all(np.isfinite(raw)) else system.k
            if chosen != "iterative" or attempt == 2 or retry == system.k:
                raise
            system = StationarySystem(gen, chosen, retry)
    raise AssertionError("unreachable")
