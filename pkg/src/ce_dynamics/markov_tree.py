"""Arborescences and stationary distributions of positive stochastic matrices.

Three solvers are provided for the stationary distribution pi (row-stochastic
convention, ``Q^T pi = pi``):

* :func:`tree_theorem_stationary` -- the closed-form Markov chain tree
  theorem: pi[j] is proportional to the sum, over directed trees rooted at j,
  of the product of transition probabilities along tree edges. Exact up to
  rounding, but exponential in n, so guarded to n <= 7.
* :func:`log_tree_theorem_stationary` -- the same formula evaluated through
  logarithms of the entries (sum of logs, then a shifted exp). Cross-check
  only, guarded to n <= 5.
* :func:`solve_stationary` -- dense linear solve with partial pivoting, with
  a power-iteration fallback; works at any size met in practice.

A directed tree rooted at j ("arborescence") has no cycles, no outgoing edge
from j, and exactly one outgoing edge from every other node. Trees are
encoded by their parent array with the convention ``parents[root] == root``;
ordering that array lexicographically gives the canonical enumeration order.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import StationaryResidualError, ValidationError

MAX_TREE_NODES = 7
MAX_LOG_TREE_NODES = 5
STATIONARY_RESIDUAL_TOL = 1e-10
POWER_ITERATION_TOL = 1e-13
POWER_ITERATION_CAP = 10**6
ROW_SUM_ATOL = 1e-12


@dataclass(frozen=True, order=True)
class Arborescence:
    """Rooted directed tree on ``len(parents)`` nodes.

    ``parents[v]`` is the head of v's unique outgoing edge; the root stores
    itself as a sentinel and has no outgoing edge.
    """

    parents: tuple[int, ...]

    @property
    def num_nodes(self) -> int:
        return len(self.parents)

    @property
    def root(self) -> int:
        for v, p in enumerate(self.parents):
            if p == v:
                return v
        raise ValidationError(f"parent array {self.parents} has no root")

    def edges(self) -> list[tuple[int, int]]:
        """Edge list (child, parent), excluding the root's sentinel entry."""
        return [(v, p) for v, p in enumerate(self.parents) if p != v]


def _check_tree_n(n: int, cap: int) -> None:
    if not 2 <= n <= cap:
        raise ValidationError(f"node count {n} outside supported range [2, {cap}]")


@lru_cache(maxsize=None)
def _rooted_parent_arrays(n: int, root: int) -> np.ndarray:
    """All valid full parent arrays for trees rooted at ``root``, shape (n^(n-2), n).

    Every candidate assignment of one parent per non-root node is generated
    (n^(n-1) of them, in lexicographic order) and filtered by following
    parent pointers n-1 times: an assignment is a tree exactly when every
    node lands on the root.
    """
    non_root = [v for v in range(n) if v != root]
    cand = np.indices((n,) * (n - 1)).reshape(n - 1, -1).T
    full = np.empty((cand.shape[0], n), dtype=np.int64)
    full[:, non_root] = cand
    full[:, root] = root
    reach = full
    for _ in range(n - 1):
        reach = np.take_along_axis(full, reach, axis=1)
    kept = full[(reach == root).all(axis=1)]
    kept.setflags(write=False)
    return kept


def enumerate_arborescences(n: int, root: int) -> list[Arborescence]:
    """All n^(n-2) directed trees rooted at ``root``, canonically ordered."""
    _check_tree_n(n, MAX_TREE_NODES)
    if not 0 <= root < n:
        raise ValidationError(f"root {root} outside [0, {n})")
    return [Arborescence(tuple(int(p) for p in row)) for row in _rooted_parent_arrays(n, root)]


def all_arborescences(n: int) -> list[Arborescence]:
    """All n^(n-1) directed trees over roots 0..n-1, grouped by root."""
    _check_tree_n(n, MAX_TREE_NODES)
    out = []
    for root in range(n):
        out.extend(enumerate_arborescences(n, root))
    return out


def check_transition_matrix(Q, require_positive: bool = True) -> np.ndarray:
    """Validate a row-stochastic matrix; rows must sum to 1 within 1e-12."""
    Q = np.asarray(Q, dtype=float)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise ValidationError(f"transition matrix must be square, got shape {Q.shape}")
    if not np.all(np.isfinite(Q)):
        raise ValidationError("transition matrix has non-finite entries")
    if require_positive:
        if Q.min() <= 0.0:
            raise ValidationError(
                f"transition matrix must have strictly positive entries, min={Q.min()}"
            )
    elif Q.min() < 0.0:
        raise ValidationError(f"transition matrix has negative entries, min={Q.min()}")
    rows = Q.sum(axis=1)
    worst = np.abs(rows - 1.0).max()
    if worst > ROW_SUM_ATOL:
        raise ValidationError(f"rows must sum to 1 within {ROW_SUM_ATOL}, worst error {worst}")
    return Q


def _tree_weight_sums(Q: np.ndarray) -> np.ndarray:
    """Per-root sums of edge-weight products over all rooted trees."""
    n = Q.shape[0]
    sums = np.empty(n)
    for root in range(n):
        arrays = _rooted_parent_arrays(n, root)
        children = np.array([v for v in range(n) if v != root])
        weights = Q[children[None, :], arrays[:, children]]
        sums[root] = weights.prod(axis=1).sum()
    return sums


def tree_theorem_stationary(Q) -> np.ndarray:
    """Stationary distribution by the Markov chain tree theorem (n <= 7)."""
    Q = check_transition_matrix(Q, require_positive=True)
    _check_tree_n(Q.shape[0], MAX_TREE_NODES)
    sums = _tree_weight_sums(Q)
    return sums / sums.sum()


def log_tree_theorem_stationary(Q) -> np.ndarray:
    """Tree-theorem stationary computed via exp of summed log-entries (n <= 5).

    The per-tree log-weights are shifted by their global maximum before
    exponentiating; the shift cancels in the normalization.
    """
    Q = check_transition_matrix(Q, require_positive=True)
    n = Q.shape[0]
    _check_tree_n(n, MAX_LOG_TREE_NODES)
    logQ = np.log(Q)
    log_weights = []
    for root in range(n):
        arrays = _rooted_parent_arrays(n, root)
        children = np.array([v for v in range(n) if v != root])
        log_weights.append(logQ[children[None, :], arrays[:, children]].sum(axis=1))
    shift = max(lw.max() for lw in log_weights)
    sums = np.array([np.exp(lw - shift).sum() for lw in log_weights])
    return sums / sums.sum()


def stationary_residual(Q: np.ndarray, pi: np.ndarray) -> float:
    """Fixed-point residual ``max |Q^T pi - pi|``."""
    return float(np.abs(Q.T @ pi - pi).max())


def _power_iteration(Q: np.ndarray) -> np.ndarray:
    n = Q.shape[0]
    x = np.full(n, 1.0 / n)
    QT = Q.T
    for _ in range(POWER_ITERATION_CAP):
        nxt = QT @ x
        nxt = nxt / nxt.sum()
        if np.abs(nxt - x).max() <= POWER_ITERATION_TOL:
            return nxt
        x = nxt
    return x


def solve_stationary(Q) -> np.ndarray:
    """Stationary distribution via dense linear solve, power-iteration fallback.

    Solves ``(Q^T - I) pi = 0`` with the last equation replaced by the
    normalization ``sum(pi) = 1``. The result must reproduce the fixed point
    to within 1e-10 in infinity norm; if the direct solve fails that check,
    power iteration is run to a 1e-13 successive-iterate tolerance before
    giving up.
    """
    Q = check_transition_matrix(Q, require_positive=True)
    n = Q.shape[0]
    A = Q.T - np.eye(n)
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    try:
        pi = np.linalg.solve(A, b)
    except np.linalg.LinAlgError:
        pi = None
    if pi is not None and pi.min() >= -ROW_SUM_ATOL:
        # Rounding can leave entries a hair below zero when the chain is
        # nearly absorbing; clamp and renormalize before the residual check.
        if pi.min() < 0.0:
            pi = np.where(pi < 0.0, 0.0, pi)
            pi = pi / pi.sum()
        if stationary_residual(Q, pi) <= STATIONARY_RESIDUAL_TOL:
            return pi
    pi = _power_iteration(Q)
    residual = stationary_residual(Q, pi)
    if residual > STATIONARY_RESIDUAL_TOL:
        raise StationaryResidualError(
            f"stationary solve failed: residual {residual} above {STATIONARY_RESIDUAL_TOL}",
            residual=residual,
        )
    return pi
