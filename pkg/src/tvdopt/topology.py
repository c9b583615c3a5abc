"""Time-varying communication graphs and their mixing matrices.

A schedule maps a step index ``k`` to a graph and a doubly stochastic
mixing matrix ``W(k)`` built with Metropolis weights.  Window products
``W_b(k) = W(k) W(k-1) ... W(k-b+1)`` and the deflated spectral norm
``delta`` of a window quantify how fast gossip averaging contracts.
"""

from __future__ import annotations

import itertools
import threading
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

__all__ = [
    "Graph",
    "MixingSchedule",
    "FixedSchedule",
    "AlternatingSchedule",
    "GilbertSchedule",
    "AssumptionReport",
    "complete_graph",
    "path_graph",
    "ring_graph",
    "empty_graph",
    "metropolis_weights",
    "build_schedule",
    "window_product",
    "window_delta",
    "verify_assumption",
    "default_horizon",
    "read_graph_list",
    "write_graph_list",
]

STOCHASTIC_TOL = 1e-10


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph on agents ``0..n-1``."""

    n: int
    edges: frozenset[tuple[int, int]] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"graph needs at least one node, got n={self.n}")
        normalized = set()
        for i, j in self.edges:
            i, j = int(i), int(j)
            if i == j:
                raise ValueError(f"self-loop ({i}, {j}) not allowed")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"edge ({i}, {j}) out of range for n={self.n}")
            normalized.add((min(i, j), max(i, j)))
        object.__setattr__(self, "edges", frozenset(normalized))

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]]) -> Graph:
        return cls(n, frozenset(edges))

    def degrees(self) -> np.ndarray:
        if not self.edges:
            return np.zeros(self.n, dtype=int)
        return np.bincount(np.array(list(self.edges)).ravel(), minlength=self.n)

    def has_edge(self, i: int, j: int) -> bool:
        return (min(i, j), max(i, j)) in self.edges

    def union(self, other: Graph) -> Graph:
        if other.n != self.n:
            raise ValueError("cannot union graphs with different node counts")
        return Graph(self.n, self.edges | other.edges)

    def is_connected(self) -> bool:
        return _is_connected(self.n, self.edges)


def _is_connected(n: int, edges: Iterable[tuple[int, int]]) -> bool:
    parent = list(range(n))

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    components = n
    for i, j in edges:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj
            components -= 1
            if components == 1:
                return True
    return components == 1


def complete_graph(n: int) -> Graph:
    return Graph(n, frozenset(itertools.combinations(range(n), 2)))


def path_graph(n: int) -> Graph:
    return Graph(n, frozenset((i, i + 1) for i in range(n - 1)))


def ring_graph(n: int) -> Graph:
    if n < 3:
        return path_graph(n)
    return Graph(n, frozenset((i, (i + 1) % n) for i in range(n)))


def empty_graph(n: int) -> Graph:
    return Graph(n)


def metropolis_weights(g: Graph) -> np.ndarray:
    """Metropolis-Hastings mixing matrix of ``g``.

    Edge weights are ``1 / (1 + max(deg_i, deg_j))`` and the diagonal absorbs
    the remainder of each row, so the result is symmetric, nonnegative and
    doubly stochastic.  Isolated nodes get identity rows.
    """
    W = np.zeros((g.n, g.n))
    if g.edges:
        E = np.array(sorted(g.edges))
        i, j = E[:, 0], E[:, 1]
        deg = np.bincount(E.ravel(), minlength=g.n)
        w = 1.0 / (1.0 + np.maximum(deg[i], deg[j]))
        W[i, j] = w
        W[j, i] = w
    W[np.diag_indices(g.n)] = 1.0 - W.sum(axis=1)
    return W


class MixingSchedule:
    """Deterministic map from step ``k >= 0`` to ``(Graph, W(k))``.

    Subclasses implement :meth:`graph`.  Matrices are derived with
    :func:`metropolis_weights` and memoized per distinct graph, so schedules
    are safe to share between threads.
    """

    kind: str = "abstract"

    def __init__(self, n: int, B: int, seed: int = 0) -> None:
        if n < 2:
            raise ValueError(f"schedule needs n >= 2 agents, got {n}")
        if B < 1:
            raise ValueError(f"window length B must be positive, got {B}")
        self.n = n
        self.B = B
        self.seed = seed
        self._weights = lru_cache(maxsize=512)(_frozen_metropolis)

    def graph(self, k: int) -> Graph:
        raise NotImplementedError

    def matrix(self, k: int) -> np.ndarray:
        if k < 0:
            raise ValueError(f"step index must be nonnegative, got {k}")
        W = self._weights(self.graph(k))
        return W

    def __getitem__(self, k: int) -> np.ndarray:
        return self.matrix(k)

    def describe(self) -> dict:
        return {"kind": self.kind, "n": self.n, "B": self.B, "seed": self.seed}


def _frozen_metropolis(g: Graph) -> np.ndarray:
    W = metropolis_weights(g)
    W.setflags(write=False)
    return W


class FixedSchedule(MixingSchedule):
    kind = "fixed"

    def __init__(self, g: Graph, B: int = 1, seed: int = 0) -> None:
        super().__init__(g.n, B, seed)
        self._graph = g

    def graph(self, k: int) -> Graph:
        return self._graph


class AlternatingSchedule(MixingSchedule):
    """Cycles through a fixed list of graphs: ``graph(k) = graphs[k % len]``."""

    kind = "alternating"

    def __init__(self, graphs: Sequence[Graph], B: int | None = None, seed: int = 0) -> None:
        if not graphs:
            raise ValueError("alternating schedule needs at least one graph")
        n = graphs[0].n
        if any(g.n != n for g in graphs):
            raise ValueError("all graphs in an alternating schedule must share n")
        B = len(graphs) if B is None else B
        super().__init__(n, B, seed)
        self.graphs = tuple(graphs)
        period = len(self.graphs)
        for start in range(period):
            window = [self.graphs[(start + t) % period] for t in range(B)]
            union = set().union(*(g.edges for g in window))
            if not _is_connected(n, union):
                raise ValueError(
                    f"union of the {B} graphs starting at position {start} is disconnected"
                )

    def graph(self, k: int) -> Graph:
        return self.graphs[k % len(self.graphs)]


class GilbertSchedule(MixingSchedule):
    """Random G(n, p) graphs redrawn every ``period`` steps.

    Epoch ``e`` covers steps ``[e*period, (e+1)*period)``.  Its graph is drawn
    from a generator keyed on ``(seed, e)`` and redrawn until every
    ``B``-step window ending inside the epoch has a connected edge union.
    Epochs are generated in order and cached, which keeps the sequence
    reproducible no matter which ``k`` is requested first.
    """

    kind = "random-gilbert"
    max_attempts = 10_000

    def __init__(self, n: int, p: float, period: int = 1, B: int = 1, seed: int = 0) -> None:
        super().__init__(n, B, seed)
        if not 0.0 < p <= 1.0:
            raise ValueError(f"edge probability must lie in (0, 1], got {p}")
        if period < 1:
            raise ValueError(f"regeneration period must be >= 1, got {period}")
        self.p = p
        self.period = period
        self._epochs: list[Graph] = []
        self._lock = threading.Lock()
        self._pairs = np.array(list(itertools.combinations(range(n), 2)))

    def describe(self) -> dict:
        return {**super().describe(), "p": self.p, "period": self.period}

    def graph(self, k: int) -> Graph:
        e = k // self.period
        if e >= len(self._epochs):
            with self._lock:
                while len(self._epochs) <= e:
                    self._epochs.append(self._draw_epoch(len(self._epochs)))
        return self._epochs[e]

    def _draw_epoch(self, e: int) -> Graph:
        rng = np.random.default_rng([self.seed, e])
        last_step = (e + 1) * self.period - 1
        # the last window of the epoch touches the fewest earlier epochs
        first_epoch = max(0, (last_step - self.B + 1) // self.period)
        constrained = last_step >= self.B - 1
        earlier = set().union(*(g.edges for g in self._epochs[first_epoch:e]))
        for _ in range(self.max_attempts):
            mask = rng.random(len(self._pairs)) < self.p
            edges = frozenset(map(tuple, self._pairs[mask].tolist()))
            if not constrained or _is_connected(self.n, earlier | edges):
                return Graph(self.n, edges)
        raise RuntimeError(
            f"could not draw a window-connected graph for epoch {e} "
            f"after {self.max_attempts} attempts (n={self.n}, p={self.p}, B={self.B})"
        )


def build_schedule(kind: str, n: int, seed: int = 0, **params) -> MixingSchedule:
    """Construct a schedule by name.

    Args:
        kind: ``"fixed"``, ``"alternating"`` or ``"random-gilbert"``.
        n: agent count, at least 2.
        seed: seed of the random stream (only used by ``random-gilbert``).
        **params: ``graph`` for fixed; ``graphs`` for alternating; ``p`` and
            ``period`` for random-gilbert; ``B`` for all kinds.

    Returns:
        The schedule.  Alternating lists whose ``B``-window unions are
        disconnected are rejected with ``ValueError``.
    """
    if n < 2:
        raise ValueError(f"schedule needs n >= 2 agents, got {n}")
    B = params.get("B")
    if kind == "fixed":
        g = params.get("graph")
        if g is None:
            g = complete_graph(n)
        if g.n != n:
            raise ValueError(f"graph has {g.n} nodes, expected {n}")
        return FixedSchedule(g, B=1 if B is None else B, seed=seed)
    if kind == "alternating":
        graphs = params.get("graphs")
        if not graphs:
            raise ValueError("alternating schedule requires a 'graphs' list")
        if any(g.n != n for g in graphs):
            raise ValueError(f"alternating graphs must all have {n} nodes")
        return AlternatingSchedule(graphs, B=B, seed=seed)
    if kind == "random-gilbert":
        if "p" not in params:
            raise ValueError("random-gilbert schedule requires edge probability 'p'")
        return GilbertSchedule(
            n, p=params["p"], period=params.get("period", 1), B=1 if B is None else B, seed=seed
        )
    raise ValueError(f"unknown schedule kind {kind!r}")


def window_product(s: MixingSchedule, k: int, b: int) -> np.ndarray:
    """Return ``W(k) W(k-1) ... W(k-b+1)``; the identity when ``b == 0``."""
    if b < 0:
        raise ValueError(f"window length must be nonnegative, got {b}")
    if k < b - 1:
        raise ValueError(f"window of length {b} ending at k={k} reaches before step 0")
    P = np.eye(s.n)
    for t in range(k - b + 1, k + 1):
        P = s.matrix(t) @ P
    return P


def window_delta(Wb: np.ndarray) -> float:
    """Largest singular value of ``Wb - (1/n) 11^T``."""
    Wb = np.asarray(Wb, dtype=float)
    if Wb.ndim != 2 or Wb.shape[0] != Wb.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {Wb.shape}")
    n = Wb.shape[0]
    return float(np.linalg.svd(Wb - 1.0 / n, compute_uv=False)[0])


def default_horizon(B: int) -> int:
    """Horizon giving ``10*B`` windows of length ``B``."""
    return 11 * B - 1


@dataclass
class AssumptionReport:
    B: int
    horizon: int
    row_residuals: np.ndarray
    col_residuals: np.ndarray
    sparsity_violations: list[tuple[int, int, int]]
    window_deltas: np.ndarray
    delta_hat: float
    tol: float = STOCHASTIC_TOL

    @property
    def max_residual(self) -> float:
        return float(max(self.row_residuals.max(initial=0.0), self.col_residuals.max(initial=0.0)))

    @property
    def passed(self) -> bool:
        return self.delta_hat < 1.0 and self.max_residual <= self.tol

    def summary(self) -> dict:
        return {
            "B": self.B,
            "horizon": self.horizon,
            "delta_hat": self.delta_hat,
            "max_stochastic_residual": self.max_residual,
            "sparsity_violations": len(self.sparsity_violations),
            "nonnegative_only_by_construction": True,
            "passed": self.passed,
        }


def verify_assumption(s: MixingSchedule, B: int | None = None, horizon: int | None = None) -> AssumptionReport:
    """Check the mixing-matrix assumptions on steps ``0..horizon-1``.

    Reports row/column-sum residuals, off-graph nonzeros, and the empirical
    contraction factor ``delta_hat``: the maximum of :func:`window_delta`
    over all windows of length ``B`` ending in ``[B-1, horizon)``.
    Nonnegativity is not checked since the assumption does not require it.
    """
    B = s.B if B is None else B
    horizon = default_horizon(B) if horizon is None else horizon
    if horizon < B:
        raise ValueError(f"horizon ({horizon}) must be at least B ({B})")
    rows = np.empty(horizon)
    cols = np.empty(horizon)
    violations = []
    for k in range(horizon):
        W = s.matrix(k)
        rows[k] = np.abs(W.sum(axis=1) - 1.0).max()
        cols[k] = np.abs(W.sum(axis=0) - 1.0).max()
        g = s.graph(k)
        off = np.argwhere(W != 0.0)
        for i, j in off:
            if i != j and not g.has_edge(i, j):
                violations.append((k, int(i), int(j)))
    deltas = np.array([window_delta(window_product(s, k, B)) for k in range(B - 1, horizon)])
    return AssumptionReport(
        B=B,
        horizon=horizon,
        row_residuals=rows,
        col_residuals=cols,
        sparsity_violations=violations,
        window_deltas=deltas,
        delta_hat=float(deltas.max()),
    )


def read_graph_list(path: str | Path, n: int | None = None) -> list[Graph]:
    """Parse blank-line separated blocks of ``i j`` edge lines (0-indexed).

    If ``n`` is omitted it is inferred as one more than the largest index.
    """
    blocks: list[list[tuple[int, int]]] = []
    current: list[tuple[int, int]] = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line:
            if current:
                blocks.append(current)
                current = []
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"{path}:{lineno}: expected 'i j', got {raw!r}")
        try:
            current.append((int(parts[0]), int(parts[1])))
        except ValueError:
            raise ValueError(f"{path}:{lineno}: non-integer node id in {raw!r}") from None
    if current:
        blocks.append(current)
    if not blocks:
        raise ValueError(f"{path}: no graphs found")
    if n is None:
        n = 1 + max(max(i, j) for block in blocks for i, j in block)
    return [Graph.from_edges(n, block) for block in blocks]


def write_graph_list(path: str | Path, graphs: Sequence[Graph]) -> None:
    chunks = ["\n".join(f"{i} {j}" for i, j in sorted(g.edges)) for g in graphs]
    Path(path).write_text("\n\n".join(chunks) + "\n")
