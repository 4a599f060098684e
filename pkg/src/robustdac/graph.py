"""Undirected network topology and its incidence/Laplacian algebra.

Each undirected link ``{i, j}`` is carried as two directed edges ``i -> j``
and ``j -> i``. Directed edges are labelled by grouping them into the
incoming links of node 0, node 1, ... and, inside a group, by source index.
With that convention ``L = B B^T / 2`` and ``B (B^T B)^+ B^T`` is the
centering matrix for every connected graph.

Agents are 0-based here; user-facing files use 1-based indices.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Iterable, Literal

import numpy as np

PINV_TOL = 1e-12


class TopologyError(ValueError):
    """Raised for malformed topologies or events whose preconditions fail."""


def _canonical(i: int, j: int) -> tuple[int, int]:
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class Topology:
    """Immutable undirected graph on ``n`` agents.

    Attributes:
        n: Number of agents.
        edges: Undirected edges as ``(i, j)`` pairs with ``i < j``.
    """

    n: int
    edges: frozenset[tuple[int, int]] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        if self.n < 1:
            raise TopologyError(f"agent count must be positive, got {self.n}")
        normalized = set()
        for pair in self.edges:
            i, j = (int(v) for v in pair)
            if i == j:
                raise TopologyError(f"self-loop on agent {i + 1}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise TopologyError(f"edge {{{i + 1},{j + 1}}} outside 1..{self.n}")
            normalized.add(_canonical(i, j))
        object.__setattr__(self, "edges", frozenset(normalized))

    @classmethod
    def from_pairs(cls, n: int, pairs: Iterable[Iterable[int]]) -> Topology:
        """Build from 0-based pairs, rejecting duplicate undirected edges."""
        seen: set[tuple[int, int]] = set()
        for pair in pairs:
            i, j = (int(v) for v in pair)
            key = _canonical(i, j)
            if key in seen:
                raise TopologyError(f"duplicate edge {{{key[0] + 1},{key[1] + 1}}}")
            seen.add(key)
        return cls(n, frozenset(seen))

    @cached_property
    def undirected(self) -> tuple[tuple[int, int], ...]:
        """Undirected edges in lexicographic order."""
        return tuple(sorted(self.edges))

    @cached_property
    def directed(self) -> tuple[tuple[int, int], ...]:
        """Directed edges ``(src, dst)`` sorted by destination, then source."""
        arcs = [(i, j) for i, j in self.edges] + [(j, i) for i, j in self.edges]
        return tuple(sorted(arcs, key=lambda e: (e[1], e[0])))

    @cached_property
    def edge_index(self) -> tuple[np.ndarray, np.ndarray]:
        """Endpoint index arrays ``(lo, hi)`` aligned with :attr:`undirected`."""
        if not self.edges:
            empty = np.zeros(0, dtype=np.intp)
            return empty, empty
        arr = np.array(self.undirected, dtype=np.intp)
        return arr[:, 0], arr[:, 1]

    @property
    def num_directed(self) -> int:
        return 2 * len(self.edges)

    def has_edge(self, i: int, j: int) -> bool:
        return _canonical(i, j) in self.edges

    def neighbors(self, i: int) -> list[int]:
        return sorted(b if a == i else a for a, b in self.edges if i in (a, b))

    def adjacency(self) -> np.ndarray:
        adj = np.zeros((self.n, self.n))
        for i, j in self.edges:
            adj[i, j] = adj[j, i] = 1.0
        return adj

    def degrees(self) -> np.ndarray:
        return self.adjacency().sum(axis=1)

    def is_connected(self) -> bool:
        return len(connected_components(self)) == 1

    def subgraph(self, nodes: Iterable[int]) -> Topology:
        """Induced subgraph relabelled to ``0..len(nodes)-1`` in sorted order."""
        order = sorted(nodes)
        relabel = {v: k for k, v in enumerate(order)}
        kept = frozenset(
            (relabel[i], relabel[j]) for i, j in self.edges if i in relabel and j in relabel
        )
        return Topology(len(order), kept)


@dataclass(frozen=True)
class TopologyEvent:
    """Timed addition or removal of one undirected link (0-based endpoints)."""

    time: float
    action: Literal["add", "remove"]
    endpoints: tuple[int, int]

    def __post_init__(self) -> None:
        if self.action not in ("add", "remove"):
            raise TopologyError(f"unknown topology action {self.action!r}")
        if self.time < 0:
            raise TopologyError(f"event time must be nonnegative, got {self.time}")
        object.__setattr__(self, "endpoints", _canonical(*map(int, self.endpoints)))


def build_incidence(topology: Topology) -> np.ndarray:
    """Node-by-directed-edge incidence matrix.

    The column of edge ``i -> j`` holds -1 at row ``i`` and +1 at row ``j``.
    """
    arcs = topology.directed
    B = np.zeros((topology.n, len(arcs)))
    for col, (src, dst) in enumerate(arcs):
        B[src, col] = -1.0
        B[dst, col] = 1.0
    return B


def laplacian(B: np.ndarray) -> np.ndarray:
    """Graph Laplacian ``B B^T / 2`` of a paired-directed-edge incidence matrix."""
    return 0.5 * (B @ B.T)


def pseudo_inverse(A: np.ndarray, tol: float = PINV_TOL) -> np.ndarray:
    """Moore-Penrose inverse of a symmetric matrix via eigendecomposition.

    Eigenvalues with magnitude at most ``tol`` times the largest magnitude
    are treated as zero.

    Raises:
        ValueError: if ``A`` is not square or not symmetric.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"pseudo_inverse needs a square matrix, got shape {A.shape}")
    scale = float(np.abs(A).max()) if A.size else 0.0
    if A.size and float(np.abs(A - A.T).max()) > 1e-12 * max(scale, 1.0):
        raise ValueError("pseudo_inverse needs a symmetric matrix")
    if scale == 0.0:
        return np.zeros_like(A)
    eigvals, eigvecs = np.linalg.eigh(0.5 * (A + A.T))
    cutoff = tol * float(np.abs(eigvals).max())
    keep = np.abs(eigvals) > cutoff
    V = eigvecs[:, keep]
    return (V / eigvals[keep]) @ V.T


def centering_matrix(n: int) -> np.ndarray:
    """``I - 11^T / n``."""
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    return np.eye(n) - np.full((n, n), 1.0 / n)


@dataclass(frozen=True)
class GraphAlgebra:
    """Matrices derived from one topology, cached because they are reused every step."""

    incidence: np.ndarray
    edge_gram_pinv: np.ndarray  # (B^T B)^+

    @cached_property
    def projector(self) -> np.ndarray:
        """``B (B^T B)^+``."""
        return self.incidence @ self.edge_gram_pinv


@lru_cache(maxsize=64)
def algebra(topology: Topology) -> GraphAlgebra:
    B = build_incidence(topology)
    return GraphAlgebra(B, pseudo_inverse(B.T @ B))


def gain_norm_bound(topology: Topology) -> float:
    """Infinity norm (max absolute row sum) of ``B (B^T B)^+``.

    Kronecker expansion with ``I_r`` only repeats rows, so the value holds
    for every signal dimension.

    Raises:
        TopologyError: if the topology is disconnected.
    """
    if not topology.is_connected():
        raise TopologyError("gain norm bound needs a connected topology; split into components first")
    return float(np.abs(algebra(topology).projector).sum(axis=1).max())


def edge_gram_norm(topology: Topology) -> float:
    """Infinity norm of ``(B^T B)^+``; zero for an edgeless graph."""
    P = algebra(topology).edge_gram_pinv
    return float(np.abs(P).sum(axis=1).max()) if P.size else 0.0


def connected_components(topology: Topology) -> list[list[int]]:
    """Connected components as sorted node lists, ordered by smallest member."""
    adj: dict[int, list[int]] = {v: [] for v in range(topology.n)}
    for i, j in topology.edges:
        adj[i].append(j)
        adj[j].append(i)
    seen: set[int] = set()
    parts = []
    for root in range(topology.n):
        if root in seen:
            continue
        stack, comp = [root], []
        seen.add(root)
        while stack:
            v = stack.pop()
            comp.append(v)
            for u in adj[v]:
                if u not in seen:
                    seen.add(u)
                    stack.append(u)
        parts.append(sorted(comp))
    return parts


def apply_event(topology: Topology, event: TopologyEvent) -> Topology:
    """Return the topology after ``event``.

    Raises:
        TopologyError: removing an absent link or adding a present one.
    """
    i, j = event.endpoints
    present = topology.has_edge(i, j)
    label = f"{{{i + 1},{j + 1}}}"
    if event.action == "remove":
        if not present:
            raise TopologyError(f"cannot remove edge {label} at t={event.time}: edge not present")
        return Topology(topology.n, topology.edges - {(i, j)})
    if present:
        raise TopologyError(f"cannot add edge {label} at t={event.time}: edge already present")
    return Topology(topology.n, topology.edges | {(i, j)})
