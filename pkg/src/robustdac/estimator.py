"""Continuous-communication robust dynamic average consensus estimator.

Every agent keeps an internal state ``z_i`` and reports ``x_i = z_i + phi_i``.
Links carry adaptive gain vectors ``mu_ij`` that integrate ``|x_i - x_j|``.
The update is::

    dz_i  = -gamma * z_i - 2 * sum_j mu_ij * sgn(x_i - x_j)
    dmu_ij = |x_i - x_j|

It is advanced with explicit Euler. Because the coupling terms cancel in
pairs, ``sum_i z_i`` contracts by exactly ``1 - gamma*h`` per step.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .graph import Topology
from .signals import ReferenceSignal, evaluate_all


def signum(v: np.ndarray, boundary_layer: float | None = None) -> np.ndarray:
    """Componentwise sign with ``sgn(0) = 0``.

    With a positive ``boundary_layer`` the discontinuity is replaced by the
    saturated ramp ``clip(v / boundary_layer, -1, 1)``.
    """
    if boundary_layer:
        return np.clip(v / boundary_layer, -1.0, 1.0)
    return np.sign(v)


class GainTable:
    """Adaptive link gains, one ``r``-vector per undirected link.

    ``mu_ij`` and ``mu_ji`` are the same row, so both endpoints always read
    identical values. Rows of removed links stay in the table (frozen) and
    resume if the link returns.
    """

    __slots__ = ("_index", "values")

    def __init__(self, index: Mapping[tuple[int, int], int], values: np.ndarray):
        self._index = dict(index)
        self.values = values

    @classmethod
    def initial(
        cls,
        edges: Iterable[tuple[int, int]],
        r: int,
        floor: float = 1.0,
        overrides: Mapping[tuple[int, int], Sequence[float]] | None = None,
    ) -> GainTable:
        keys = sorted(_key(i, j) for i, j in edges)
        values = np.full((len(keys), r), float(floor))
        for (i, j), gain in (overrides or {}).items():
            values[keys.index(_key(i, j))] = gain
        return cls({k: row for row, k in enumerate(keys)}, values)

    @property
    def r(self) -> int:
        return self.values.shape[1]

    def keys(self) -> list[tuple[int, int]]:
        return sorted(self._index, key=self._index.__getitem__)

    def __contains__(self, edge: tuple[int, int]) -> bool:
        return _key(*edge) in self._index

    def gain(self, i: int, j: int) -> np.ndarray:
        """The stored gain row of link ``{i, j}`` (a view, shared by both orientations)."""
        return self.values[self._index[_key(i, j)]]

    def rows(self, topology: Topology) -> np.ndarray:
        """Row indices aligned with ``topology.undirected``."""
        return np.fromiter((self._index[e] for e in topology.undirected), dtype=np.intp,
                           count=len(topology.edges))

    def ensure(self, topology: Topology, floor: float) -> GainTable:
        """Table with a ``floor``-valued row for every link of ``topology`` not yet present."""
        missing = [e for e in topology.undirected if e not in self._index]
        if not missing:
            return self
        index = dict(self._index)
        for e in missing:
            index[e] = len(index)
        extra = np.full((len(missing), self.r), float(floor))
        return GainTable(index, np.vstack([self.values, extra]))

    def incremented(self, rows: np.ndarray, delta: np.ndarray) -> GainTable:
        values = self.values.copy()
        values[rows] += delta
        return GainTable(self._index, values)

    def as_dict(self) -> dict[tuple[int, int], np.ndarray]:
        return {k: self.values[row].copy() for k, row in self._index.items()}


def _key(i: int, j: int) -> tuple[int, int]:
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class EstimatorParams:
    gamma: float
    r: int = 1
    kappa_floor: float = 1.0
    kappa_edges: Mapping[tuple[int, int], Sequence[float]] = field(default_factory=dict)
    boundary_layer: float | None = None

    def __post_init__(self) -> None:
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if not self.kappa_floor >= 1:
            raise ValueError(f"initial gain floor must be >= 1, got {self.kappa_floor}")
        for edge, gain in self.kappa_edges.items():
            if np.min(gain) < 1:
                raise ValueError(f"initial gain of edge {edge} must be >= 1")


@dataclass(frozen=True)
class EstimatorState:
    t: float
    z: np.ndarray  # (n, r)
    mu: GainTable


def initial_state(z0: np.ndarray, topology: Topology, params: EstimatorParams, t0: float = 0.0) -> EstimatorState:
    z0 = np.array(z0, dtype=float).reshape(topology.n, params.r)
    mu = GainTable.initial(topology.edges, params.r, params.kappa_floor, params.kappa_edges)
    return EstimatorState(t0, z0, mu)


def output(state: EstimatorState, phi_t: np.ndarray) -> np.ndarray:
    """Estimates ``x = z + phi``."""
    phi_t = np.asarray(phi_t, dtype=float)
    if phi_t.shape != state.z.shape:
        raise ValueError(f"signal block shape {phi_t.shape} does not match state shape {state.z.shape}")
    return state.z + phi_t


def edge_disagreement(x: np.ndarray, topology: Topology) -> np.ndarray:
    """``x_dst - x_src`` for every directed edge, in the incidence column order."""
    arcs = topology.directed
    if not arcs:
        return np.zeros((0,) + np.shape(x)[1:])
    src = np.fromiter((a for a, _ in arcs), dtype=np.intp, count=len(arcs))
    dst = np.fromiter((b for _, b in arcs), dtype=np.intp, count=len(arcs))
    return x[dst] - x[src]


def coupling(
    values: np.ndarray,
    topology: Topology,
    mu: GainTable,
    boundary_layer: float | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Signum coupling shared by the continuous and event-triggered laws.

    Returns ``(w, |diff|, rows)``. Here ``w_i = 2 * sum_j mu_ij * sgn(v_i - v_j)``,
    and ``|diff|`` and ``rows`` are aligned with ``topology.undirected``.
    """
    lo, hi = topology.edge_index
    diff = values[lo] - values[hi]
    rows = mu.rows(topology)
    flow = 2.0 * mu.values[rows] * signum(diff, boundary_layer)
    w = np.zeros_like(values)
    np.add.at(w, lo, flow)
    np.add.at(w, hi, -flow)
    return w, np.abs(diff), rows


def state_derivative(
    state: EstimatorState,
    x: np.ndarray,
    params: EstimatorParams,
    topology: Topology,
) -> tuple[np.ndarray, np.ndarray]:
    """``(dz, dmu)``; ``dmu`` rows follow ``topology.undirected``."""
    w, dmu, _ = coupling(x, topology, state.mu, params.boundary_layer)
    return -params.gamma * state.z - w, dmu


def step(
    state: EstimatorState,
    signals: Sequence[ReferenceSignal],
    params: EstimatorParams,
    topology: Topology,
    h: float,
) -> EstimatorState:
    """One explicit-Euler step of length ``h``."""
    if not h > 0:
        raise ValueError(f"step length must be positive, got {h}")
    mu = state.mu.ensure(topology, params.kappa_floor)
    state = EstimatorState(state.t, state.z, mu)
    x = output(state, evaluate_all(signals, state.t))
    w, dmu, rows = coupling(x, topology, mu, params.boundary_layer)
    z = state.z + h * (-params.gamma * state.z - w)
    return EstimatorState(state.t + h, z, mu.incremented(rows, h * dmu))


def consensus_error(
    x: np.ndarray,
    signals: Sequence[ReferenceSignal],
    components: Sequence[Sequence[int]],
    t: float,
) -> np.ndarray:
    """``x_i`` minus the mean signal of agent ``i``'s connected component."""
    phi = evaluate_all(signals, t)
    err = np.array(x, dtype=float, copy=True)
    covered = 0
    for comp in components:
        idx = list(comp)
        err[idx] -= phi[idx].mean(axis=0)
        covered += len(idx)
    if covered != len(err):
        raise ValueError("components must partition the agents")
    return err
