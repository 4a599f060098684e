"""Event-triggered variant of the robust estimator with a dynamic trigger variable.

Agents only see each other's last broadcast ``xhat``. Agent ``i`` broadcasts
once the weighted measurement drift catches up with its trigger variable::

    theta_i * (beta_i * 1^T |eps_i| - w_i^T eps_i) >= eta_i,   eps_i = x_i - xhat_i

``eta_i`` follows::

    deta_i = -alpha_i * eta_i - delta_i * (beta_i * 1^T |eps_i| - w_i^T eps_i)

The trigger condition is checked once per step, before the state update.
Firing is synchronous: every agent is tested against the pre-step
broadcasts, then all firings are applied together.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .estimator import GainTable, coupling, edge_disagreement
from .graph import Topology, gain_norm_bound
from .signals import ReferenceSignal, SignalBounds, evaluate_all


def _per_agent(value, n: int, name: str) -> np.ndarray:
    arr = np.broadcast_to(np.asarray(value, dtype=float), (n,)).copy()
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


def parameter_violations(alpha, delta, theta, beta, eta_init, kappa_floor, gamma) -> list[str]:
    """Messages for every violated design constraint (empty when admissible)."""
    problems = []
    if not gamma > 0:
        problems.append(f"gamma must be positive (got {gamma})")
    if not kappa_floor >= 1:
        problems.append(f"kappa floor must be >= 1 (got {kappa_floor})")
    checks = [
        ("alpha", alpha, lambda v: v > 0, "alpha must be positive"),
        ("delta", delta, lambda v: v >= 1, "delta must be >= 1"),
        ("theta", theta, lambda v: 0 < v < 1, "theta must be in (0,1)"),
        ("beta", beta, lambda v: v > 0, "beta must be positive"),
        ("eta_init", eta_init, lambda v: v > 0, "eta must be positive"),
    ]
    for _, values, ok, message in checks:
        bad = [(k + 1, float(v)) for k, v in enumerate(np.atleast_1d(values)) if not ok(float(v))]
        if bad:
            agents = ", ".join(f"agent {k}: {v!r}" for k, v in bad)
            problems.append(f"{message} ({agents})")
    return problems


@dataclass(frozen=True)
class ETParams:
    """Per-agent trigger design. Scalars are broadcast to all ``n`` agents."""

    n: int
    gamma: float
    alpha: np.ndarray
    delta: np.ndarray
    theta: np.ndarray
    beta: np.ndarray
    eta_init: np.ndarray
    r: int = 1
    kappa_floor: float = 1.0
    kappa_edges: Mapping[tuple[int, int], Sequence[float]] = field(default_factory=dict)
    boundary_layer: float | None = None
    force_trigger: bool = False

    def __post_init__(self) -> None:
        for name in ("alpha", "delta", "theta", "beta", "eta_init"):
            object.__setattr__(self, name, _per_agent(getattr(self, name), self.n, name))
        problems = parameter_violations(self.alpha, self.delta, self.theta, self.beta,
                                        self.eta_init, self.kappa_floor, self.gamma)
        if problems:
            raise ValueError("; ".join(problems))


@dataclass(frozen=True)
class ETState:
    """Event-triggered network state.

    ``trigger_log[i]`` lists agent ``i``'s broadcast times. An agent whose log
    is still empty has not broadcast and fires at the next check, so the first
    step of a run puts ``t0`` in every log.
    """

    t: float
    z: np.ndarray
    mu: GainTable
    xhat: np.ndarray
    eta: np.ndarray
    trigger_log: tuple[tuple[float, ...], ...]


@dataclass(frozen=True)
class StepInfo:
    """Per-step byproducts the harness records (all post-fire)."""

    x: np.ndarray
    fired: np.ndarray
    w: np.ndarray
    functional: np.ndarray
    eta_before: np.ndarray


def initial_et_state(z0: np.ndarray, topology: Topology, params: ETParams, t0: float = 0.0) -> ETState:
    z0 = np.array(z0, dtype=float).reshape(topology.n, params.r)
    mu = GainTable.initial(topology.edges, params.r, params.kappa_floor, params.kappa_edges)
    return ETState(
        t=t0,
        z=z0,
        mu=mu,
        xhat=np.zeros_like(z0),
        eta=params.eta_init.copy(),
        trigger_log=tuple(() for _ in range(topology.n)),
    )


def broadcast_disagreement(xhat: np.ndarray, topology: Topology) -> np.ndarray:
    """``xhat_dst - xhat_src`` per directed edge."""
    return edge_disagreement(xhat, topology)


def control_term(state: ETState, topology: Topology, boundary_layer: float | None = None) -> np.ndarray:
    """``w_i = 2 * sum_j mu_ij * sgn(xhat_i - xhat_j)``."""
    return coupling(state.xhat, topology, state.mu, boundary_layer)[0]


def trigger_functional(eps_i: np.ndarray, w_i: np.ndarray, beta_i) -> np.ndarray | float:
    """``beta_i * sum|eps_i| - w_i . eps_i``; vectorises over a leading agent axis."""
    eps_i = np.asarray(eps_i, dtype=float)
    w_i = np.asarray(w_i, dtype=float)
    return beta_i * np.abs(eps_i).sum(axis=-1) - (w_i * eps_i).sum(axis=-1)


def eta_derivative(eta_i, eps_i, w_i, alpha_i, delta_i, beta_i):
    return -alpha_i * eta_i - delta_i * trigger_functional(eps_i, w_i, beta_i)


def check_and_fire(
    state: ETState,
    x: np.ndarray,
    params: ETParams,
    topology: Topology,
) -> tuple[ETState, np.ndarray]:
    """Apply this instant's broadcasts; returns the new state and the fired mask.

    Each round tests every agent against the current broadcasts and applies
    all firings at once. A broadcast changes its neighbors' ``w``, which can
    push them over their threshold at the same instant, so rounds repeat
    until none fire. A fired agent has ``eps_i = 0`` and cannot fire twice.
    """
    if params.force_trigger:
        fired = np.ones(len(state.eta), dtype=bool)
    else:
        fired = np.array([not log for log in state.trigger_log])
    xhat = np.where(fired[:, None], x, state.xhat)
    while not params.force_trigger:
        w = coupling(xhat, topology, state.mu, params.boundary_layer)[0]
        value = trigger_functional(x - xhat, w, params.beta)
        new = ~fired & (params.theta * value >= state.eta)
        if not new.any():
            break
        fired |= new
        xhat = np.where(new[:, None], x, xhat)
    if not fired.any():
        return state, fired
    log = tuple(entries + (state.t,) if f else entries for entries, f in zip(state.trigger_log, fired))
    return ETState(state.t, state.z, state.mu, xhat, state.eta, log), fired


def compute_beta(bounds: SignalBounds, topology: Topology, gamma: float) -> float:
    """Smallest admissible local gain ``(gamma*varphi + dot_varphi) * ||B (B^T B)^+||_inf``."""
    return (gamma * bounds.varphi + bounds.dot_varphi) * gain_norm_bound(topology)


def advance(
    state: ETState,
    signals: Sequence[ReferenceSignal],
    params: ETParams,
    topology: Topology,
    h: float,
) -> tuple[ETState, StepInfo]:
    """One synchronous step; also returns the post-fire quantities used."""
    if not h > 0:
        raise ValueError(f"step length must be positive, got {h}")
    mu = state.mu.ensure(topology, params.kappa_floor)
    if mu is not state.mu:
        state = ETState(state.t, state.z, mu, state.xhat, state.eta, state.trigger_log)
    x = state.z + evaluate_all(signals, state.t)
    state, fired = check_and_fire(state, x, params, topology)
    w, dmu, rows = coupling(state.xhat, topology, mu, params.boundary_layer)
    functional = trigger_functional(x - state.xhat, w, params.beta)
    eta_rate = -params.alpha * state.eta - params.delta * functional
    z = state.z + h * (-params.gamma * state.z - w)
    new = ETState(
        t=state.t + h,
        z=z,
        mu=mu.incremented(rows, h * dmu),
        xhat=state.xhat,
        eta=state.eta + h * eta_rate,
        trigger_log=state.trigger_log,
    )
    return new, StepInfo(x=x, fired=fired, w=w, functional=functional, eta_before=state.eta)


def step_et(
    state: ETState,
    signals: Sequence[ReferenceSignal],
    params: ETParams,
    topology: Topology,
    h: float,
) -> ETState:
    return advance(state, signals, params, topology, h)[0]


@dataclass(frozen=True)
class TriggerStats:
    count: int
    fraction: float
    min_inter_event: float  # inf with fewer than two events


def trigger_statistics(log: Sequence[Sequence[float]], duration: float, h: float) -> list[TriggerStats]:
    """Per-agent event counts, fraction of steps with a broadcast and smallest gap."""
    if not duration > 0:
        raise ValueError("duration must be positive")
    steps = duration / h
    out = []
    for times in log:
        gaps = np.diff(np.asarray(times, dtype=float))
        out.append(
            TriggerStats(
                count=len(times),
                fraction=len(times) / steps,
                min_inter_event=float(gaps.min()) if gaps.size else math.inf,
            )
        )
    return out
