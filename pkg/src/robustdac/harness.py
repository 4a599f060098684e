"""Scenario-driven simulation loop, run diagnostics and result export."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Literal

import numpy as np

from . import estimator as est
from . import event_triggered as et
from .graph import Topology, algebra, apply_event, connected_components, edge_gram_norm
from .scenario import Scenario
from .signals import SignalBounds, evaluate_all

log = logging.getLogger(__name__)

Mode = Literal["continuous", "event", "both"]
TRAILING_WINDOW = 0.5


@dataclass
class RunChecks:
    """Per-step invariant bookkeeping accumulated over a run."""

    steps: int = 0
    gain_decreases: int = 0
    zero_sum_residual: float = 0.0
    compliance_violations: int = 0
    compliance_excess: float = -math.inf
    eta_violations: int = 0
    eta_min: float = math.inf

    def as_dict(self) -> dict[str, Any]:
        return {k: (None if isinstance(v, float) and not math.isfinite(v) else v)
                for k, v in self.__dict__.items()}


@dataclass
class RunResult:
    mode: str
    scenario: Scenario
    times: np.ndarray
    x: np.ndarray
    xtilde: np.ndarray
    eta: np.ndarray | None
    triggered: np.ndarray
    trigger_counts: np.ndarray
    energy: np.ndarray
    lyapunov: np.ndarray
    final_state: Any
    checks: RunChecks
    bounds: SignalBounds
    beta: np.ndarray
    trigger_log: tuple[tuple[float, ...], ...] | None = None
    components: list[list[int]] = field(default_factory=list)

    @property
    def stats(self) -> list[et.TriggerStats] | None:
        if self.trigger_log is None or not self.scenario.duration > 0:
            return None
        return et.trigger_statistics(self.trigger_log, self.scenario.duration, self.scenario.h)

    def max_error(self, start: float, stop: float) -> float:
        """``max_i ||xtilde_i||_inf`` over recorded times in ``[start, stop)``."""
        tol = 1e-9 * self.scenario.h
        mask = (self.times >= start - tol) & (self.times < stop - tol)
        if not mask.any():
            return math.nan
        return float(np.abs(self.xtilde[mask]).max())

    def trailing_error(self, window: float = TRAILING_WINDOW) -> float:
        end = self.scenario.duration
        return self.max_error(end - window, end + self.scenario.h)

    def summary(self) -> dict[str, Any]:
        stats = self.stats
        agents = []
        for i in range(self.scenario.n):
            entry: dict[str, Any] = {"agent": i + 1}
            if stats is not None:
                s = stats[i]
                entry.update(
                    trigger_count=s.count,
                    trigger_fraction=s.fraction,
                    min_inter_event=None if math.isinf(s.min_inter_event) else s.min_inter_event,
                )
            agents.append(entry)
        trailing = self.trailing_error()
        glob: dict[str, Any] = {
            "mode": self.mode,
            "max_error_trailing_window": None if math.isnan(trailing) else trailing,
            "trailing_window": TRAILING_WINDOW,
            "steps": self.scenario.num_steps,
            "seed": self.scenario.seed,
            "params": self.scenario.echo(),
            "beta_used": self.beta.tolist(),
            "bounds_used": {"varphi": self.bounds.varphi, "dot_varphi": self.bounds.dot_varphi},
            "checks": self.checks.as_dict(),
            "final_components": [[v + 1 for v in c] for c in self.components],
        }
        if stats is not None:
            glob["mean_trigger_fraction"] = float(np.mean([s.fraction for s in stats]))
            glob["total_trigger_count"] = int(sum(s.count for s in stats))
            gaps = [s.min_inter_event for s in stats if not math.isinf(s.min_inter_event)]
            glob["min_inter_event"] = min(gaps) if gaps else None
        return {"agents": agents, "global": glob}


def disagreement_energy(x: np.ndarray, topology: Topology) -> float:
    """``1/2 xi^T ((B^T B)^+ (x) I_r) xi`` with ``xi = (B^T (x) I_r) x``."""
    if not topology.edges:
        return 0.0
    alg = algebra(topology)
    xi = alg.incidence.T @ x
    return 0.5 * float(np.sum(xi * (alg.edge_gram_pinv @ xi)))


def _mu_star(topology: Topology, bounds: SignalBounds, gamma: float) -> np.ndarray:
    """Stand-in target gain per link: ``(gamma*varphi + dot_varphi) * ||(B_C^T B_C)^+||_inf`` of its component."""
    scale = gamma * bounds.varphi + bounds.dot_varphi
    target = {}
    for comp in connected_components(topology):
        value = scale * edge_gram_norm(topology.subgraph(comp))
        for v in comp:
            target[v] = value
    return np.array([target[i] for i, _ in topology.undirected])


def lyapunov_diagnostic(
    state: est.EstimatorState | et.ETState,
    x: np.ndarray,
    topology: Topology,
    bounds: SignalBounds,
    gamma: float,
    mu_star: np.ndarray | None = None,
) -> float:
    """Disagreement energy plus ``sum_links ||mu_ij - mu*||^2``.

    The ordered-pair sum over ``(i, j)`` and ``(j, i)`` cancels the 1/2.
    The proof constant is replaced by a per-component bound, so the value
    is not guaranteed to be monotone.
    """
    energy = disagreement_energy(x, topology)
    if not topology.edges:
        return energy
    mu = state.mu.values[state.mu.rows(topology)]
    if mu_star is None:
        mu_star = _mu_star(topology, bounds, gamma)
    gap = mu - mu_star[:, None]
    return energy + float(np.sum(gap * gap))


class _Recorder:
    def __init__(self, scenario: Scenario, event_mode: bool):
        count = -(-scenario.num_steps // scenario.record_stride)
        n, r = scenario.n, scenario.r
        self.times = np.zeros(count)
        self.x = np.zeros((count, n, r))
        self.xtilde = np.zeros((count, n, r))
        self.eta = np.zeros((count, n)) if event_mode else None
        self.triggered = np.zeros((count, n), dtype=bool)
        self.counts = np.zeros((count, n), dtype=np.int64)
        self.energy = np.zeros(count)
        self.lyapunov = np.zeros(count)
        self.row = 0

    def add(self, t, x, xtilde, energy, lyap, eta=None, fired=None, counts=None) -> None:
        k = self.row
        self.times[k] = t
        self.x[k] = x
        self.xtilde[k] = xtilde
        self.energy[k] = energy
        self.lyapunov[k] = lyap
        if eta is not None:
            self.eta[k] = eta
            self.triggered[k] = fired
            self.counts[k] = counts
        self.row += 1


def _component_error(x: np.ndarray, phi: np.ndarray, components: list[list[int]]) -> np.ndarray:
    err = x.copy()
    for comp in components:
        err[comp] -= phi[comp].mean(axis=0)
    return err


def _zero_sum_residual(z_old, z_new, components, factor) -> float:
    return max(
        float(np.abs(z_new[c].sum(axis=0) - factor * z_old[c].sum(axis=0)).max()) for c in components
    )


def _simulate(scenario: Scenario, mode: str, z0: np.ndarray, bounds: SignalBounds, beta: np.ndarray) -> RunResult:
    h = scenario.h
    topo = scenario.topology
    components = connected_components(topo)
    kappa_edges = dict(scenario.kappa_edges)
    event_mode = mode == "event"
    if event_mode:
        params = et.ETParams(
            n=scenario.n, gamma=scenario.gamma, alpha=scenario.alpha, delta=scenario.delta,
            theta=scenario.theta, beta=beta, eta_init=scenario.eta_init, r=scenario.r,
            kappa_floor=scenario.kappa_floor, kappa_edges=kappa_edges,
            boundary_layer=scenario.boundary_layer, force_trigger=scenario.force_trigger,
        )
        state = et.initial_et_state(z0, topo, params)
        counts = np.zeros(scenario.n, dtype=np.int64)
    else:
        params = est.EstimatorParams(
            gamma=scenario.gamma, r=scenario.r, kappa_floor=scenario.kappa_floor,
            kappa_edges=kappa_edges, boundary_layer=scenario.boundary_layer,
        )
        state = est.initial_state(z0, topo, params)

    rec = _Recorder(scenario, event_mode)
    checks = RunChecks()
    pending = list(scenario.events)
    decay = 1.0 - scenario.gamma * h
    mu_star = _mu_star(topo, bounds, scenario.gamma)

    for k in range(scenario.num_steps):
        t = k * h
        changed = False
        # events fire at the first step whose start time reaches them
        while pending and pending[0].time <= t + 1e-9 * h:
            topo = apply_event(topo, pending.pop(0))
            changed = True
        if changed:
            components = connected_components(topo)
            mu_star = _mu_star(topo, bounds, scenario.gamma)
            log.debug("topology changed at t=%g: %d links, %d components", t, len(topo.edges), len(components))

        phi = evaluate_all(scenario.signals, t)
        mu_now = state.mu.ensure(topo, scenario.kappa_floor)
        if event_mode:
            new, info = et.advance(state, scenario.signals, params, topo, h)
            x = info.x
            counts += info.fired
            excess = params.theta * info.functional - info.eta_before
            checks.compliance_excess = max(checks.compliance_excess, float(excess.max()))
            checks.compliance_violations += int(np.count_nonzero(excess > 0))
            checks.eta_violations += int(np.count_nonzero(new.eta <= 0))
            checks.eta_min = min(checks.eta_min, float(new.eta.min()))
        else:
            x = state.z + phi
            new = est.step(state, scenario.signals, params, topo, h)

        if k % scenario.record_stride == 0:
            energy = disagreement_energy(x, topo)
            lyap = lyapunov_diagnostic(replace(state, mu=mu_now), x, topo, bounds, scenario.gamma, mu_star)
            xtilde = _component_error(x, phi, components)
            if event_mode:
                rec.add(t, x, xtilde, energy, lyap, info.eta_before, info.fired, counts)
            else:
                rec.add(t, x, xtilde, energy, lyap)

        old_rows = mu_now.values.shape[0]
        checks.gain_decreases += int(np.count_nonzero(new.mu.values[:old_rows] < mu_now.values))
        checks.zero_sum_residual = max(
            checks.zero_sum_residual, _zero_sum_residual(state.z, new.z, components, decay)
        )
        checks.steps += 1
        state = replace(new, t=(k + 1) * h)

    return RunResult(
        mode=mode,
        scenario=scenario,
        times=rec.times,
        x=rec.x,
        xtilde=rec.xtilde,
        eta=rec.eta,
        triggered=rec.triggered,
        trigger_counts=rec.counts,
        energy=rec.energy,
        lyapunov=rec.lyapunov,
        final_state=state,
        checks=checks,
        bounds=bounds,
        beta=beta,
        trigger_log=state.trigger_log if event_mode else None,
        components=components,
    )


def run(scenario: Scenario, mode: Mode = "event"):
    """Simulate ``scenario``.

    Returns a :class:`RunResult`, or a ``(continuous, event)`` pair for
    ``mode="both"``; both runs then start from the same random draw.
    """
    if mode not in ("continuous", "event", "both"):
        raise ValueError(f"unknown mode {mode!r}")
    z0 = scenario.initial_z()
    bounds = scenario.signal_bounds()
    beta = scenario.resolved_beta()
    if mode == "both":
        return (
            _simulate(scenario, "continuous", z0, bounds, beta),
            _simulate(scenario, "event", z0, bounds, beta),
        )
    return _simulate(scenario, mode, z0, bounds, beta)


def max_deviation(a: RunResult, b: RunResult) -> float:
    """Largest absolute difference between the recorded estimates of two runs."""
    if a.x.shape != b.x.shape:
        raise ValueError("runs have different shapes")
    return float(np.abs(a.x - b.x).max()) if a.x.size else 0.0


def _fmt(v: float) -> str:
    return "%.17g" % v


def export(result: RunResult, out_dir: str | Path) -> list[Path]:
    """Write ``series.csv``, ``summary.json`` and ``events.csv`` into ``out_dir``.

    Raises:
        OSError: with the offending path in the message.
    """
    out = Path(out_dir)
    n, r = result.scenario.n, result.scenario.r
    event_mode = result.eta is not None
    lines = ["t,agent,channel,x,xtilde,eta,triggered"]
    for k, t in enumerate(result.times):
        ts = _fmt(t)
        for i in range(n):
            eta = _fmt(result.eta[k, i]) if event_mode else ""
            trig = "1" if result.triggered[k, i] else "0"
            for c in range(r):
                lines.append(
                    f"{ts},{i + 1},{c + 1},{_fmt(result.x[k, i, c])},{_fmt(result.xtilde[k, i, c])},{eta},{trig}"
                )
    event_lines = ["agent,time"]
    for i, times in enumerate(result.trigger_log or ()):
        event_lines.extend(f"{i + 1},{_fmt(t)}" for t in times)

    files = {
        "series.csv": "\n".join(lines) + "\n",
        "events.csv": "\n".join(event_lines) + "\n",
        "summary.json": json.dumps(result.summary(), indent=2) + "\n",
    }
    written = []
    for name, body in files.items():
        path = out / name
        try:
            out.mkdir(parents=True, exist_ok=True)
            path.write_text(body)
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
        written.append(path)
    return written
