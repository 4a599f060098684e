"""Scenario files: parsing, validation and the built-in benchmark preset.

A scenario is a JSON document with 1-based agent indices::

    {
      "name": "...",
      "n": 10,
      "edges": [[1, 2], [2, 3]],
      "topology_events": [{"time": 2.5, "action": "remove", "edge": [3, 7]}],
      "signals": [[{"type": "sin", "amplitude": -7.0, "frequency": 0.5, "phase": -2.5}], ...],
      "params": {"gamma": 1.0, "h": 0.001, "duration": 5.0, "r": 1,
                 "record_stride": 1, "boundary_layer": null},
      "et_params": {"alpha": 3.0, "delta": 1.5, "theta": 0.9, "beta": 100.0},
      "bounds": {"varphi": 10.0, "dot_varphi": 20.0},
      "seed": 42,
      "init": {"z": "random_uniform(-1,1)", "eta": 1.0, "kappa": 10.0}
    }

Per-agent trigger parameters take a scalar or a list of ``n`` values;
``beta`` may also be ``"auto"``. ``bounds`` may be ``"estimate"``.
``init.z`` is either a ``random_uniform(lo,hi)`` spec or an explicit
``n x r`` list. ``init.kappa_edges`` optionally sets per-link initial gains
as ``[{"edge": [i, j], "gain": [...]}]``.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np

from .event_triggered import compute_beta, parameter_violations
from .graph import Topology, TopologyError, TopologyEvent, apply_event, connected_components
from .signals import (
    Constant,
    Polynomial,
    ReferenceSignal,
    SignalBounds,
    Sinusoid,
    estimate_edge_bounds,
    benchmark_signals,
)

_UNIFORM = re.compile(r"^\s*random_uniform\(\s*([-+0-9.eE]+)\s*,\s*([-+0-9.eE]+)\s*\)\s*$")


class ScenarioError(ValueError):
    """Invalid scenario; ``problems`` lists every violation found."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("invalid scenario:\n" + "\n".join(f"  - {p}" for p in self.problems))


@dataclass(frozen=True)
class Scenario:
    """A validated scenario with 0-based indices and per-agent parameter tuples."""

    n: int
    r: int
    edges: tuple[tuple[int, int], ...]
    events: tuple[TopologyEvent, ...]
    signals: tuple[ReferenceSignal, ...]
    gamma: float
    h: float
    duration: float
    alpha: tuple[float, ...]
    delta: tuple[float, ...]
    theta: tuple[float, ...]
    beta: tuple[float, ...] | str
    eta_init: tuple[float, ...]
    kappa_floor: float
    seed: int
    z_init: tuple[float, float] | tuple[tuple[float, ...], ...] = (-1.0, 1.0)
    kappa_edges: tuple[tuple[tuple[int, int], tuple[float, ...]], ...] = ()
    bounds: SignalBounds | None = None
    record_stride: int = 1
    boundary_layer: float | None = None
    force_trigger: bool = False
    name: str = "scenario"
    source: dict[str, Any] = field(default_factory=dict, compare=False, repr=False)

    @property
    def topology(self) -> Topology:
        return Topology(self.n, frozenset(self.edges))

    @property
    def num_steps(self) -> int:
        return int(math.floor(self.duration / self.h + 1e-9))

    def with_overrides(self, **overrides: Any) -> Scenario:
        """Copy with the non-``None`` overrides applied (re-validated)."""
        changes = {k: v for k, v in overrides.items() if v is not None}
        if not changes:
            return self
        updated = replace(self, **changes)
        problems = []
        if not updated.h > 0:
            problems.append(f"params.h: step must be positive (got {updated.h})")
        if not updated.duration >= 0:
            problems.append(f"params.duration: duration must be nonnegative (got {updated.duration})")
        if not (isinstance(updated.record_stride, int) and updated.record_stride >= 1):
            problems.append(f"params.record_stride: must be a positive integer (got {updated.record_stride})")
        if updated.boundary_layer is not None and not updated.boundary_layer > 0:
            problems.append(f"params.boundary_layer: must be positive (got {updated.boundary_layer})")
        if not (isinstance(updated.seed, int) and updated.seed >= 0):
            problems.append(f"seed: must be an unsigned integer (got {updated.seed})")
        if problems:
            raise ScenarioError(problems)
        return updated

    def signal_bounds(self) -> SignalBounds:
        """Explicit bounds, or a sampled estimate over the initial links."""
        if self.bounds is not None:
            return self.bounds
        horizon = self.duration if self.duration > 0 else self.h
        return estimate_edge_bounds(self.signals, self.topology, horizon, self.h)

    def beta_estimate(self) -> np.ndarray:
        """Per-agent smallest admissible beta, computed on each agent's initial component."""
        bounds = self.signal_bounds()
        topo = self.topology
        out = np.zeros(self.n)
        for comp in connected_components(topo):
            value = compute_beta(bounds, topo.subgraph(comp), self.gamma)
            out[comp] = value
        return out

    def resolved_beta(self) -> np.ndarray:
        if self.beta == "auto":
            beta = self.beta_estimate()
            if np.any(beta <= 0):
                raise ScenarioError(["et_params.beta: 'auto' resolves to 0 for some agents; give explicit values"])
            return beta
        return np.asarray(self.beta, dtype=float)

    def initial_z(self) -> np.ndarray:
        """Initial internal states; random draws come from ``numpy.random.default_rng(seed)``."""
        if len(self.z_init) == 2 and all(isinstance(v, float) for v in self.z_init):
            lo, hi = self.z_init
            return np.random.default_rng(self.seed).uniform(lo, hi, size=(self.n, self.r))
        return np.array(self.z_init, dtype=float).reshape(self.n, self.r)

    def echo(self) -> dict[str, Any]:
        """Parameters as they were used, for summaries."""
        return {
            "name": self.name,
            "n": self.n,
            "r": self.r,
            "gamma": self.gamma,
            "h": self.h,
            "duration": self.duration,
            "record_stride": self.record_stride,
            "boundary_layer": self.boundary_layer,
            "force_trigger": self.force_trigger,
            "alpha": list(self.alpha),
            "delta": list(self.delta),
            "theta": list(self.theta),
            "beta": self.beta if isinstance(self.beta, str) else list(self.beta),
            "eta_init": list(self.eta_init),
            "kappa_floor": self.kappa_floor,
            "bounds": "estimate" if self.bounds is None
            else {"varphi": self.bounds.varphi, "dot_varphi": self.bounds.dot_varphi},
            "seed": self.seed,
        }


def _per_agent(raw: Any, n: int, key: str, problems: list[str], allow_auto: bool = False):
    if allow_auto and raw == "auto":
        return "auto"
    if isinstance(raw, (int, float)) and not isinstance(raw, bool):
        return tuple(float(raw) for _ in range(n))
    if isinstance(raw, list) and len(raw) == n and all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in raw
    ):
        return tuple(float(v) for v in raw)
    problems.append(f"{key}: expected a number or a list of {n} numbers (got {raw!r})")
    return None


def _parse_channel(raw: Any, where: str, problems: list[str]):
    if not isinstance(raw, dict):
        problems.append(f"{where}: channel must be an object")
        return None
    kind = raw.get("type")
    try:
        if kind in ("sin", "cos"):
            return Sinusoid(kind, float(raw["amplitude"]), float(raw["frequency"]), float(raw.get("phase", 0.0)))
        if kind == "constant":
            return Constant(float(raw["value"]))
        if kind == "polynomial":
            coeffs = tuple(float(c) for c in raw["coefficients"])
            if not coeffs:
                raise ValueError("empty coefficient list")
            return Polynomial(coeffs)
    except (KeyError, TypeError, ValueError) as exc:
        problems.append(f"{where}: malformed {kind} channel ({exc})")
        return None
    problems.append(f"{where}: unknown channel type {kind!r}")
    return None


def _parse(raw: dict[str, Any]) -> tuple[Scenario | None, list[str], list[str]]:
    problems: list[str] = []
    warnings: list[str] = []
    if not isinstance(raw, dict):
        return None, ["scenario must be a JSON object"], []

    n = raw.get("n")
    if not (isinstance(n, int) and not isinstance(n, bool) and n >= 1):
        return None, [f"n: agent count must be a positive integer (got {n!r})"], []

    params = raw.get("params", {})
    et = raw.get("et_params", {})
    init = raw.get("init", {})
    for key, block in (("params", params), ("et_params", et), ("init", init)):
        if not isinstance(block, dict):
            problems.append(f"{key}: must be an object")
    if problems:
        return None, problems, []

    r = params.get("r", 1)
    if not (isinstance(r, int) and r >= 1):
        problems.append(f"params.r: signal dimension must be a positive integer (got {r!r})")
        r = 1

    # Topology
    edges: list[tuple[int, int]] = []
    seen = set()
    for k, pair in enumerate(raw.get("edges", [])):
        if not (isinstance(pair, list) and len(pair) == 2 and all(isinstance(v, int) for v in pair)):
            problems.append(f"edges[{k}]: expected [i, j] with integer agents (got {pair!r})")
            continue
        i, j = pair
        if not (1 <= i <= n and 1 <= j <= n):
            problems.append(f"edges[{k}]: agent outside 1..{n} in {{{i},{j}}}")
        elif i == j:
            problems.append(f"edges[{k}]: self-loop on agent {i}")
        elif frozenset((i, j)) in seen:
            problems.append(f"edges[{k}]: duplicate edge {{{i},{j}}}")
        else:
            seen.add(frozenset((i, j)))
            edges.append((min(i, j) - 1, max(i, j) - 1))

    events: list[TopologyEvent] = []
    for k, ev in enumerate(raw.get("topology_events", [])):
        try:
            i, j = ev["edge"]
            if not (1 <= i <= n and 1 <= j <= n) or i == j:
                raise ValueError(f"invalid edge {{{i},{j}}}")
            events.append(TopologyEvent(float(ev["time"]), ev["action"], (i - 1, j - 1)))
        except (KeyError, TypeError, ValueError) as exc:
            problems.append(f"topology_events[{k}]: {exc}")
    events.sort(key=lambda e: e.time)
    if not problems:
        topo = Topology(n, frozenset(edges))
        for ev in events:
            try:
                topo = apply_event(topo, ev)
            except TopologyError as exc:
                problems.append(f"topology_events: {exc}")
        if len(connected_components(Topology(n, frozenset(edges)))) > 1:
            warnings.append("initial topology is disconnected; averages are tracked per component")

    # Signals
    signals: list[ReferenceSignal] = []
    raw_signals = raw.get("signals")
    if not (isinstance(raw_signals, list) and len(raw_signals) == n):
        problems.append(f"signals: expected a list of {n} per-agent channel lists")
    else:
        for a, chans in enumerate(raw_signals):
            where = f"signals[{a + 1}]"
            if not (isinstance(chans, list) and len(chans) == r):
                problems.append(f"{where}: expected {r} channel(s)")
                continue
            parsed = [_parse_channel(c, f"{where}[{c_i + 1}]", problems) for c_i, c in enumerate(chans)]
            if all(p is not None for p in parsed):
                signals.append(ReferenceSignal(tuple(parsed)))

    # Integration parameters
    gamma = params.get("gamma")
    h = params.get("h", 1e-3)
    duration = params.get("duration")
    stride = params.get("record_stride", 1)
    boundary_layer = params.get("boundary_layer")
    if not (isinstance(gamma, (int, float)) and gamma > 0):
        problems.append(f"params.gamma: gamma must be positive (got {gamma!r})")
    if not (isinstance(h, (int, float)) and h > 0):
        problems.append(f"params.h: step must be positive (got {h!r})")
    if not (isinstance(duration, (int, float)) and duration >= 0):
        problems.append(f"params.duration: duration must be nonnegative (got {duration!r})")
    if not (isinstance(stride, int) and stride >= 1):
        problems.append(f"params.record_stride: must be a positive integer (got {stride!r})")
    if boundary_layer is not None and not (isinstance(boundary_layer, (int, float)) and boundary_layer > 0):
        problems.append(f"params.boundary_layer: must be positive or null (got {boundary_layer!r})")

    # Trigger design
    alpha = _per_agent(et.get("alpha", 1.0), n, "et_params.alpha", problems)
    delta = _per_agent(et.get("delta", 1.0), n, "et_params.delta", problems)
    theta = _per_agent(et.get("theta", 0.5), n, "et_params.theta", problems)
    beta = _per_agent(et.get("beta", "auto"), n, "et_params.beta", problems, allow_auto=True)
    eta_init = _per_agent(init.get("eta", 1.0), n, "init.eta", problems)
    kappa = init.get("kappa", 1.0)
    if not isinstance(kappa, (int, float)):
        problems.append(f"init.kappa: expected a number (got {kappa!r})")
        kappa = float("nan")
    if None not in (alpha, delta, theta, beta, eta_init):
        numeric_beta = [1.0] * n if beta == "auto" else beta
        problems.extend(
            f"et_params: {p}" for p in parameter_violations(
                alpha, delta, theta, numeric_beta, eta_init, kappa,
                gamma if isinstance(gamma, (int, float)) else 1.0)
            if not p.startswith("gamma")
        )

    kappa_edges = []
    for k, entry in enumerate(init.get("kappa_edges", [])):
        try:
            i, j = entry["edge"]
            gain = tuple(float(g) for g in np.broadcast_to(entry["gain"], (r,)))
            if min(gain) < 1:
                problems.append(f"init.kappa_edges[{k}]: initial gain must be >= 1")
            elif frozenset((i, j)) not in seen:
                problems.append(f"init.kappa_edges[{k}]: edge {{{i},{j}}} is not an initial edge")
            else:
                kappa_edges.append(((min(i, j) - 1, max(i, j) - 1), gain))
        except (KeyError, TypeError, ValueError) as exc:
            problems.append(f"init.kappa_edges[{k}]: {exc}")

    z_raw = init.get("z", "random_uniform(-1,1)")
    z_init: Any = None
    if isinstance(z_raw, str):
        m = _UNIFORM.match(z_raw)
        if m and float(m.group(1)) <= float(m.group(2)):
            z_init = (float(m.group(1)), float(m.group(2)))
        else:
            problems.append(f"init.z: expected 'random_uniform(lo,hi)' with lo <= hi (got {z_raw!r})")
    else:
        try:
            arr = np.array(z_raw, dtype=float).reshape(n, r)
            z_init = tuple(tuple(row) for row in arr.tolist())
        except (TypeError, ValueError):
            problems.append(f"init.z: expected an {n}x{r} list of numbers")

    bounds_raw = raw.get("bounds", "estimate")
    bounds = None
    if bounds_raw != "estimate":
        try:
            bounds = SignalBounds(float(bounds_raw["varphi"]), float(bounds_raw["dot_varphi"]))
        except (KeyError, TypeError, ValueError) as exc:
            problems.append(f"bounds: expected 'estimate' or {{varphi, dot_varphi}} ({exc})")

    seed = raw.get("seed", 0)
    if not (isinstance(seed, int) and not isinstance(seed, bool) and seed >= 0):
        problems.append(f"seed: must be an unsigned integer (got {seed!r})")

    if problems:
        return None, problems, warnings

    scenario = Scenario(
        n=n,
        r=r,
        edges=tuple(sorted(edges)),
        events=tuple(events),
        signals=tuple(signals),
        gamma=float(gamma),
        h=float(h),
        duration=float(duration),
        alpha=alpha,
        delta=delta,
        theta=theta,
        beta=beta,
        eta_init=eta_init,
        kappa_floor=float(kappa),
        seed=seed,
        z_init=z_init,
        kappa_edges=tuple(kappa_edges),
        bounds=bounds,
        record_stride=stride,
        boundary_layer=None if boundary_layer is None else float(boundary_layer),
        name=str(raw.get("name", "scenario")),
        source=raw,
    )

    # Assumption on beta is only checkable on connected pieces; skip singletons.
    try:
        estimate = scenario.beta_estimate()
    except (TopologyError, ValueError) as exc:
        warnings.append(f"could not estimate the beta lower bound ({exc})")
    else:
        if beta == "auto":
            if np.any(estimate <= 0):
                problems.append("et_params.beta: 'auto' resolves to 0 for some agents; give explicit values")
        else:
            low = [(k + 1, b, e) for k, (b, e) in enumerate(zip(beta, estimate)) if b < e]
            if low:
                detail = ", ".join(f"agent {k}: beta {b:g} < {e:.6g}" for k, b, e in low)
                warnings.append(f"beta below the local-gain lower bound estimate ({detail})")
    if problems:
        return None, problems, warnings
    return scenario, [], warnings


def validate_scenario(raw: dict[str, Any]) -> tuple[list[str], list[str]]:
    """Return ``(violations, warnings)`` without raising."""
    _, problems, warnings = _parse(raw)
    return problems, warnings


def parse_scenario(raw: dict[str, Any]) -> Scenario:
    """Build a :class:`Scenario`.

    Raises:
        ScenarioError: listing every violation.
    """
    scenario, problems, _ = _parse(raw)
    if problems:
        raise ScenarioError(problems)
    return scenario


def load_scenario(path: str | Path) -> Scenario:
    """Read and parse a scenario file. ``OSError`` propagates for unreadable paths."""
    text = Path(path).read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError([f"{path}: not valid JSON ({exc})"]) from exc
    return parse_scenario(raw)


# Benchmark network links, 1-based.
BENCHMARK_EDGES = [[1, 2], [2, 3], [2, 4], [3, 4], [3, 7], [4, 5], [4, 6], [5, 6], [7, 8], [8, 9], [9, 10]]


def benchmark_scenario_dict(seed: int = 42) -> dict[str, Any]:
    """The 10-agent benchmark: link {3,7} is cut at t = 2.5, splitting the network in two."""
    signals = []
    for sig in benchmark_signals(10):
        (ch,) = sig.channels
        signals.append([{"type": ch.kind, "amplitude": ch.amplitude, "frequency": ch.frequency, "phase": ch.phase}])
    return {
        "name": "benchmark-10-agent-split",
        "n": 10,
        "edges": [list(e) for e in BENCHMARK_EDGES],
        "topology_events": [{"time": 2.5, "action": "remove", "edge": [3, 7]}],
        "signals": signals,
        "params": {"gamma": 1.0, "h": 0.001, "duration": 5.0, "r": 1, "record_stride": 1, "boundary_layer": None},
        "et_params": {"alpha": 3.0, "delta": 1.5, "theta": 0.9, "beta": 100.0},
        "bounds": {"varphi": 10.0, "dot_varphi": 20.0},
        "seed": seed,
        "init": {"z": "random_uniform(-1,1)", "eta": 1.0, "kappa": 10.0},
    }


def benchmark_scenario(seed: int = 42) -> Scenario:
    return parse_scenario(benchmark_scenario_dict(seed))


def dump_scenario(raw: dict[str, Any]) -> str:
    return json.dumps(raw, indent=2) + "\n"
