"""Closed-form reference signals, network averages and edge-difference bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np
from numpy.polynomial import polynomial as npoly

from .graph import Topology

SAFETY_FACTOR = 1.1


@dataclass(frozen=True)
class Sinusoid:
    """``amplitude * sin(frequency * t + phase)`` (or ``cos`` when ``kind == "cos"``)."""

    kind: str
    amplitude: float
    frequency: float
    phase: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("sin", "cos"):
            raise ValueError(f"sinusoid kind must be 'sin' or 'cos', got {self.kind!r}")

    def value(self, t):
        arg = self.frequency * np.asarray(t, dtype=float) + self.phase
        return self.amplitude * (np.sin(arg) if self.kind == "sin" else np.cos(arg))

    def rate(self, t):
        arg = self.frequency * np.asarray(t, dtype=float) + self.phase
        scale = self.amplitude * self.frequency
        return scale * np.cos(arg) if self.kind == "sin" else -scale * np.sin(arg)

    def at(self, t: float) -> float:
        arg = self.frequency * t + self.phase
        return self.amplitude * (math.sin(arg) if self.kind == "sin" else math.cos(arg))

    def rate_at(self, t: float) -> float:
        arg = self.frequency * t + self.phase
        scale = self.amplitude * self.frequency
        return scale * math.cos(arg) if self.kind == "sin" else -scale * math.sin(arg)


@dataclass(frozen=True)
class Constant:
    level: float

    def value(self, t):
        return np.full(np.shape(t), float(self.level))

    def rate(self, t):
        return np.zeros(np.shape(t))

    def at(self, t: float) -> float:
        return float(self.level)

    def rate_at(self, t: float) -> float:
        return 0.0


@dataclass(frozen=True)
class Polynomial:
    """Polynomial with coefficients in ascending powers of ``t``."""

    coefficients: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))

    def value(self, t):
        return npoly.polyval(np.asarray(t, dtype=float), self.coefficients)

    def rate(self, t):
        deriv = npoly.polyder(self.coefficients) if len(self.coefficients) > 1 else [0.0]
        return npoly.polyval(np.asarray(t, dtype=float), deriv)

    def at(self, t: float) -> float:
        return float(self.value(t))

    def rate_at(self, t: float) -> float:
        return float(self.rate(t))


Channel = Union[Sinusoid, Constant, Polynomial]


@dataclass(frozen=True)
class ReferenceSignal:
    """An agent's private ``r``-dimensional signal, one closed-form channel per component."""

    channels: tuple[Channel, ...]

    def __post_init__(self) -> None:
        if len(self.channels) < 1:
            raise ValueError("a reference signal needs at least one channel")
        object.__setattr__(self, "channels", tuple(self.channels))

    @property
    def r(self) -> int:
        return len(self.channels)


@dataclass(frozen=True)
class SignalBounds:
    varphi: float
    dot_varphi: float

    def __post_init__(self) -> None:
        for name in ("varphi", "dot_varphi"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and nonnegative, got {v}")


def evaluate(signal: ReferenceSignal, t) -> np.ndarray:
    """Signal value; shape ``(r,)`` for scalar ``t``, ``t.shape + (r,)`` otherwise."""
    if np.ndim(t) == 0:
        return np.array([c.at(float(t)) for c in signal.channels])
    shape = np.shape(t)
    return np.stack([np.broadcast_to(c.value(t), shape) for c in signal.channels], axis=-1)


def derivative(signal: ReferenceSignal, t) -> np.ndarray:
    """Exact time derivative, shaped like :func:`evaluate`."""
    if np.ndim(t) == 0:
        return np.array([c.rate_at(float(t)) for c in signal.channels])
    shape = np.shape(t)
    return np.stack([np.broadcast_to(c.rate(t), shape) for c in signal.channels], axis=-1)


def evaluate_all(signals: Sequence[ReferenceSignal], t: float) -> np.ndarray:
    """Stacked values of every agent's signal, shape ``(n, r)``."""
    t = float(t)
    return np.array([[c.at(t) for c in s.channels] for s in signals])


def derivative_all(signals: Sequence[ReferenceSignal], t: float) -> np.ndarray:
    t = float(t)
    return np.array([[c.rate_at(t) for c in s.channels] for s in signals])


def network_average(signals: Sequence[ReferenceSignal], t: float, members: Iterable[int]) -> np.ndarray:
    """Mean signal over ``members``.

    Raises:
        ValueError: if ``members`` is empty.
    """
    members = list(members)
    if not members:
        raise ValueError("network average over an empty member set")
    return np.mean([evaluate(signals[i], t) for i in members], axis=0)


def _grid(horizon: float, grid_step: float) -> np.ndarray:
    # k/num is correctly rounded, so a grid refined by an integer factor
    # reproduces every coarse point bit for bit.
    num = max(1, math.ceil(horizon / grid_step - 1e-9))
    return horizon * (np.arange(num + 1) / num)


def estimate_edge_bounds(
    signals: Sequence[ReferenceSignal],
    topology: Topology,
    horizon: float,
    grid_step: float,
) -> SignalBounds:
    """Sampled supremum of neighbor signal differences, padded by 10%.

    Takes the max over a uniform grid on ``[0, horizon]`` and over current
    links of ``||phi_i - phi_j||_inf``, and the same for the derivatives.
    """
    if grid_step <= 0 or horizon <= 0:
        raise ValueError("horizon and grid_step must be positive")
    if not topology.edges:
        return SignalBounds(0.0, 0.0)
    t = _grid(horizon, grid_step)
    values = np.stack([evaluate(s, t) for s in signals])  # (n, T, r)
    rates = np.stack([derivative(s, t) for s in signals])
    lo, hi = topology.edge_index
    varphi = float(np.abs(values[lo] - values[hi]).max())
    dot_varphi = float(np.abs(rates[lo] - rates[hi]).max())
    return SignalBounds(SAFETY_FACTOR * varphi, SAFETY_FACTOR * dot_varphi)


def benchmark_signals(n: int = 10) -> list[ReferenceSignal]:
    """The benchmark sinusoids: sine for the first half of the agents, cosine for the rest.

    Agent ``i`` (1-based) has amplitude ``(i - 1)/2 - 7``, angular frequency
    ``(i + 1)/4`` and phase ``2*pi*i/n - pi``.
    """
    out = []
    for i in range(1, n + 1):
        kind = "sin" if i <= n // 2 else "cos"
        out.append(
            ReferenceSignal(
                (Sinusoid(kind, (i - 1) / 2 - 7, (i + 1) / 4, 2 * math.pi * i / n - math.pi),)
            )
        )
    return out
