import numpy as np
import pytest

from robustdac.graph import Topology
from robustdac.harness import run
from robustdac.scenario import benchmark_scenario


def random_connected(rng: np.random.Generator, n: int, p: float = 0.3) -> Topology:
    """Random spanning tree plus independent extra links."""
    order = rng.permutation(n)
    edges = set()
    for k in range(1, n):
        parent = order[rng.integers(0, k)]
        edges.add(tuple(sorted((int(order[k]), int(parent)))))
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < p:
                edges.add((i, j))
    return Topology(n, frozenset(edges))


def path(n: int) -> Topology:
    return Topology(n, frozenset((i, i + 1) for i in range(n - 1)))


@pytest.fixture(scope="session")
def benchmark_runs():
    """Continuous and event-triggered runs of the benchmark preset (seed 42)."""
    return run(benchmark_scenario(42), "both")


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
