"""Robust dynamic average consensus over undirected networks.

Continuous-communication and dynamic event-triggered estimators, a
scenario-driven simulation harness, and CSV/JSON/figure exports.
"""

from .graph import Topology, TopologyEvent
from .harness import RunResult, export, run
from .scenario import Scenario, ScenarioError, benchmark_scenario, load_scenario

__all__ = [
    "RunResult",
    "Scenario",
    "ScenarioError",
    "Topology",
    "TopologyEvent",
    "benchmark_scenario",
    "export",
    "load_scenario",
    "run",
]
__version__ = "0.1.0"
