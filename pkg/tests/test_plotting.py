import sys

from robustdac.harness import run
from robustdac.plotting import render_figures
from robustdac.scenario import benchmark_scenario


def test_figures_written(tmp_path):
    res = run(benchmark_scenario().with_overrides(duration=0.05), "event")
    paths = render_figures(res, tmp_path)
    assert [p.name for p in paths] == ["signals.png", "estimates.png", "errors.png", "triggers.png"]
    for p in paths:
        assert p.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_continuous_has_no_trigger_figure(tmp_path):
    res = run(benchmark_scenario().with_overrides(duration=0.05), "continuous")
    assert not any(p.name == "triggers.png" for p in render_figures(res, tmp_path))


def test_empty_run_writes_nothing(tmp_path):
    res = run(benchmark_scenario().with_overrides(duration=0.0), "event")
    assert render_figures(res, tmp_path / "empty") == []


def test_no_pyplot_state():
    assert "matplotlib.pyplot" not in sys.modules
