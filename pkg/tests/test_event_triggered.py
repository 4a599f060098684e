import math

import numpy as np
import pytest

from robustdac.estimator import EstimatorParams, initial_state, step
from robustdac.event_triggered import (
    ETParams,
    ETState,
    TriggerStats,
    advance,
    check_and_fire,
    compute_beta,
    control_term,
    eta_derivative,
    initial_et_state,
    parameter_violations,
    step_et,
    trigger_functional,
    trigger_statistics,
)
from robustdac.graph import Topology
from robustdac.signals import Constant, ReferenceSignal, SignalBounds, benchmark_signals
from robustdac.scenario import benchmark_scenario

from conftest import path, random_connected

TWO = Topology(2, frozenset({(0, 1)}))


def et_params(n, **kw):
    base = dict(gamma=1.0, alpha=3.0, delta=1.5, theta=0.9, beta=100.0, eta_init=1.0)
    base.update(kw)
    return ETParams(n=n, **base)


@pytest.mark.parametrize("eps,expected", [(1.0, 1.5), (-1.0, 2.5)])
def test_trigger_functional_by_hand(eps, expected):
    assert trigger_functional(np.array([eps]), np.array([0.5]), 2.0) == pytest.approx(expected)


def test_trigger_functional_vectorised():
    eps = np.array([[1.0], [-1.0]])
    w = np.array([[0.5], [0.5]])
    np.testing.assert_allclose(trigger_functional(eps, w, np.array([2.0, 2.0])), [1.5, 2.5])


def test_eta_derivative_by_hand():
    assert eta_derivative(1.0, np.array([1.0]), np.array([0.5]), 3.0, 1.5, 2.0) == pytest.approx(-5.25)


def test_control_term_two_nodes():
    params = et_params(2)
    state = initial_et_state(np.zeros(2), TWO, params)
    state = ETState(0.0, state.z, state.mu, np.array([[0.0], [2.0]]), state.eta, state.trigger_log)
    np.testing.assert_array_equal(control_term(state, TWO), [[-2.0], [2.0]])


def test_control_term_sums_to_zero():
    rng = np.random.default_rng(8)
    topo = random_connected(rng, 9)
    params = et_params(9)
    state = initial_et_state(np.zeros(9), topo, params)
    state = ETState(0.0, state.z, state.mu, rng.normal(size=(9, 1)), state.eta, state.trigger_log)
    assert abs(control_term(state, topo).sum()) < 1e-12


def _settled(params, topo, x):
    """State where every agent has already broadcast ``x``."""
    state = initial_et_state(np.zeros(topo.n), topo, params)
    log = tuple((0.0,) for _ in range(topo.n))
    return ETState(0.0, state.z, state.mu, x.copy(), state.eta, log)


def test_no_drift_no_fire():
    params = et_params(2)
    x = np.array([[1.0], [3.0]])
    state, fired = check_and_fire(_settled(params, TWO, x), x, params, TWO)
    assert not fired.any()


def test_fire_resets_measurement_error():
    # isolated agent, w = 0: theta * beta * |eps| = 0.9 * 2 * 1 = 1.8 >= eta = 1
    topo = Topology(1)
    params = et_params(1, beta=2.0)
    state = _settled(params, topo, np.array([[0.0]]))
    state, fired = check_and_fire(state, np.array([[1.0]]), params, topo)
    assert fired.tolist() == [True]
    np.testing.assert_array_equal(state.xhat, [[1.0]])


def test_all_agents_fire_at_start():
    params = et_params(3)
    state = initial_et_state(np.zeros(3), path(3), params, t0=0.5)
    state, fired = check_and_fire(state, np.ones((3, 1)), params, path(3))
    assert fired.all()
    assert state.trigger_log == ((0.5,), (0.5,), (0.5,))


def test_parameter_violations_messages():
    assert parameter_violations(3.0, 1.5, 0.9, 100.0, 1.0, 10.0, 1.0) == []
    msgs = parameter_violations(3.0, 1.5, np.array([0.9, 1.0]), 100.0, 1.0, 10.0, 1.0)
    assert msgs == ["theta must be in (0,1) (agent 2: 1.0)"]
    assert any("delta" in m for m in parameter_violations(3.0, 0.5, 0.9, 100.0, 1.0, 10.0, 1.0))
    assert any("kappa" in m for m in parameter_violations(3.0, 1.5, 0.9, 100.0, 1.0, 0.5, 1.0))
    with pytest.raises(ValueError, match="eta"):
        et_params(2, eta_init=0.0)


def test_compute_beta_two_nodes():
    # ||B (B^T B)^+||_inf = 1/2 for a single link
    assert compute_beta(SignalBounds(10.0, 20.0), TWO, 1.0) == pytest.approx(15.0, abs=1e-12)


def test_force_trigger_matches_continuous_estimator():
    topo = benchmark_scenario().topology
    sigs = benchmark_signals()
    z0 = np.random.default_rng(42).uniform(-1, 1, size=10)
    cont = initial_state(z0, topo, EstimatorParams(gamma=1.0, kappa_floor=10.0))
    params = et_params(10, kappa_floor=10.0, force_trigger=True)
    ev = initial_et_state(z0, topo, params)
    worst = 0.0
    for _ in range(5000):
        cont = step(cont, sigs, EstimatorParams(gamma=1.0, kappa_floor=10.0), topo, 1e-3)
        ev = step_et(ev, sigs, params, topo, 1e-3)
        worst = max(worst, np.abs(cont.z - ev.z).max(), np.abs(cont.mu.values - ev.mu.values).max())
    assert worst < 1e-12


def test_post_fire_compliance_and_positive_eta():
    topo = benchmark_scenario().topology
    sigs = benchmark_signals()
    params = et_params(10, kappa_floor=10.0)
    state = initial_et_state(np.random.default_rng(1).uniform(-1, 1, 10), topo, params)
    for _ in range(1000):
        state, info = advance(state, sigs, params, topo, 1e-3)
        assert np.all(params.theta * info.functional <= info.eta_before)
        assert np.all(state.eta > 0)


def test_isolated_agent_is_well_defined():
    topo = Topology(2)
    sigs = [ReferenceSignal((Constant(1.0),)), ReferenceSignal((Constant(-1.0),))]
    params = et_params(2)
    state = initial_et_state(np.array([1.0, -1.0]), topo, params)
    for _ in range(100):
        state, info = advance(state, sigs, params, topo, 1e-3)
        np.testing.assert_array_equal(info.w, 0.0)
    assert state.z[0, 0] == pytest.approx((1 - 1e-3) ** 100, rel=1e-12)


def test_trigger_statistics():
    stats = trigger_statistics([[0.0, 0.002, 0.005], [0.0]], 0.01, 1e-3)
    assert stats[0].count == 3
    assert stats[0].fraction == pytest.approx(0.3)
    assert stats[0].min_inter_event == pytest.approx(0.002)
    assert stats[1] == TriggerStats(1, pytest.approx(0.1), math.inf)
    every = trigger_statistics([[k * 1e-3 for k in range(10)]], 0.01, 1e-3)
    assert every[0].fraction == pytest.approx(1.0)
