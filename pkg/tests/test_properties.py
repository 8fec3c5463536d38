import math

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from impulse_control import (
    ImpulseAction,
    InventoryParams,
    StationaryStrategy,
    bellman_closed_form,
    evaluate,
    inventory_model,
    one_step_cost,
)
from impulse_control.inventory import (
    Regime,
    critical_d,
    critical_g,
    g_from_a,
    solve_a_g,
    solve_constrained,
    strategy_of,
)
from impulse_control.occupation import characteristic_residual, cost_integrals, occupation_of

FAST = settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])

pos = st.floats(0.2, 5.0)


@st.composite
def ordering_params(draw):
    D, H, alpha = draw(pos), draw(pos), draw(st.floats(0.1, 3.0))
    K = draw(st.floats(0.01, 0.95)) * D / alpha
    return InventoryParams(D=D, K=K, H=H, alpha=alpha, L=1e6)


P0 = InventoryParams(D=1.0, K=0.5, H=1.0, alpha=1.0, L=10.0)
M0 = inventory_model(P0)


@FAST
@given(st.floats(-3.0, 3.0))
def test_inverse_pair(log_g):
    g = 10.0 ** log_g
    assert g_from_a(P0, solve_a_g(P0, g)) == pytest.approx(g, rel=1e-9)


@FAST
@given(ordering_params(), st.floats(-2.0, 2.0), st.floats(1.01, 3.0))
def test_order_size_monotone(p, log_g, factor):
    g1 = 10.0 ** log_g
    g2 = g1 * factor
    a1, a2 = solve_a_g(p, g1), solve_a_g(p, g2)
    assert a2 < a1
    assert g2 * a2 > g1 * a1


@FAST
@given(ordering_params())
def test_critical_level_positive(p):
    g_c, a_c = critical_g(p)
    assert g_c > 0 and a_c > 0
    assert p.alpha * p.K + p.H * g_c * a_c == pytest.approx(p.D, rel=1e-9)
    assert critical_d(p) > 0


@FAST
@given(st.floats(0, 10), st.floats(0, 20), st.floats(0, 10), st.integers(0, 1))
def test_one_step_cost_nonnegative(x, theta, a, j):
    b = ImpulseAction(theta, min(a, 10.0))
    assert one_step_cost(M0, j, x, b) >= 0.0


@FAST
@given(st.floats(0, 10), st.floats(0, 5), st.floats(0, 5))
def test_flow_semigroup(x, s, t):
    lhs = M0.flow(M0.flow(x, s), t)
    assert lhs == pytest.approx(M0.flow(x, s + t), abs=1e-12)


@FAST
@given(ordering_params(), st.floats(0.02, 0.98))
def test_delayed_regime_is_tight(p, frac):
    d = frac * critical_d(p)
    q = InventoryParams(D=p.D, K=p.K, H=p.H, alpha=p.alpha, L=p.L, d=d)
    sol = solve_constrained(q)
    assert sol.regime is Regime.DELAYED_ORDER
    assert sol.tau_star >= 0.0
    v = evaluate(inventory_model(q), strategy_of(sol), 0.0)
    assert v.v1 == pytest.approx(d, rel=1e-7, abs=1e-10)
    assert v.v0 == pytest.approx(sol.v0, rel=1e-7, abs=1e-10)


@FAST
@given(ordering_params(), st.floats(1.05, 4.0))
def test_immediate_regime_is_tight(p, factor):
    d = factor * critical_d(p)
    q = InventoryParams(D=p.D, K=p.K, H=p.H, alpha=p.alpha, L=p.L, d=d)
    sol = solve_constrained(q)
    assert sol.regime is Regime.IMMEDIATE_ORDER
    assert sol.tau_star == 0.0
    v = evaluate(inventory_model(q), strategy_of(sol), 0.0)
    assert v.v1 == pytest.approx(d, rel=1e-7)


@FAST
@given(st.floats(0.0, 2.0), st.floats(0.1, 6.0), st.floats(0.0, 4.0))
def test_occupation_matches_rollout(extra_wait, order, x0):
    f = StationaryStrategy(lambda x: ImpulseAction(x / P0.D + extra_wait, order), "wait and order")
    direct = evaluate(M0, f, x0)
    mu = occupation_of(M0, f, x0)
    assert characteristic_residual(M0, mu, x0) <= 1e-9
    for a, b in zip(cost_integrals(M0, mu), direct):
        assert a == pytest.approx(b, abs=1e-9)


@FAST
@given(st.floats(0.0, 3.0), st.floats(0.0, 3.0))
def test_never_strategy_costs(x0, order):
    f = StationaryStrategy(lambda x: ImpulseAction(math.inf, order), "never")
    v = evaluate(M0, f, x0)
    assert v.v0 == pytest.approx(math.exp(-x0), abs=1e-12)
    assert v.v1 == pytest.approx(x0 - 1 + math.exp(-x0), abs=1e-12)


@FAST
@given(ordering_params(), st.floats(0.05, 3.0))
def test_weighted_values_nonnegative(p, g):
    xs = np.linspace(0.0, 3.0, 7)
    assert np.all(bellman_closed_form(p, g, xs) >= -1e-12)
