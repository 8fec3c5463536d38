import dataclasses
import math

import numpy as np
import pytest
from conftest import REF

from impulse_control import (
    CapacityError,
    InventoryParams,
    Regime,
    RegimeError,
    UnsupportedError,
    UsageError,
    a_star,
    bellman_closed_form,
    closed_form_v1,
    critical_d,
    critical_g,
    eoq_limit,
    g_from_a,
    min_capacity,
    solve_a_g,
    solve_constrained,
    strategy_of,
)
from impulse_control.inventory import (
    bellman_minimizer,
    dual_slope,
    eoq_gate,
    g_hat,
    regime_sign,
)


def with_d(p, d):
    return dataclasses.replace(p, d=d)


@pytest.mark.parametrize("g", [0.1, 0.3, 1.0, 10.0])
def test_solve_a_g_reference(p0, g):
    assert solve_a_g(p0, g) == pytest.approx(REF["a_g"][g], abs=1e-12)


def test_solve_a_g_root_equation(p0):
    # 0.3 e^a = 0.8 + 0.3 a
    a = solve_a_g(p0, 0.3)
    assert 0.3 * math.exp(a) == pytest.approx(0.8 + 0.3 * a, abs=1e-12)


@pytest.mark.parametrize("g", [0.1, 1.0, 10.0])
def test_inverse_pair(p0, g):
    assert g_from_a(p0, solve_a_g(p0, g)) == pytest.approx(g, rel=1e-9)


def test_g_from_a_limits_and_monotone(p0):
    assert g_from_a(p0, REF["a_g"][1.0]) == pytest.approx(1.0, abs=1e-12)
    assert g_from_a(p0, 1.0) > g_from_a(p0, 2.0)
    assert g_from_a(p0, 50.0) < 1e-20
    assert g_from_a(p0, 1e-6) > 1e11
    with pytest.raises(UsageError):
        g_from_a(p0, 0.0)


def test_critical_values(p0):
    g_c, a_c = critical_g(p0)
    assert g_c == pytest.approx(REF["g_c"], abs=1e-12)
    assert a_c == pytest.approx(REF["a_gc"], abs=1e-12)
    assert g_c * a_c == pytest.approx(0.5, abs=1e-12)
    assert critical_d(p0) == pytest.approx(REF["d_c"], abs=1e-12)


def test_critical_d_two_forms_agree(p0):
    _, a = critical_g(p0)
    e = math.exp(a)
    lhs = a * e / (e - 1) - 1.0
    rhs = a / (1 - math.exp(-a)) - 1.0
    assert lhs == pytest.approx(rhs, abs=1e-12)
    assert critical_d(p0) == pytest.approx(lhs, abs=1e-12)


def test_product_brackets_threshold(p0):
    assert 0.2 * solve_a_g(p0, 0.2) < 0.5 < 1.0 * solve_a_g(p0, 1.0)


def test_critical_g_regime_error():
    p = InventoryParams(D=1.0, K=1.0, H=1.0, alpha=1.0, L=10.0)
    with pytest.raises(RegimeError):
        critical_g(p)
    with pytest.raises(RegimeError):
        critical_d(p)


def test_a_star_reference(p0):
    for d in (1.0, 3.0):
        assert a_star(with_d(p0, d)) == pytest.approx(REF["a_star"][d], abs=1e-12)
        assert g_hat(with_d(p0, d)) == pytest.approx(REF["g_hat"][d], rel=1e-10)


def test_a_star_continuity_at_threshold(p0):
    a = a_star(with_d(p0, REF["d_c"] + 1e-6))
    assert a == pytest.approx(REF["a_gc"], abs=1e-3)


def test_a_star_rejects_delayed_branch(p0):
    with pytest.raises(RegimeError):
        a_star(with_d(p0, 0.5))


def test_bellman_closed_form_values(p0, p_never):
    assert bellman_closed_form(p0, 0.3, 0.0) == pytest.approx(REF["w0_g03"], abs=1e-12)
    assert bellman_closed_form(p0, 1.0, 0.0) == pytest.approx(1.0, abs=1e-14)
    assert bellman_closed_form(p_never, 0.0, 0.0) == pytest.approx(1.0, abs=1e-15)
    xs = np.linspace(0, 10, 7)
    assert np.allclose(bellman_closed_form(p_never, 0.0, xs), np.exp(-xs), atol=1e-15)


def test_bellman_forms_coincide_at_boundary(p0):
    g_c = REF["g_c"]
    xs = np.linspace(0.0, 5.0, 11)
    w = bellman_closed_form(p0, g_c, xs)
    a = REF["a_gc"]
    eqn3 = xs * g_c - g_c + g_c * np.exp(a - xs)
    eqn5 = xs * g_c - g_c + (g_c + 1.0) * np.exp(-xs)
    assert np.allclose(w, eqn3, atol=1e-11)
    assert np.allclose(w, eqn5, atol=1e-11)


def test_bellman_unsupported_at_zero(p0):
    with pytest.raises(UnsupportedError):
        bellman_closed_form(p0, 0.0, 1.0)


def test_bellman_capacity():
    p = InventoryParams(D=1.0, K=0.5, H=1.0, alpha=1.0, L=1.0)
    with pytest.raises(CapacityError):
        bellman_closed_form(p, 0.3, 0.0)


def test_regimes_and_minimizer(p0):
    assert regime_sign(p0, 0.3) < 0
    assert regime_sign(p0, 1.0) > 0
    assert regime_sign(p0, REF["g_c"]) == 0
    assert bellman_minimizer(p0, 1.0, 2.0).never
    b = bellman_minimizer(p0, 0.3, 2.0)
    assert b.theta == 2.0 and b.a == pytest.approx(REF["a_g"][0.3])


def test_solve_delayed(p0):
    s = solve_constrained(with_d(p0, 0.5))
    assert s.regime is Regime.DELAYED_ORDER
    assert s.g_star == pytest.approx(REF["g_c"], abs=1e-12)
    assert s.order_qty == pytest.approx(REF["a_gc"], abs=1e-12)
    assert s.tau_star == pytest.approx(REF["tau_half"], abs=1e-12)
    assert s.v1 == 0.5
    assert s.v0 == pytest.approx(1.0 - REF["g_c"] * 0.5, abs=1e-12)


def test_solve_immediate(p0):
    s = solve_constrained(with_d(p0, 1.0))
    assert s.regime is Regime.IMMEDIATE_ORDER
    assert s.order_qty == pytest.approx(REF["a_star"][1.0], abs=1e-12)
    assert s.g_star == pytest.approx(REF["g_hat"][1.0], rel=1e-10)
    assert s.v0 == pytest.approx(REF["v0_immediate"][1.0], abs=1e-12)
    assert s.tau_star == 0.0


@pytest.mark.parametrize("d", [0.0, 0.5, 5.0])
def test_solve_never(p_never, d):
    s = solve_constrained(with_d(p_never, d))
    assert s.regime is Regime.NEVER_ORDER
    assert (s.g_star, s.v0, s.v1) == (0.0, 1.0, 0.0)


def test_zero_budget_never_orders(p0):
    s = solve_constrained(with_d(p0, 0.0))
    assert s.regime is Regime.NEVER_ORDER and s.v1 == 0.0 and s.v0 == 1.0


def test_capacity_error(p0):
    p = InventoryParams(D=1.0, K=0.5, H=1.0, alpha=1.0, L=1.0, d=0.5)
    with pytest.raises(CapacityError) as err:
        solve_constrained(p)
    assert err.value.required == pytest.approx(REF["a_gc"], abs=1e-9)


def test_min_capacity(p0, p_never):
    assert min_capacity(with_d(p0, 0.5)) == pytest.approx(REF["a_gc"], abs=1e-12)
    assert min_capacity(with_d(p0, 1.0)) == pytest.approx(REF["a_star"][1.0], abs=1e-12)
    assert min_capacity(p_never) == 0.0


def test_strategy_of(p0, p_never):
    f = strategy_of(solve_constrained(with_d(p0, 0.5)))
    b = f(2.0)
    assert b.theta == pytest.approx(2.0 + REF["tau_half"], abs=1e-12)
    assert b.a == pytest.approx(REF["a_gc"], abs=1e-12)
    f = strategy_of(solve_constrained(with_d(p0, 1.0)))
    assert f(0.0).theta == 0.0
    assert strategy_of(solve_constrained(p_never))(3.0).never


def test_closed_form_v1(p0):
    assert closed_form_v1(p0, REF["tau_half"], REF["a_gc"]) == pytest.approx(0.5, abs=1e-10)
    assert closed_form_v1(p0, 0.0, REF["a_star"][1.0]) == pytest.approx(1.0, abs=1e-10)
    assert closed_form_v1(p0, 800.0, 1.0) == pytest.approx(0.0, abs=1e-300)
    assert closed_form_v1(p0, math.inf, 1.0) == 0.0


def test_eoq(p0):
    assert eoq_limit(p0, 1.0) == pytest.approx(1.0, abs=1e-15)
    assert eoq_limit(p0, 4 * 0.7) == pytest.approx(eoq_limit(p0, 0.7) / 2, rel=1e-15)
    assert not eoq_gate(p0, 1.0) and eoq_gate(p0, 0.4)
    slow = dataclasses.replace(p0, alpha=1e-3)
    assert solve_a_g(slow, 0.4) == pytest.approx(REF["eoq_a"], abs=1e-9)


def test_regime_boundary_continuity(p0):
    below = solve_constrained(with_d(p0, REF["d_c"] - 1e-9))
    above = solve_constrained(with_d(p0, REF["d_c"] + 1e-9))
    assert below.tau_star == pytest.approx(0.0, abs=1e-8)
    assert below.v0 == pytest.approx(above.v0, abs=1e-7)
    assert below.order_qty == pytest.approx(above.order_qty, abs=1e-4)
    assert below.g_star == pytest.approx(above.g_star, abs=1e-4)


def test_dual_slope_branches(p0):
    p = with_d(p0, 0.5)
    assert dual_slope(p, 1.0) == -0.5
    a = solve_a_g(p, 0.2)
    e = math.exp(a)
    assert dual_slope(p, 0.2) == pytest.approx(a * e / (e - 1) - 1 - 0.5, abs=1e-12)


def test_params_validation():
    with pytest.raises(ValueError):
        InventoryParams(D=0.0, K=1.0, H=1.0, alpha=1.0, L=1.0)
    with pytest.raises(ValueError):
        InventoryParams(D=1.0, K=1.0, H=1.0, alpha=1.0, L=1.0, d=-1.0)
