import math

import numpy as np
import pytest
from conftest import REF

from impulse_control import (
    DELTA,
    NEVER,
    DivergenceError,
    ImpulseAction,
    StationaryStrategy,
    UsageError,
    evaluate,
    evaluate_monte_carlo,
    trajectory,
)
from impulse_control.model import advance, one_step_costs
from impulse_control.rollout import CostVector


def never(x):
    return ImpulseAction(NEVER, 0.0)


def empty_then_one(x):
    return ImpulseAction(x, 1.0)


def brute_force(model, f, x0, n):
    total, prefix, x = np.zeros(model.num_costs), 1.0, x0
    for _ in range(n):
        b = f(x)
        total += prefix * np.asarray(one_step_costs(model, x, b))
        if b.never:
            break
        prefix *= math.exp(-model.alpha * b.theta)
        x = advance(model, x, b)
    return total


def test_never_order_values(m0):
    v = evaluate(m0, StationaryStrategy(never), 0.0)
    assert v.values == pytest.approx((1.0, 0.0), abs=1e-15)
    assert v.error == 0.0


def test_cemetery_start(m0):
    assert evaluate(m0, StationaryStrategy(never), DELTA).values == (0.0, 0.0)
    mc = evaluate_monte_carlo(m0, StationaryStrategy(never), DELTA, 3, 0)
    assert mc.values == (0.0, 0.0)


def test_cycle_closure_reference(m0):
    v = evaluate(m0, StationaryStrategy(empty_then_one), 0.0)
    assert v.closed
    assert v.values == pytest.approx(REF["cycle_v"], abs=1e-14)


def test_closure_equals_long_partial_sum(m0):
    f = StationaryStrategy(lambda x: ImpulseAction(x + 0.3, 1.2))
    assert evaluate(m0, f, 0.0).values == pytest.approx(tuple(brute_force(m0, f, 0.0, 500)), abs=1e-10)


def logistic(x):
    # wait until empty, then refill along a chaotic logistic orbit that never repeats
    r = x / 10.0
    return ImpulseAction(x, 39.0 * r * (1.0 - r))


def test_truncation_bound_honoured(m0):
    f = StationaryStrategy(logistic)
    coarse = evaluate(m0, f, 3.0, tol=1e-6)
    fine = evaluate(m0, f, 3.0, tol=1e-7)
    assert not coarse.closed
    assert coarse.error > 0
    assert max(abs(a - b) for a, b in zip(coarse, fine)) <= coarse.error


def test_zero_time_loop_diverges(m0):
    with pytest.raises(DivergenceError, match="without discounting"):
        evaluate(m0, StationaryStrategy(lambda x: ImpulseAction(0.0, 0.0)), 5.0)
    # two states swapped at zero time through the capacity clamp
    with pytest.raises(DivergenceError):
        evaluate(m0, StationaryStrategy(lambda x: ImpulseAction(0.0, 10.0)), 10.0)


def test_monte_carlo_agrees_with_rollout(m0):
    f = StationaryStrategy(empty_then_one)
    mc = evaluate_monte_carlo(m0, f, 0.0, 100_000, seed=11)
    exact = evaluate(m0, f, 0.0)
    for m, e, s in zip(mc, exact, mc.stderr):
        assert abs(m - e) <= 4 * s


def test_monte_carlo_never_is_exact(m0):
    mc = evaluate_monte_carlo(m0, StationaryStrategy(never), 0.0, 50, seed=3)
    assert mc.values == pytest.approx((1.0, 0.0), abs=1e-15)
    assert mc.stderr == (0.0, 0.0)


def test_monte_carlo_reproducible(m0):
    f = StationaryStrategy(empty_then_one)
    a = evaluate_monte_carlo(m0, f, 0.0, 500, seed=5)
    b = evaluate_monte_carlo(m0, f, 0.0, 500, seed=5)
    c = evaluate_monte_carlo(m0, f, 0.0, 500, seed=6)
    assert a == b and a != c


def test_monte_carlo_rejects_no_paths(m0):
    with pytest.raises(UsageError):
        evaluate_monte_carlo(m0, StationaryStrategy(never), 0.0, 0, 0)


def test_trajectory_sawtooth(m0):
    f = StationaryStrategy(lambda x: ImpulseAction(x + 0.3, 1.2))
    ev = trajectory(m0, f, 0.0, 4.0)
    impulses = [e for e in ev if e.kind == "impulse"]
    assert [e.t for e in impulses] == pytest.approx([0.3, 1.8, 3.3])
    assert all(e.x_before == 0.0 and e.x_after == 1.2 and e.order == 1.2 for e in impulses)
    assert [e.t for e in ev] == sorted(e.t for e in ev)


def test_trajectory_short_horizon_and_never(m0):
    f = StationaryStrategy(lambda x: ImpulseAction(x + 0.3, 1.2))
    assert len(trajectory(m0, f, 0.0, 0.1)) == 1
    assert len(trajectory(m0, StationaryStrategy(never), 0.0, 100.0)) == 1
    with pytest.raises(UsageError):
        trajectory(m0, f, 0.0, 0.0)


def test_trajectory_zero_time_loop(m0):
    with pytest.raises(DivergenceError):
        trajectory(m0, StationaryStrategy(lambda x: ImpulseAction(0.0, 0.0)), 1.0, 5.0)


def test_cost_vector_rejects_negative():
    with pytest.raises(UsageError):
        CostVector((1.0, -0.5))
