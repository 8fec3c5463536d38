import math

import pytest
from conftest import REF

from impulse_control import (
    DELTA,
    NEVER,
    ImpulseAction,
    StationaryStrategy,
    characteristic_residual,
    cost_integrals,
    evaluate,
    occupation_of,
)
from impulse_control.occupation import AtomicOccupationMeasure


def test_never_single_atom(m0):
    mu = occupation_of(m0, StationaryStrategy(lambda x: ImpulseAction(NEVER, 0.0)), 0.0)
    assert len(mu.atoms) == 1
    (atom,) = mu.atoms
    assert atom.x == 0.0 and atom.b.never and atom.w == 1.0
    assert cost_integrals(m0, mu).values == pytest.approx((1.0, 0.0), abs=1e-15)


def test_cycle_atoms(m0):
    mu = occupation_of(m0, StationaryStrategy(lambda x: ImpulseAction(x, 1.0)), 0.0)
    assert mu.closed
    first, cyc = mu.atoms
    assert (first.x, first.b.theta, first.w) == (0.0, 0.0, 1.0)
    assert cyc.x == 1.0 and cyc.b.theta == 1.0
    assert cyc.w == pytest.approx(1.0 / (1.0 - math.exp(-1.0)), abs=1e-15)
    assert cost_integrals(m0, mu).values == pytest.approx(REF["cycle_v"], abs=1e-14)
    assert characteristic_residual(m0, mu, 0.0) <= 1e-12


def test_cemetery_start_is_empty(m0):
    f = StationaryStrategy(lambda x: ImpulseAction(x, 1.0))
    mu = occupation_of(m0, f, DELTA)
    assert mu.atoms == ()
    assert cost_integrals(m0, mu).values == (0.0, 0.0)
    assert characteristic_residual(m0, mu, DELTA) == 0.0


def test_empty_measure_misses_initial_mass(m0):
    assert characteristic_residual(m0, AtomicOccupationMeasure(()), 0.0) == 1.0


def test_perturbation_detected(m0):
    mu = occupation_of(m0, StationaryStrategy(lambda x: ImpulseAction(x + 0.2, 1.5)), 0.0)
    assert characteristic_residual(m0, mu.perturbed(0, 0.1), 0.0) >= 0.05


def logistic(x):
    # wait until empty, then refill along a chaotic logistic orbit that never repeats
    r = x / 10.0
    return ImpulseAction(x, 39.0 * r * (1.0 - r))


def test_truncated_orbit_flagged(m0):
    f = StationaryStrategy(logistic)
    mu = occupation_of(m0, f, 3.0, tol=1e-8)
    assert mu.truncated and 0 < mu.residual < 1e-8
    assert characteristic_residual(m0, mu, 3.0) <= 2 * mu.residual


@pytest.mark.parametrize("tau, a", [(0.0, 1.0), (0.3, 1.2), (2.0, 4.0), (0.0, 0.5)])
def test_matches_rollout(m0, tau, a):
    f = StationaryStrategy(lambda x: ImpulseAction(x + tau, a))
    mu = occupation_of(m0, f, 0.0)
    assert cost_integrals(m0, mu).values == pytest.approx(evaluate(m0, f, 0.0).values, abs=1e-12)
    assert characteristic_residual(m0, mu, 0.0) <= 1e-12
