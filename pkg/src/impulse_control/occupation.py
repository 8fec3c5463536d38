"""Atomic occupation measures of deterministic stationary strategies."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError, UsageError
from .model import DELTA, ImpulseAction, ImpulseModel, advance, one_step_costs
from .rollout import CYCLE_TOL, DEFAULT_TOL, CostVector, StationaryStrategy, _no_progress

MATCH_TOL = 1e-12


@dataclass(frozen=True)
class Atom:
    x: float
    b: ImpulseAction
    w: float


@dataclass(frozen=True)
class AtomicOccupationMeasure:
    """Weighted state-action atoms.

    ``closed`` marks an exact geometric fold of a cycle into its atoms.
    ``truncated`` marks an orbit cut at the discount tolerance; ``residual``
    is then the discount factor carried by the first omitted decision.
    """

    atoms: tuple[Atom, ...]
    closed: bool = False
    truncated: bool = False
    residual: float = 0.0

    @property
    def mass(self) -> float:
        return math.fsum(a.w for a in self.atoms)

    def perturbed(self, index: int, dw: float) -> "AtomicOccupationMeasure":
        atoms = list(self.atoms)
        atom = atoms[index]
        atoms[index] = Atom(atom.x, atom.b, atom.w + dw)
        return AtomicOccupationMeasure(tuple(atoms), self.closed, self.truncated, self.residual)


def occupation_of(model: ImpulseModel, f: StationaryStrategy, x0, tol: float = DEFAULT_TOL,
                  max_steps: int = 1_000_000) -> AtomicOccupationMeasure:
    """One atom per decision epoch weighted by ``exp(-alpha t)``; cycles folded exactly."""
    if not tol > 0:
        raise UsageError("tol must be positive")
    if x0 is DELTA:
        return AtomicOccupationMeasure(())
    model.require_state(x0, "initial state")
    states: list[float] = []
    actions: list[ImpulseAction] = []
    weights: list[float] = []
    x, prefix = float(x0), 1.0
    for _ in range(max_steps):
        b = f(x)
        model.require_action(b)
        states.append(x)
        actions.append(b)
        weights.append(prefix)
        if b.never:
            break
        nxt = advance(model, x, b)
        _no_progress(model, x, b, nxt)
        prefix *= math.exp(-model.alpha * b.theta)
        start = next((i for i, s in enumerate(states) if abs(s - nxt) <= CYCLE_TOL), None)
        if start is not None:
            ratio = prefix / weights[start]
            if ratio >= 1.0 - 1e-15:
                raise DivergenceError(
                    f"strategy loops without discounting: zero-time cycle through {nxt!r}"
                )
            for i in range(start, len(weights)):
                weights[i] /= 1.0 - ratio
            return _measure(states, actions, weights, closed=True)
        if prefix < tol:
            return _measure(states, actions, weights, truncated=True, residual=prefix)
        x = nxt
    else:
        raise DivergenceError(f"no cycle or termination within {max_steps} decisions")
    return _measure(states, actions, weights)


def _measure(states, actions, weights, **flags):
    atoms = tuple(Atom(x, b, w) for x, b, w in zip(states, actions, weights))
    return AtomicOccupationMeasure(atoms, **flags)


def _merge(points: list[tuple[float, float]]) -> list[tuple[float, float]]:
    """Sum weights of points closer than ``MATCH_TOL``."""
    out: list[list[float]] = []
    for x, w in sorted(points):
        if out and x - out[-1][0] <= MATCH_TOL:
            out[-1][1] += w
        else:
            out.append([x, w])
    return [(x, w) for x, w in out]


def characteristic_residual(model: ImpulseModel, mu: AtomicOccupationMeasure, x0) -> float:
    """Total variation between ``mu(. x B)`` and ``delta_x0 + mu Q`` on the state space."""
    lhs = [(a.x, a.w) for a in mu.atoms]
    rhs = [] if x0 is DELTA else [(float(x0), 1.0)]
    for a in mu.atoms:
        if not a.b.never:
            rhs.append((float(advance(model, a.x, a.b)), a.w * a.b.survival(model.alpha)))
    signed = _merge([(x, w) for x, w in lhs] + [(x, 0.0) for x, _ in rhs])
    keys = [x for x, _ in signed]
    balance = np.array([w for _, w in signed])
    for x, w in rhs:
        i = int(np.argmin(np.abs(np.asarray(keys) - x)))
        balance[i] -= w
    return float(np.sum(np.abs(balance)))


def cost_integrals(model: ImpulseModel, mu: AtomicOccupationMeasure) -> CostVector:
    """``sum_atoms w C̄_j(x, b)`` for every cost index."""
    totals = np.zeros(model.num_costs)
    for a in mu.atoms:
        totals += a.w * np.asarray(one_step_costs(model, a.x, a.b))
    return CostVector(tuple(totals), closed=mu.closed)
