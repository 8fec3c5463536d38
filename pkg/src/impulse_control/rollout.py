"""Evaluation of deterministic stationary strategies.

:func:`evaluate` sums the discounted one-step costs along the deterministic
orbit and closes cyclic orbits exactly with a geometric series.
:func:`evaluate_monte_carlo` simulates the killed chain instead, where the
discount is realised by random killing; the two must agree statistically.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DivergenceError, UsageError
from .model import DELTA, ImpulseAction, ImpulseModel, advance, one_step_costs

CYCLE_TOL = 1e-12
DEFAULT_TOL = 1e-10


@dataclass(frozen=True)
class StationaryStrategy:
    """A rule ``x -> (theta(x), a(x))`` applied at every decision epoch."""

    rule: Callable[[float], ImpulseAction]
    description: str = ""
    params: dict = field(default_factory=dict)

    def __call__(self, x) -> ImpulseAction:
        return self.rule(x)


@dataclass(frozen=True)
class CostVector:
    """Objective values ``(V_0, ..., V_J)``.

    ``error`` bounds the truncated tail (0 when the orbit terminated or was
    closed exactly); ``stderr`` is set for Monte Carlo estimates.
    """

    values: tuple[float, ...]
    error: float = 0.0
    stderr: tuple[float, ...] | None = None
    closed: bool = False

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        if any(v < -1e-12 * max(1.0, abs(v)) for v in values):
            raise UsageError(f"objective values must be non-negative, got {values}")
        object.__setattr__(self, "values", values)
        if self.stderr is not None:
            object.__setattr__(self, "stderr", tuple(float(s) for s in self.stderr))

    def __getitem__(self, j):
        return self.values[j]

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    @property
    def v0(self) -> float:
        return self.values[0]

    @property
    def v1(self) -> float:
        return self.values[1]


@dataclass(frozen=True)
class TrajectoryEvent:
    t: float
    kind: str  # "wait-start" or "impulse"
    x_before: float
    x_after: float
    order: float


class _StateIndex:
    """Sorted record of visited states, matched within ``CYCLE_TOL``."""

    def __init__(self):
        self._keys: list[float] = []
        self._data: list = []

    def find(self, x):
        i = bisect.bisect_left(self._keys, x - CYCLE_TOL)
        if i < len(self._keys) and abs(self._keys[i] - x) <= CYCLE_TOL:
            return self._data[i]
        return None

    def add(self, x, item):
        i = bisect.bisect_left(self._keys, x)
        self._keys.insert(i, x)
        self._data.insert(i, item)


def _no_progress(model, x, b, nxt):
    if b.theta == 0 and nxt is not DELTA and abs(nxt - x) <= CYCLE_TOL:
        raise DivergenceError(
            f"strategy loops without discounting: theta = 0 keeps the state at {x!r}"
        )


def _truncation_bound(model: ImpulseModel, tol: float) -> float:
    bound = model.cost_bound
    if bound is None:
        bound = model.gradual_bound
    if bound is None:
        return math.inf
    return tol * model.num_costs * bound / model.alpha


def evaluate(model: ImpulseModel, f: StationaryStrategy, x0, tol: float = DEFAULT_TOL,
             max_steps: int = 1_000_000) -> CostVector:
    """Discounted costs ``V_j(x0, f)`` of a deterministic stationary strategy."""
    if not tol > 0:
        raise UsageError("tol must be positive")
    n = model.num_costs
    if x0 is DELTA:
        return CostVector((0.0,) * n)
    model.require_state(x0, "initial state")
    sums = np.zeros(n)
    prefix = 1.0
    x = float(x0)
    seen = _StateIndex()
    seen.add(x, (prefix, sums.copy()))
    for _ in range(max_steps):
        b = f(x)
        model.require_action(b)
        sums += prefix * np.asarray(one_step_costs(model, x, b))
        if b.never:
            return CostVector(tuple(sums))
        nxt = advance(model, x, b)
        _no_progress(model, x, b, nxt)
        prefix *= math.exp(-model.alpha * b.theta)
        x = nxt
        hit = seen.find(x)
        if hit is not None:
            p_start, s_start = hit
            ratio = prefix / p_start
            if ratio >= 1.0 - 1e-15:
                raise DivergenceError(
                    f"strategy loops without discounting: zero-time cycle through {x!r}"
                )
            sums = sums + (sums - s_start) * ratio / (1.0 - ratio)
            return CostVector(tuple(sums), closed=True)
        if prefix < tol:
            return CostVector(tuple(sums), error=_truncation_bound(model, tol))
        seen.add(x, (prefix, sums.copy()))
    raise DivergenceError(f"no cycle or termination within {max_steps} decisions")


def path_rng(seed: int, path: int) -> np.random.Generator:
    """Independent stream for one Monte Carlo path, keyed by ``(seed, path)``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(path,))))


def evaluate_monte_carlo(model: ImpulseModel, f: StationaryStrategy, x0, n_paths: int,
                         seed: int, max_steps: int = 100_000) -> CostVector:
    """Sample-mean estimate of ``V_j(x0, f)`` by simulating the killed chain.

    Costs are added without the discount prefix: surviving a decision with
    probability ``exp(-alpha theta)`` realises the discount.
    """
    if n_paths < 1:
        raise UsageError("n_paths must be at least 1")
    n = model.num_costs
    if x0 is DELTA:
        return CostVector((0.0,) * n, stderr=(0.0,) * n)
    model.require_state(x0, "initial state")
    steps: dict[float, tuple] = {}

    def step(x):
        if x not in steps:
            b = f(x)
            model.require_action(b)
            costs = np.asarray(one_step_costs(model, x, b))
            if b.never:
                steps[x] = (costs, 0.0, DELTA)
            else:
                nxt = advance(model, x, b)
                _no_progress(model, x, b, nxt)
                steps[x] = (costs, math.exp(-model.alpha * b.theta), nxt)
        return steps[x]

    totals = np.zeros((n_paths, n))
    for path in range(n_paths):
        rng = path_rng(seed, path)
        x = float(x0)
        acc = np.zeros(n)
        for _ in range(max_steps):
            costs, survive, nxt = step(x)
            acc += costs
            if nxt is DELTA or rng.random() >= survive:
                break
            x = nxt
        else:
            raise DivergenceError(f"path {path} survived {max_steps} decisions")
        totals[path] = acc
    mean = totals.mean(axis=0)
    if n_paths > 1:
        stderr = totals.std(axis=0, ddof=1) / math.sqrt(n_paths)
    else:
        stderr = np.zeros(n)
    return CostVector(tuple(mean), stderr=tuple(stderr))


def trajectory(model: ImpulseModel, f: StationaryStrategy, x0, horizon: float,
               max_events: int = 1_000_000) -> list[TrajectoryEvent]:
    """Unkilled timeline of waits and impulses on ``[0, horizon]``."""
    if not horizon > 0:
        raise UsageError("horizon must be positive")
    model.require_state(x0, "initial state")
    events: list[TrajectoryEvent] = []
    t, x = 0.0, float(x0)
    same_time: set[float] = set()
    while len(events) < max_events:
        events.append(TrajectoryEvent(t, "wait-start", x, x, 0.0))
        b = f(x)
        model.require_action(b)
        if b.never or t + b.theta > horizon:
            return events
        y = model.flow(x, b.theta)
        z = advance(model, x, b)
        _no_progress(model, x, b, z)
        if b.theta == 0:
            if x in same_time:
                raise DivergenceError(
                    f"strategy loops without discounting: zero-time cycle through {x!r}"
                )
            same_time.add(x)
        else:
            same_time.clear()
        t += b.theta
        events.append(TrajectoryEvent(t, "impulse", float(y), float(z), b.a))
        x = float(z)
    raise DivergenceError(f"more than {max_events} events before the horizon")
