"""Lagrangian relaxation of the constrained problem and its one-dimensional dual."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InfeasibleError, UnsupportedError, UsageError
from .grid import GridSpec, greedy_strategy, value_iteration
from .inventory import InventoryParams, bellman_closed_form, solve_constrained, strategy_of
from .model import ImpulseModel
from .rollout import CostVector, StationaryStrategy, evaluate

ENGINES = ("closed_form", "grid")
CERT_TOL = {"closed_form": 1e-5, "grid": 5e-3}
INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def lagrangian_value(costs, g, d) -> float:
    """``V_0 + sum_j g_j (V_j - d_j)``."""
    values = np.asarray(tuple(costs), dtype=float)
    gs = np.atleast_1d(np.asarray(g, dtype=float))
    ds = np.atleast_1d(np.asarray(d, dtype=float))
    if not (gs.size == ds.size == values.size - 1):
        raise UsageError(
            f"need {values.size - 1} multipliers and levels, got {gs.size} and {ds.size}"
        )
    if np.any(gs < 0):
        raise UsageError("multipliers must be non-negative")
    return float(values[0] + np.dot(gs, values[1:] - ds))


def _inventory(model: ImpulseModel) -> InventoryParams:
    if not isinstance(model.params, InventoryParams):
        raise UnsupportedError(
            f"the closed_form engine needs the inventory model, not {model.name!r}"
        )
    return model.params


def _check_engine(engine):
    if engine not in ENGINES:
        raise UsageError(f"unknown engine {engine!r}; choose from {', '.join(ENGINES)}")


def bellman_value(model: ImpulseModel, g: float, engine: str, x0: float = 0.0,
                  grid: GridSpec | None = None) -> float:
    """``W*_g(x0)`` from the chosen engine."""
    _check_engine(engine)
    if engine == "closed_form":
        return float(bellman_closed_form(_inventory(model), g, x0))
    return value_iteration(model, g, grid).at(x0)


def dual_functional(model: ImpulseModel, g: float, d: float, engine: str = "closed_form",
                    x0: float = 0.0, grid: GridSpec | None = None) -> float:
    """``h(g) = W*_g(x0) - g d`` for a single constraint."""
    if model.num_constraints != 1:
        raise UnsupportedError("the dual functional is implemented for one constraint")
    if not g >= 0:
        raise UsageError(f"multiplier must be non-negative, got {g}")
    return bellman_value(model, g, engine, x0, grid) - g * d


@dataclass(frozen=True)
class DualReport:
    g_star: float
    h_star: float
    primal_costs: CostVector
    slackness: float
    gap: float
    feasible: bool
    d: float
    engine: str
    cert_tol: float
    strategy: StationaryStrategy | None = field(default=None, compare=False)
    analytic_g: float | None = None
    regime: str | None = None
    evaluations: int = 0


def golden_section_max(h, lo: float, hi: float, xtol: float):
    """Maximiser of a unimodal ``h`` on ``[lo, hi]``; returns ``(x, h(x), evaluations)``."""
    a, b = lo, hi
    c = b - INV_PHI * (b - a)
    e = a + INV_PHI * (b - a)
    hc, he = h(c), h(e)
    n = 2
    while b - a > xtol:
        # Ties move right so flat tops resolve towards the larger multiplier.
        if hc > he:
            b, e, he = e, c, hc
            c = b - INV_PHI * (b - a)
            hc = h(c)
        else:
            a, c, hc = c, e, he
            e = a + INV_PHI * (b - a)
            he = h(e)
        n += 1
    x = 0.5 * (a + b)
    return x, h(x), n + 1


def maximize_dual(model: ImpulseModel, d: float, tol: float = 1e-10, engine: str = "closed_form",
                  x0: float = 0.0, grid: GridSpec | None = None, cert_tol: float | None = None,
                  g_cap: float = 1e12) -> DualReport:
    """Maximise the concave dual ``h`` over ``g >= 0`` and certify the result.

    The bracket starts at ``[0, 2]`` and doubles while ``h`` still increases at
    its right end; golden-section search then locates the maximiser.  The
    primal side comes from the inventory closed form or the greedy strategy of
    the grid engine, evaluated by rollout.
    """
    _check_engine(engine)
    if model.num_constraints != 1:
        raise UnsupportedError("dual maximisation is implemented for a single constraint")
    if d < 0:
        raise InfeasibleError(f"constraint level must be non-negative, got {d}")
    if not tol > 0:
        raise UsageError("tol must be positive")
    if cert_tol is None:
        cert_tol = CERT_TOL[engine]
    if engine == "closed_form":
        p = dataclasses.replace(_inventory(model), d=d)
        if x0 != 0.0:
            raise UnsupportedError("the closed-form certificate assumes the initial state 0")
    memo: dict[float, float] = {}

    def h(g):
        if g not in memo:
            memo[g] = dual_functional(model, g, d, engine, x0, grid)
        return memo[g]

    hi = 1.0
    while h(2 * hi) > h(hi):
        hi *= 2
        if hi > g_cap:
            raise InfeasibleError("dual functional increases without bound; the constraint cannot be met")
    lo = hi / 2 if hi > 1 else 0.0
    g_star, h_star, _ = golden_section_max(h, lo, 2 * hi, tol)
    try:
        h0 = h(0.0)
    except UnsupportedError:
        h0 = -math.inf
    if h0 >= h_star:
        g_star, h_star = 0.0, h0

    analytic = regime = None
    if engine == "closed_form":
        sol = solve_constrained(p)
        strategy = strategy_of(sol)
        regime = sol.regime.value
        analytic = sol.g_star if not p.never_orders else 0.0
    else:
        table = value_iteration(model, g_star, grid)
        strategy = greedy_strategy(model, g_star, table, progressive=True)
    costs = evaluate(model, strategy, x0)
    v1 = costs.values[1]
    return DualReport(
        g_star=g_star,
        h_star=h_star,
        primal_costs=costs,
        slackness=g_star * (v1 - d),
        gap=costs.values[0] - h_star,
        feasible=v1 <= d + cert_tol,
        d=d,
        engine=engine,
        cert_tol=cert_tol,
        strategy=strategy,
        analytic_g=analytic,
        regime=regime,
        evaluations=len(memo),
    )


def verify_certificate(report: DualReport, tol: float | None = None) -> tuple[bool, list[str]]:
    """Check feasibility, zero gap and complementary slackness of a report."""
    tol = report.cert_tol if tol is None else tol
    gs = np.atleast_1d(np.asarray(report.g_star, dtype=float))
    ds = np.atleast_1d(np.asarray(report.d, dtype=float))
    vs = np.asarray(report.primal_costs.values[1:], dtype=float)
    violations = []
    for j, (v, dj) in enumerate(zip(vs, ds), start=1):
        if v > dj + tol:
            violations.append(f"(i) constraint {j} violated: V_{j} = {v:.12g} > d = {dj:.12g}")
    if abs(report.gap) > tol:
        violations.append(f"(ii) duality gap {report.gap:.3g} exceeds {tol:.3g}")
    slack = gs * (vs - ds)
    for j, s in enumerate(slack, start=1):
        if abs(s) > tol:
            violations.append(f"(iii) complementary slackness {j}: g (V - d) = {s:.3g}")
    return not violations, violations


def dual_scan(model: ImpulseModel, gs: Sequence[float], d: float, engine: str = "closed_form",
              x0: float = 0.0, grid: GridSpec | None = None) -> list[tuple[float, float]]:
    return [(float(g), dual_functional(model, g, d, engine, x0, grid)) for g in gs]
