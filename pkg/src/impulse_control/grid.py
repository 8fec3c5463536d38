"""Value iteration for the weighted Bellman function on a state grid.

The operator is split in two stages.  For a wait ``theta`` ending at
``y = flow(x, theta)`` the impulse part only depends on ``y``::

    M(y)   = min_a [ sum_j w_j lump_j(y, a) + W(jump(y, a)) ]
    T W(x) = min( G_inf(x), min_theta [ G(x, theta) + exp(-alpha theta) M(y) ] )

with ``G`` the weighted integral of the gradual costs.  Distinct ``y`` are
deduplicated, which for flows that move along the grid (the inventory model)
collapses the work to one row per state.  When there are too many of them
``M`` is evaluated on the state nodes instead and interpolated.  ``W`` at
off-grid states is linearly interpolated.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import integrate

from .errors import ConvergenceError, ModelDomainError, UsageError
from .model import NEVER, ImpulseAction, ImpulseModel, gradual_integral
from .rollout import StationaryStrategy

KEY_DECIMALS = 12
# Above this many (pre-jump state, action) pairs M lives on the state nodes.
EXACT_PAIR_LIMIT = 4_000_000


@dataclass(frozen=True)
class GridSpec:
    n_states: int = 401
    n_theta: int = 201
    n_actions: int = 101
    theta_max: float | None = None  # None: the model's default horizon

    def __post_init__(self):
        if self.n_states < 2 or self.n_theta < 2 or self.n_actions < 1:
            raise UsageError("grid needs n_states >= 2, n_theta >= 2, n_actions >= 1")
        if self.theta_max is not None and not self.theta_max > 0:
            raise UsageError("theta_max must be positive")

    def refined(self, factor: int = 2) -> "GridSpec":
        """Grid with ``factor`` times as many intervals in every dimension."""
        return GridSpec(
            (self.n_states - 1) * factor + 1,
            (self.n_theta - 1) * factor + 1,
            max(1, (self.n_actions - 1) * factor + 1),
            self.theta_max,
        )

    def horizon(self, model: ImpulseModel) -> float:
        return self.theta_max if self.theta_max is not None else model.default_horizon()


@dataclass(frozen=True, eq=False)
class ValueTable:
    grid: GridSpec
    xs: np.ndarray
    values: np.ndarray
    multiplier: tuple[float, ...]
    iterations: int
    residual: float

    def __call__(self, x):
        return np.interp(x, self.xs, self.values)

    def at(self, x: float) -> float:
        return float(np.interp(x, self.xs, self.values))


def _weights(model: ImpulseModel, g) -> np.ndarray:
    gs = np.atleast_1d(np.asarray(g, dtype=float)).ravel()
    if gs.size != model.num_constraints:
        raise UsageError(
            f"{gs.size} multiplier(s) given for {model.num_constraints} constraint(s)"
        )
    if np.any(gs < 0) or not np.all(np.isfinite(gs)):
        raise UsageError("multipliers must be finite and non-negative")
    return np.concatenate(([1.0], gs))


def _apply(model, fn, *args):
    if model.vectorized:
        return np.broadcast_to(np.asarray(fn(*args), dtype=float), np.broadcast(*args).shape)
    return np.vectorize(lambda *a: float(fn(*a)), otypes=[float])(*args)


def _check_range(model, values, name):
    slack = 1e-12 * max(1.0, model.state_hi - model.state_lo)
    bad = (values < model.state_lo - slack) | (values > model.state_hi + slack) | ~np.isfinite(values)
    if np.any(bad):
        v = values[bad].flat[0]
        raise ModelDomainError(name, f"produced {v!r} outside [{model.state_lo}, {model.state_hi}]")


def _gradual_table(model: ImpulseModel, j: int, xs, thetas):
    """``G_j(x_i, theta_ik)`` for rows of increasing waits, plus ``G_j(x_i, inf)``."""
    if model.gradual_integral is not None and model.vectorized:
        fin = np.asarray(model.gradual_integral(j, xs[:, None], thetas), dtype=float)
        inf = np.asarray(model.gradual_integral(j, xs, np.full(xs.shape, math.inf)), dtype=float)
        return np.broadcast_to(fin, thetas.shape).copy(), inf
    if model.gradual_integral is not None:
        fin = np.array([[float(model.gradual_integral(j, x, t)) for t in row]
                        for x, row in zip(xs, thetas)])
        inf = np.array([float(model.gradual_integral(j, x, math.inf)) for x in xs])
        return fin, inf
    # Cumulative quadrature over consecutive waits, split at the kinks.
    alpha, rate = model.alpha, model.gradual_costs[j]
    fin = np.empty(thetas.shape)
    inf = np.empty(xs.shape)
    for i, x in enumerate(xs):
        x = float(x)

        def f(t):
            return math.exp(-alpha * t) * rate(model.flow(x, t))

        kinks = model.kinks(x)
        acc, prev = 0.0, 0.0
        for k, t in enumerate(thetas[i]):
            if t > prev:
                cuts = [prev] + [s for s in kinks if prev < s < t] + [t]
                for lo, hi in zip(cuts[:-1], cuts[1:]):
                    acc += integrate.quad(f, lo, hi, epsabs=1e-11, epsrel=0.0, limit=200)[0]
                prev = t
            fin[i, k] = acc
        inf[i] = gradual_integral(model, j, x, math.inf)
    return fin, inf


@dataclass(frozen=True, eq=False)
class _Prepared:
    thetas: np.ndarray      # (n, m) waits per evaluation state, increasing along rows
    disc: np.ndarray        # exp(-alpha theta)
    y_lo: np.ndarray        # (n, m) interpolation of M at flow(x, theta)
    y_frac: np.ndarray
    ys: np.ndarray          # points where M is evaluated
    actions: np.ndarray
    lump: np.ndarray        # (J+1, n_y, n_a)
    z_lo: np.ndarray        # interpolation of W at jump(y, a)
    z_frac: np.ndarray
    gradual: np.ndarray     # (J+1, n, m)
    gradual_inf: np.ndarray  # (J+1, n)

    def m_point(self, i, k) -> int:
        """Index of the M point nearest to ``flow(x_i, theta_ik)``."""
        return int(self.y_lo[i, k] + (self.y_frac[i, k] > 0.5))

    def operator(self, w, values):
        """Apply the Bellman operator; returns ``(TW, Q, M_arg, Q_inf)``."""
        wz = values[self.z_lo] * (1.0 - self.z_frac) + values[np.minimum(self.z_lo + 1, values.size - 1)] * self.z_frac
        lump = np.tensordot(w, self.lump, axes=1) + wz
        m_arg = np.argmin(lump, axis=1)
        m = lump[np.arange(lump.shape[0]), m_arg]
        my = m[self.y_lo] * (1.0 - self.y_frac) + m[np.minimum(self.y_lo + 1, m.size - 1)] * self.y_frac
        q = np.tensordot(w, self.gradual, axes=1) + self.disc * my
        q_inf = w @ self.gradual_inf
        return np.minimum(q.min(axis=1), q_inf), q, m_arg, q_inf


def state_grid(model: ImpulseModel, n: int) -> np.ndarray:
    return np.linspace(model.state_lo, model.state_hi, n)


def _locate(nodes, z):
    z = np.clip(z, nodes[0], nodes[-1])
    lo = np.clip(np.searchsorted(nodes, z, side="right") - 1, 0, nodes.size - 2)
    return lo, (z - nodes[lo]) / (nodes[lo + 1] - nodes[lo])


def _prepare(model: ImpulseModel, grid: GridSpec, xs: np.ndarray, nodes: np.ndarray) -> _Prepared:
    xs = np.asarray(xs, dtype=float)
    base = np.linspace(0.0, grid.horizon(model), grid.n_theta)
    kinks = [model.kinks(float(x)) for x in xs]
    width = grid.n_theta + max((len(k) for k in kinks), default=0)
    thetas = np.empty((xs.size, width))
    for i, k in enumerate(kinks):
        row = np.concatenate((base, k, np.full(width - grid.n_theta - len(k), base[-1])))
        thetas[i] = np.sort(row)
    disc = np.exp(-model.alpha * thetas)

    y = _apply(model, model.flow, xs[:, None], thetas)
    _check_range(model, y, "flow")
    if grid.n_actions == 1:
        actions = np.array([model.action_lo])
    else:
        actions = np.linspace(model.action_lo, model.action_hi, grid.n_actions)
    ys, y_index = np.unique(np.round(y, KEY_DECIMALS), return_inverse=True)
    if ys.size * actions.size <= EXACT_PAIR_LIMIT:
        y_lo, y_frac = y_index.reshape(y.shape), np.zeros(y.shape)
    else:
        ys = nodes
        y_lo, y_frac = _locate(nodes, y)
    z = _apply(model, model.jump, ys[:, None], actions[None, :])
    _check_range(model, z, "jump")
    lo, frac = _locate(nodes, z)

    lump = np.stack([_apply(model, c, ys[:, None], actions[None, :]) for c in model.lump_costs])
    tables = [_gradual_table(model, j, xs, thetas) for j in range(model.num_costs)]
    gradual = np.stack([t[0] for t in tables])
    gradual_inf = np.stack([t[1] for t in tables])
    if np.any(lump < 0) or np.any(gradual < -1e-15):
        raise ModelDomainError("costs", "negative cost on the grid")
    return _Prepared(thetas, disc, y_lo, y_frac, ys, actions, lump, lo, frac, gradual, gradual_inf)


@functools.lru_cache(maxsize=16)
def _prepared_for(model: ImpulseModel, grid: GridSpec, probe: bool) -> tuple[np.ndarray, _Prepared]:
    nodes = state_grid(model, grid.n_states)
    xs = state_grid(model, 2 * grid.n_states - 1) if probe else nodes
    return xs, _prepare(model, grid, xs, nodes)


def value_iteration(model: ImpulseModel, g, grid: GridSpec | None = None, tol: float = 1e-9,
                    max_iter: int = 10_000) -> ValueTable:
    """Fixed point of the weighted Bellman operator, iterated from ``W = 0``."""
    grid = grid or GridSpec()
    if not tol > 0:
        raise UsageError("tol must be positive")
    w = _weights(model, g)
    xs, prep = _prepared_for(model, grid, False)
    values = np.zeros(xs.size)
    change = math.inf
    for it in range(1, max_iter + 1):
        new = prep.operator(w, values)[0]
        change = float(np.max(np.abs(new - values)))
        values = new
        if change < tol:
            return ValueTable(grid, xs, values, tuple(w[1:]), it, change)
    raise ConvergenceError(
        f"value iteration did not converge in {max_iter} sweeps (last change {change:.3g})",
        residual=change,
        iterations=max_iter,
    )


def bellman_residual(model: ImpulseModel, g, table: ValueTable, probe: bool = True) -> tuple[float, float]:
    """Most negative ``min_b [bracket] - W(x)`` and where it occurs.

    Evaluated on the doubled probe grid, or on the table nodes only with
    ``probe=False``.  At probe midpoints ``W`` is interpolated, so a convex
    ``W`` shows a violation of the order of the interpolation error.
    Returns ``(0.0, x)`` when the inequality holds everywhere.
    """
    w = _weights(model, g)
    probes, prep = _prepared_for(model, table.grid, probe)
    tw = prep.operator(w, table.values)[0]
    gap = tw - np.interp(probes, table.xs, table.values)
    i = int(np.argmin(gap))
    return min(0.0, float(gap[i])), float(probes[i])


def _argmin_action(model, w, table: ValueTable, x: float, progressive: bool) -> ImpulseAction:
    prep = _prepare(model, table.grid, np.array([x]), table.xs)
    _, q, m_arg, q_inf = prep.operator(w, table.values)
    q = q[0].copy()
    zero_wait = np.flatnonzero(prep.thetas[0] == 0.0)
    null_choice = None
    if progressive and zero_wait.size:
        # drop impulses that leave the state where it is: with no wait they loop forever
        z = _apply(model, model.jump, np.full(prep.actions.shape, x), prep.actions)
        cost = np.array([np.asarray(_apply(model, c, np.full(prep.actions.shape, x), prep.actions))
                         for c in model.lump_costs])
        bracket = w @ cost + np.interp(z, table.xs, table.values)
        bracket[np.abs(z - x) <= 1e-12] = math.inf
        i = int(np.argmin(bracket))
        null_choice = prep.actions[i]
        g0 = np.tensordot(w, prep.gradual[:, 0, zero_wait], axes=1)
        q[zero_wait] = g0 + bracket[i]
    k = int(np.argmin(q))
    if q_inf[0] < q[k] or not math.isfinite(q[k]):
        return ImpulseAction(NEVER, model.action_lo)
    if null_choice is not None and prep.thetas[0, k] == 0.0:
        return ImpulseAction(0.0, float(null_choice))
    a = prep.actions[m_arg[prep.m_point(0, k)]]
    return ImpulseAction(float(prep.thetas[0, k]), float(a))


def greedy_strategy(model: ImpulseModel, g, table: ValueTable, progressive: bool = False) -> StationaryStrategy:
    """Minimiser of the Bellman bracket over the grid; ties go to the smallest
    wait and then to the smallest impulse.

    With ``progressive=True`` decisions that neither wait nor move the state
    are excluded, so ties cannot produce a zero-time loop.
    """
    w = _weights(model, g)
    cache: dict[float, ImpulseAction] = {}

    def rule(x):
        x = float(x)
        if x not in cache:
            cache[x] = _argmin_action(model, w, table, x, progressive)
        return cache[x]

    return StationaryStrategy(rule, "greedy on value table", {"g": tuple(w[1:])})


def greedy_table(model: ImpulseModel, g, table: ValueTable) -> list[ImpulseAction]:
    """Greedy decision at every node of the table's state grid."""
    w = _weights(model, g)
    xs, prep = _prepared_for(model, table.grid, False)
    _, q, m_arg, q_inf = prep.operator(w, table.values)
    out = []
    for i in range(xs.size):
        k = int(np.argmin(q[i]))
        if q_inf[i] < q[i, k]:
            out.append(ImpulseAction(NEVER, model.action_lo))
        else:
            out.append(ImpulseAction(float(prep.thetas[i, k]), float(prep.actions[m_arg[prep.m_point(i, k)]])))
    return out


def max_error(table: ValueTable, exact, lo: float, hi: float) -> float:
    """Sup-norm distance to ``exact`` over the table nodes in ``[lo, hi]``."""
    mask = (table.xs >= lo - 1e-12) & (table.xs <= hi + 1e-12)
    xs = table.xs[mask]
    return float(np.max(np.abs(table.values[mask] - np.asarray(exact(xs), dtype=float))))


def sample_values(table: ValueTable, xs: Sequence[float]) -> np.ndarray:
    return np.interp(np.asarray(xs, dtype=float), table.xs, table.values)
