"""Impulse-control problem datum and its reduction to a killed Markov decision process.

Between interventions the state follows a deterministic flow ``flow(x, t)``.  A
decision ``b = (theta, a)`` waits ``theta`` time units and then applies the
impulse ``a``, jumping to ``jump(flow(x, theta), a)``.  Discounting at rate
``alpha`` is realised as killing: the chain survives a decision with
probability ``exp(-alpha * theta)`` and otherwise moves to the costless
absorbing cemetery :data:`DELTA`.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np
from scipy import integrate

from .errors import ModelDomainError, NumericError, UsageError

# Absolute slack allowed (per unit of interval width) when checking that a
# callable stayed inside its interval.  Values are never clamped.
DOMAIN_SLACK = 1e-12
QUAD_TOL = 1e-10
TAIL_TOL = 1e-12


class Cemetery(enum.Enum):
    DELTA = "Δ"

    def __repr__(self):
        return "DELTA"


class Never(enum.Enum):
    """Waiting time of a decision that never intervenes again."""

    NEVER = "inf"

    def __repr__(self):
        return "NEVER"


DELTA = Cemetery.DELTA
NEVER = Never.NEVER


def parse_theta(value) -> float | Never:
    """Normalise a waiting time; accepts ``"inf"``, ``math.inf`` or :data:`NEVER`."""
    if value is NEVER:
        return NEVER
    if isinstance(value, str):
        if value.strip().lower() in ("inf", "+inf", "infinity", "never"):
            return NEVER
        value = float(value)
    value = float(value)
    if math.isnan(value):
        raise UsageError("waiting time theta is NaN")
    if math.isinf(value):
        if value < 0:
            raise UsageError("waiting time theta must be non-negative")
        return NEVER
    if value < 0:
        raise UsageError(f"waiting time theta must be non-negative, got {value}")
    return value


@dataclass(frozen=True)
class ImpulseAction:
    """Decision ``(theta, a)``: wait ``theta`` (possibly :data:`NEVER`), then apply ``a``."""

    theta: float | Never
    a: float

    def __post_init__(self):
        object.__setattr__(self, "theta", parse_theta(self.theta))
        a = float(self.a)
        if not math.isfinite(a):
            raise UsageError(f"impulse size must be finite, got {a}")
        object.__setattr__(self, "a", a)

    @property
    def never(self) -> bool:
        return self.theta is NEVER

    @property
    def theta_value(self) -> float:
        """Numeric waiting time, ``math.inf`` for :data:`NEVER`."""
        return math.inf if self.theta is NEVER else self.theta

    def survival(self, alpha: float) -> float:
        if self.theta is NEVER:
            return 0.0
        return math.exp(-alpha * self.theta)

    def __str__(self):
        theta = "inf" if self.theta is NEVER else repr(self.theta)
        return f"({theta}, {self.a!r})"


@dataclass(frozen=True)
class TransitionOutcome:
    survive_prob: float
    next_state: float | Cemetery
    kill_prob: float


@dataclass(frozen=True, eq=False)
class ImpulseModel:
    """Deterministic impulsively controlled system with ``J + 1`` discounted costs.

    ``gradual_costs[j](x)`` is the running cost rate and ``lump_costs[j](x, a)``
    the cost of applying impulse ``a`` at state ``x``; index 0 is the objective
    and indices ``1..J`` are constrained.

    Optional knowledge a factory can register:

    * ``gradual_bound`` -- ``sup_x max_j gradual_costs[j](x)``; required to
      truncate the infinite-horizon integral of a never-intervene decision.
    * ``kink_times(x)`` -- times along the flow from ``x`` where the integrand
      may be discontinuous; quadrature splits there and grids include them.
    * ``gradual_integral(j, x, theta)`` -- closed form of
      ``int_0^theta exp(-alpha t) gradual_costs[j](flow(x, t)) dt`` (``theta``
      may be ``inf``).  Used instead of quadrature when present.
    * ``vectorized`` -- all callables accept numpy arrays elementwise.
    * ``traversal_time`` -- time scale on which the flow crosses the state
      interval, used for default waiting-time grids.
    """

    state_lo: float
    state_hi: float
    action_lo: float
    action_hi: float
    alpha: float
    flow: Callable[[float, float], float]
    jump: Callable[[float, float], float]
    gradual_costs: Sequence[Callable[[float], float]]
    lump_costs: Sequence[Callable[[float, float], float]]
    gradual_bound: float | None = None
    kink_times: Callable[[float], Sequence[float]] | None = None
    gradual_integral: Callable[[int, float, float], float] | None = None
    vectorized: bool = False
    traversal_time: float | None = None
    params: Any = None
    name: str = "generic"
    lump_bound: float | None = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "gradual_costs", tuple(self.gradual_costs))
        object.__setattr__(self, "lump_costs", tuple(self.lump_costs))
        if not self.alpha > 0:
            raise UsageError(f"discount alpha must be positive, got {self.alpha}")
        if not self.state_lo <= self.state_hi:
            raise UsageError("empty state interval")
        if not self.action_lo <= self.action_hi:
            raise UsageError("empty action interval")
        if len(self.gradual_costs) == 0:
            raise UsageError("at least the objective cost (j = 0) is required")
        if len(self.gradual_costs) != len(self.lump_costs):
            raise UsageError(
                f"{len(self.gradual_costs)} gradual costs but "
                f"{len(self.lump_costs)} lump costs; both need J + 1 entries"
            )
        if self.gradual_bound is not None and self.gradual_bound < 0:
            raise UsageError("gradual_bound must be non-negative")

    @property
    def num_constraints(self) -> int:
        return len(self.gradual_costs) - 1

    @property
    def num_costs(self) -> int:
        return len(self.gradual_costs)

    @property
    def cost_bound(self) -> float | None:
        """The constant ``C``: bound on gradual rates plus bound on lump costs."""
        if self.gradual_bound is None or self.lump_bound is None:
            return None
        return self.gradual_bound + self.lump_bound

    def _slack(self, lo, hi):
        return DOMAIN_SLACK * max(1.0, hi - lo)

    def in_states(self, x) -> bool:
        s = self._slack(self.state_lo, self.state_hi)
        return self.state_lo - s <= x <= self.state_hi + s

    def in_actions(self, a) -> bool:
        s = self._slack(self.action_lo, self.action_hi)
        return self.action_lo - s <= a <= self.action_hi + s

    def require_state(self, x, what="state"):
        if x is DELTA:
            return
        if not self.in_states(x):
            raise UsageError(f"{what} {x!r} outside [{self.state_lo}, {self.state_hi}]")

    def require_action(self, b: ImpulseAction):
        if not self.in_actions(b.a):
            raise UsageError(
                f"impulse {b.a!r} outside [{self.action_lo}, {self.action_hi}]"
            )

    def kinks(self, x: float) -> list[float]:
        if self.kink_times is None:
            return []
        return sorted(float(t) for t in self.kink_times(x) if t >= 0 and math.isfinite(t))

    def default_horizon(self) -> float:
        """Waiting time beyond which discounting makes decisions look like ``NEVER``."""
        traversal = self.traversal_time if self.traversal_time is not None else 0.0
        return 10.0 / self.alpha + traversal

    def check(self, n_samples: int = 64, seed: int = 0) -> None:
        """Spot-check flow identity, semigroup law, jump range and cost signs.

        Raises :class:`ModelDomainError` naming the offending callable.
        """
        rng = np.random.default_rng(seed)
        horizon = self.default_horizon()
        xs = rng.uniform(self.state_lo, self.state_hi, n_samples)
        ss = rng.uniform(0.0, horizon / 2, n_samples)
        ts = rng.uniform(0.0, horizon / 2, n_samples)
        acts = rng.uniform(self.action_lo, self.action_hi, n_samples)
        for x, s, t, a in zip(xs, ss, ts, acts):
            x, s, t, a = float(x), float(s), float(t), float(a)
            x0 = self.flow(x, 0.0)
            if abs(x0 - x) > 1e-12 * max(1.0, abs(x)):
                raise ModelDomainError("flow", f"flow(x, 0) = {x0!r} != x = {x!r}")
            two_step = self.flow(self.flow(x, s), t)
            one_step = self.flow(x, s + t)
            if abs(two_step - one_step) > 1e-12 * max(1.0, abs(one_step)):
                raise ModelDomainError(
                    "flow",
                    f"semigroup law fails at x={x!r}, s={s!r}, t={t!r}: "
                    f"{two_step!r} vs {one_step!r}",
                )
            y = self.flow(x, s)
            if not self.in_states(y):
                raise ModelDomainError("flow", f"flow({x!r}, {s!r}) = {y!r} left the state space")
            z = self.jump(y, a)
            if not self.in_states(z):
                raise ModelDomainError("jump", f"jump({y!r}, {a!r}) = {z!r} left the state space")
            for j in range(self.num_costs):
                cg = self.gradual_costs[j](y)
                if not cg >= 0:
                    raise ModelDomainError(f"gradual_costs[{j}]", f"negative rate {cg!r} at {y!r}")
                ci = self.lump_costs[j](y, a)
                if not ci >= 0:
                    raise ModelDomainError(f"lump_costs[{j}]", f"negative cost {ci!r} at ({y!r}, {a!r})")


def _flow(model: ImpulseModel, x: float, t: float) -> float:
    y = model.flow(x, t)
    if not model.in_states(y):
        raise ModelDomainError("flow", f"flow({x!r}, {t!r}) = {y!r} outside the state space")
    return y


def _jump(model: ImpulseModel, y: float, a: float) -> float:
    z = model.jump(y, a)
    if not model.in_states(z):
        raise ModelDomainError("jump", f"jump({y!r}, {a!r}) = {z!r} outside the state space")
    return z


def advance(model: ImpulseModel, x, b: ImpulseAction):
    """Post-jump state ``jump(flow(x, theta), a)`` of an uninterrupted decision."""
    if x is DELTA:
        return DELTA
    if b.never:
        raise UsageError("no post-jump state exists after never-intervene (theta = inf)")
    model.require_state(x)
    return _jump(model, _flow(model, x, b.theta), b.a)


def transition(model: ImpulseModel, x, b: ImpulseAction) -> TransitionOutcome:
    """Transition kernel of the killed chain as an explicit two-point distribution."""
    if x is DELTA or b.never:
        return TransitionOutcome(0.0, DELTA, 1.0)
    survive = math.exp(-model.alpha * b.theta)
    return TransitionOutcome(survive, advance(model, x, b), 1.0 - survive)


def tail_horizon(model: ImpulseModel) -> float:
    """Truncation time ``T`` with ``exp(-alpha T) * bound / alpha <= TAIL_TOL``."""
    if model.gradual_bound is None:
        raise UsageError(
            "integrating to theta = inf by quadrature needs the model's gradual_bound"
        )
    if model.gradual_bound == 0:
        return 0.0
    return max(0.0, math.log(model.gradual_bound / (model.alpha * TAIL_TOL)) / model.alpha)


def quadrature_integral(model: ImpulseModel, j: int, x: float, theta: float, tol: float = QUAD_TOL) -> float:
    """``int_0^theta exp(-alpha t) C^g_j(flow(x, t)) dt`` by adaptive quadrature.

    The interval is split at the model's kink times; ``theta = inf`` is
    truncated at :func:`tail_horizon`.
    """
    upper = tail_horizon(model) if math.isinf(theta) else theta
    if upper <= 0:
        return 0.0
    rate = model.gradual_costs[j]
    alpha = model.alpha

    def integrand(t):
        return math.exp(-alpha * t) * rate(model.flow(x, t))

    cuts = [0.0] + [t for t in model.kinks(x) if 0.0 < t < upper] + [upper]
    total = 0.0
    budget = tol / (len(cuts) - 1)
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        if hi <= lo:
            continue
        value, err, *_ = integrate.quad(
            integrand, lo, hi, epsabs=budget, epsrel=0.0, limit=200, full_output=1
        )
        if err > budget:
            raise NumericError(
                f"quadrature of gradual cost {j} on [{lo}, {hi}] from x={x!r} "
                f"reached only {err:.3g} (requested {budget:.3g})",
                achieved=err,
            )
        total += value
    return total


def gradual_integral(model: ImpulseModel, j: int, x: float, theta: float, method: str = "auto") -> float:
    if method not in ("auto", "closed_form", "quadrature"):
        raise UsageError(f"unknown integration method {method!r}")
    if method == "closed_form" or (method == "auto" and model.gradual_integral is not None):
        if model.gradual_integral is None:
            raise UsageError(f"model {model.name!r} registers no closed-form cost")
        return float(model.gradual_integral(j, x, theta))
    return quadrature_integral(model, j, x, theta)


def one_step_cost(model: ImpulseModel, j: int, x, b: ImpulseAction, method: str = "auto") -> float:
    """Expected one-step cost ``C̄_j(x, b)`` of the killed chain.

    Gradual cost integrated over the wait plus the discounted lump cost of the
    impulse; the lump term vanishes for a never-intervene decision, and the
    cemetery costs nothing.
    """
    if not 0 <= j <= model.num_constraints:
        raise UsageError(f"cost index {j} outside 0..{model.num_constraints}")
    if x is DELTA:
        return 0.0
    model.require_state(x)
    cost = gradual_integral(model, j, x, b.theta_value, method)
    if not b.never:
        y = _flow(model, x, b.theta)
        cost += math.exp(-model.alpha * b.theta) * model.lump_costs[j](y, b.a)
    return cost


def one_step_costs(model: ImpulseModel, x, b: ImpulseAction, method: str = "auto") -> tuple[float, ...]:
    return tuple(one_step_cost(model, j, x, b, method) for j in range(model.num_costs))
