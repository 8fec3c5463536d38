"""Discounted inventory model with shortage cost, solved in closed form.

State: inventory level on ``[0, L]``, depleted at demand rate ``D``.
Objective (j = 0): setup cost ``K`` per order plus lost sales at rate ``D``
while the shelf is empty.  Constraint (j = 1): holding cost ``H`` per unit
per unit time, discounted total at most ``d``.  Start empty, ``x0 = 0``.

Every transcendental equation here has a monotone left-hand side, so each
root is bracketed, bisected to 1e-12 and polished with two Newton steps.
Exponentials appear as ``z = alpha * a / D``; the helpers ``_e1mz`` and
``_u`` keep the small-``z`` cancellations accurate, which matters for the
EOQ limit ``alpha -> 0``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, RegimeError, UnsupportedError, UsageError
from .model import NEVER, ImpulseAction, ImpulseModel
from .rollout import StationaryStrategy

XTOL = 1e-12
BOUNDARY_TOL = 1e-12


@dataclass(frozen=True)
class InventoryParams:
    D: float
    K: float
    H: float
    alpha: float
    L: float
    d: float = 0.0

    def __post_init__(self):
        for name in ("D", "K", "H", "alpha", "L"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise UsageError(f"inventory parameter {name} must be positive, got {value!r}")
        if not (math.isfinite(self.d) and self.d >= 0):
            raise UsageError(f"constraint level d must be non-negative, got {self.d!r}")

    @property
    def never_orders(self) -> bool:
        """Setup cost too large to ever pay for itself (``alpha K >= D``)."""
        return self.alpha * self.K >= self.D


class Regime(str, enum.Enum):
    NEVER_ORDER = "never_order"
    DELAYED_ORDER = "delayed_order"
    IMMEDIATE_ORDER = "immediate_order"


@dataclass(frozen=True)
class InventorySolution:
    params: InventoryParams
    regime: Regime
    g_star: float
    order_qty: float
    tau_star: float
    v0: float
    v1: float
    g_c: float | None = None
    d_c: float | None = None


# -- numerics -----------------------------------------------------------------

def _e1mz(z):
    """``exp(z) - 1 - z`` without cancellation for small ``|z|``."""
    if abs(z) < 1e-2:
        return z * z * (0.5 + z * (1 / 6 + z * (1 / 24 + z * (1 / 120 + z / 720))))
    return math.expm1(z) - z


def _u(z):
    """``z e^z / (e^z - 1) - 1``, the shape of the dual slope; increasing, 0 at 0+."""
    if z == 0:
        return 0.0
    return _e1mz(-z) / -math.expm1(-z)


def _du(z):
    if z < 1e-6:
        return 0.5 - z / 6
    em = math.exp(-z)
    one = -math.expm1(-z)
    return (one - z * em) / (one * one)


def bisect_newton(f, fprime, lo, hi, xtol=XTOL, polish=2):
    """Root of an increasing ``f`` with ``f(lo) <= 0 <= f(hi)``."""
    flo, fhi = f(lo), f(hi)
    if flo > 0 or fhi < 0:
        raise RegimeError(f"root not bracketed by [{lo}, {hi}]: f = ({flo}, {fhi})")
    while hi - lo > max(xtol, 4 * np.finfo(float).eps * abs(hi)):
        mid = 0.5 * (lo + hi)
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
    x = 0.5 * (lo + hi)
    for _ in range(polish):
        slope = fprime(x)
        if not slope > 0:
            break
        step = x - f(x) / slope
        # a polish step may only refine, never leave the final bracket
        if not lo - xtol <= step <= hi + xtol:
            break
        x = step
    return x


def _grow_bracket(f, start):
    hi = start
    for _ in range(2000):
        if f(hi) > 0:
            return hi
        hi *= 2
    raise RegimeError("could not bracket root")


# -- root equations -------------------------------------------------------------

def solve_a_g(p: InventoryParams, g: float) -> float:
    """Order size ``a_g > 0`` optimal for the weighted cost ``V0 + g V1``.

    Unique positive root of
    ``alpha K / D + g H / alpha + g H a / D = (g H / alpha) exp(alpha a / D)``.
    """
    if not g > 0:
        raise UsageError(f"multiplier g must be positive, got {g!r}")
    D, K, H, al = p.D, p.K, p.H, p.alpha
    c = g * H / al

    def F(a):
        return c * _e1mz(al * a / D) - al * K / D

    def dF(a):
        return g * H / D * math.expm1(al * a / D)

    hi = _grow_bracket(F, D / al)
    return bisect_newton(F, dF, 0.0, hi)


def g_from_a(p: InventoryParams, a: float) -> float:
    """Inverse of :func:`solve_a_g`: the multiplier whose optimal order size is ``a``."""
    if not a > 0:
        raise UsageError(f"order size must be positive, got {a!r}")
    return p.alpha ** 2 * p.K / (p.H * p.D * _e1mz(p.alpha * a / p.D))


def order_product(p: InventoryParams, g: float) -> float:
    return g * solve_a_g(p, g)


def critical_g(p: InventoryParams) -> tuple[float, float]:
    """Multiplier ``g_c`` with ``alpha K + H g_c a_{g_c} = D``, and ``a_{g_c}``.

    Bisection on the increasing map ``g -> g a_g``.
    """
    if p.never_orders:
        raise RegimeError("never-order regime (alpha K >= D): g_c undefined")
    target = (p.D - p.alpha * p.K) / p.H
    lo = hi = 1.0
    while order_product(p, hi) < target:
        hi *= 2
    while order_product(p, lo) > target:
        lo /= 2
    while hi - lo > 4 * np.finfo(float).eps * hi:
        mid = 0.5 * (lo + hi)
        if order_product(p, mid) < target:
            lo = mid
        else:
            hi = mid
    g = 0.5 * (lo + hi)
    for _ in range(2):
        a = solve_a_g(p, g)
        z = p.alpha * a / p.D
        slope = (a * math.exp(z) - p.D / p.alpha * math.expm1(z)) / math.expm1(z)
        step = g - (g * a - target) / slope
        if not lo <= step <= hi:
            break
        g = step
    return g, solve_a_g(p, g)


def critical_d(p: InventoryParams) -> float:
    """Constraint level separating the delayed-order and immediate-order regimes."""
    _, a = critical_g(p)
    return p.H * p.D / p.alpha ** 2 * _u(p.alpha * a / p.D)


def _slope_lhs(p: InventoryParams, a: float) -> float:
    """``(H a / alpha) e^z / (e^z - 1) - D H / alpha^2`` with ``z = alpha a / D``."""
    return p.H * p.D / p.alpha ** 2 * _u(p.alpha * a / p.D)


def a_star(p: InventoryParams) -> float:
    """Order size of the immediate-order regime (``d > d_c``)."""
    d_c = critical_d(p)
    if p.d <= d_c:
        raise RegimeError(
            f"d = {p.d} <= d_c = {d_c}: the delayed-order strategy applies, a* is unused"
        )

    def F(a):
        return _slope_lhs(p, a) - p.d

    def dF(a):
        return p.H / p.alpha * _du(p.alpha * a / p.D)

    hi = _grow_bracket(F, p.D / p.alpha)
    return bisect_newton(F, dF, 0.0, hi)


def g_hat(p: InventoryParams) -> float:
    return g_from_a(p, a_star(p))


def dual_slope(p: InventoryParams, g: float) -> float:
    """Analytic ``dh/dg`` of the dual functional away from ``g_c``."""
    if p.never_orders or g > critical_g(p)[0]:
        return -p.d
    return _slope_lhs(p, solve_a_g(p, g)) - p.d


# -- Bellman function -----------------------------------------------------------

def regime_sign(p: InventoryParams, g: float) -> int:
    """Sign of ``alpha K + H g a_g - D``: -1 order when empty, +1 never order, 0 boundary."""
    s = p.alpha * p.K + p.H * g * solve_a_g(p, g) - p.D
    if abs(s) <= BOUNDARY_TOL * max(1.0, p.D):
        return 0
    return 1 if s > 0 else -1


def bellman_closed_form(p: InventoryParams, g: float, x):
    """Minimal weighted cost ``inf (V0 + g V1)`` from inventory level ``x``.

    ``x`` may be an array.  At ``g = 0`` only the never-order case has a
    closed form.
    """
    xs = np.asarray(x, dtype=float)
    if np.any(xs < 0) or np.any(xs > p.L * (1 + 1e-12)):
        raise UsageError(f"inventory level outside [0, {p.L}]")
    D, H, al = p.D, p.H, p.alpha
    if g == 0:
        if not p.never_orders:
            raise UnsupportedError(
                "no closed form at g = 0 when alpha K < D; use the grid engine"
            )
        out = D / al * np.exp(-al * xs / D)
    elif g < 0:
        raise UsageError(f"multiplier g must be non-negative, got {g!r}")
    else:
        a_g = solve_a_g(p, g)
        base = xs * g * H / al - D * g * H / al ** 2
        if regime_sign(p, g) <= 0:
            if a_g > p.L:
                raise CapacityError(
                    f"a_g = {a_g:.6g} exceeds capacity L = {p.L}", required=a_g
                )
            out = base + D * g * H / al ** 2 * np.exp(al * (a_g - xs) / D)
        else:
            out = base + (D * g * H / al ** 2 + D / al) * np.exp(-al * xs / D)
    return out if out.ndim else float(out)


def bellman_minimizer(p: InventoryParams, g: float, x: float) -> ImpulseAction:
    """A decision attaining the Bellman minimum at ``x`` (order when empty, or never)."""
    if g == 0 and p.never_orders:
        return ImpulseAction(NEVER, 0.0)
    if regime_sign(p, g) > 0:
        return ImpulseAction(NEVER, 0.0)
    return ImpulseAction(x / p.D, solve_a_g(p, g))


# -- constrained problem --------------------------------------------------------

def min_capacity(p: InventoryParams) -> float:
    """Smallest storage capacity for which the closed-form solution is valid."""
    if p.never_orders:
        return 0.0
    _, a_c = critical_g(p)
    if p.d > critical_d(p):
        return max(a_c, a_star(p))
    return a_c


def _tau_star(p: InventoryParams, a_c: float, d_c: float) -> float:
    em = math.exp(-p.alpha * a_c / p.D)
    return math.log((1 - em) * d_c / p.d + em) / p.alpha


def solve_constrained(p: InventoryParams) -> InventorySolution:
    """Optimal strategy of the holding-constrained problem from ``x0 = 0``."""
    D, H, al = p.D, p.H, p.alpha
    if p.never_orders:
        return InventorySolution(p, Regime.NEVER_ORDER, 0.0, 0.0, 0.0, D / al, 0.0)
    required = min_capacity(p)
    if p.L < required:
        raise CapacityError(
            f"capacity L = {p.L} below the required {required:.6g}", required=required
        )
    g_c, a_c = critical_g(p)
    d_c = critical_d(p)
    if p.d == 0:
        # tau* -> inf as d -> 0: the limit strategy never orders
        return InventorySolution(p, Regime.NEVER_ORDER, g_c, 0.0, 0.0, D / al, 0.0, g_c, d_c)
    if p.d <= d_c:
        tau = max(0.0, _tau_star(p, a_c, d_c))
        return InventorySolution(
            p, Regime.DELAYED_ORDER, g_c, a_c, tau, D / al - g_c * p.d, p.d, g_c, d_c
        )
    a = a_star(p)
    g = g_from_a(p, a)
    v0 = D * g * H / al ** 2 * math.expm1(al * a / D) - g * p.d
    return InventorySolution(p, Regime.IMMEDIATE_ORDER, g, a, 0.0, v0, p.d, g_c, d_c)


def strategy_of(sol: InventorySolution) -> StationaryStrategy:
    p = sol.params
    if sol.regime is Regime.NEVER_ORDER:
        return StationaryStrategy(
            lambda x: ImpulseAction(NEVER, 0.0),
            "never order",
            {"theta": "inf", "order": 0.0},
        )
    tau, a = sol.tau_star, sol.order_qty
    if sol.regime is Regime.DELAYED_ORDER:
        return StationaryStrategy(
            lambda x: ImpulseAction(x / p.D + tau, a),
            f"wait until empty plus {tau:.6g}, order {a:.6g}",
            {"theta": "x/D + tau", "tau": tau, "order": a},
        )
    return StationaryStrategy(
        lambda x: ImpulseAction(x / p.D, a),
        f"order {a:.6g} when empty",
        {"theta": "x/D", "tau": 0.0, "order": a},
    )


def closed_form_v1(p: InventoryParams, tau: float, a: float) -> float:
    """Discounted holding cost from ``x0 = 0`` of the strategy ``(x/D + tau, a)``."""
    if a > p.L:
        raise CapacityError(f"order {a} exceeds capacity {p.L}", required=a)
    if math.isinf(tau):
        return 0.0
    D, H, al = p.D, p.H, p.alpha
    z = al * a / D
    per_cycle = H * a / al + H * D / al ** 2 * math.expm1(-z)
    # divided through by exp(alpha tau) so long waits underflow to 0 instead of overflowing
    return per_cycle * math.exp(-al * tau) / -math.expm1(-al * tau - z)


def eoq_limit(p: InventoryParams, g: float) -> float:
    """Undiscounted economic order quantity with holding cost ``g H``."""
    return math.sqrt(2 * p.K * p.D / (g * p.H))


def eoq_gate(p: InventoryParams, g: float) -> bool:
    """Whether ordering beats permanent shortage in the undiscounted limit."""
    return math.sqrt(2 * p.K * p.D * p.H * g) < p.D


# -- the model itself -----------------------------------------------------------

def _scalar(v):
    v = np.asarray(v, dtype=float)
    return v if v.ndim else float(v)


def gradual_integrals(p: InventoryParams, j: int, x, theta):
    """Closed-form ``int_0^theta exp(-alpha t) C^g_j(flow(x, t)) dt`` (arrays allowed)."""
    D, H, al = p.D, p.H, p.alpha
    x = np.asarray(x, dtype=float)
    theta = np.asarray(theta, dtype=float)
    hit = x / D
    if j == 0:
        late = theta >= hit
        th = np.where(late, theta, hit)
        out = np.where(late, D / al * (np.exp(-al * hit) - np.exp(-al * th)), 0.0)
    elif j == 1:
        s = np.minimum(theta, hit)
        u = al * s
        out = H / al * (x * -np.expm1(-u) - D / al * (1 - np.exp(-u) * (1 + u)))
    else:
        raise UsageError(f"inventory model has costs j = 0, 1 only, got {j}")
    return _scalar(out)


def inventory_model(p: InventoryParams) -> ImpulseModel:
    D, K, H, L = p.D, p.K, p.H, p.L

    def flow(x, t):
        return _scalar(np.maximum(np.asarray(x, float) - D * np.asarray(t, float), 0.0))

    def jump(x, a):
        return _scalar(np.minimum(np.asarray(x, float) + a, L))

    def shortage(x):
        return _scalar(np.where(np.asarray(x) == 0, D, 0.0))

    def holding(x):
        return _scalar(H * np.asarray(x, float))

    def setup(x, a):
        return _scalar(np.broadcast_to(K, np.broadcast(np.asarray(x), np.asarray(a)).shape))

    def no_lump(x, a):
        return _scalar(np.zeros(np.broadcast(np.asarray(x), np.asarray(a)).shape))

    return ImpulseModel(
        state_lo=0.0,
        state_hi=L,
        action_lo=0.0,
        action_hi=L,
        alpha=p.alpha,
        flow=flow,
        jump=jump,
        gradual_costs=(shortage, holding),
        lump_costs=(setup, no_lump),
        gradual_bound=max(D, H * L),
        lump_bound=K,
        kink_times=lambda x: [x / D],
        gradual_integral=lambda j, x, theta: gradual_integrals(p, j, x, theta),
        vectorized=True,
        traversal_time=L / D,
        params=p,
        name="inventory",
    )
