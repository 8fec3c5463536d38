"""Constrained discounted impulse control solved through a killed Markov decision process.

The inventory model is available in closed form and serves as the oracle for
the generic numerical routes (grid value iteration, rollout, occupation
measures, Lagrangian dual).
"""
from .dual import DualReport, dual_functional, lagrangian_value, maximize_dual, verify_certificate
from .errors import (
    CapacityError,
    ConvergenceError,
    DivergenceError,
    ImpulseControlError,
    InfeasibleError,
    ModelDomainError,
    NumericError,
    RegimeError,
    UnsupportedError,
    UsageError,
)
from .grid import GridSpec, ValueTable, bellman_residual, greedy_strategy, value_iteration
from .inventory import (
    InventoryParams,
    InventorySolution,
    Regime,
    a_star,
    bellman_closed_form,
    closed_form_v1,
    critical_d,
    critical_g,
    eoq_limit,
    g_from_a,
    inventory_model,
    min_capacity,
    solve_a_g,
    solve_constrained,
    strategy_of,
)
from .model import (
    DELTA,
    NEVER,
    ImpulseAction,
    ImpulseModel,
    TransitionOutcome,
    advance,
    one_step_cost,
    transition,
)
from .occupation import AtomicOccupationMeasure, characteristic_residual, cost_integrals, occupation_of
from .rollout import CostVector, StationaryStrategy, TrajectoryEvent, evaluate, evaluate_monte_carlo, trajectory

__version__ = "0.1.0"
