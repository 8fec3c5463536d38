"""Cross-checks between the independent routes to the same numbers."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import RunConfig
from .dual import maximize_dual, verify_certificate
from .errors import ImpulseControlError
from .grid import bellman_residual, max_error, value_iteration
from .inventory import Regime, bellman_closed_form, critical_g, solve_constrained, strategy_of
from .model import ImpulseAction, one_step_cost
from .occupation import characteristic_residual, cost_integrals, occupation_of
from .rollout import evaluate, evaluate_monte_carlo

OCCUPATION_TOL = 1e-9
QUADRATURE_TOL = 1e-9
MC_SIGMAS = 4.0


@dataclass
class Check:
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)


@dataclass
class VerifyResult:
    checks: list[Check]
    tables: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]


def _guard(name, fn) -> Check:
    try:
        return fn()
    except ImpulseControlError as exc:
        return Check(name, False, {"error": f"{type(exc).__name__}: {exc}"})


def check_quadrature(model, n: int = 10) -> Check:
    """Registered closed-form one-step costs against generic quadrature on an n-by-n grid."""
    xs = np.linspace(model.state_lo, model.state_hi, n)
    thetas = np.linspace(0.0, model.default_horizon(), n)
    worst = 0.0
    for x in xs:
        for t in thetas:
            b = ImpulseAction(float(t), model.action_lo)
            for j in range(model.num_costs):
                a = one_step_cost(model, j, float(x), b, "closed_form")
                q = one_step_cost(model, j, float(x), b, "quadrature")
                worst = max(worst, abs(a - q))
    return Check("closed_form_vs_quadrature", worst <= QUADRATURE_TOL,
                 {"max_abs_diff": worst, "tol": QUADRATURE_TOL})


def check_strategy(model, f, x0, mc_paths, seed, label) -> list[Check]:
    """Rollout against occupation measure and against Monte Carlo."""
    exact = evaluate(model, f, x0)
    mu = occupation_of(model, f, x0)
    integ = cost_integrals(model, mu)
    resid = characteristic_residual(model, mu, x0)
    diff = max(abs(a - b) for a, b in zip(exact, integ))
    occ = Check(f"occupation_vs_rollout[{label}]",
                diff <= OCCUPATION_TOL and resid <= OCCUPATION_TOL,
                {"max_abs_diff": diff, "characteristic_residual": resid, "tol": OCCUPATION_TOL})
    mc = evaluate_monte_carlo(model, f, x0, mc_paths, seed)
    z = [abs(m - e) / s if s > 0 else (0.0 if abs(m - e) <= 1e-12 else math.inf)
         for m, e, s in zip(mc, exact, mc.stderr)]
    mcc = Check(f"monte_carlo_vs_rollout[{label}]", max(z) <= MC_SIGMAS,
                {"max_z": max(z), "estimate": list(mc.values), "stderr": list(mc.stderr),
                 "exact": list(exact.values), "paths": mc_paths, "seed": seed})
    return [occ, mcc]


def _inventory_checks(cfg: RunConfig, model) -> VerifyResult:
    p = cfg.inventory_params()
    grid = cfg.grid_spec()
    v = cfg.verify
    checks = [_guard("closed_form_vs_quadrature", lambda: check_quadrature(model))]
    tables = {}
    if p.never_orders:
        gs = [0.0]
    else:
        g_c, _ = critical_g(p)
        gs = [0.75 * g_c, 2.0 * g_c]
    hi = min(3.0, p.L)
    for g in gs:
        def grid_check(g=g):
            table = value_iteration(model, g, grid, cfg.grid.tol)
            tables.setdefault("value_table", table)
            err = max_error(table, lambda x: bellman_closed_form(p, g, x), 0.0, hi)
            return Check(f"grid_vs_closed_form[g={g:.6g}]", err <= v.grid_tol,
                         {"sup_error": err, "tol": v.grid_tol, "interval": [0.0, hi],
                          "iterations": table.iterations})
        checks.append(_guard(f"grid_vs_closed_form[g={g:.6g}]", grid_check))

    def fixed_point():
        table = tables.get("value_table") or value_iteration(model, gs[0], grid, cfg.grid.tol)
        viol, where = bellman_residual(model, gs[0], table)
        return Check("bellman_fixed_point", viol >= -v.grid_tol,
                     {"max_violation": viol, "at": where, "tol": v.grid_tol})
    checks.append(_guard("bellman_fixed_point", fixed_point))

    def certificate():
        report = maximize_dual(model, p.d, cfg.solve.tol, "closed_form", cert_tol=cfg.solve.cert_tol)
        ok, why = verify_certificate(report)
        detail = {"g_star": report.g_star, "analytic_g": report.analytic_g, "gap": report.gap,
                  "slackness": report.slackness, "violations": why}
        if report.analytic_g is not None and report.d > 0:
            off = abs(report.g_star - report.analytic_g)
            detail["search_vs_analytic"] = off
            ok = ok and off <= 1e-6
        return Check("dual_certificate", ok, detail)
    checks.append(_guard("dual_certificate", certificate))

    sol = solve_constrained(p)
    if p.never_orders:
        checks.append(Check("never_order_regime", sol.regime is Regime.NEVER_ORDER,
                            {"regime": sol.regime.value}))
    f = cfg.fixed_strategy(model) or strategy_of(sol)
    checks.extend(_strategy_checks(model, f, 0.0, v, "strategy"))
    return VerifyResult(checks, tables)


def _strategy_checks(model, f, x0, v, label) -> list[Check]:
    try:
        return check_strategy(model, f, x0, v.mc_paths, v.seed, label)
    except ImpulseControlError as exc:
        return [Check(f"strategy[{label}]", False, {"error": f"{type(exc).__name__}: {exc}"})]


def _generic_checks(cfg: RunConfig, model) -> VerifyResult:
    grid = cfg.grid_spec()
    v = cfg.verify
    x0 = cfg.solve.x0
    checks = []
    tables = {}

    def fixed_point():
        g = np.zeros(model.num_constraints)
        table = value_iteration(model, g, grid, cfg.grid.tol)
        tables["value_table"] = table
        viol, where = bellman_residual(model, g, table)
        return Check("bellman_fixed_point", viol >= -v.grid_tol,
                     {"max_violation": viol, "at": where, "tol": v.grid_tol,
                      "iterations": table.iterations})
    checks.append(_guard("bellman_fixed_point", fixed_point))
    report = None

    def certificate():
        nonlocal report
        report = maximize_dual(model, cfg.solve.d, max(cfg.solve.tol, 1e-6), "grid", x0, grid,
                               cfg.solve.cert_tol)
        ok, why = verify_certificate(report)
        return Check("dual_certificate", ok, {"g_star": report.g_star, "gap": report.gap,
                                              "slackness": report.slackness, "violations": why})
    if model.num_constraints == 1:
        checks.append(_guard("dual_certificate", certificate))
    f = cfg.fixed_strategy(model)
    if f is None and report is not None:
        f = report.strategy
    if f is not None:
        checks.extend(_strategy_checks(model, f, x0, v, "strategy"))
    return VerifyResult(checks, tables)


def run_checks(cfg: RunConfig) -> VerifyResult:
    model = cfg.build_model()
    try:
        model.check()
    except ImpulseControlError as exc:
        return VerifyResult([Check("model_spot_checks", False, {"error": str(exc)})])
    if cfg.is_inventory:
        return _inventory_checks(cfg, model)
    return _generic_checks(cfg, model)
