"""Command-line front end.

Exit codes: 0 certified, 1 usage or configuration error, 2 verification failure.
Outputs are byte-identical for identical configuration and seed.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from .config import RunConfig, load_config
from .dual import dual_scan, maximize_dual, verify_certificate
from .errors import ImpulseControlError, UsageError
from .grid import value_iteration
from .inventory import solve_constrained, strategy_of
from .occupation import AtomicOccupationMeasure, occupation_of
from .rollout import trajectory
from .verify import run_checks

EXIT_OK, EXIT_USAGE, EXIT_FAILED = 0, 1, 2


def _num(v):
    """JSON-safe float: infinities become the string ``inf``."""
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return "nan"
        return v
    if isinstance(v, dict):
        return {str(k): _num(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_num(x) for x in v]
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def _cell(v):
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return "inf" if math.isinf(v) and v > 0 else repr(v)
    return str(v)


def write_csv(path: Path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    path.write_text(buf.getvalue())


def write_json(path: Path, data):
    path.write_text(json.dumps(_num(data), sort_keys=True, indent=2) + "\n")


def write_text(path: Path, title, data: dict):
    lines = [title, "=" * len(title)]
    for k in sorted(data):
        v = data[k]
        if isinstance(v, dict):
            lines.append(f"{k}:")
            lines.extend(f"  {kk}: {_cell(vv)}" for kk, vv in sorted(v.items()))
        else:
            lines.append(f"{k}: {_cell(v)}")
    path.write_text("\n".join(lines) + "\n")


def write_measure(path: Path, mu: AtomicOccupationMeasure):
    write_csv(path, ["x", "theta", "a", "weight"],
              [(a.x, a.b.theta_value, a.b.a, a.w) for a in mu.atoms])


def _outdir(args, cfg: RunConfig) -> Path:
    out = Path(args.out or cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    updates = {}
    if args.tol is not None:
        if not args.tol > 0:
            raise UsageError("--tol must be positive")
        updates["solve"] = cfg.solve.model_copy(update={"tol": args.tol})
    if args.seed is not None:
        if args.seed < 0:
            raise UsageError("--seed must be non-negative")
        updates["verify"] = cfg.verify.model_copy(update={"seed": args.seed})
    return cfg.model_copy(update=updates) if updates else cfg


def solve_config(cfg: RunConfig):
    """Optimal strategy plus its certificate; returns ``(report dict, strategy, model, table)``."""
    model = cfg.build_model()
    s = cfg.solve
    table = None
    if cfg.is_inventory and s.engine == "closed_form":
        p = cfg.inventory_params()
        sol = solve_constrained(p)
        strategy = strategy_of(sol)
        report = maximize_dual(model, p.d, s.tol, "closed_form", cert_tol=s.cert_tol)
        data = {
            "regime": sol.regime.value,
            "g_star": sol.g_star,
            "order_qty": sol.order_qty,
            "tau_star": sol.tau_star,
            "v0": sol.v0,
            "v1": sol.v1,
            "g_c": sol.g_c,
            "d_c": sol.d_c,
            "strategy": {"description": strategy.description, **strategy.params},
        }
    else:
        grid = cfg.grid_spec()
        report = maximize_dual(model, s.d, max(s.tol, 1e-6), "grid", s.x0, grid, s.cert_tol)
        strategy = report.strategy
        table = value_iteration(model, report.g_star, grid, cfg.grid.tol)
        b0 = strategy(s.x0)
        data = {
            "regime": None,
            "g_star": report.g_star,
            "strategy": {"description": strategy.description, "theta_at_x0": b0.theta_value,
                         "order_at_x0": b0.a},
        }
    ok, violations = verify_certificate(report)
    data.update({
        "model": model.name,
        "d": s.d,
        "engine": report.engine,
        "primal_costs": list(report.primal_costs.values),
        "certificate": {
            "passed": ok,
            "violations": violations,
            "g_search": report.g_star,
            "h_star": report.h_star,
            "gap": report.gap,
            "slackness": report.slackness,
            "feasible": report.feasible,
            "cert_tol": report.cert_tol,
            "analytic_g": report.analytic_g,
        },
    })
    return data, strategy, model, table


def cmd_solve(cfg: RunConfig, out: Path) -> int:
    data, strategy, model, table = solve_config(cfg)
    write_json(out / "report.json", data)
    write_text(out / "report.txt", "solve report", {k: v for k, v in data.items() if k != "certificate"}
               | {"certificate": {k: v for k, v in data["certificate"].items() if k != "violations"}})
    x0 = cfg.solve.x0 if not cfg.is_inventory else 0.0
    write_measure(out / "measure.csv", occupation_of(model, strategy, x0))
    if table is not None:
        write_csv(out / "value_table.csv", ["x", "W"], zip(table.xs, table.values))
    return EXIT_OK if data["certificate"]["passed"] else EXIT_FAILED


def cmd_trajectory(cfg: RunConfig, out: Path, horizon: float | None) -> int:
    model = cfg.build_model()
    strategy = cfg.fixed_strategy(model)
    if strategy is None:
        _, strategy, model, _ = solve_config(cfg)
    horizon = model.default_horizon() if horizon is None else horizon
    x0 = cfg.solve.x0 if not cfg.is_inventory else 0.0
    events = trajectory(model, strategy, x0, horizon)
    write_csv(out / "trajectory.csv", ["t", "kind", "x_before", "x_after", "order"],
              [(e.t, e.kind, e.x_before, e.x_after, e.order) for e in events])
    return EXIT_OK


def parse_g_list(text: str | None) -> list[float]:
    if text is None:
        raise UsageError("dual-scan needs --g-list (comma-separated multipliers)")
    try:
        gs = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"--g-list must be comma-separated numbers, got {text!r}") from None
    if any(not (g >= 0 and math.isfinite(g)) for g in gs):
        raise UsageError("--g-list entries must be finite and non-negative")
    return gs


def cmd_dual_scan(cfg: RunConfig, out: Path, g_list: list[float]) -> int:
    model = cfg.build_model()
    s = cfg.solve
    engine = s.engine if cfg.is_inventory else "grid"
    rows = dual_scan(model, g_list, s.d, engine, s.x0 if not cfg.is_inventory else 0.0, cfg.grid_spec())
    write_csv(out / "dual_scan.csv", ["g", "h"], rows)
    return EXIT_OK


def cmd_verify(cfg: RunConfig, out: Path) -> int:
    result = run_checks(cfg)
    data = {
        "passed": result.passed,
        "failures": result.failures,
        "checks": {c.name: {"passed": c.passed, **c.detail} for c in result.checks},
    }
    write_json(out / "verify.json", data)
    lines = ["verify report", "============="]
    lines += [f"{'PASS' if c.passed else 'FAIL'}  {c.name}" for c in result.checks]
    lines.append(f"overall: {'PASS' if result.passed else 'FAIL'}")
    (out / "verify.txt").write_text("\n".join(lines) + "\n")
    table = result.tables.get("value_table")
    if table is not None:
        write_csv(out / "value_table.csv", ["x", "W"], zip(table.xs, table.values))
    for c in result.checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}")
    return EXIT_OK if result.passed else EXIT_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="impulse-control",
        description="Constrained discounted impulse control: solve, simulate and verify.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="YAML run configuration")
    common.add_argument("--out", help="output directory (default: output.dir of the config)")
    common.add_argument("--seed", type=int, help="Monte Carlo seed override")
    common.add_argument("--tol", type=float, help="solver tolerance override")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common], help="optimal strategy and certificate")
    t = sub.add_parser("trajectory", parents=[common], help="event timeline of the strategy")
    t.add_argument("--horizon", type=float, help="time horizon (default: model horizon)")
    s = sub.add_parser("dual-scan", parents=[common], help="tabulate the dual functional")
    s.add_argument("--g-list", help="comma-separated multipliers, e.g. 0.1,0.2,0.4")
    sub.add_parser("verify", parents=[common], help="run every cross-check")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        out = _outdir(args, cfg)
        if args.command == "solve":
            return cmd_solve(cfg, out)
        if args.command == "trajectory":
            if args.horizon is not None and not args.horizon > 0:
                raise UsageError("--horizon must be positive")
            return cmd_trajectory(cfg, out, args.horizon)
        if args.command == "dual-scan":
            return cmd_dual_scan(cfg, out, parse_g_list(args.g_list))
        return cmd_verify(cfg, out)
    except (UsageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ImpulseControlError as exc:
        print(f"failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
