"""Run configuration: a YAML file validated into typed sections.

Errors carry the ``file:line`` of the offending key.  Waiting times may be
written as the literal ``inf``.
"""
from __future__ import annotations

from pathlib import Path
from typing import Annotated, Literal, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import CapacityError, UsageError
from .grid import GridSpec
from .inventory import InventoryParams, inventory_model, min_capacity
from .model import NEVER, ImpulseAction, ImpulseModel, parse_theta
from .rollout import StationaryStrategy

Pos = Annotated[float, Field(gt=0)]
NonNeg = Annotated[float, Field(ge=0)]


class ConfigError(UsageError):
    def __init__(self, message, line=None, source="config"):
        self.line = line
        where = f"{source}:{line}" if line is not None else source
        super().__init__(f"{where}: {message}")


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class InventorySection(_Section):
    kind: Literal["inventory"]
    D: Pos
    K: Pos
    H: Pos
    alpha: Pos
    L: Pos


class FlowSpec(_Section):
    type: Literal["linear_decline", "exponential_decay"]
    rate: Pos


class JumpSpec(_Section):
    type: Literal["add_capped", "reset"]


class GradualSpec(_Section):
    type: Literal["constant", "linear", "indicator_at_lo"]
    value: NonNeg = 0.0
    slope: float = 0.0
    intercept: float = 0.0


class LumpSpec(_Section):
    type: Literal["constant", "proportional", "affine"]
    value: NonNeg = 0.0
    rate: NonNeg = 0.0
    fixed: NonNeg = 0.0


class CostSpec(_Section):
    gradual: GradualSpec
    lump: LumpSpec


class GenericSection(_Section):
    kind: Literal["generic"]
    state_lo: float
    state_hi: float
    action_lo: float
    action_hi: float
    alpha: Pos
    flow: FlowSpec
    jump: JumpSpec
    costs: list[CostSpec] = Field(min_length=1)

    @model_validator(mode="after")
    def _intervals(self):
        if not self.state_lo < self.state_hi:
            raise ValueError("state_lo must be below state_hi")
        if not self.action_lo <= self.action_hi:
            raise ValueError("action_lo must not exceed action_hi")
        if self.jump.type == "reset" and not (
            self.state_lo <= self.action_lo and self.action_hi <= self.state_hi
        ):
            raise ValueError("reset jumps need the action interval inside the state interval")
        for c in self.costs:
            g = c.gradual
            if g.type == "linear" and min(g.intercept + g.slope * self.state_lo,
                                          g.intercept + g.slope * self.state_hi) < 0:
                raise ValueError("linear gradual cost is negative somewhere on the state interval")
        return self


class SolveSection(_Section):
    d: NonNeg = 0.0
    engine: Literal["closed_form", "grid"] = "closed_form"
    tol: Pos = 1e-10
    cert_tol: Pos | None = None
    x0: float = 0.0


class GridSection(_Section):
    n_states: int = Field(401, ge=2)
    n_theta: int = Field(201, ge=2)
    n_actions: int = Field(101, ge=1)
    theta_max: Pos | None = None
    tol: Pos = 1e-9


class VerifySection(_Section):
    mc_paths: int = Field(20000, ge=2)
    grid_tol: Pos = 5e-3
    seed: int = Field(0, ge=0)


class OutputSection(_Section):
    dir: str = "out"


class StrategySection(_Section):
    wait: Union[NonNeg, Literal["inf"]]
    order: NonNeg = 0.0
    after_hit: bool = False

    @field_validator("wait", mode="before")
    @classmethod
    def _wait(cls, v):
        if isinstance(v, str) and parse_theta(v) is NEVER:
            return "inf"
        return v


class RunConfig(_Section):
    model: Annotated[Union[InventorySection, GenericSection], Field(discriminator="kind")]
    solve: SolveSection = SolveSection()
    grid: GridSection = GridSection()
    verify: VerifySection = VerifySection()
    output: OutputSection = OutputSection()
    strategy: StrategySection | None = None

    @property
    def is_inventory(self) -> bool:
        return isinstance(self.model, InventorySection)

    def inventory_params(self) -> InventoryParams:
        m = self.model
        return InventoryParams(D=m.D, K=m.K, H=m.H, alpha=m.alpha, L=m.L, d=self.solve.d)

    def grid_spec(self) -> GridSpec:
        g = self.grid
        return GridSpec(g.n_states, g.n_theta, g.n_actions, g.theta_max)

    def build_model(self) -> ImpulseModel:
        if self.is_inventory:
            return inventory_model(self.inventory_params())
        return generic_model(self.model)

    def fixed_strategy(self, model: ImpulseModel) -> StationaryStrategy | None:
        if self.strategy is None:
            return None
        return fixed_strategy(model, self.strategy)


def _flow(spec: FlowSpec, lo: float):
    r = spec.rate
    if spec.type == "linear_decline":
        return (lambda x, t: np.maximum(np.asarray(x, float) - r * np.asarray(t, float), lo) + 0.0,
                lambda x: [(x - lo) / r] if x > lo else [])
    return (lambda x, t: lo + (np.asarray(x, float) - lo) * np.exp(-r * np.asarray(t, float)),
            lambda x: [])


def _scalar(fn):
    def wrapped(*args):
        out = np.asarray(fn(*args), dtype=float)
        return out if out.ndim else float(out)
    return wrapped


def _gradual(spec: GradualSpec, lo: float, hi: float):
    if spec.type == "constant":
        return (lambda x: spec.value + 0.0 * np.asarray(x, float)), spec.value
    if spec.type == "linear":
        bound = max(spec.intercept + spec.slope * lo, spec.intercept + spec.slope * hi)
        return (lambda x: spec.intercept + spec.slope * np.asarray(x, float)), bound
    return (lambda x: np.where(np.asarray(x, float) <= lo, spec.value, 0.0)), spec.value


def _lump(spec: LumpSpec, amax: float):
    if spec.type == "constant":
        return (lambda x, a: spec.value + 0.0 * np.asarray(x, float) * np.asarray(a, float)), spec.value
    if spec.type == "proportional":
        return (lambda x, a: spec.rate * np.abs(np.asarray(a, float)) + 0.0 * np.asarray(x, float)), spec.rate * amax
    return ((lambda x, a: spec.fixed + spec.rate * np.abs(np.asarray(a, float)) + 0.0 * np.asarray(x, float)),
            spec.fixed + spec.rate * amax)


def generic_model(m: GenericSection) -> ImpulseModel:
    """Model assembled from the named built-in flows, jumps and cost shapes."""
    lo, hi = m.state_lo, m.state_hi
    flow, kinks = _flow(m.flow, lo)
    if m.jump.type == "add_capped":
        def jump(x, a):
            return np.minimum(np.asarray(x, float) + np.asarray(a, float), hi)
    else:
        def jump(x, a):
            return np.asarray(a, float) + 0.0 * np.asarray(x, float)
    amax = max(abs(m.action_lo), abs(m.action_hi))
    gradual, lump, gb, lb = [], [], 0.0, 0.0
    for c in m.costs:
        fg, bg = _gradual(c.gradual, lo, hi)
        fl, bl = _lump(c.lump, amax)
        gradual.append(_scalar(fg))
        lump.append(_scalar(fl))
        gb, lb = max(gb, bg), max(lb, bl)
    traversal = (hi - lo) / m.flow.rate if m.flow.type == "linear_decline" else 1.0 / m.flow.rate
    return ImpulseModel(
        state_lo=lo, state_hi=hi, action_lo=m.action_lo, action_hi=m.action_hi, alpha=m.alpha,
        flow=_scalar(flow), jump=_scalar(jump), gradual_costs=gradual, lump_costs=lump,
        gradual_bound=gb, lump_bound=lb, kink_times=kinks, vectorized=True,
        traversal_time=traversal, params=m, name="generic",
    )


def fixed_strategy(model: ImpulseModel, s: StrategySection) -> StationaryStrategy:
    """Constant decision, optionally waiting first until the flow's first kink."""
    wait = parse_theta(s.wait)

    def rule(x):
        if wait is NEVER:
            return ImpulseAction(NEVER, s.order)
        hit = model.kinks(x)[0] if s.after_hit and model.kinks(x) else 0.0
        return ImpulseAction(hit + wait, s.order)

    label = f"wait {'until hit + ' if s.after_hit else ''}{s.wait}, order {s.order}"
    return StationaryStrategy(rule, label, s.model_dump())


# -- loading ---------------------------------------------------------------

def _line_index(node, path=(), out=None):
    """Map key paths to 1-based source lines."""
    out = {} if out is None else out
    out[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            out[path + (k.value,)] = k.start_mark.line + 1
            _line_index(v, path + (k.value,), out)
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            _line_index(v, path + (i,), out)
    return out


def _line_for(lines, loc):
    loc = tuple(str(p) if not isinstance(p, int) else p for p in loc)
    while loc:
        if loc in lines:
            return lines[loc]
        loc = loc[:-1]
    return lines.get((), None)


def parse_config(text: str, source: str = "config") -> RunConfig:
    try:
        node = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"invalid YAML: {exc}", mark.line + 1 if mark else None, source) from None
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping", 1, source)
    lines = _line_index(node)
    try:
        cfg = RunConfig.model_validate(data)
    except ValidationError as exc:
        err = exc.errors()[0]
        loc = tuple(p for p in err["loc"] if p not in ("inventory", "generic"))
        key = ".".join(str(p) for p in loc) or "<root>"
        raise ConfigError(f"{key}: {err['msg']}", _line_for(lines, loc), source) from None
    if cfg.is_inventory:
        p = cfg.inventory_params()
        required = min_capacity(p)
        if p.L < required:
            raise ConfigError(
                f"model.L: capacity {p.L} below the required {required:.6g}",
                lines.get(("model", "L")), source,
            ) from CapacityError("capacity too small", required)
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", None, str(path)) from None
    return parse_config(text, str(path))
