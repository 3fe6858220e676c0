"""Scenario configuration files.

Configs are JSON documents with a top-level "scenarios" array.  Every
expression string is parsed eagerly so bad input surfaces at load time,
and validation failures carry a JSON-pointer path to the offending
element plus the scenario id when one is known.
"""

from __future__ import annotations

import json
from importlib import resources
from typing import List, Optional

import numpy as np

from .classify import WindowPolicy
from .expr import ExprSyntaxError, ScalarFunction
from .scenarios import THEOREMS, Scenario
from .solver import Grid, SystemSpec
from .weights import WeightClass, WeightFunction

#: grid budget: number of steps a scenario may ask for
MAX_STEPS = 10_000_000

VALID_OUTPUTS = ("trajectories", "field", "report", "plotdata")

_CLASSES = {c.value: c for c in WeightClass}


class ConfigError(ValueError):
    """Configuration problem at a specific JSON pointer."""

    def __init__(self, message: str, pointer: str):
        super().__init__(f"{message} (at {pointer or '/'})")
        self.pointer = pointer


def _need(obj: dict, key: str, pointer: str):
    if key not in obj:
        raise ConfigError(f"missing required key {key!r}", pointer)
    return obj[key]


def _number(value, pointer: str) -> float:
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ConfigError("expected a number", pointer)
    return float(value)


def _parse_function(text, pointer: str, scenario_id: str) -> ScalarFunction:
    if not isinstance(text, str):
        raise ConfigError("expected an expression string", pointer)
    try:
        return ScalarFunction.from_expression(text)
    except ExprSyntaxError as e:
        raise ConfigError(
            f"scenario {scenario_id!r}: bad expression {text!r}: {e}",
            pointer)


def _parse_weight(obj, pointer: str, scenario_id: str) -> WeightFunction:
    if not isinstance(obj, dict):
        raise ConfigError("weight must be an object with 'expr'", pointer)
    expr = _need(obj, "expr", pointer)
    fn = _parse_function(expr, f"{pointer}/expr", scenario_id)
    cls_name = obj.get("declared_class", "unverified")
    if cls_name not in _CLASSES:
        raise ConfigError(
            f"unknown weight class {cls_name!r}; choose from "
            f"{sorted(_CLASSES)}", f"{pointer}/declared_class")
    rate = obj.get("rate")
    if rate is not None:
        rate = _number(rate, f"{pointer}/rate")
    return WeightFunction(fn, _CLASSES[cls_name], rate=rate)


def _parse_system(obj, pointer: str, forcing: List[ScalarFunction]) -> SystemSpec:
    if not isinstance(obj, dict):
        raise ConfigError("system must be an object with 'A' and 'zeta'",
                          pointer)
    zeta = _need(obj, "zeta", pointer)
    if not isinstance(zeta, list) or not zeta:
        raise ConfigError("zeta must be a non-empty array", f"{pointer}/zeta")
    d = len(zeta)
    zeta = np.array([_number(v, f"{pointer}/zeta/{i}")
                     for i, v in enumerate(zeta)])
    A_raw = _need(obj, "A", pointer)
    if not isinstance(A_raw, list):
        raise ConfigError("A must be an array", f"{pointer}/A")
    if A_raw and isinstance(A_raw[0], list):
        flat = [v for row in A_raw for v in row]
    else:
        flat = A_raw
    if len(flat) != d * d:
        raise ConfigError(
            f"A must hold {d}x{d} = {d * d} row-major entries, got "
            f"{len(flat)}", f"{pointer}/A")
    A = np.array([_number(v, f"{pointer}/A/{i}")
                  for i, v in enumerate(flat)]).reshape(d, d)
    if len(forcing) != d:
        raise ConfigError(
            f"forcing supplies {len(forcing)} components but the system "
            f"dimension is {d}", pointer)
    return SystemSpec(A, forcing, zeta)


def _parse_scenario(obj, pointer: str) -> Scenario:
    if not isinstance(obj, dict):
        raise ConfigError("scenario must be an object", pointer)
    sid = _need(obj, "id", pointer)
    if not isinstance(sid, str) or not sid:
        raise ConfigError("id must be a non-empty string", f"{pointer}/id")
    theorem = _need(obj, "theorem", pointer)
    if theorem not in THEOREMS:
        raise ConfigError(
            f"unknown theorem {theorem!r}; known ids: {sorted(THEOREMS)}",
            f"{pointer}/theorem")

    raw_forcing = _need(obj, "forcing", pointer)
    if isinstance(raw_forcing, str):
        raw_forcing = [raw_forcing]
    if not isinstance(raw_forcing, list) or not raw_forcing:
        raise ConfigError("forcing must be an expression or a non-empty "
                          "array of expressions", f"{pointer}/forcing")
    forcing = [_parse_function(s, f"{pointer}/forcing/{i}", sid)
               for i, s in enumerate(raw_forcing)]

    weight = _parse_weight(_need(obj, "weight", pointer),
                           f"{pointer}/weight", sid)
    cap_weight = None
    if obj.get("cap_weight") is not None:
        cap_weight = _parse_weight(obj["cap_weight"],
                                   f"{pointer}/cap_weight", sid)

    grid_obj = _need(obj, "grid", pointer)
    if not isinstance(grid_obj, dict):
        raise ConfigError("grid must be an object with 't_end' and 'h'",
                          f"{pointer}/grid")
    t_end = _number(_need(grid_obj, "t_end", f"{pointer}/grid"),
                    f"{pointer}/grid/t_end")
    h = _number(_need(grid_obj, "h", f"{pointer}/grid"), f"{pointer}/grid/h")
    if h <= 0 or t_end <= 0:
        raise ConfigError("grid needs positive t_end and h",
                          f"{pointer}/grid")
    if t_end / h > MAX_STEPS:
        raise ConfigError(
            f"grid budget exceeded: t_end/h = {t_end / h:g} > {MAX_STEPS:g}",
            f"{pointer}/grid")
    grid = Grid.from_range(0.0, t_end, h)

    delta = _number(_need(obj, "delta", pointer), f"{pointer}/delta")
    if delta <= 0 or delta > t_end / 4:
        raise ConfigError(
            f"delta must lie in (0, t_end/4] = (0, {t_end / 4:g}]",
            f"{pointer}/delta")

    theta_count = obj.get("theta_count", 33)
    if not isinstance(theta_count, int) or theta_count < 2:
        raise ConfigError("theta_count must be an integer >= 2",
                          f"{pointer}/theta_count")

    system = None
    if obj.get("system") is not None:
        system = _parse_system(obj["system"], f"{pointer}/system", forcing)

    alpha = obj.get("alpha")
    if alpha is not None:
        alpha = _number(alpha, f"{pointer}/alpha")
    x0 = _number(obj.get("x0", 0.0), f"{pointer}/x0")

    eps = obj.get("epsilons", [0.05, 0.1, 0.2])
    if not isinstance(eps, list) or not eps:
        raise ConfigError("epsilons must be a non-empty array",
                          f"{pointer}/epsilons")
    epsilons = tuple(_number(v, f"{pointer}/epsilons/{i}")
                     for i, v in enumerate(eps))

    tolerances = obj.get("tolerances", {})
    if not isinstance(tolerances, dict):
        raise ConfigError("tolerances must be an object",
                          f"{pointer}/tolerances")
    quad_tol = _number(tolerances.get("quad_tol", 1e-9),
                       f"{pointer}/tolerances/quad_tol")

    policy_obj = obj.get("limsup_policy", {})
    if not isinstance(policy_obj, dict):
        raise ConfigError("limsup_policy must be an object",
                          f"{pointer}/limsup_policy")
    policy_fields = {}
    for key in ("eps_zero", "tau", "rho_inf", "cap", "decay_factor",
                "decay_slack"):
        if key in policy_obj:
            policy_fields[key] = _number(policy_obj[key],
                                         f"{pointer}/limsup_policy/{key}")
    if "n_windows" in policy_obj:
        policy_fields["n_windows"] = int(policy_obj["n_windows"])
    policy = WindowPolicy(**policy_fields)

    outputs = obj.get("outputs", ["report"])
    if not isinstance(outputs, list):
        raise ConfigError("outputs must be an array", f"{pointer}/outputs")
    for i, name in enumerate(outputs):
        if name not in VALID_OUTPUTS:
            raise ConfigError(
                f"unknown output {name!r}; choose from {VALID_OUTPUTS}",
                f"{pointer}/outputs/{i}")

    return Scenario(id=sid, theorem=theorem, forcing=forcing, weight=weight,
                    grid=grid, delta=delta, theta_count=theta_count,
                    system=system, alpha=alpha, x0=x0,
                    cap_weight=cap_weight, epsilons=epsilons,
                    liapunov_slack=_number(obj.get("liapunov_slack", 0.15),
                                           f"{pointer}/liapunov_slack"),
                    quad_tol=quad_tol, policy=policy,
                    outputs=tuple(outputs))


def parse_config(doc) -> List[Scenario]:
    if not isinstance(doc, dict):
        raise ConfigError("document root must be an object", "")
    if "scenarios" not in doc:
        raise ConfigError("missing top-level 'scenarios' array", "")
    raw = doc["scenarios"]
    if not isinstance(raw, list):
        raise ConfigError("'scenarios' must be an array", "/scenarios")
    scenarios = [_parse_scenario(obj, f"/scenarios/{i}")
                 for i, obj in enumerate(raw)]
    seen = {}
    for i, sc in enumerate(scenarios):
        if sc.id in seen:
            raise ConfigError(
                f"duplicate scenario id {sc.id!r} (first at "
                f"/scenarios/{seen[sc.id]})", f"/scenarios/{i}/id")
        seen[sc.id] = i
    return scenarios


def load_config(path) -> List[Scenario]:
    """Load and validate a scenario config file."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as e:
        raise ConfigError(f"not valid JSON: {e}", "")
    return parse_config(doc)


def load_builtin_corpus() -> List[Scenario]:
    """The shipped cross-check corpus."""
    ref = resources.files("odeasym").joinpath("data/corpus.json")
    doc = json.loads(ref.read_text())
    return parse_config(doc)
