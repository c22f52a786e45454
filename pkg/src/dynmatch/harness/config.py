"""Experiment configuration files (JSON).

A config names either a ``model`` block::

    {"model": {"builder": "horizontal_2x2",
               "params": {"rewards": [...], "alpha": 1, "beta": 1,
                          "arrivals": {"demand": [...], "supply": [...]}}},
     "policies": ["optimal", "greedy"],
     "evaluation": "simulate", "replications": 1000, "seed": 0}

or a literal ``instance`` block in the instance JSON layout. Arrival blocks
inside ``params.arrivals`` use the same type-major layout as instances.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..core import MatchingInstance, instance_from_dict, parse_arrival_block
from ..dp import PolicyHandle, compatible_optimal_policy, optimal_policy, solve_exact, zero_policy
from ..errors import ConfigError
from ..models import BUILDERS, LineLayout, UpgradeParams
from ..monge import build_dominance_graph
from ..policies import (
    best_iou_policy,
    compute_protection_levels_2x2,
    consolidated_protection_policy,
    dp_quantity_rule,
    greedy_policy,
    osa_policy,
    topdown_policy,
    two_round_policy_2x2,
    vertical_greedy_policy,
)

_TOP_KEYS = {
    "model",
    "instance",
    "policies",
    "evaluation",
    "replications",
    "seed",
    "output",
    "workers",
    "policy_options",
}


def _dims(builder: str, p: dict) -> tuple[int, int, int]:
    """``(T, m, n)`` implied by a builder's parameters."""
    if builder == "horizontal_2x2":
        return len(p["rewards"]), 2, 2
    if builder == "premier_regular":
        return int(p["T"]), 2, 2
    if builder == "directed_line":
        return len(p["prize"]), len(p["demand_pos"]), len(p["supply_pos"])
    if builder == "euclidean":
        return len(p["R"]), len(p["demand_points"]), len(p["supply_points"])
    if builder == "upgrading":
        n = len(p["c"])
        return len(p["f"]), n, n
    if builder == "vertical":
        return len(p["r_d"]), len(p["r_d"][0]), len(p["r_s"][0])
    if builder == "vertical_nonadditive":
        return len(p["a"]), len(p["a"][0]), len(p["b"][0])
    raise ConfigError(f"unknown builder {builder!r}; choose from {', '.join(sorted(BUILDERS))}")


def build_from_model(block: dict) -> MatchingInstance:
    if not isinstance(block, dict) or set(block) - {"builder", "params"} or "builder" not in block:
        raise ConfigError('model block needs "builder" and "params"')
    builder = block["builder"]
    params = dict(block.get("params", {}))
    T, m, n = _dims(builder, params)
    arrivals = params.pop("arrivals", None)
    if not isinstance(arrivals, dict) or set(arrivals) != {"demand", "supply"}:
        raise ConfigError('params.arrivals needs exactly the keys "demand" and "supply"')
    params["arrivals"] = (
        parse_arrival_block(arrivals["demand"], T, m, "demand"),
        parse_arrival_block(arrivals["supply"], T, n, "supply"),
    )
    if builder == "directed_line":
        layout = LineLayout(params.pop("demand_pos"), params.pop("supply_pos"), params.pop("prize"))
        params = {"layout": layout, **params}
    elif builder == "upgrading":
        up = UpgradeParams(np.asarray(params.pop("f")), params.pop("c"), bool(params.pop("one_level", False)))
        params = {"params": up, **params}
    try:
        return BUILDERS[builder](**params)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for {builder}: {exc}") from exc


@dataclass
class ExperimentConfig:
    instance: MatchingInstance
    policies: list = field(default_factory=lambda: ["optimal", "greedy"])
    evaluation: str = "exact"
    replications: int = 1000
    seed: int = 0
    output: str | None = None
    workers: int = 1
    policy_options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.evaluation not in ("exact", "simulate"):
            raise ConfigError(f"evaluation must be exact or simulate, got {self.evaluation!r}")
        if self.evaluation == "exact" and not self.instance.exact_carry:
            raise ConfigError("exact evaluation needs carry-over rates in {0, 1}")
        unknown = [p for p in self.policies if p not in POLICY_NAMES]
        if unknown:
            raise ConfigError(f"unknown policies {unknown}; choose from {', '.join(POLICY_NAMES)}")


def config_from_dict(d: dict) -> ExperimentConfig:
    if not isinstance(d, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(d) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if ("model" in d) == ("instance" in d):
        raise ConfigError('config needs exactly one of "model" or "instance"')
    inst = build_from_model(d["model"]) if "model" in d else instance_from_dict(d["instance"])
    kwargs = {k: d[k] for k in ("policies", "evaluation", "replications", "seed", "output", "workers", "policy_options") if k in d}
    return ExperimentConfig(inst, **kwargs)


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    return config_from_dict(data)


# ------------------------------------------------------------------ policies


def _vt(ctx):
    if "vt" not in ctx:
        ctx["vt"] = solve_exact(ctx["instance"])
    return ctx["vt"]


def _graph(ctx):
    if "graph" not in ctx:
        ctx["graph"] = build_dominance_graph(ctx["instance"])
    return ctx["graph"]


_FACTORIES = {
    "optimal": lambda ctx, o: optimal_policy(_vt(ctx)),
    "compatible": lambda ctx, o: compatible_optimal_policy(_vt(ctx), _graph(ctx), **o),
    "greedy": lambda ctx, o: greedy_policy(ctx["instance"], _graph(ctx)),
    "vertical_greedy": lambda ctx, o: vertical_greedy_policy(ctx["instance"]),
    "topdown": lambda ctx, o: topdown_policy(ctx["instance"], dp_quantity_rule(_vt(ctx))),
    "osa": lambda ctx, o: osa_policy(ctx["instance"], **o),
    "two_round": lambda ctx, o: two_round_policy_2x2(ctx["instance"], compute_protection_levels_2x2(ctx["instance"])),
    "consolidated": lambda ctx, o: consolidated_protection_policy(ctx["instance"], _graph(ctx), **o),
    "iou": lambda ctx, o: best_iou_policy(ctx["instance"])[0],
    "zero": lambda ctx, o: zero_policy(ctx["instance"]),
}

POLICY_NAMES = tuple(_FACTORIES)


def build_policies(instance: MatchingInstance, names, options: dict | None = None) -> dict[str, PolicyHandle]:
    """Instantiate named policies, sharing one DP solve and one graph."""
    options = options or {}
    ctx = {"instance": instance}
    out = {}
    for name in names:
        if name not in _FACTORIES:
            raise ConfigError(f"unknown policy {name!r}")
        out[name] = _FACTORIES[name](ctx, dict(options.get(name, {})))
    return out
