"""Exact and heuristic policies for periodic-review two-sided matching."""

from .core import (
    ArrivalModel,
    MatchingDecision,
    MatchingInstance,
    PostMatchState,
    SystemState,
    WaitingCosts,
    fold_waiting_costs,
    iid,
    instance_from_json,
    instance_to_json,
    new_instance,
    waiting_cost_constant,
)
from .dp import (
    PolicyHandle,
    ValueTable,
    compatible_optimal_policy,
    evaluate_policy_exact,
    make_compatible,
    optimal_actions,
    optimal_policy,
    solve_exact,
)
from .monge import audit_compatibility, build_dominance_graph, perfect_pairs, priority_tiers
from .transport import max_weight_transport

__version__ = "0.1.0"

__all__ = [
    "ArrivalModel",
    "MatchingDecision",
    "MatchingInstance",
    "PolicyHandle",
    "PostMatchState",
    "SystemState",
    "ValueTable",
    "WaitingCosts",
    "audit_compatibility",
    "build_dominance_graph",
    "compatible_optimal_policy",
    "evaluate_policy_exact",
    "fold_waiting_costs",
    "iid",
    "instance_from_json",
    "instance_to_json",
    "make_compatible",
    "max_weight_transport",
    "new_instance",
    "optimal_actions",
    "optimal_policy",
    "perfect_pairs",
    "priority_tiers",
    "solve_exact",
    "waiting_cost_constant",
]
