from .greedy import greedy_policy
from .horizontal import (
    CollapsedState,
    ProtectionEntry,
    ProtectionTable,
    compute_protection_levels_2x2,
    consolidate_pair,
    consolidated_protection_policy,
    two_round_policy_2x2,
)
from .upgrading import best_iou_policy, iou_bound_premise, iou_compatible, solve_iou
from .vertical import (
    TransformedState,
    VerticalRewards,
    dp_quantity_rule,
    optimal_quantity,
    osa_policy,
    quantity_objective,
    topdown_decision,
    topdown_policy,
    vertical_greedy_policy,
)

__all__ = [
    "CollapsedState",
    "ProtectionEntry",
    "ProtectionTable",
    "TransformedState",
    "VerticalRewards",
    "best_iou_policy",
    "compute_protection_levels_2x2",
    "consolidate_pair",
    "consolidated_protection_policy",
    "dp_quantity_rule",
    "greedy_policy",
    "iou_bound_premise",
    "iou_compatible",
    "optimal_quantity",
    "osa_policy",
    "quantity_objective",
    "solve_iou",
    "topdown_decision",
    "topdown_policy",
    "two_round_policy_2x2",
    "vertical_greedy_policy",
]
