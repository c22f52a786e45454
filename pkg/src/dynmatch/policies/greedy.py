"""Myopic matching."""

from __future__ import annotations

from ..core import TOL, MatchingInstance, SystemState
from ..dp import PolicyHandle
from ..monge import DominanceGraph, priority_tiers
from ..transport import max_weight_transport, tier_greedy_transport


def greedy_policy(instance: MatchingInstance, graph: DominanceGraph | None = None) -> PolicyHandle:
    """Best single-period matching in every period.

    With a valid strong graph the tier walk is preferred among the
    myopic optima. It is used only when it reaches the flow solver's value,
    which can fail when a higher tier pair blocks two better cross pairs.
    """
    cache: dict = {}
    tiers = priority_tiers(graph) if graph is not None and graph.strong_valid else None

    def solve(t: int, state: SystemState):
        best = max_weight_transport(instance.rewards[t], state)
        if tiers is not None:
            walk = tier_greedy_transport(instance.rewards[t], state, tiers)
            if walk.value >= best.value - TOL:
                return walk.q
        return best.q

    def rule(t: int, state: SystemState):
        key = (t, state.key)
        if key not in cache:
            cache[key] = solve(t, state)
        return cache[key]

    return PolicyHandle("greedy", rule)
