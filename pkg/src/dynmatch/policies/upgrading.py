"""Intended-pairs-first policy for one-level upgrading.

Class ``i`` demand can be served by class ``i`` supply (the intended
pair) or upgraded with class ``i - 1`` supply. The policy class considered
here only upgrades once the intended pair is matched as far as possible.
"""

from __future__ import annotations

import numpy as np

from ..core import TOL, MatchingInstance, SystemState
from ..dp import PolicyHandle, ValueTable, optimal_policy, solve_exact
from ..errors import AssumptionViolated, NotOneLevelStructure
from ..models import is_one_level


def iou_compatible(state: SystemState, q: np.ndarray) -> bool:
    """Upgrades touching class ``i`` need the intended pair ``(i, i)`` exhausted."""
    n = len(state.x)
    for i in range(n):
        if q[i, i] < min(state.x[i], state.y[i]):
            if i >= 1 and q[i, i - 1] > 0:
                return False
            if i + 1 < n and q[i + 1, i] > 0:
                return False
    return True


def one_level_cells(n: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(n) for j in range(n) if j in (i, i - 1)]


def solve_iou(instance: MatchingInstance) -> ValueTable:
    if not is_one_level(instance):
        raise NotOneLevelStructure("rewards must vanish outside intended pairs and one-level upgrades")
    r = instance.rewards
    for t in range(instance.T - 1):
        for i in range(instance.n):
            if r[t, i, i] < max(instance.alpha[t], instance.beta[t]) * r[t + 1, i, i] - TOL:
                raise AssumptionViolated(f"intended pair {i} gains by waiting at t={t}")
    return solve_exact(instance, action_filter=iou_compatible, cells=one_level_cells(instance.n))


def iou_bound_premise(instance: MatchingInstance) -> list[str]:
    """Conditions behind the half-of-optimal guarantee that fail on ``instance``.

    Two are checked: intended pairs must not gain by waiting, and no
    one-level upgrade may earn more than either intended pair it touches.
    The second is what the transfer argument charges against; without it
    the ratio can fall below one half.
    """
    r = instance.rewards
    bad = []
    for t in range(instance.T):
        for i in range(instance.n):
            if t + 1 < instance.T and r[t, i, i] < max(instance.alpha[t], instance.beta[t]) * r[t + 1, i, i] - TOL:
                bad.append(f"intended pair {i} gains by waiting at t={t}")
            if i + 1 < instance.n and r[t, i + 1, i] > min(r[t, i, i], r[t, i + 1, i + 1]) + TOL:
                bad.append(f"upgrade ({i + 1}, {i}) beats an intended pair at t={t}")
    return bad


def best_iou_policy(instance: MatchingInstance) -> tuple[PolicyHandle, float]:
    """Best policy among those prioritizing intended pairs, with its exact value."""
    vt = solve_iou(instance)
    return optimal_policy(vt, "iou"), vt.expected_value
