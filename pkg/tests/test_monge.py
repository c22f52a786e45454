import json

import numpy as np
import pytest

from dynmatch.core import ArrivalModel, SystemState, iid, new_instance
from dynmatch.dp import evaluate_policy_exact
from dynmatch.errors import NotNeighbors, StrongConditionFails
from dynmatch.models import (
    LineLayout,
    UpgradeParams,
    directed_line,
    euclidean_instance,
    upgrading_instance,
)
from dynmatch.monge import (
    audit_compatibility,
    build_dominance_graph,
    decision_violations,
    is_perfect_pair,
    neighbors,
    perfect_pairs,
    priority_tiers,
    weak_dominates,
)
from dynmatch.policies import greedy_policy

from instances import COIN, h22, vert

ONE = ArrivalModel.deterministic(1)


def _arr(m, n, T):
    return iid([COIN] * m, T), iid([COIN] * n, T)


def test_vertical_rows_dominate_downward():
    inst = vert()
    for j in range(2):
        assert weak_dominates(inst, (0, j), (1, j))
        assert not weak_dominates(inst, (1, j), (0, j))


def test_line_shorter_distance_dominates():
    inst = directed_line(LineLayout((1, 2), (0,), [5, 5]), 1, 1, _arr(2, 1, 2))
    assert weak_dominates(inst, (0, 0), (1, 0))
    assert not weak_dominates(inst, (1, 0), (0, 0))


def test_pair_is_not_its_own_neighbor():
    with pytest.raises(NotNeighbors):
        weak_dominates(h22(), (0, 0), (0, 0))
    with pytest.raises(NotNeighbors):
        weak_dominates(h22(), (0, 0), (1, 1))


def test_neighbors():
    assert neighbors(2, 3, (0, 1)) == [(0, 0), (0, 2), (1, 1)]


def test_two_by_two_graph():
    g = build_dominance_graph(h22())
    assert g.strong_valid
    for p in [(0, 0), (1, 1)]:
        for b in neighbors(2, 2, p):
            assert g.dominates(p, b)
    assert perfect_pairs(h22(), g) == [(0, 0), (1, 1)]


def test_one_level_upgrade_can_lose_priority():
    T = 2
    inst = upgrading_instance(UpgradeParams(np.array([[10, 6, 5]] * T), (3, 2, 1), True), 1, 1, _arr(3, 3, T))
    # the next class's upgrade value exceeds the one-step cost gap
    assert not weak_dominates(inst, (1, 1), (1, 0))
    assert weak_dominates(inst, (2, 2), (2, 1))


def test_equal_rewards_all_ties():
    r = [[[2.0, 2.0], [2.0, 2.0]]] * 2
    inst = new_instance(2, 2, 2, r, 0, 0, *_arr(2, 2, 2))
    g = build_dominance_graph(inst)
    assert g.strong_valid
    for p in [(0, 0), (0, 1), (1, 0), (1, 1)]:
        for b in neighbors(2, 2, p):
            assert (p, b) in g.weak
    # mutual edges keep only one orientation
    assert len(g.oriented) == len(g.weak) // 2


def test_tiers_two_by_two():
    tiers = priority_tiers(build_dominance_graph(h22()))
    assert tiers.to_lists() == [[[0, 0], [1, 1]], [[0, 1], [1, 0]]]
    assert tiers.tier_of((1, 0)) == 1


def test_tiers_colocated_first():
    inst = directed_line(LineLayout((0, 1, 2), (0, 1, 2), [5, 4]), 1, 1, _arr(3, 3, 2))
    tiers = priority_tiers(build_dominance_graph(inst))
    assert tiers.tiers[0] == frozenset({(0, 0), (1, 1), (2, 2)})


def test_single_pair_one_tier():
    inst = new_instance(1, 1, 1, [[[3]]], 0, 0, [[ONE]], [[ONE]])
    assert len(priority_tiers(build_dominance_graph(inst)).tiers) == 1


def test_euclidean_colocated_perfect():
    pts = [(0, 0), (1, 0)]
    inst = euclidean_instance(pts, pts, [6, 5], [1, 0.5], 1, 1, _arr(2, 2, 2))
    g = build_dominance_graph(inst)
    assert is_perfect_pair(inst, g, 0, 0) and is_perfect_pair(inst, g, 1, 1)


def test_cross_pair_not_perfect():
    inst = h22()
    assert not is_perfect_pair(inst, build_dominance_graph(inst), 0, 1)


def test_growing_reward_not_perfect():
    r = [[[1.0]], [[5.0]]]
    inst = new_instance(1, 1, 2, r, 1, 1, [[ONE], [ONE]], [[ONE], [ONE]])
    assert not is_perfect_pair(inst, build_dominance_graph(inst), 0, 0)


def test_perfect_pairs_need_strong_relation():
    r = [[[3.0, 2.5], [2.5, 0.0]]]
    inst = new_instance(2, 2, 1, r, 0, 0, [[ONE, ONE]], [[ONE, ONE]])
    g = build_dominance_graph(inst)
    assert not g.strong_valid and g.exchange_failures
    with pytest.raises(StrongConditionFails):
        perfect_pairs(inst, g)
    with pytest.raises(StrongConditionFails):
        priority_tiers(g)


def test_cross_matching_trace():
    inst = h22()
    g = build_dominance_graph(inst)
    trace = [(0, SystemState((1, 1), (1, 1)), np.array([[0, 1], [1, 0]]))]
    assert audit_compatibility(inst, g, trace, "weak").ok
    strong = audit_compatibility(inst, g, trace, "strong")
    assert not strong.ok
    doc = json.loads(strong.to_json())
    assert doc["mode"] == "strong" and doc["violations"][0]["t"] == 0


def test_zero_decisions_clean():
    inst = h22()
    g = build_dominance_graph(inst)
    trace = [(SystemState((2, 1), (0, 3)), np.zeros((2, 2), dtype=int))]
    assert audit_compatibility(inst, g, trace, "weak").ok
    assert audit_compatibility(inst, g, trace, "strong").ok


def test_greedy_trace_clean():
    inst = h22()
    g = build_dominance_graph(inst)
    trace = evaluate_policy_exact(inst, greedy_policy(inst, g), return_trace=True)
    assert audit_compatibility(inst, g, list(trace.items()), "strong").ok


def test_residual_counts_dominated_units():
    g = build_dominance_graph(h22())
    st = SystemState((1, 0), (1, 1))
    assert decision_violations(g, st, [[0, 1], [0, 0]], "strong")
    assert not decision_violations(g, st, [[1, 0], [0, 0]], "strong")


def test_edge_list_export():
    rows = build_dominance_graph(h22()).to_edge_list()
    assert {"dominant": [0, 0], "dominated": [0, 1], "strong": True, "strong_local": True, "mutual": False} in rows
