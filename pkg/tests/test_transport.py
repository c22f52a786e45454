import numpy as np
import pytest

from dynmatch.core import SystemState
from dynmatch.monge import build_dominance_graph, priority_tiers
from dynmatch.transport import (
    brute_force_transport,
    enumerate_decisions,
    max_weight_transport,
    tier_greedy_transport,
)
from dynmatch.harness.generators import transport_case
from dynmatch.rng import generator

import oracle
from instances import h22


def test_single_cell():
    res = max_weight_transport([[5]], ((2,), (3,)))
    assert res.q.tolist() == [[2]] and res.value == 10


def test_negative_reward_unused():
    res = max_weight_transport([[-1]], ((2,), (3,)))
    assert res.q.tolist() == [[0]] and res.value == 0


def test_two_by_two():
    res = max_weight_transport([[4, 1], [2, 3]], ((1, 1), (1, 1)))
    assert res.q.tolist() == [[1, 0], [0, 1]] and res.value == 7


def test_ties_resolve_to_smallest_decision():
    res = max_weight_transport([[1, 1], [1, 1]], ((1, 1), (1, 1)))
    assert res.value == 2
    assert res.q.tolist() == [[0, 1], [1, 0]]


def test_enumeration_counts():
    assert len(list(enumerate_decisions((1,), (1,)))) == 2
    assert len(list(enumerate_decisions((1, 1), (1, 1)))) == 7
    only_diag = list(enumerate_decisions((2, 2), (2, 2), cells=[(0, 0), (1, 1)]))
    assert len(only_diag) == 9
    assert all(q[0, 1] == q[1, 0] == 0 for q in only_diag)


def test_matches_independent_enumeration():
    rng = generator(2024)
    for _ in range(60):
        r, x, y = transport_case(rng)
        fast = max_weight_transport(r, SystemState(x, y))
        assert abs(fast.value - oracle.transport_value(r.tolist(), x, y)) <= 1e-9


def test_matches_brute_force_decision():
    rng = generator(7)
    for _ in range(60):
        r, x, y = transport_case(rng)
        a = max_weight_transport(r, SystemState(x, y))
        b = brute_force_transport(r, SystemState(x, y))
        assert abs(a.value - b.value) <= 1e-9
        assert np.array_equal(a.q, b.q)


@pytest.fixture
def tiers_2x2():
    inst = h22()
    return inst.rewards[0], priority_tiers(build_dominance_graph(inst))


def test_tier_walk_cross_pair_only(tiers_2x2):
    r, tiers = tiers_2x2
    res = tier_greedy_transport(r, ((1, 0), (0, 1)), tiers)
    assert res.q.tolist() == [[0, 1], [0, 0]]


def test_tier_walk_natural_pairs_first(tiers_2x2):
    r, tiers = tiers_2x2
    res = tier_greedy_transport(r, ((1, 1), (1, 1)), tiers)
    assert res.q.tolist() == [[1, 0], [0, 1]]


def test_tier_walk_empty_supply(tiers_2x2):
    r, tiers = tiers_2x2
    assert tier_greedy_transport(r, ((2, 3), (0, 0)), tiers).q.sum() == 0
