import json

import numpy as np
import pytest

from dynmatch.core import ArrivalModel, SystemState, iid, new_instance
from dynmatch.dp import (
    PolicyHandle,
    action_set_for,
    compatible_optimal_policy,
    evaluate_policy_exact,
    lattice_size,
    make_compatible,
    optimal_actions,
    optimal_decision,
    optimal_policy,
    solve_exact,
    zero_policy,
)
from dynmatch.errors import BudgetExceeded, NonIntegerCarryOver, PolicyInfeasibleDecision, StateNotCovered
from dynmatch.harness.generators import necessity_case
from dynmatch.monge import audit_compatibility, build_dominance_graph
from dynmatch.policies import greedy_policy
from dynmatch.transport import max_weight_transport

import instances as I
import oracle

# Expected optimal values, computed once by the enumeration oracle in oracle.py.
FROZEN = {
    "h22": (I.h22, 10.608741760253906),
    "h22_lost": (lambda: I.h22(alpha=0, beta=1), 9.656688690185547),
    "vert": (I.vert, 14.792896270751953),
    "vert_lost": (lambda: I.vert(alpha=0, beta=1), 13.777751922607422),
    "line": (I.line, 8.37548828125),
    "costs": (I.with_costs, 5.3154296875),
    "drift": (I.drift, 7.34912109375),
    "h22_single": (lambda: I.h22(T=1), 2.90625),
}

ONE = ArrivalModel.deterministic(1)


@pytest.mark.parametrize("name", sorted(FROZEN))
def test_frozen_optimal_values(name):
    make, expected = FROZEN[name]
    assert abs(solve_exact(make()).expected_value - expected) <= 1e-9


@pytest.mark.parametrize("name", ["h22_lost", "line", "costs", "drift"])
def test_oracle_reproduces_frozen_values(name):
    make, expected = FROZEN[name]
    assert abs(oracle.optimal_value(make()) - expected) <= 1e-9


def test_single_period_is_myopic():
    inst = I.h22(T=1)
    vt = solve_exact(inst)
    for idx in np.ndindex(vt.V[0].shape):
        st = SystemState(idx[:2], idx[2:])
        assert abs(vt.value(0, st) - max_weight_transport(inst.rewards[0], st).value) <= 1e-9


def test_waiting_for_a_better_partner():
    inst, _, _ = necessity_case("col_ii")
    vt = solve_exact(inst)
    r = inst.rewards
    # match (0, 1) now and keep supply 0 for the demand arriving next period
    assert abs(vt.expected_value - (r[0, 0, 1] + inst.beta[0] * r[1, 1, 0])) <= 1e-9
    q = optimal_decision(vt, 0, SystemState((1, 0), (1, 1)))
    assert q.tolist() == [[0, 1], [0, 0]]


def test_zero_rewards_zero_values():
    inst = new_instance(2, 2, 2, np.zeros((2, 2, 2)), 1, 1, *[iid([I.COIN] * 2, 2)] * 2)
    vt = solve_exact(inst)
    assert all(np.all(v == 0) for v in vt.V)


def test_budget_and_carry_checks():
    with pytest.raises(BudgetExceeded):
        solve_exact(I.h22(), budget=10)
    frac = new_instance(1, 1, 2, [[[1]], [[1]]], 0.5, 1, [[ONE], [ONE]], [[ONE], [ONE]])
    with pytest.raises(NonIntegerCarryOver):
        solve_exact(frac)
    assert lattice_size(I.h22(T=1)) == 3 * 2 * 2 * 3


def test_state_outside_lattice():
    vt = solve_exact(I.h22(T=1))
    with pytest.raises(StateNotCovered):
        vt.value(0, SystemState((9, 0), (0, 0)))


def test_value_table_json():
    vt = solve_exact(I.h22(T=1))
    doc = json.loads(vt.to_json())
    assert len(doc["values"]) == 36 and doc["bounds"] == [[[2, 1], [1, 2]]]


def test_full_greedy_when_waiting_never_pays():
    r = [[[3.0]], [[2.0]]]
    inst = new_instance(1, 1, 2, r, 1, 1, iid([I.TRI], 2), iid([I.TRI], 2))
    vt = solve_exact(inst)
    for x in range(3):
        for y in range(3):
            acts = optimal_actions(vt, inst, 0, SystemState((x,), (y,)))
            assert [q.tolist() for q in acts.decisions] == [[[min(x, y)]]]


def test_zero_state_single_action():
    vt = solve_exact(I.h22())
    acts = optimal_actions(vt, None, 0, SystemState((0, 0), (0, 0)))
    assert [q.tolist() for q in acts.decisions] == [[[0, 0], [0, 0]]]


def test_ties_give_several_optima():
    T = 2
    # additive rewards with two equally good demand types
    r = np.array([[[3.0, 2.0], [3.0, 2.0]]] * T)
    inst = new_instance(2, 2, T, r, 1, 1, iid([I.COIN] * 2, T), iid([I.COIN] * 2, T))
    vt = solve_exact(inst)
    acts = optimal_actions(vt, inst, 1, SystemState((1, 1), (1, 0)))
    assert len(acts.decisions) == 2
    assert {int(q.sum()) for q in acts.decisions} == {1}


def test_truncated_action_set():
    inst = new_instance(2, 2, 1, np.zeros((1, 2, 2)), 0, 0, [[ONE, ONE]], [[ONE, ONE]])
    acts = optimal_actions(solve_exact(inst), inst, 0, SystemState((1, 1), (1, 1)), limit=2)
    assert acts.truncated and len(acts.decisions) == 2


def _tie_instance(r):
    return new_instance(2, 2, 1, [r], 0, 0, [[ONE, ONE]], [[ONE, ONE]])


def test_three_way_swap():
    inst = _tie_instance([[2.0, 1.0], [1.0, 0.0]])
    vt = solve_exact(inst)
    g = build_dominance_graph(inst)
    st = SystemState((1, 1), (1, 1))
    aset = action_set_for(vt, 0, st, [[0, 1], [1, 0]])
    assert make_compatible(aset, g).tolist() == [[1, 0], [0, 1]]


def test_compatible_decision_is_fixed_point():
    inst = I.h22(T=1)
    vt = solve_exact(inst)
    st = SystemState((1, 1), (1, 1))
    aset = action_set_for(vt, 0, st, [[1, 0], [0, 1]])
    assert make_compatible(aset, build_dominance_graph(inst)).tolist() == [[1, 0], [0, 1]]


def test_two_way_transfer_uses_leftover():
    inst = _tie_instance([[2.0, 2.0], [0.0, 0.0]])
    vt = solve_exact(inst)
    st = SystemState((1, 0), (1, 1))
    aset = action_set_for(vt, 0, st, [[0, 1], [0, 0]])
    assert make_compatible(aset, build_dominance_graph(inst)).tolist() == [[1, 0], [0, 0]]


def test_compatible_policy_is_optimal_and_clean():
    inst = I.h22()
    vt = solve_exact(inst)
    g = build_dominance_graph(inst)
    for start in ("first", "last"):
        tr = evaluate_policy_exact(inst, compatible_optimal_policy(vt, g, start=start), return_trace=True)
        assert abs(tr.value - vt.expected_value) <= 1e-9
        assert audit_compatibility(inst, g, list(tr.items()), "strong").ok


@pytest.mark.parametrize("name", ["h22", "vert", "line", "costs", "drift"])
def test_optimal_policy_value_consistent(name):
    inst = FROZEN[name][0]()
    vt = solve_exact(inst)
    assert abs(evaluate_policy_exact(inst, optimal_policy(vt)) - vt.expected_value) <= 1e-9


def test_zero_policy_value():
    assert evaluate_policy_exact(I.h22(), zero_policy(I.h22())) == 0.0


def test_greedy_below_optimal():
    inst = I.h22()
    greedy = evaluate_policy_exact(inst, greedy_policy(inst))
    assert greedy < solve_exact(inst).expected_value - 1e-3
    flat = lambda t, x, y: tuple(greedy_policy(inst)(t, SystemState(x, y)).reshape(-1).tolist())
    assert abs(oracle.policy_value(inst, flat) - greedy) <= 1e-9


def test_infeasible_policy_reported():
    bad = PolicyHandle("bad", lambda t, s: np.full((2, 2), 5))
    with pytest.raises(PolicyInfeasibleDecision):
        evaluate_policy_exact(I.h22(), bad)
