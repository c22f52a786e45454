import numpy as np
import pytest

from dynmatch.core import iid, new_instance
from dynmatch.dp import PolicyHandle, evaluate_policy_exact, optimal_policy, solve_exact, zero_policy
from dynmatch.errors import PolicyInfeasibleDecision
from dynmatch.harness.simulate import run_path, simulate
from dynmatch.policies import greedy_policy
from dynmatch.rng import sample_path

from instances import COIN, TRI, h22, line


def _policies(inst):
    return {"optimal": optimal_policy(solve_exact(inst)), "greedy": greedy_policy(inst)}


def test_optimal_not_worse_than_greedy():
    inst = h22()
    rep = simulate(inst, _policies(inst), 400, 11)
    opt, gr = rep.summary("optimal"), rep.summary("greedy")
    assert opt.mean >= gr.mean - 3 * gr.std_error


def test_zero_rewards_zero_means():
    inst = new_instance(2, 2, 2, np.zeros((2, 2, 2)), 1, 1, iid([COIN] * 2, 2), iid([COIN] * 2, 2))
    rep = simulate(inst, _policies(inst), 50, 1)
    assert all(p.mean == 0 for p in rep.policies)


def test_single_replication_matches_path():
    inst = h22()
    pol = _policies(inst)["optimal"]
    rep = simulate(inst, {"optimal": pol}, 1, 8)
    D, S = sample_path(inst, 8, 0)
    assert rep.summary("optimal").mean == run_path(inst, pol, D, S, 8, 0).total_reward
    assert rep.summary("optimal").std_error == 0.0


def test_common_paths_across_policies():
    inst = h22()
    rep = simulate(inst, {"a": zero_policy(inst), "b": zero_policy(inst)}, 20, 2)
    a, b = rep.summary("a"), rep.summary("b")
    assert [r.demand_abandoned for r in a.replications] == [r.demand_abandoned for r in b.replications]


def test_worker_count_does_not_change_csv():
    inst = h22()
    one = simulate(inst, _policies(inst), 64, 3, workers=1).to_csv()
    assert one == simulate(inst, _policies(inst), 64, 3, workers=1).to_csv()
    assert one == simulate(inst, _policies(inst), 64, 3, workers=8).to_csv()


def test_fractional_carry_reproducible():
    base = line()
    inst = new_instance(3, 3, 2, base.rewards, 0.5, 0.5, base.demand_arrivals, base.supply_arrivals)
    pol = {"greedy": greedy_policy(inst)}
    a = simulate(inst, pol, 30, 4).to_csv()
    assert a == simulate(inst, pol, 30, 4, workers=4).to_csv()


def test_csv_layout():
    inst = h22()
    text = simulate(inst, _policies(inst), 3, 0).to_csv().splitlines()
    assert text[0] == (
        "kind,policy,replication,total_reward,std_error,demand_abandoned,supply_abandoned,"
        "matched_t1,matched_t2,matched_t3"
    )
    assert sum(line.startswith("replication,") for line in text) == 6
    assert [line.split(",")[1] for line in text if line.startswith("summary,")] == ["optimal", "greedy"]


def test_abandonment_accounting():
    inst = h22(alpha=0, beta=0)
    rep = simulate(inst, {"zero": zero_policy(inst)}, 200, 6)
    s = rep.summary("zero")
    # nothing is matched, so every arrival is lost
    assert abs(s.demand_abandoned - 3 * 1.5) < 0.3
    assert abs(s.supply_abandoned - 3 * 1.5) < 0.3


def test_simulation_agrees_with_exact():
    inst = h22(T=2)
    pol = _policies(inst)
    rep = simulate(inst, pol, 10_000, 21)
    for name, p in pol.items():
        exact = evaluate_policy_exact(inst, p)
        s = rep.summary(name)
        assert abs(s.mean - exact) <= 3 * s.std_error


def test_infeasible_policy_raises():
    inst = h22()
    bad = PolicyHandle("bad", lambda t, s: np.full((2, 2), 9))
    with pytest.raises(PolicyInfeasibleDecision, match="bad at period 0"):
        simulate(inst, [bad], 1, 0)
