"""Randomized property suites checked against the exact DP oracle.

Each trial draws an instance whose premise holds by construction, runs one
structural check, and returns a verdict. A failing trial carries the
instance JSON so it can be replayed with ``instance_from_json``.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..core import TOL, SystemState, fold_waiting_costs, instance_to_json, waiting_cost_constant
from ..dp import (
    compatible_optimal_policy,
    evaluate_policy_exact,
    optimal_actions,
    optimal_policy,
    solve_exact,
)
from ..errors import UnknownSuite
from ..monge import (
    DominanceGraph,
    audit_compatibility,
    build_dominance_graph,
    perfect_pairs,
)
from ..policies import (
    best_iou_policy,
    iou_bound_premise,
    compute_protection_levels_2x2,
    dp_quantity_rule,
    greedy_policy,
    optimal_quantity,
    osa_policy,
    quantity_objective,
    topdown_policy,
    two_round_policy_2x2,
    vertical_greedy_policy,
)
from ..rng import generator
from ..transport import brute_force_transport, enumerate_decisions, max_weight_transport
from . import generators as gen


@dataclass
class TrialResult:
    trial: int
    ok: bool
    message: str = ""
    instance: str | None = None
    stats: dict = field(default_factory=dict)


@dataclass
class SuiteReport:
    name: str
    trials: int
    seed: int
    results: list

    @property
    def failures(self) -> list[TrialResult]:
        return [r for r in self.results if not r.ok]

    @property
    def passed(self) -> bool:
        return not self.failures

    def stat(self, key: str) -> list:
        return [r.stats[key] for r in self.results if key in r.stats]

    def to_dict(self) -> dict:
        out = {
            "suite": self.name,
            "trials": self.trials,
            "seed": self.seed,
            "passed": self.passed,
            "failures": [
                {"trial": r.trial, "message": r.message, "instance": r.instance} for r in self.failures
            ],
        }
        ratios = self.stat("ratio")
        if ratios:
            out["min_ratio"] = min(ratios)
        return out

    def summary_line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = ""
        ratios = self.stat("ratio")
        if ratios:
            extra = f" min_ratio={min(ratios):.6f}"
        return f"{status} {self.name}: {self.trials - len(self.failures)}/{self.trials}{extra}"


def _fail(inst, message: str) -> tuple:
    return False, message, inst


def _ok(inst, **stats) -> tuple:
    return True, "", inst, stats


# ------------------------------------------------------------------ checks


def transport_oracle(rng):
    r, x, y = gen.transport_case(rng)
    state = SystemState(x, y)
    fast = max_weight_transport(r, state)
    slow = brute_force_transport(r, state)
    if abs(fast.value - slow.value) > TOL:
        return False, f"flow {fast.value} vs enumeration {slow.value}", None, {"r": r.tolist(), "x": list(x), "y": list(y)}
    return True, "", None, {}


def compatibility(rng):
    inst = gen.strong_valid_case(rng)
    graph = build_dominance_graph(inst)
    vt = solve_exact(inst)
    for start in ("first", "last"):
        pol = compatible_optimal_policy(vt, graph, start=start)
        trace = evaluate_policy_exact(inst, pol, return_trace=True)
        report = audit_compatibility(inst, graph, list(trace.items()), "strong")
        if not report.ok:
            return _fail(inst, f"start={start}: {report.to_json()}")
        if abs(trace.value - vt.expected_value) > TOL:
            return _fail(inst, f"start={start}: value {trace.value} vs optimum {vt.expected_value}")
    return _ok(inst)


def perfect_pairs_check(rng):
    for _ in range(500):
        inst = gen.strong_valid_case(rng)
        graph = build_dominance_graph(inst)
        pairs = perfect_pairs(inst, graph)
        if pairs:
            break
    else:
        return _fail(None, "no instance with a perfect pair drawn")
    vt = solve_exact(inst)
    trace = evaluate_policy_exact(inst, optimal_policy(vt), return_trace=True)
    for t, st, _ in trace.items():
        for i, j in pairs:
            k = min(st.x[i], st.y[j])
            x, y = list(st.x), list(st.y)
            x[i] -= k
            y[j] -= k
            best = -np.inf
            for q in enumerate_decisions(x, y):
                q[i, j] += k
                best = max(best, vt.objective(t, st, q))
            if best < vt.value(t, st) - TOL:
                return _fail(inst, f"pair {(i, j)} not fully matched by any optimum at t={t}, {st}")
    return _ok(inst)


def _levels_ok(table, t) -> str:
    for side in ("plus", "minus"):
        prev = None
        for ib in table.ib_range(t):
            e = table.get(t, ib)
            pd, ps = getattr(e, "p_d_" + side), getattr(e, "p_s_" + side)
            if pd is None:
                prev = None
                continue
            if pd - ps != ib:
                return f"t={t} ib={ib} {side}: p_d - p_s = {pd - ps}"
            if prev is not None and not (0 <= pd - prev[0] <= 1 and -1 <= ps - prev[1] <= 0):
                return f"t={t} ib={ib} {side}: step from {prev} to {(pd, ps)}"
            prev = (pd, ps)
    return ""


def protection_2x2(rng):
    ab = int(rng.integers(2))
    inst = gen.horizontal_2x2_case(rng, alpha=ab, beta=ab)
    table = compute_protection_levels_2x2(inst)
    vt = solve_exact(inst)
    value = evaluate_policy_exact(inst, two_round_policy_2x2(inst, table))
    if abs(value - vt.expected_value) > TOL:
        return _fail(inst, f"two-round value {value} vs optimum {vt.expected_value}")
    for t in range(inst.T):
        for ib in table.ib_range(t):
            e = table.get(t, ib)
            for side in ("plus", "minus"):
                pd, ps = getattr(e, "p_d_" + side), getattr(e, "p_s_" + side)
                if pd is not None and pd - ps != ib:
                    return _fail(inst, f"t={t} ib={ib}: p_d - p_s = {pd - ps}")
    return _ok(inst)


def protection_monotone(rng):
    ab = int(rng.integers(2))
    inst = gen.horizontal_2x2_case(rng, alpha=ab, beta=ab)
    table = compute_protection_levels_2x2(inst)
    for t in range(inst.T):
        msg = _levels_ok(table, t)
        if msg:
            return _fail(inst, msg)
    return _ok(inst)


def lost_demand(rng):
    inst = gen.horizontal_2x2_case(rng, alpha=0, beta=1)
    table = compute_protection_levels_2x2(inst)
    for t in range(inst.T):
        for side in ("plus", "minus"):
            levels = {getattr(table.get(t, ib), "p_s_" + side) for ib in table.ib_range(t)} - {None}
            if len(levels) > 1:
                return _fail(inst, f"t={t} {side}: supply levels {sorted(levels)}")
    vt = solve_exact(inst)
    value = evaluate_policy_exact(inst, two_round_policy_2x2(inst, table))
    if abs(value - vt.expected_value) > TOL:
        return _fail(inst, f"two-round value {value} vs optimum {vt.expected_value}")
    return _ok(inst)


def iou_bound(rng):
    inst = gen.one_level_case(rng)
    broken = iou_bound_premise(inst)
    if broken:
        return _fail(inst, f"premise fails: {broken[0]}")
    _, value = best_iou_policy(inst)
    opt = solve_exact(inst).expected_value
    ratio = value / opt if opt > TOL else 1.0
    if ratio < 0.5 - TOL:
        return False, f"ratio {ratio}", inst, {"ratio": ratio}
    return _ok(inst, ratio=ratio)


def _vertical(rng):
    ab = [(1, 1), (0, 1)][int(rng.integers(2))]
    maker = gen.vertical_case if rng.random() < 0.5 else gen.vertical_nonadditive_case
    return maker(rng, *ab)


def topdown_check(inst):
    vt = solve_exact(inst)
    m = inst.m
    for t in range(inst.T):
        for idx in np.ndindex(vt.V[t].shape):
            st = SystemState(idx[:m], idx[m:])
            if abs(max(quantity_objective(vt, t, st)) - vt.value(t, st)) > TOL:
                return _fail(inst, f"no optimal top-down decision at t={t}, {st}")
    value = evaluate_policy_exact(inst, topdown_policy(inst, dp_quantity_rule(vt)))
    if abs(value - vt.expected_value) > TOL:
        return _fail(inst, f"top-down value {value} vs optimum {vt.expected_value}")
    return _ok(inst)


def topdown(rng):
    return topdown_check(_vertical(rng))


def q_monotone_check(inst):
    vt = solve_exact(inst)
    m, n = inst.m, inst.n
    for t in range(inst.T):
        Q = {idx: optimal_quantity(vt, t, SystemState(idx[:m], idx[m:])) for idx in np.ndindex(vt.V[t].shape)}
        for idx, q0 in Q.items():
            resp = []
            for k in range(m + n):
                nb = list(idx)
                nb[k] += 1
                d = Q.get(tuple(nb))
                resp.append(None if d is None else d - q0)
                if d is not None and not 0 <= d - q0 <= 1:
                    return _fail(inst, f"t={t} state={idx} unit {k}: step {d - q0}")
            for k in list(range(m - 1)) + list(range(m, m + n - 1)):
                if resp[k] is not None and resp[k + 1] is not None and resp[k] < resp[k + 1]:
                    return _fail(inst, f"t={t} state={idx}: responses {resp} not quality ordered")
    return _ok(inst)


def q_monotone(rng):
    return q_monotone_check(_vertical(rng))


def osa_dominance(rng):
    inst = _vertical(rng)
    opt = solve_exact(inst).expected_value
    greedy = evaluate_policy_exact(inst, vertical_greedy_policy(inst))
    osa = evaluate_policy_exact(inst, osa_policy(inst))
    if osa < greedy - TOL:
        return _fail(inst, f"OSA {osa} below greedy {greedy}")
    if osa > opt + TOL:
        return _fail(inst, f"OSA {osa} above optimum {opt}")
    return _ok(inst)


def waiting_costs(rng):
    base = gen.general_case(rng) if rng.random() < 0.5 else gen.strong_valid_case(rng)
    inst = gen.with_waiting_costs(rng, base)
    folded = fold_waiting_costs(inst)
    raw_vt, fold_vt = solve_exact(inst), solve_exact(folded)
    const = waiting_cost_constant(inst)
    if abs(fold_vt.expected_value - raw_vt.expected_value - const) > TOL:
        return _fail(inst, f"folded {fold_vt.expected_value} raw {raw_vt.expected_value} constant {const}")
    pol = greedy_policy(base)
    gap = evaluate_policy_exact(folded, pol) - evaluate_policy_exact(inst, pol)
    if abs(gap - const) > TOL:
        return _fail(inst, f"fixed-policy gap {gap} vs constant {const}")
    for _ in range(20):
        t = int(rng.integers(inst.T))
        bx, by = raw_vt.bounds[t]
        st = SystemState(tuple(int(rng.integers(b + 1)) for b in bx), tuple(int(rng.integers(b + 1)) for b in by))
        a = {d.tobytes() for d in optimal_actions(raw_vt, inst, t, st).decisions}
        b = {d.tobytes() for d in optimal_actions(fold_vt, folded, t, st).decisions}
        if a != b:
            return _fail(inst, f"argmax sets differ at t={t}, {st}")
    return _ok(inst)


def nominal_graph(m: int, n: int, edges) -> DominanceGraph:
    """Graph holding only the given priority edges, for auditing counterexamples."""
    edges = frozenset((tuple(a), tuple(b)) for a, b in edges)
    pairs = [(i, j) for i in range(m) for j in range(n)]
    left = {p: frozenset(b for a, b in edges if a == p and b[0] == p[0]) for p in pairs}
    right = {p: frozenset(b for a, b in edges if a == p and b[1] == p[1]) for p in pairs}
    return DominanceGraph(m, n, edges, True, edges, edges, edges, edges, left, right)


def necessity_check(clause: str) -> tuple[bool, str, object]:
    inst, dominant, dominated = gen.necessity_case(clause)
    vt = solve_exact(inst)
    trace = evaluate_policy_exact(inst, optimal_policy(vt), return_trace=True)
    for t, st, _ in trace.items():
        if len(optimal_actions(vt, inst, t, st).decisions) != 1:
            return False, f"{clause}: optimum not unique at t={t}, {st}", inst
    if clause == "strong":
        i, j = dominant
        rivals = [(dominant, (i, k)) for k in range(inst.n) if k != j] + [(dominant, (k, j)) for k in range(inst.m) if k != i]
        graph, mode = nominal_graph(inst.m, inst.n, rivals), "strong"
    else:
        graph, mode = nominal_graph(inst.m, inst.n, [(dominant, dominated)]), "weak"
    report = audit_compatibility(inst, graph, list(trace.items()), mode)
    if report.ok:
        return False, f"{clause}: optimal trace respects the nominal priority", inst
    return True, "", inst


def robust_necessity(rng, trial: int):
    clause = gen.NECESSITY_CLAUSES[trial % len(gen.NECESSITY_CLAUSES)]
    ok, msg, inst = necessity_check(clause)
    return ok, msg, inst, {"clause": clause}


SUITES = {
    "compatibility": compatibility,
    "perfect_pairs": perfect_pairs_check,
    "protection_2x2": protection_2x2,
    "protection_monotone": protection_monotone,
    "lost_demand": lost_demand,
    "iou_bound": iou_bound,
    "topdown": topdown,
    "osa_dominance": osa_dominance,
    "q_monotone": q_monotone,
    "waiting_costs": waiting_costs,
    "transport_oracle": transport_oracle,
    "robust_necessity": robust_necessity,
}


def _run_trial(name: str, seed: int, trial: int) -> TrialResult:
    rng = generator(seed, trial)
    check = SUITES[name]
    out = check(rng, trial) if name == "robust_necessity" else check(rng)
    ok, msg, inst = out[:3]
    stats = out[3] if len(out) > 3 else {}
    if inst is not None and not ok:
        payload = instance_to_json(inst)
    elif not ok:
        payload = repr(stats)
    else:
        payload = None
    return TrialResult(trial, bool(ok), msg, payload, stats)


def verify_suite(name: str, trials: int, seed: int = 0, workers: int = 1) -> SuiteReport:
    """Run ``trials`` independent trials of one suite.

    Trial ``k`` draws from the stream ``(seed, k)``, so results do not
    depend on ``workers``.
    """
    if name not in SUITES:
        raise UnknownSuite(f"unknown suite {name!r}; choose from {', '.join(sorted(SUITES))}")
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(lambda k: _run_trial(name, seed, k), range(trials)))
    else:
        results = [_run_trial(name, seed, k) for k in range(trials)]
    return SuiteReport(name, trials, seed, results)
