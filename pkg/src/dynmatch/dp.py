"""Exact backward induction on small integer instances.

Values live in dense arrays over a per-period box of states. The box for
period ``t`` bounds each type by its largest reachable quantity: the
largest arrival of period ``t`` plus the carried bound of period ``t - 1``.

The maximization over matrices ``Q`` is split in two. Any ``Q`` consumes
a demand vector ``a`` and a supply vector ``b`` with equal totals, and the
best reward for a given ``(a, b)`` does not depend on the state. So

    V_t(x, y) = max_{a <= x, b <= y} Tr_t(a, b) + W_t(x - a, y - b)

where ``W_t`` is the expected value of the post-matching state and
``Tr_t`` is a transport with exact marginals. ``Tr_t`` is tabulated once
per period.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .core import (
    TOL,
    MatchingInstance,
    PostMatchState,
    SystemState,
    apply_decision,
    as_matrix,
    as_state,
    joint_outcomes,
    period_objective,
    transition,
)
from .errors import (
    BudgetExceeded,
    Infeasible,
    NotOptimalAfterTransfer,
    PolicyInfeasibleDecision,
    StateNotCovered,
    StrongConditionFails,
)
from .monge import DominanceGraph, decision_violations
from .transport import enumerate_decisions

DEFAULT_BUDGET = 5_000_000
ACTION_CAP = 10_000

ActionFilter = Callable[[SystemState, np.ndarray], bool]


# ---------------------------------------------------------------- bounds


def state_bounds(instance: MatchingInstance) -> list[tuple[tuple[int, ...], tuple[int, ...]]]:
    """Largest reachable quantity per type and period, as ``(bx, by)``."""
    out = []
    bx = [0] * instance.m
    by = [0] * instance.n
    for t in range(instance.T):
        carry_a = instance.alpha[t - 1] if t else 0.0
        carry_b = instance.beta[t - 1] if t else 0.0
        bx = [int(carry_a) * b + a.max for b, a in zip(bx, instance.demand_arrivals[t])]
        by = [int(carry_b) * b + a.max for b, a in zip(by, instance.supply_arrivals[t])]
        out.append((tuple(bx), tuple(by)))
    return out


def lattice_size(instance: MatchingInstance) -> int:
    return int(sum(np.prod([b + 1 for b in bx + by]) for bx, by in state_bounds(instance)))


def _expect(V_next: np.ndarray, post_shape: Sequence[int], carries: Sequence[int], pmfs) -> np.ndarray:
    """``E V_next(carry * w + arrivals)`` for every post state ``w`` in the box."""
    out = V_next
    for axis, (c, pmf) in enumerate(zip(carries, pmfs)):
        base = c * np.arange(post_shape[axis])
        acc = None
        for s, p in pmf:
            term = p * np.take(out, base + s, axis=axis)
            acc = term if acc is None else acc + term
        out = acc
    return out


# ---------------------------------------------------------------- transport tables


def _vectors_by_total(bounds: Sequence[int]) -> dict[int, list[tuple[int, ...]]]:
    groups: dict[int, list[tuple[int, ...]]] = {}
    for v in itertools.product(*[range(b + 1) for b in bounds]):
        groups.setdefault(sum(v), []).append(v)
    return groups


def _transport_table(r: np.ndarray, bx, by) -> dict:
    """Best reward using exactly ``a`` demand and ``b`` supply units.

    Values map ``(a, b) -> (reward, j)`` where ``j`` is the supply type that
    takes the first available demand unit in an optimal plan.
    """
    m, n = r.shape
    ga, gb = _vectors_by_total(bx), _vectors_by_total(by)
    table: dict = {}
    for s in sorted(set(ga) & set(gb)):
        for a in ga[s]:
            for b in gb[s]:
                if s == 0:
                    table[(a, b)] = (0.0, -1)
                    continue
                i = next(k for k in range(m) if a[k] > 0)
                a2 = a[:i] + (a[i] - 1,) + a[i + 1 :]
                best, arg = -np.inf, -1
                for j in range(n):
                    if b[j] == 0:
                        continue
                    b2 = b[:j] + (b[j] - 1,) + b[j + 1 :]
                    val = r[i, j] + table[(a2, b2)][0]
                    if val > best + TOL:
                        best, arg = val, j
                table[(a, b)] = (best, arg)
    return table


def _plan(table: dict, a: tuple, b: tuple, m: int, n: int) -> np.ndarray:
    q = np.zeros((m, n), dtype=np.int64)
    while sum(a):
        _, j = table[(a, b)]
        i = next(k for k in range(m) if a[k] > 0)
        q[i, j] += 1
        a = a[:i] + (a[i] - 1,) + a[i + 1 :]
        b = b[:j] + (b[j] - 1,) + b[j + 1 :]
    return q


# ---------------------------------------------------------------- value table


@dataclass
class ValueTable:
    """Optimal values over the bounded state lattice.

    ``V[t]`` is indexed by ``x + y``; ``W[t]`` holds the expected
    continuation of each post-matching state net of waiting costs.
    """

    instance: MatchingInstance
    bounds: list
    V: list
    W: list
    tables: list = field(repr=False)
    action_filter: ActionFilter | None = None
    cells: tuple | None = None

    def covers(self, t: int, state: SystemState) -> bool:
        if not 0 <= t < self.instance.T:
            return False
        bx, by = self.bounds[t]
        return all(0 <= v <= b for v, b in zip(state.x + state.y, bx + by))

    def _check(self, t: int, state: SystemState) -> None:
        if not self.covers(t, state):
            raise StateNotCovered(f"state {state} is outside the lattice of period {t}")

    def value(self, t: int, state) -> float:
        state = as_state(state) if not isinstance(state, SystemState) else state
        self._check(t, state)
        return float(self.V[t][state.key])

    def post_value(self, t: int, post: PostMatchState) -> float:
        return float(self.W[t][tuple(post.u) + tuple(post.v)])

    def objective(self, t: int, state: SystemState, q) -> float:
        """Immediate reward plus expected continuation of one decision."""
        q = as_matrix(q)
        post = apply_decision(state, q)
        return float(np.sum(self.instance.rewards[t] * q)) + self.post_value(t, post)

    @property
    def expected_value(self) -> float:
        """Optimal expected total reward from the random first-period state."""
        inst = self.instance
        pmfs = [a.outcomes() for a in inst.demand_arrivals[0]] + [a.outcomes() for a in inst.supply_arrivals[0]]
        shape = [1] * (inst.m + inst.n)
        return float(_expect(self.V[0], shape, [0] * len(shape), pmfs).reshape(-1)[0])

    @property
    def values(self) -> dict:
        out = {}
        for t, arr in enumerate(self.V):
            for idx in np.ndindex(arr.shape):
                out[(t, idx)] = float(arr[idx])
        return out

    def to_json(self) -> str:
        inst = self.instance
        rows = [
            {"t": t, "x": list(k[: inst.m]), "y": list(k[inst.m :]), "value": v}
            for (t, k), v in sorted(self.values.items())
        ]
        return json.dumps({"bounds": [[list(bx), list(by)] for bx, by in self.bounds], "values": rows})


def solve_exact(
    instance: MatchingInstance,
    budget: int = DEFAULT_BUDGET,
    action_filter: ActionFilter | None = None,
    cells: Iterable[tuple[int, int]] | None = None,
) -> ValueTable:
    """Backward induction over the full bounded lattice.

    Args:
        budget: maximum number of (period, state) entries.
        action_filter: optional predicate restricting admissible decisions.
            Restricted problems are maximized by enumerating decisions state
            by state, which is much slower.
        cells: pairs allowed to be positive in restricted enumeration.
    """
    instance.require_exact_carry()
    size = lattice_size(instance)
    if size > budget:
        raise BudgetExceeded(f"state lattice has {size} entries, budget is {budget}")
    m, n, T = instance.m, instance.n, instance.T
    bounds = state_bounds(instance)
    V: list = [None] * T
    W: list = [None] * T
    tables: list = [None] * T
    cells = tuple(sorted(cells)) if cells is not None else None
    for t in reversed(range(T)):
        bx, by = bounds[t]
        shape = tuple(b + 1 for b in bx + by)
        if t == T - 1:
            w = np.zeros(shape)
        else:
            carries = [int(instance.alpha[t])] * m + [int(instance.beta[t])] * n
            pmfs = [a.outcomes() for a in instance.demand_arrivals[t + 1]] + [
                a.outcomes() for a in instance.supply_arrivals[t + 1]
            ]
            w = _expect(V[t + 1], shape, carries, pmfs)
        wc = instance.waiting_costs
        if wc is not None:
            lin = np.zeros(shape)
            for k, cost in enumerate(list(wc.c[t]) + list(wc.h[t])):
                sh = [1] * len(shape)
                sh[k] = shape[k]
                lin = lin + cost * np.arange(shape[k]).reshape(sh)
            w = w - lin
        W[t] = w
        r = instance.rewards[t]
        if action_filter is None and cells is None:
            tables[t] = _transport_table(r, bx, by)
            V[t] = _maximize_by_consumption(w, tables[t], m, shape, skip_nonpositive=wc is None)
        else:
            V[t] = _maximize_by_enumeration(w, r, m, shape, action_filter, cells)
    return ValueTable(instance, bounds, V, W, tables, action_filter, cells)


def _maximize_by_consumption(w: np.ndarray, table: dict, m: int, shape, skip_nonpositive: bool) -> np.ndarray:
    out = w.copy()  # consuming nothing
    for (a, b), (val, _) in table.items():
        if skip_nonpositive and val <= 0:
            continue  # continuation is nondecreasing, so this never helps
        ab = a + b
        if sum(a) == 0:
            continue
        dst = tuple(slice(k, None) for k in ab)
        src = tuple(slice(0, s - k) for s, k in zip(shape, ab))
        np.maximum(out[dst], w[src] + val, out=out[dst])
    return out


def _maximize_by_enumeration(w, r, m, shape, action_filter, cells) -> np.ndarray:
    out = np.empty(shape)
    for idx in np.ndindex(*shape):
        state = SystemState(idx[:m], idx[m:])
        best = -np.inf
        for q in enumerate_decisions(state.x, state.y, cells):
            if action_filter is not None and not action_filter(state, q):
                continue
            u = tuple(np.asarray(state.x) - q.sum(axis=1))
            v = tuple(np.asarray(state.y) - q.sum(axis=0))
            val = float(np.sum(r * q)) + w[u + v]
            if val > best:
                best = val
        out[idx] = best
    return out


# ---------------------------------------------------------------- actions


@dataclass
class ActionSet:
    t: int
    state: SystemState
    decisions: list
    value: float
    truncated: bool = False
    objective: Callable[[np.ndarray], float] | None = field(default=None, repr=False)


def optimal_actions(
    vt: ValueTable,
    instance: MatchingInstance | None,
    t: int,
    state,
    limit: int = ACTION_CAP,
    tol: float = TOL,
) -> ActionSet:
    """Every maximizer of the one-period objective at ``(t, state)``."""
    state = state if isinstance(state, SystemState) else as_state(*state)
    vt._check(t, state)
    target = vt.value(t, state)
    members = []
    truncated = False
    for q in enumerate_decisions(state.x, state.y, vt.cells):
        if vt.action_filter is not None and not vt.action_filter(state, q):
            continue
        if vt.objective(t, state, q) >= target - tol:
            if len(members) >= limit:
                truncated = True
                break
            members.append(q)
    return ActionSet(t, state, members, target, truncated, lambda q: vt.objective(t, state, q))


def optimal_decision(vt: ValueTable, t: int, state) -> np.ndarray:
    """One optimal decision, found without enumerating all matrices."""
    state = state if isinstance(state, SystemState) else as_state(*state)
    vt._check(t, state)
    if vt.tables[t] is None:
        return optimal_actions(vt, None, t, state, limit=1).decisions[0]
    target = vt.value(t, state)
    m, n = vt.instance.m, vt.instance.n
    w = vt.W[t]
    x, y = state.x, state.y
    ga = _vectors_by_total(x)
    gb = _vectors_by_total(y)
    for s in sorted(set(ga) & set(gb)):
        for a in ga[s]:
            for b in gb[s]:
                val = vt.tables[t][(a, b)][0]
                rest = tuple(p - k for p, k in zip(x + y, a + b))
                if val + w[rest] >= target - TOL:
                    return _plan(vt.tables[t], a, b, m, n)
    raise AssertionError("no decision attains the stored value")  # unreachable


def action_set_for(vt: ValueTable, t: int, state, q=None) -> ActionSet:
    """Single-member action set, cheap to build for the transfer routine."""
    state = state if isinstance(state, SystemState) else as_state(*state)
    q = optimal_decision(vt, t, state) if q is None else as_matrix(q)
    return ActionSet(t, state, [q], vt.value(t, state), False, lambda d: vt.objective(t, state, d))


# ---------------------------------------------------------------- transfers


def _transfers(graph: DominanceGraph, state: SystemState, q: np.ndarray, mode: str) -> list:
    """Candidate moves ``(eps, key, delta)`` that repair one violation each."""
    post = apply_decision(state, q)
    moves = []
    for v in decision_violations(graph, state, q, mode):
        (i, j), (i2, j2) = v.dominant, v.dominated
        if j == j2:  # rival demand row i2 competes for supply j
            eps = min(q[i2, j], post.u[i])
            if eps > 0:
                d = np.zeros_like(q)
                d[i, j] += eps
                d[i2, j] -= eps
                moves.append((eps, (v.dominant, v.dominated, (-1, -1)), d))
            elif mode == "strong":
                for k in range(graph.n):
                    if (i, k) in graph.b_left[(i, j)] and q[i, k] > 0:
                        eps3 = min(q[i2, j], q[i, k])
                        d = np.zeros_like(q)
                        d[i, j] += eps3
                        d[i2, k] += eps3
                        d[i2, j] -= eps3
                        d[i, k] -= eps3
                        moves.append((eps3, (v.dominant, v.dominated, (i, k)), d))
        else:  # rival supply column j2 competes for demand i
            eps = min(q[i, j2], post.v[j])
            if eps > 0:
                d = np.zeros_like(q)
                d[i, j] += eps
                d[i, j2] -= eps
                moves.append((eps, (v.dominant, v.dominated, (-1, -1)), d))
            elif mode == "strong":
                for k in range(graph.m):
                    if (k, j) in graph.b_right[(i, j)] and q[k, j] > 0:
                        eps3 = min(q[i, j2], q[k, j])
                        d = np.zeros_like(q)
                        d[i, j] += eps3
                        d[k, j2] += eps3
                        d[i, j2] -= eps3
                        d[k, j] -= eps3
                        moves.append((eps3, (v.dominant, v.dominated, (k, j)), d))
    return moves


def make_compatible(
    action_set: ActionSet,
    graph: DominanceGraph,
    state=None,
    mode: str = "strong",
    max_steps: int = 10_000,
    tol: float = TOL,
) -> np.ndarray:
    """Move an optimal decision to one that respects the priority relation.

    Two-way moves shift quantity from a dominated pair to its dominant
    neighbor using the dominant side's leftovers. Three-way moves swap
    ``(i', j), (i, j')`` for ``(i, j), (i', j')`` when no leftovers remain.
    The largest move goes first. In ``weak`` mode only two-way moves are
    used and compatibility is judged on leftovers.
    """
    if mode == "strong" and not graph.strong_valid:
        raise StrongConditionFails("strong compatibility needs a valid strong relation")
    state = action_set.state if state is None else (state if isinstance(state, SystemState) else as_state(*state))
    q = np.array(action_set.decisions[0], dtype=np.int64)
    objective = action_set.objective
    for _ in range(max_steps):
        moves = _transfers(graph, state, q, mode)
        if not moves:
            if decision_violations(graph, state, q, mode):
                raise NotOptimalAfterTransfer(f"no transfer repairs the violations of {q.tolist()}")
            return q
        moves.sort(key=lambda mv: (-mv[0], mv[1]))
        q = q + moves[0][2]
        if objective is not None and objective(q) < action_set.value - tol:
            raise NotOptimalAfterTransfer(
                f"transfer {moves[0][1]} dropped the value to {objective(q)} (target {action_set.value})"
            )
    raise NotOptimalAfterTransfer(f"transfers did not settle within {max_steps} steps")


# ---------------------------------------------------------------- policies


@dataclass(frozen=True)
class PolicyHandle:
    name: str
    rule: Callable[[int, SystemState], np.ndarray] = field(repr=False)

    def __call__(self, t: int, state: SystemState) -> np.ndarray:
        return np.asarray(self.rule(t, state), dtype=np.int64)


def optimal_policy(vt: ValueTable, name: str = "optimal") -> PolicyHandle:
    cache: dict = {}

    def rule(t, state):
        key = (t, state.key)
        if key not in cache:
            cache[key] = optimal_decision(vt, t, state)
        return cache[key]

    return PolicyHandle(name, rule)


def compatible_optimal_policy(vt: ValueTable, graph: DominanceGraph, mode: str = "strong", start: str = "first") -> PolicyHandle:
    """Optimal policy whose every decision respects the priority relation.

    ``start="last"`` seeds the transfers from the last optimal matrix in
    enumeration order instead of the consumption-based choice, which is
    useful to exercise the transfer routine.
    """
    cache: dict = {}

    def rule(t, state):
        key = (t, state.key)
        if key not in cache:
            if start == "last":
                acts = optimal_actions(vt, vt.instance, t, state)
                aset = ActionSet(t, state, [acts.decisions[-1]], acts.value, acts.truncated, acts.objective)
            else:
                aset = action_set_for(vt, t, state)
            cache[key] = make_compatible(aset, graph, state, mode=mode)
        return cache[key]

    return PolicyHandle(f"compatible_{mode}", rule)


# ---------------------------------------------------------------- evaluation


@dataclass
class PolicyTrace:
    value: float
    visited: dict  # t -> {state: decision}

    def items(self):
        for t in sorted(self.visited):
            for state, q in self.visited[t].items():
                yield t, state, q


class PolicyValue:
    """Memoized expected reward-to-go of a deterministic policy.

    Only states reachable from the queried ones are ever evaluated.
    Waiting costs, when present, are subtracted each period.
    """

    def __init__(self, instance: MatchingInstance, policy, budget: int = DEFAULT_BUDGET, record: bool = False):
        instance.require_exact_carry()
        self.instance = instance
        self.policy = policy
        self.budget = budget
        self.record = record
        self.outcomes = [joint_outcomes(instance, t) for t in range(instance.T)]
        self._vals: dict = {}
        self._conts: dict = {}
        self.visited: dict = {t: {} for t in range(instance.T)}

    def value(self, t: int, key: tuple) -> float:
        hit = self._vals.get((t, key))
        if hit is not None:
            return hit
        if len(self._vals) + len(self._conts) > self.budget:
            raise BudgetExceeded(f"policy evaluation exceeded {self.budget} memo entries")
        m = self.instance.m
        state = SystemState(key[:m], key[m:])
        q = np.asarray(self.policy(t, state), dtype=np.int64)
        try:
            post = apply_decision(state, q)
        except Exception as exc:
            raise PolicyInfeasibleDecision(f"period {t}, state {state}: {q.tolist()} ({exc})") from exc
        if self.record:
            self.visited[t][state] = q
        v = period_objective(self.instance, t, state, q) + self.continuation(t, post)
        self._vals[(t, key)] = v
        return v

    def continuation(self, t: int, post: PostMatchState) -> float:
        """Expected reward-to-go from period ``t + 1`` given leftovers of ``t``."""
        inst = self.instance
        if t == inst.T - 1:
            return 0.0
        ck = (t, post.u, post.v)
        hit = self._conts.get(ck)
        if hit is not None:
            return hit
        D, S, p = self.outcomes[t + 1]
        base = tuple(int(inst.alpha[t]) * k for k in post.u) + tuple(int(inst.beta[t]) * k for k in post.v)
        arr = np.concatenate([D, S], axis=1) + np.array(base, dtype=np.int64)
        total = 0.0
        for row, pk in zip(arr.tolist(), p):
            total += pk * self.value(t + 1, tuple(row))
        self._conts[ck] = total
        return total

    def expected_value(self) -> float:
        D0, S0, p0 = self.outcomes[0]
        arr = np.concatenate([D0, S0], axis=1)
        return float(sum(pk * self.value(0, tuple(row)) for row, pk in zip(arr.tolist(), p0)))


def evaluate_policy_exact(
    instance: MatchingInstance,
    policy: PolicyHandle | Callable,
    budget: int = DEFAULT_BUDGET,
    return_trace: bool = False,
):
    """Exact expected total reward of a deterministic state-feedback policy.

    With ``return_trace`` the visited states and decisions come back too.
    """
    pv = PolicyValue(instance, policy, budget, record=return_trace)
    total = pv.expected_value()
    if return_trace:
        return PolicyTrace(total, pv.visited)
    return total


def zero_policy(instance: MatchingInstance) -> PolicyHandle:
    return PolicyHandle("zero", lambda t, s: np.zeros((instance.m, instance.n), dtype=np.int64))
