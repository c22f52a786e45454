"""Protection-level policies for horizontal instances.

In the 2x2 model the natural pairs ``(0, 0)`` and ``(1, 1)`` are matched
greedily first. What remains is described by two signed numbers,
``z1 = x_0 - y_0`` and ``z2 = y_1 - x_1``. A second round can match the
cross pair ``(0, 1)`` when both are positive and ``(1, 0)`` when both are
negative. The optimal second round is a match-down-to rule: reduce the
long side to a protection level that depends only on the period and the
aggregate imbalance ``ib = z1 - z2``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..core import TOL, ArrivalModel, MatchingInstance, SystemState, joint_outcomes, new_instance
from ..dp import PolicyHandle, state_bounds
from ..errors import AssumptionViolated, BudgetExceeded, StrongConditionFails
from ..models import check_horizontal_2x2
from ..monge import DominanceGraph, priority_tiers
from ..rng import generator


@dataclass(frozen=True)
class CollapsedState:
    z1: int
    z2: int

    @classmethod
    def from_state(cls, state: SystemState) -> "CollapsedState":
        return cls(state.x[0] - state.y[0], state.y[1] - state.x[1])

    @property
    def ib(self) -> int:
        return self.z1 - self.z2


@dataclass
class ProtectionEntry:
    p_d_plus: int | None = None
    p_s_plus: int | None = None
    p_d_minus: int | None = None
    p_s_minus: int | None = None


@dataclass
class ProtectionTable:
    """Match-down-to targets keyed by ``(t, ib)``.

    ``plus`` targets apply when type-0 demand and type-1 supply are left
    after the first round (cross pair ``(0, 1)``); ``minus`` targets apply
    to type-1 demand and type-0 supply (cross pair ``(1, 0)``).
    """

    T: int
    entries: dict = field(default_factory=dict)
    collapsed: "CollapsedValues | None" = field(default=None, repr=False)

    def get(self, t: int, ib: int) -> ProtectionEntry:
        return self.entries.get((t, ib), ProtectionEntry())

    def ib_range(self, t: int) -> list[int]:
        return sorted(ib for (tt, ib) in self.entries if tt == t)

    def to_json(self) -> str:
        rows = [
            {"t": t, "ib": ib, **e.__dict__}
            for (t, ib), e in sorted(self.entries.items())
        ]
        return json.dumps({"T": self.T, "entries": rows})

    @classmethod
    def from_json(cls, text: str) -> "ProtectionTable":
        d = json.loads(text)
        tab = cls(int(d["T"]))
        for row in d["entries"]:
            tab.entries[(int(row["t"]), int(row["ib"]))] = ProtectionEntry(
                row.get("p_d_plus"), row.get("p_s_plus"), row.get("p_d_minus"), row.get("p_s_minus")
            )
        return tab


@dataclass
class CollapsedValues:
    """``U[t]`` over the z box and the continuation ``C[t]`` of post-round z."""

    lo: list  # per period (z1_min, z2_min)
    U: list
    C: list

    def _idx(self, t, z1, z2):
        return z1 - self.lo[t][0], z2 - self.lo[t][1]

    def u(self, t, z1, z2) -> float:
        return float(self.U[t][self._idx(t, z1, z2)])

    def c(self, t, z1, z2) -> float:
        return float(self.C[t][self._idx(t, z1, z2)])

    def full_value(self, instance: MatchingInstance, t: int, state: SystemState) -> float:
        """Recover the optimal value of the original state."""
        r = instance.rewards[t]
        cs = CollapsedState.from_state(state)
        return (
            r[0, 0] * min(state.x[0], state.y[0])
            + r[1, 1] * min(state.x[1], state.y[1])
            + self.u(t, cs.z1, cs.z2)
        )


def _collapsed_dp(instance: MatchingInstance, budget: int) -> CollapsedValues:
    T = instance.T
    bounds = state_bounds(instance)
    lo, hi = [], []
    for bx, by in bounds:
        lo.append((-by[0], -bx[1]))
        hi.append((bx[0], by[1]))
    size = sum((h[0] - l[0] + 1) * (h[1] - l[1] + 1) for l, h in zip(lo, hi))
    if size > budget:
        raise BudgetExceeded(f"collapsed lattice has {size} entries, budget is {budget}")
    U: list = [None] * T
    C: list = [None] * T
    for t in reversed(range(T)):
        (l1, l2), (h1, h2) = lo[t], hi[t]
        shape = (h1 - l1 + 1, h2 - l2 + 1)
        cont = np.zeros(shape)
        if t < T - 1:
            a, b = int(instance.alpha[t]), int(instance.beta[t])
            D, S, p = joint_outcomes(instance, t + 1)
            r1 = instance.rewards[t + 1]
            nl1, nl2 = lo[t + 1]
            for k1 in range(shape[0]):
                z1 = l1 + k1
                x0 = a * max(z1, 0) + D[:, 0]
                y0 = b * max(-z1, 0) + S[:, 0]
                for k2 in range(shape[1]):
                    z2 = l2 + k2
                    x1 = a * max(-z2, 0) + D[:, 1]
                    y1 = b * max(z2, 0) + S[:, 1]
                    now = r1[0, 0] * np.minimum(x0, y0) + r1[1, 1] * np.minimum(x1, y1)
                    later = U[t + 1][x0 - y0 - nl1, y1 - x1 - nl2]
                    cont[k1, k2] = float(np.dot(p, now + later))
        C[t] = cont
        r = instance.rewards[t]
        val = np.empty(shape)
        for k1 in range(shape[0]):
            z1 = l1 + k1
            for k2 in range(shape[1]):
                z2 = l2 + k2
                best = cont[k1, k2]
                if z1 > 0 and z2 > 0:
                    for q in range(1, min(z1, z2) + 1):
                        best = max(best, r[0, 1] * q + cont[k1 - q, k2 - q])
                elif z1 < 0 and z2 < 0:
                    for q in range(1, min(-z1, -z2) + 1):
                        best = max(best, r[1, 0] * q + cont[k1 + q, k2 + q])
                val[k1, k2] = best
        U[t] = val
    return CollapsedValues(lo, U, C)


def _smallest_argmax(values: list[tuple[int, float]]) -> int:
    best = max(v for _, v in values)
    return min(k for k, v in values if v >= best - TOL)


def compute_protection_levels_2x2(instance: MatchingInstance, check: bool = True, budget: int = 5_000_000) -> ProtectionTable:
    """Solve the collapsed 2x2 recursion and read off the protection levels.

    For each period and imbalance the targets are the smallest maximizers
    of the second-round objective over the post-match level of the long
    side. If demand does not carry over (``alpha = 0``) its post-match level
    has no future value, so the scan runs over the supply level from zero;
    the implied demand target ``p_s + ib`` can then be negative, meaning
    "match all demand". The supply-perishing case is symmetric.
    """
    if instance.m != 2 or instance.n != 2:
        raise AssumptionViolated("protection levels need a 2x2 instance")
    instance.require_exact_carry()
    if check:
        problem = check_horizontal_2x2(instance.rewards)
        if problem:
            raise AssumptionViolated(problem)
    cv = _collapsed_dp(instance, budget)
    table = ProtectionTable(instance.T, collapsed=cv)
    bounds = state_bounds(instance)
    for t in range(instance.T):
        bx, by = bounds[t]
        r = instance.rewards[t]
        a, b = instance.alpha[t], instance.beta[t]
        demand_free = a == 0 and b == 1  # demand level does not matter
        supply_free = b == 0 and a == 1
        for ib in range(-max(by[1], bx[1]) - max(bx[0], by[0]), max(bx[0], by[0]) + max(by[1], bx[1]) + 1):
            entry = ProtectionEntry()
            # plus regime: w = type-0 demand left, s = w - ib type-1 supply left
            cand = []
            if demand_free:
                for s in range(0, by[1] + 1):
                    w = s + ib
                    cand.append((w, -r[0, 1] * w + cv.c(t, min(max(w, 0), bx[0]), s)))
            elif supply_free:
                for w in range(0, bx[0] + 1):
                    s = w - ib
                    cand.append((w, -r[0, 1] * w + cv.c(t, w, min(max(s, 0), by[1]))))
            else:
                for w in range(max(0, ib), min(bx[0], by[1] + ib) + 1):
                    cand.append((w, -r[0, 1] * w + cv.c(t, w, w - ib)))
            if cand:
                entry.p_d_plus = _smallest_argmax(cand)
                entry.p_s_plus = entry.p_d_plus - ib
            # minus regime: w = type-1 demand left, s = w - ib type-0 supply left
            cand = []
            if demand_free:
                for s in range(0, by[0] + 1):
                    w = s + ib
                    cand.append((w, -r[1, 0] * w + cv.c(t, -s, -min(max(w, 0), bx[1]))))
            elif supply_free:
                for w in range(0, bx[1] + 1):
                    s = w - ib
                    cand.append((w, -r[1, 0] * w + cv.c(t, -min(max(s, 0), by[0]), -w)))
            else:
                for w in range(max(0, ib), min(bx[1], by[0] + ib) + 1):
                    cand.append((w, -r[1, 0] * w + cv.c(t, -(w - ib), -w)))
            if cand:
                entry.p_d_minus = _smallest_argmax(cand)
                entry.p_s_minus = entry.p_d_minus - ib
            if cand or entry.p_d_plus is not None:
                table.entries[(t, ib)] = entry
    return table


def _match_down(long_side: int, short_side: int, target: int | None) -> int:
    """Units to match so the long side drops to ``target`` where feasible."""
    if target is None:
        return min(long_side, short_side)
    floor = max(0, long_side - short_side)
    keep = min(long_side, max(target, floor))
    return long_side - keep


def two_round_policy_2x2(instance: MatchingInstance, table: ProtectionTable) -> PolicyHandle:
    """Greedy on the natural pairs, then protection-level matching of a cross pair."""

    def rule(t: int, state: SystemState) -> np.ndarray:
        x, y = state.x, state.y
        q = np.zeros((2, 2), dtype=np.int64)
        q[0, 0] = min(x[0], y[0])
        q[1, 1] = min(x[1], y[1])
        cs = CollapsedState.from_state(state)
        e = table.get(t, cs.ib)
        if cs.z1 > 0 and cs.z2 > 0:
            q[0, 1] = _match_down(cs.z1, cs.z2, e.p_d_plus)
        elif cs.z1 < 0 and cs.z2 < 0:
            q[1, 0] = _match_down(-cs.z2, -cs.z1, e.p_d_minus)
        return q

    return PolicyHandle("two_round", rule)


# ---------------------------------------------------------------- consolidation


@dataclass
class ConsolidatedPair:
    """Data of the aggregated 2x2 problem built for one pair ``(i, j)``.

    Demand types are ``[i, i^c]`` and supply types ``[j^c, j]``, so the pair
    itself sits at ``(0, 1)``.
    """

    pair: tuple
    rival_rows: tuple  # I': demand types whose pair with j dominates (i, j)
    rival_cols: tuple  # J': supply types whose pair with i dominates (i, j)
    residual_d: np.ndarray  # samples x T x |I'|
    residual_s: np.ndarray  # samples x T x |J'|
    rewards: np.ndarray  # T x 2 x 2
    instance: MatchingInstance
    table: ProtectionTable


def _empirical(values: np.ndarray) -> ArrivalModel:
    vals, counts = np.unique(values, return_counts=True)
    probs = counts / counts.sum()
    probs[-1] = 1.0 - probs[:-1].sum()
    return ArrivalModel(tuple(int(v) for v in vals), tuple(float(p) for p in probs))


def consolidate_pair(
    instance: MatchingInstance, graph: DominanceGraph, tiers, pair, sample_count: int, seed: int
) -> ConsolidatedPair:
    i, j = pair
    T = instance.T
    r = instance.rewards
    rows = tuple(k for k in range(instance.m) if graph.dominates((k, j), pair))
    cols = tuple(k for k in range(instance.n) if graph.dominates((i, k), pair))
    my_tier = tiers.tier_of(pair)
    pre = sorted(
        (a, b) for a in rows for b in cols if tiers.tier_of((a, b)) < my_tier
    )
    pre.sort(key=lambda p: (tiers.tier_of(p), p))
    g = generator(seed, i, j)
    u = g.random((sample_count, T, len(rows) + len(cols)))
    res_d = np.zeros((sample_count, T, len(rows)), dtype=np.int64)
    res_s = np.zeros((sample_count, T, len(cols)), dtype=np.int64)
    for k in range(sample_count):
        for t in range(T):
            d = {a: instance.demand_arrivals[t][a].quantile(u[k, t, n_]) for n_, a in enumerate(rows)}
            s = {b: instance.supply_arrivals[t][b].quantile(u[k, t, len(rows) + n_]) for n_, b in enumerate(cols)}
            for a, b in pre:
                if r[t, a, b] <= 0:
                    continue
                qq = min(d[a], s[b])
                d[a] -= qq
                s[b] -= qq
            res_d[k, t] = [d[a] for a in rows]
            res_s[k, t] = [s[b] for b in cols]
    mean_d = res_d.mean(axis=0)  # T x |I'|
    mean_s = res_s.mean(axis=0)
    rw = np.zeros((T, 2, 2))
    for t in range(T):
        rw[t, 0, 1] = r[t, i, j]
        tot_s = mean_s[t].sum()
        tot_d = mean_d[t].sum()
        rw[t, 0, 0] = sum(r[t, i, b] * mean_s[t, n_] for n_, b in enumerate(cols)) / tot_s if tot_s > 0 else 0.0
        rw[t, 1, 1] = sum(r[t, a, j] * mean_d[t, n_] for n_, a in enumerate(rows)) / tot_d if tot_d > 0 else 0.0
        # consolidated types meet only through pairs left out of the pre-matching
        rest = [(a, b) for a in rows for b in cols if (a, b) not in pre]
        wts = [mean_d[t, rows.index(a)] * mean_s[t, cols.index(b)] for a, b in rest]
        if rest and sum(wts) > 0:
            rw[t, 1, 0] = sum(w * r[t, a, b] for w, (a, b) in zip(wts, rest)) / sum(wts)
    dem = [
        [instance.demand_arrivals[t][i], _empirical(res_d[:, t, :].sum(axis=1))]
        for t in range(T)
    ]
    sup = [
        [_empirical(res_s[:, t, :].sum(axis=1)), instance.supply_arrivals[t][j]]
        for t in range(T)
    ]
    sub = new_instance(2, 2, T, rw, instance.alpha, instance.beta, dem, sup, meta={"model": "consolidated", "pair": pair})
    table = compute_protection_levels_2x2(sub, check=False)
    return ConsolidatedPair(tuple(pair), rows, cols, res_d, res_s, rw, sub, table)


def consolidated_protection_policy(
    instance: MatchingInstance, graph: DominanceGraph, sample_count: int = 1000, seed: int = 0
) -> PolicyHandle:
    """Tier-by-tier matching with per-pair protection levels.

    Tier-0 pairs are matched greedily. Every later pair ``(i, j)`` matches
    until its residual demand drops to the protection level of its
    consolidated 2x2 problem, or as close as feasible.
    """
    if not graph.strong_valid:
        raise StrongConditionFails("the consolidation heuristic needs a valid strong relation")
    tiers = priority_tiers(graph)
    subs: dict = {}
    for k, tier in enumerate(tiers.tiers):
        if k == 0:
            continue
        for p in sorted(tier):
            if np.any(instance.rewards[:, p[0], p[1]] > 0):
                subs[p] = consolidate_pair(instance, graph, tiers, p, sample_count, seed)

    def rule(t: int, state: SystemState) -> np.ndarray:
        xr, yr = list(state.x), list(state.y)
        q = np.zeros((instance.m, instance.n), dtype=np.int64)
        for k, tier in enumerate(tiers.tiers):
            for i, j in sorted(tier):
                if instance.rewards[t, i, j] <= 0 or xr[i] == 0 or yr[j] == 0:
                    continue
                if k == 0 or (i, j) not in subs:
                    amount = min(xr[i], yr[j])
                else:
                    e = subs[(i, j)].table.get(t, xr[i] - yr[j])
                    amount = _match_down(xr[i], yr[j], e.p_d_plus)
                q[i, j] += amount
                xr[i] -= amount
                yr[j] -= amount
        return q

    handle = PolicyHandle("consolidated", rule)
    object.__setattr__(handle, "subproblems", subs)
    return handle
