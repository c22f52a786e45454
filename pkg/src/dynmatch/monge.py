"""Priority relations between neighboring demand-supply pairs.

Pairs ``(i, j)`` and ``(i', j)`` share a supply type; ``(i, j)`` and
``(i, j')`` share a demand type. Both kinds are called neighbors. A pair
``a`` weakly dominates a neighbor ``b`` when it earns at least as much in
every period and its advantage is at least the carried-over advantage it
could earn next period. The strong relation also requires the
submodular exchange inequality on every configuration where one pair
dominates both of its neighbors.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .core import TOL, MatchingInstance, SystemState, as_matrix, apply_decision
from .errors import InfeasibleTrace, Infeasible, NotNeighbors, StrongConditionFails

Pair = tuple[int, int]
Edge = tuple[Pair, Pair]


def _shared(a: Pair, b: Pair) -> str:
    if a == b:
        raise NotNeighbors(f"{a} is not a neighbor of itself")
    if a[1] == b[1]:
        return "supply"  # rows differ, shared column
    if a[0] == b[0]:
        return "demand"
    raise NotNeighbors(f"{a} and {b} share neither a demand nor a supply type")


def weak_dominates(instance: MatchingInstance, pair_a: Pair, pair_b: Pair, tol: float = TOL) -> bool:
    """Whether ``pair_a`` weakly dominates its neighbor ``pair_b``.

    For a shared supply type ``j`` with rows ``i`` (a) and ``i'`` (b), every
    period must satisfy ``r_ij >= r_i'j`` and, before the last period,
    ``r_ij - r_i'j >= alpha_t * (r_ij'' - r_i'j'')`` at ``t + 1`` for all
    ``j''``. The shared-demand case swaps roles and uses ``beta_t``.
    """
    kind = _shared(tuple(pair_a), tuple(pair_b))
    r = instance.rewards
    (i, j), (i2, j2) = pair_a, pair_b
    for t in range(instance.T):
        gap = r[t, i, j] - r[t, i2, j2]
        if gap < -tol:
            return False
        if t + 1 < instance.T:
            if kind == "supply":
                ahead = instance.alpha[t] * (r[t + 1, i, :] - r[t + 1, i2, :])
            else:
                ahead = instance.beta[t] * (r[t + 1, :, j] - r[t + 1, :, j2])
            if np.any(gap < ahead - tol):
                return False
    return True


def neighbors(m: int, n: int, pair: Pair) -> list[Pair]:
    i, j = pair
    out = [(k, j) for k in range(m) if k != i]
    out += [(i, k) for k in range(n) if k != j]
    return sorted(out)


def _oriented(relation: set[Edge]) -> set[Edge]:
    """Resolve mutual relations in favor of the lexicographically smaller pair."""
    return {(a, b) for a, b in relation if not ((b, a) in relation and b < a)}


def _exchange_ok(instance: MatchingInstance, p: Pair, row_rival: int, col_rival: int, tol: float) -> bool:
    i, j = p
    r = instance.rewards
    lhs = r[:, i, j] + r[:, row_rival, col_rival]
    rhs = r[:, i, col_rival] + r[:, row_rival, j]
    return bool(np.all(lhs >= rhs - tol))


@dataclass(frozen=True)
class DominanceGraph:
    """Dominance relations plus the derived bookkeeping.

    Attributes:
        weak: ordered edges ``(a, b)`` meaning ``a`` weakly dominates ``b``.
        strong_valid: the exchange inequality holds for every configuration
            where a pair weakly dominates a row rival and a column rival.
        strong: equals ``weak`` when ``strong_valid``, else empty.
        strong_local: per-edge reading; keeps an edge unless some exchange
            configuration involving it fails.
        oriented: ``strong`` with mutual edges kept only from the
            lexicographically smaller pair. Tiers, residual capacities and
            audits use this relation.
        b_left: ``(i, j) -> {(i, j')}`` pairs it dominates along its row.
        b_right: ``(i, j) -> {(i', j)}`` pairs it dominates along its column.
    """

    m: int
    n: int
    weak: frozenset
    strong_valid: bool
    strong: frozenset
    strong_local: frozenset
    oriented: frozenset
    weak_oriented: frozenset
    b_left: dict = field(compare=False)
    b_right: dict = field(compare=False)
    exchange_failures: tuple = ()

    def dominates(self, a: Pair, b: Pair) -> bool:
        return (tuple(a), tuple(b)) in self.oriented

    def to_edge_list(self) -> list[dict]:
        rows = []
        for a, b in sorted(self.weak):
            rows.append(
                {
                    "dominant": list(a),
                    "dominated": list(b),
                    "strong": (a, b) in self.strong,
                    "strong_local": (a, b) in self.strong_local,
                    "mutual": (b, a) in self.weak,
                }
            )
        return rows


def build_dominance_graph(instance: MatchingInstance, tol: float = TOL) -> DominanceGraph:
    m, n = instance.m, instance.n
    pairs = [(i, j) for i in range(m) for j in range(n)]
    weak = set()
    for a in pairs:
        for b in neighbors(m, n, a):
            if weak_dominates(instance, a, b, tol):
                weak.add((a, b))
    failures = []
    for (i, j) in pairs:
        rows = [k for k in range(m) if ((i, j), (k, j)) in weak]
        cols = [k for k in range(n) if ((i, j), (i, k)) in weak]
        for i2 in rows:
            for j2 in cols:
                if not _exchange_ok(instance, (i, j), i2, j2, tol):
                    failures.append(((i, j), (i2, j), (i, j2)))
    strong_valid = not failures
    bad_edges = {(f[0], f[1]) for f in failures} | {(f[0], f[2]) for f in failures}
    local = weak - bad_edges
    strong = set(weak) if strong_valid else set()
    oriented = _oriented(strong)
    b_left = {p: frozenset(b for a, b in oriented if a == p and b[0] == p[0]) for p in pairs}
    b_right = {p: frozenset(b for a, b in oriented if a == p and b[1] == p[1]) for p in pairs}
    return DominanceGraph(
        m,
        n,
        frozenset(weak),
        strong_valid,
        frozenset(strong),
        frozenset(local),
        frozenset(oriented),
        frozenset(_oriented(weak)),
        b_left,
        b_right,
        tuple(failures),
    )


# ------------------------------------------------------------------ tiers


@dataclass(frozen=True)
class PriorityTiers:
    tiers: tuple[frozenset, ...]

    def tier_of(self, pair: Pair) -> int:
        for k, tier in enumerate(self.tiers):
            if tuple(pair) in tier:
                return k
        raise KeyError(pair)

    def to_lists(self) -> list[list[list[int]]]:
        return [[list(p) for p in sorted(t)] for t in self.tiers]


def priority_tiers(graph: DominanceGraph) -> PriorityTiers:
    """Peel off pairs not dominated by any remaining neighbor, repeatedly."""
    if not graph.strong_valid:
        raise StrongConditionFails("tiers need the strong relation to be valid")
    remaining = {(i, j) for i in range(graph.m) for j in range(graph.n)}
    tiers = []
    while remaining:
        dominated = {b for a, b in graph.oriented if a in remaining and b in remaining}
        tier = remaining - dominated
        if not tier:
            # a dominance cycle through equal rewards: release the smallest pair
            tier = {min(remaining)}
        tiers.append(frozenset(tier))
        remaining -= tier
    return PriorityTiers(tuple(tiers))


def is_perfect_pair(instance: MatchingInstance, graph: DominanceGraph, i: int, j: int, tol: float = TOL) -> bool:
    """Dominates every neighbor strongly and does not gain by waiting."""
    if not graph.strong_valid:
        raise StrongConditionFails("perfect pairs need the strong relation to be valid")
    p = (i, j)
    if any((p, b) not in graph.strong for b in neighbors(instance.m, instance.n, p)):
        return False
    r = instance.rewards[:, i, j]
    for t in range(instance.T - 1):
        if r[t] < max(instance.alpha[t], instance.beta[t]) * r[t + 1] - tol:
            return False
    return True


def perfect_pairs(instance: MatchingInstance, graph: DominanceGraph) -> list[Pair]:
    return [(i, j) for i in range(instance.m) for j in range(instance.n) if is_perfect_pair(instance, graph, i, j)]


# ------------------------------------------------------------------ audits


@dataclass(frozen=True)
class Violation:
    t: int
    dominant: Pair
    dominated: Pair
    quantity: int  # q of the dominated pair
    slack: int  # a_i / b_j (strong) or u_i / v_j (weak)


@dataclass(frozen=True)
class CompatibilityReport:
    violations: tuple[Violation, ...]
    mode: str

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_json(self) -> str:
        return json.dumps(
            {
                "mode": self.mode,
                "violations": [
                    {
                        "t": v.t,
                        "dominant": list(v.dominant),
                        "dominated": list(v.dominated),
                        "quantity": v.quantity,
                        "slack": v.slack,
                    }
                    for v in self.violations
                ],
            }
        )


def residual_capacity(graph: DominanceGraph, state: SystemState, q: np.ndarray, pair: Pair, side: str) -> int:
    """``a_i`` (side ``"demand"``) or ``b_j`` (side ``"supply"``) for ``pair``.

    ``a_i`` is ``x_i`` minus the matches of row ``i`` outside the pairs that
    ``pair`` dominates along that row, so units sent to dominated pairs still
    count as available.
    """
    i, j = pair
    if side == "demand":
        return int(state.x[i] - sum(q[i, k] for k in range(graph.n) if (i, k) not in graph.b_left[pair]))
    return int(state.y[j] - sum(q[k, j] for k in range(graph.m) if (k, j) not in graph.b_right[pair]))


def decision_violations(graph: DominanceGraph, state: SystemState, q, mode: str = "strong", t: int = 0) -> list[Violation]:
    q = as_matrix(q)
    post = apply_decision(state, q)
    relation = graph.oriented if mode == "strong" else graph.weak_oriented
    out = []
    for a, b in sorted(relation):
        if q[b] <= 0:
            continue
        if a[1] == b[1]:  # shared supply: rival demand row
            slack = residual_capacity(graph, state, q, a, "demand") if mode == "strong" else post.u[a[0]]
        else:
            slack = residual_capacity(graph, state, q, a, "supply") if mode == "strong" else post.v[a[1]]
        if slack > 0:
            out.append(Violation(t, a, b, int(q[b]), int(slack)))
    return out


def audit_compatibility(
    instance: MatchingInstance,
    graph: DominanceGraph,
    trace: Iterable[tuple],
    mode: str = "strong",
) -> CompatibilityReport:
    """Check a decision trace against the priority relation.

    ``trace`` holds ``(state, decision)`` or ``(t, state, decision)`` items.
    In ``strong`` mode a dominated pair may be positive only when the
    dominant pair's residual capacity is exhausted; ``weak`` mode uses the
    plain leftovers ``u_i`` and ``v_j`` instead.
    """
    if mode not in ("strong", "weak"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "strong" and not graph.strong_valid:
        raise StrongConditionFails("strong audit needs a valid strong relation")
    violations = []
    for k, item in enumerate(trace):
        t, state, q = item if len(item) == 3 else (k, *item)
        try:
            violations.extend(decision_violations(graph, state, q, mode, t))
        except Infeasible as exc:
            raise InfeasibleTrace(f"infeasible decision at trace item {k}: {exc}") from exc
    return CompatibilityReport(tuple(violations), mode)
