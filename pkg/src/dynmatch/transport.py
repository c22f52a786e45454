"""Single-period maximum-reward transportation.

The flow network is ``source -> demand i -> supply j -> sink`` with arc
``i -> j`` present only for positive rewards, so stopping augmentation once
the cheapest path has nonnegative cost leaves surplus units at the source
(the slack). Among optimal solutions the row-major lexicographically
smallest matrix is returned.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .core import TOL, SystemState, as_state

_INF_CAP = 1 << 40


@dataclass(frozen=True)
class TransportResult:
    q: np.ndarray
    value: float


class _Network:
    def __init__(self, n_nodes: int):
        self.adj: list[list[int]] = [[] for _ in range(n_nodes)]
        self.to: list[int] = []
        self.cap: list[int] = []
        self.cost: list[float] = []

    def add(self, a: int, b: int, cap: int, cost: float) -> int:
        e = len(self.to)
        self.adj[a].append(e)
        self.to.append(b)
        self.cap.append(cap)
        self.cost.append(cost)
        self.adj[b].append(e + 1)
        self.to.append(a)
        self.cap.append(0)
        self.cost.append(-cost)
        return e

    def max_profit(self, s: int, t: int) -> float:
        """Augment along cheapest paths while they have negative cost.

        Bellman-Ford is used since residual arcs carry negative costs; the
        networks here have at most a few dozen arcs.
        """
        total = 0.0
        n = len(self.adj)
        while True:
            dist = [float("inf")] * n
            prev = [-1] * n
            dist[s] = 0.0
            for _ in range(n - 1):
                changed = False
                for a in range(n):
                    if dist[a] == float("inf"):
                        continue
                    for e in self.adj[a]:
                        if self.cap[e] > 0 and dist[a] + self.cost[e] < dist[self.to[e]] - 1e-12:
                            dist[self.to[e]] = dist[a] + self.cost[e]
                            prev[self.to[e]] = e
                            changed = True
                if not changed:
                    break
            if dist[t] >= -1e-12:
                return total
            push = _INF_CAP
            v = t
            while v != s:
                e = prev[v]
                push = min(push, self.cap[e])
                v = self.to[e ^ 1]
            v = t
            while v != s:
                e = prev[v]
                self.cap[e] -= push
                self.cap[e ^ 1] += push
                v = self.to[e ^ 1]
            total += -dist[t] * push


def _solve(r: np.ndarray, x: Sequence[int], y: Sequence[int], caps: dict[tuple[int, int], int]) -> tuple[float, np.ndarray]:
    m, n = r.shape
    src, snk = m + n, m + n + 1
    net = _Network(m + n + 2)
    for i in range(m):
        if x[i] > 0:
            net.add(src, i, int(x[i]), 0.0)
    for j in range(n):
        if y[j] > 0:
            net.add(m + j, snk, int(y[j]), 0.0)
    arcs = {}
    for i in range(m):
        for j in range(n):
            if r[i, j] > 0 and x[i] > 0 and y[j] > 0:
                cap = caps.get((i, j), _INF_CAP)
                if cap > 0:
                    arcs[(i, j)] = net.add(i, m + j, cap, -float(r[i, j]))
    net.max_profit(src, snk)
    q = np.zeros((m, n), dtype=np.int64)
    for (i, j), e in arcs.items():
        q[i, j] = net.cap[e ^ 1]
    return float(np.sum(r * q)), q


def max_weight_transport(rewards_t, state: SystemState | tuple) -> TransportResult:
    """Optimal integer matching for one period, ignoring the future.

    Examples:
        >>> max_weight_transport([[4, 1], [2, 3]], SystemState((1, 1), (1, 1))).q.tolist()
        [[1, 0], [0, 1]]
    """
    r = np.asarray(rewards_t, dtype=float)
    st = state if isinstance(state, SystemState) else as_state(*state)
    x, y = st.x, st.y
    best, q = _solve(r, x, y, {})
    # canonicalize: push each cell, in row-major order, to its smallest optimal value
    caps: dict[tuple[int, int], int] = {}
    m, n = r.shape
    for i in range(m):
        for j in range(n):
            if q[i, j] == 0:
                caps[(i, j)] = 0
                continue
            lo, hi = 0, int(q[i, j])
            while lo < hi:
                mid = (lo + hi) // 2
                val, cand = _solve(r, x, y, {**caps, (i, j): mid})
                if val >= best - TOL:
                    hi = mid
                    q = cand
                else:
                    lo = mid + 1
            caps[(i, j)] = lo
            if q[i, j] != lo:
                _, q = _solve(r, x, y, caps)
    return TransportResult(q, float(np.sum(r * q)))


def tier_greedy_transport(rewards_t, state: SystemState | tuple, tiers) -> TransportResult:
    """Match pair by pair along priority tiers, each as much as possible.

    Pairs with nonpositive reward are skipped since matching them never
    adds value.
    """
    r = np.asarray(rewards_t, dtype=float)
    st = state if isinstance(state, SystemState) else as_state(*state)
    xr = list(st.x)
    yr = list(st.y)
    q = np.zeros(r.shape, dtype=np.int64)
    tier_list = tiers.tiers if hasattr(tiers, "tiers") else tiers
    for tier in tier_list:
        for i, j in sorted(tier):
            if r[i, j] <= 0:
                continue
            k = min(xr[i], yr[j])
            if k > 0:
                q[i, j] += k
                xr[i] -= k
                yr[j] -= k
    return TransportResult(q, float(np.sum(r * q)))


def enumerate_decisions(
    x: Sequence[int],
    y: Sequence[int],
    cells: Iterable[tuple[int, int]] | None = None,
) -> Iterator[np.ndarray]:
    """Yield every feasible integer matrix, filling cells in row-major order.

    Only ``cells`` (default: all) may be positive. Matrices come out in
    lexicographic order of their cell sequence.
    """
    m, n = len(x), len(y)
    order = sorted(cells) if cells is not None else [(i, j) for i in range(m) for j in range(n)]
    q = np.zeros((m, n), dtype=np.int64)
    xr = list(x)
    yr = list(y)

    def rec(k: int):
        if k == len(order):
            yield q.copy()
            return
        i, j = order[k]
        for v in range(min(xr[i], yr[j]) + 1):
            q[i, j] = v
            xr[i] -= v
            yr[j] -= v
            yield from rec(k + 1)
            xr[i] += v
            yr[j] += v
        q[i, j] = 0

    yield from rec(0)


def brute_force_transport(rewards_t, state: SystemState | tuple) -> TransportResult:
    """Exhaustive reference solver (exponential; tests only)."""
    r = np.asarray(rewards_t, dtype=float)
    st = state if isinstance(state, SystemState) else as_state(*state)
    best_val, best_q = -np.inf, None
    for q in enumerate_decisions(st.x, st.y):
        val = float(np.sum(r * q))
        if val > best_val + TOL:
            best_val, best_q = val, q
    return TransportResult(best_q, best_val)
