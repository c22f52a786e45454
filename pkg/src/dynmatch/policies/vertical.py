"""Quality-ordered (vertical) policies.

Types are sorted from best (index 0) to worst. A top-down decision with
total quantity ``Q`` consumes the best ``Q`` demand units and the best
``Q`` supply units, so a whole decision is described by one integer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import TOL, MatchingInstance, SystemState, apply_decision, period_objective
from ..dp import PolicyHandle, PolicyValue, ValueTable
from ..errors import NotVertical, QuantityOutOfRange
from ..models import is_vertical
from ..rng import generator


@dataclass(frozen=True)
class TransformedState:
    xt: tuple[int, ...]
    yt: tuple[int, ...]

    @classmethod
    def from_state(cls, state: SystemState) -> "TransformedState":
        return cls(tuple(np.cumsum(state.x).tolist()), tuple(np.cumsum(state.y).tolist()))

    @property
    def imbalance(self) -> int:
        return self.xt[-1] - self.yt[-1]


@dataclass(frozen=True)
class VerticalRewards:
    r_d: np.ndarray
    r_s: np.ndarray

    def tensor(self) -> np.ndarray:
        return np.asarray(self.r_d)[:, :, None] + np.asarray(self.r_s)[:, None, :]


def _consumed(levels, Q: int) -> list[int]:
    out, prev = [], 0
    for c in np.cumsum(levels):
        out.append(int(min(c, Q) - min(prev, Q)))
        prev = c
    return out


def topdown_decision(state: SystemState, Q: int) -> np.ndarray:
    """Match the best ``Q`` demand units with the best ``Q`` supply units.

    Examples:
        >>> topdown_decision(SystemState((1, 2), (2, 1)), 2).tolist()
        [[1, 0], [1, 0]]
    """
    cap = min(sum(state.x), sum(state.y))
    if not 0 <= Q <= cap:
        raise QuantityOutOfRange(f"total quantity {Q} outside [0, {cap}]")
    a = _consumed(state.x, Q)
    b = _consumed(state.y, Q)
    q = np.zeros((len(a), len(b)), dtype=np.int64)
    i = j = 0
    while i < len(a) and j < len(b):
        k = min(a[i], b[j])
        q[i, j] += k
        a[i] -= k
        b[j] -= k
        if a[i] == 0:
            i += 1
        if j < len(b) and b[j] == 0:
            j += 1
    return q


def _require_vertical(instance: MatchingInstance) -> None:
    if not is_vertical(instance):
        raise NotVertical("policy needs quality-ordered (vertical) rewards")


def topdown_policy(instance: MatchingInstance, quantity_rule, name: str = "topdown") -> PolicyHandle:
    _require_vertical(instance)
    return PolicyHandle(name, lambda t, s: topdown_decision(s, int(quantity_rule(t, s))))


def vertical_greedy_policy(instance: MatchingInstance) -> PolicyHandle:
    """Top-down matching of as many units as possible."""
    return PolicyHandle("greedy", lambda t, s: topdown_decision(s, min(sum(s.x), sum(s.y))))


def quantity_objective(vt: ValueTable, t: int, state: SystemState) -> list[float]:
    """One-period objective of every top-down decision, indexed by ``Q``."""
    cap = min(sum(state.x), sum(state.y))
    return [vt.objective(t, state, topdown_decision(state, Q)) for Q in range(cap + 1)]


def optimal_quantity(vt: ValueTable, t: int, state: SystemState) -> int:
    """Smallest total quantity whose top-down decision is optimal among top-down ones."""
    g = quantity_objective(vt, t, state)
    best = max(g)
    return next(Q for Q, v in enumerate(g) if v >= best - TOL)


def dp_quantity_rule(vt: ValueTable):
    cache: dict = {}

    def rule(t, state):
        key = (t, state.key)
        if key not in cache:
            cache[key] = optimal_quantity(vt, t, state)
        return cache[key]

    return rule


# ---------------------------------------------------------------- one step ahead


def _scan(f, cap: int, full_scan: bool) -> int:
    """Smallest maximizer of ``f`` on ``0..cap``, stopping at the first drop."""
    best_q, best_v = 0, f(0)
    for Q in range(1, cap + 1):
        v = f(Q)
        if v > best_v + TOL:
            best_q, best_v = Q, v
        elif v < best_v - TOL and not full_scan:
            break
    return best_q


def _rollout(instance: MatchingInstance, t0: int, x, y, draws: np.ndarray) -> float:
    """Greedy top-down reward over periods ``t0..T-1`` along one sampled path.

    ``draws`` holds, per period, ``m + n`` arrival uniforms followed by
    ``m + n`` rounding uniforms. Fractional carry-over rounds ``rate * k``
    up with probability equal to its fractional part.
    """
    m, n, T = instance.m, instance.n, instance.T
    total = 0.0
    for t in range(t0, T):
        state = SystemState(tuple(x), tuple(y))
        q = topdown_decision(state, min(sum(x), sum(y)))
        total += period_objective(instance, t, state, q)
        if t == T - 1:
            break
        post = apply_decision(state, q)
        row = draws[t - t0]
        d = [instance.demand_arrivals[t + 1][i].quantile(row[i]) for i in range(m)]
        s = [instance.supply_arrivals[t + 1][j].quantile(row[m + j]) for j in range(n)]
        x = [_round(instance.alpha[t] * u, row[m + n + i]) + d[i] for i, u in enumerate(post.u)]
        y = [_round(instance.beta[t] * v, row[2 * m + n + j]) + s[j] for j, v in enumerate(post.v)]
    return total


def _round(value: float, u: float) -> int:
    base = int(np.floor(value))
    return base + int(u < value - base)


def osa_policy(
    instance: MatchingInstance,
    mode: str = "exact",
    sample_count: int = 1000,
    seed: int = 0,
    full_scan: bool = False,
) -> PolicyHandle:
    """One-step-ahead policy: pick today's total quantity assuming greedy later.

    ``exact`` mode values the greedy continuation exactly through a
    memoized recursion. ``sampled`` mode averages ``sample_count`` greedy
    rollouts. The paths depend only on ``(seed, t, state)`` and are shared
    by every candidate quantity.
    """
    _require_vertical(instance)
    if mode not in ("exact", "sampled"):
        raise ValueError(f"unknown mode {mode!r}")
    greedy = vertical_greedy_policy(instance)
    pv = PolicyValue(instance, greedy) if mode == "exact" else None
    cache: dict = {}
    m, n, T = instance.m, instance.n, instance.T

    def continuation(t, state, q, draws):
        post = apply_decision(state, q)
        if t == T - 1:
            return 0.0
        if pv is not None:
            return pv.continuation(t, post)
        total = 0.0
        for k in range(sample_count):
            row = draws[k, 0]
            d = [instance.demand_arrivals[t + 1][i].quantile(row[i]) for i in range(m)]
            s = [instance.supply_arrivals[t + 1][j].quantile(row[m + j]) for j in range(n)]
            x = [_round(instance.alpha[t] * u, row[m + n + i]) + d[i] for i, u in enumerate(post.u)]
            y = [_round(instance.beta[t] * v, row[2 * m + n + j]) + s[j] for j, v in enumerate(post.v)]
            total += _rollout(instance, t + 1, x, y, draws[k, 1:])
        return total / sample_count

    def rule(t, state):
        key = (t, state.key)
        if key in cache:
            return cache[key]
        draws = None
        if pv is None and t < T - 1:
            g = generator(seed, t, *state.key)
            draws = g.random((sample_count, T - t - 1, 2 * (m + n)))

        def f(Q):
            q = topdown_decision(state, Q)
            return period_objective(instance, t, state, q) + continuation(t, state, q, draws)

        cap = min(sum(state.x), sum(state.y))
        q = topdown_decision(state, _scan(f, cap, full_scan))
        cache[key] = q
        return q

    return PolicyHandle(f"osa_{mode}", rule)
