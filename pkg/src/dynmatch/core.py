"""Problem data, state arithmetic and transitions.

Indices are zero-based throughout: periods ``t = 0..T-1``, demand types
``i = 0..m-1`` and supply types ``j = 0..n-1``. ``alpha[t]`` is the fraction
of unmatched demand carried from period ``t`` into period ``t + 1``.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field, replace
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import (
    BadDistribution,
    DimensionMismatch,
    Infeasible,
    NonIntegerCarryOver,
    RangeError,
)

TOL = 1e-9
PROB_TOL = 1e-12


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ArrivalModel:
    """Finite pmf over nonnegative integer arrival quantities."""

    support: tuple[int, ...]
    probs: tuple[float, ...]

    def __post_init__(self):
        sup = tuple(self.support)
        pr = tuple(float(p) for p in self.probs)
        if len(sup) == 0 or len(sup) != len(pr):
            raise BadDistribution("support and probs must be nonempty and of equal length")
        for s in sup:
            if int(s) != s or s < 0:
                raise BadDistribution(f"support entry {s!r} is not a nonnegative integer")
        sup = tuple(int(s) for s in sup)
        if len(set(sup)) != len(sup):
            raise BadDistribution("support entries must be distinct")
        if any(p < 0 or not np.isfinite(p) for p in pr):
            raise BadDistribution("probabilities must be finite and nonnegative")
        if abs(sum(pr) - 1.0) > PROB_TOL:
            raise BadDistribution(f"probabilities sum to {sum(pr)!r}, not 1")
        # canonical order keeps inverse-CDF sampling well defined
        order = sorted(range(len(sup)), key=lambda k: sup[k])
        object.__setattr__(self, "support", tuple(sup[k] for k in order))
        object.__setattr__(self, "probs", tuple(pr[k] for k in order))

    @classmethod
    def deterministic(cls, value: int) -> "ArrivalModel":
        return cls((int(value),), (1.0,))

    @property
    def mean(self) -> float:
        return float(sum(s * p for s, p in zip(self.support, self.probs)))

    @property
    def max(self) -> int:
        return max(s for s, p in zip(self.support, self.probs) if p > 0)

    def outcomes(self) -> list[tuple[int, float]]:
        """Support points with positive probability."""
        return [(s, p) for s, p in zip(self.support, self.probs) if p > 0]

    def quantile(self, u: float) -> int:
        """Inverse-CDF lookup: the smallest support point whose CDF exceeds ``u``."""
        acc = 0.0
        for s, p in zip(self.support, self.probs):
            acc += p
            if u < acc:
                return s
        return self.max

    def to_dict(self) -> dict:
        return {"support": list(self.support), "probs": list(self.probs)}


@dataclass(frozen=True)
class WaitingCosts:
    c: np.ndarray  # T x m demand waiting cost
    h: np.ndarray  # T x n supply holding cost

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        h = np.asarray(self.h, dtype=float)
        if c.ndim != 2 or h.ndim != 2 or c.shape[0] != h.shape[0]:
            raise DimensionMismatch("waiting costs must be T x m and T x n matrices")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(h))):
            raise RangeError("waiting costs must be finite")
        object.__setattr__(self, "c", _frozen(c))
        object.__setattr__(self, "h", _frozen(h))


@dataclass(frozen=True)
class SystemState:
    x: tuple[int, ...]
    y: tuple[int, ...]

    def __post_init__(self):
        x = tuple(int(v) for v in self.x)
        y = tuple(int(v) for v in self.y)
        if any(v < 0 for v in x + y):
            raise RangeError("state quantities must be nonnegative")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def key(self) -> tuple[int, ...]:
        return self.x + self.y


@dataclass(frozen=True)
class PostMatchState:
    u: tuple[int, ...]
    v: tuple[int, ...]


@dataclass(frozen=True)
class MatchingDecision:
    q: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q)
        if q.ndim != 2:
            raise DimensionMismatch("decision must be an m x n matrix")
        if np.any(q < 0) or np.any(q != np.round(q)):
            raise Infeasible("decision entries must be nonnegative integers")
        object.__setattr__(self, "q", _frozen(q.astype(np.int64)))

    def __eq__(self, other):
        return isinstance(other, MatchingDecision) and np.array_equal(self.q, other.q)

    def __hash__(self):
        return hash((self.q.shape, self.q.tobytes()))


@dataclass(frozen=True, eq=False)
class MatchingInstance:
    """Immutable problem datum.

    ``rewards`` has shape ``(T, m, n)``. ``alpha``/``beta`` are length-``T``
    tuples. ``meta`` carries builder tags and is ignored by the solvers.
    """

    m: int
    n: int
    T: int
    rewards: np.ndarray
    alpha: tuple[float, ...]
    beta: tuple[float, ...]
    demand_arrivals: tuple[tuple[ArrivalModel, ...], ...]
    supply_arrivals: tuple[tuple[ArrivalModel, ...], ...]
    waiting_costs: WaitingCosts | None = None
    meta: Mapping[str, Any] = field(default_factory=dict)

    @property
    def exact_carry(self) -> bool:
        return all(a in (0.0, 1.0) for a in self.alpha + self.beta)

    def require_exact_carry(self) -> None:
        if not self.exact_carry:
            raise NonIntegerCarryOver(
                "exact computations need every carry-over rate in {0, 1}; "
                f"got alpha={self.alpha}, beta={self.beta}"
            )

    def with_meta(self, **kw) -> "MatchingInstance":
        meta = dict(self.meta)
        meta.update(kw)
        return replace(self, meta=meta)

    def to_dict(self) -> dict:
        d = {
            "m": self.m,
            "n": self.n,
            "T": self.T,
            "rewards": self.rewards.tolist(),
            "alpha": list(self.alpha),
            "beta": list(self.beta),
            "demand_arrivals": [[a.to_dict() for a in row] for row in _per_type(self.demand_arrivals)],
            "supply_arrivals": [[a.to_dict() for a in row] for row in _per_type(self.supply_arrivals)],
        }
        if self.waiting_costs is not None:
            d["waiting_costs"] = {"c": self.waiting_costs.c.tolist(), "h": self.waiting_costs.h.tolist()}
        return d


def _per_type(arr: tuple[tuple[ArrivalModel, ...], ...]) -> list[list[ArrivalModel]]:
    """Period-major storage to type-major lists used by the JSON layout."""
    T = len(arr)
    k = len(arr[0]) if T else 0
    return [[arr[t][i] for t in range(T)] for i in range(k)]


def _expand_rate(rate, T: int, name: str) -> tuple[float, ...]:
    if np.isscalar(rate):
        seq = [float(rate)] * T
    else:
        seq = [float(r) for r in rate]
        if len(seq) != T:
            raise DimensionMismatch(f"{name} must be a scalar or have length T={T}")
    for r in seq:
        if not np.isfinite(r) or r < 0 or r > 1:
            raise RangeError(f"{name} entries must lie in [0, 1]; got {r!r}")
    return tuple(seq)


def _as_model(a) -> ArrivalModel:
    if isinstance(a, ArrivalModel):
        return a
    if isinstance(a, Mapping):
        return ArrivalModel(tuple(a["support"]), tuple(a["probs"]))
    if isinstance(a, (int, np.integer)):
        return ArrivalModel.deterministic(int(a))
    support, probs = a
    return ArrivalModel(tuple(support), tuple(probs))


def _expand_arrivals(arr, T: int, k: int, name: str) -> tuple[tuple[ArrivalModel, ...], ...]:
    """Validate period-major ``arr[t][i]`` pmfs."""
    arr = list(arr)
    if len(arr) != T:
        raise DimensionMismatch(f"{name} must have one row per period (T={T})")
    out = []
    for row in arr:
        row = list(row)
        if len(row) != k:
            raise DimensionMismatch(f"{name} rows must have {k} entries")
        out.append(tuple(_as_model(a) for a in row))
    return tuple(out)


def iid(row, T: int) -> list[list[ArrivalModel]]:
    """Repeat one row of per-type pmfs over ``T`` periods."""
    models = [_as_model(a) for a in row]
    return [list(models) for _ in range(T)]


def new_instance(
    m: int,
    n: int,
    T: int,
    rewards,
    alpha,
    beta,
    demand_arrivals,
    supply_arrivals,
    waiting_costs: WaitingCosts | Mapping | None = None,
    meta: Mapping[str, Any] | None = None,
) -> MatchingInstance:
    """Validate inputs and build an immutable :class:`MatchingInstance`.

    Args:
        rewards: array-like of shape ``(T, m, n)``.
        alpha, beta: scalar or length-``T`` carry-over rates in ``[0, 1]``.
        demand_arrivals: ``[t][i]`` pmfs, either :class:`ArrivalModel` or
            ``{"support": [...], "probs": [...]}``. Use :func:`iid` to
            repeat one row over all periods.
        supply_arrivals: same layout with ``n`` entries per period.
    """
    m, n, T = int(m), int(n), int(T)
    if m < 1 or n < 1 or T < 1:
        raise DimensionMismatch("m, n and T must be positive")
    r = np.asarray(rewards, dtype=float)
    if r.shape != (T, m, n):
        raise DimensionMismatch(f"rewards have shape {r.shape}, expected {(T, m, n)}")
    if not np.all(np.isfinite(r)):
        raise RangeError("rewards must be finite")
    a = _expand_rate(alpha, T, "alpha")
    b = _expand_rate(beta, T, "beta")
    da = _expand_arrivals(demand_arrivals, T, m, "demand_arrivals")
    sa = _expand_arrivals(supply_arrivals, T, n, "supply_arrivals")
    wc = None
    if waiting_costs is not None:
        wc = waiting_costs if isinstance(waiting_costs, WaitingCosts) else WaitingCosts(waiting_costs["c"], waiting_costs["h"])
        if wc.c.shape != (T, m) or wc.h.shape != (T, n):
            raise DimensionMismatch("waiting costs must be T x m and T x n")
    return MatchingInstance(m, n, T, _frozen(r), a, b, da, sa, wc, dict(meta or {}))


# ---------------------------------------------------------------- state ops


def as_state(x, y=None) -> SystemState:
    if isinstance(x, SystemState):
        return x
    return SystemState(tuple(x), tuple(y))


def as_matrix(decision) -> np.ndarray:
    if isinstance(decision, MatchingDecision):
        return decision.q
    return np.asarray(decision)


def apply_decision(state: SystemState, decision) -> PostMatchState:
    q = as_matrix(decision)
    x = np.asarray(state.x)
    y = np.asarray(state.y)
    if q.shape != (len(x), len(y)):
        raise DimensionMismatch(f"decision shape {q.shape} does not match state ({len(x)}, {len(y)})")
    if np.any(q < 0):
        raise Infeasible("negative matching quantity")
    u = x - q.sum(axis=1)
    v = y - q.sum(axis=0)
    if np.any(u < 0) or np.any(v < 0):
        raise Infeasible(f"decision over-matches the state: u={u.tolist()}, v={v.tolist()}")
    return PostMatchState(tuple(int(k) for k in u), tuple(int(k) for k in v))


def is_feasible(state: SystemState, q: np.ndarray) -> bool:
    try:
        apply_decision(state, q)
    except (Infeasible, DimensionMismatch):
        return False
    return True


def transition(post: PostMatchState, arrivals_d, arrivals_s, alpha_t: float, beta_t: float, rng=None) -> SystemState:
    """Next pre-matching state ``alpha*u + d``, ``beta*v + s``.

    Rates outside ``{0, 1}`` need ``rng`` (a numpy Generator). Each leftover
    unit then survives independently with the given probability.
    """
    def carry(levels, rate, name):
        if rate in (0.0, 1.0):
            return [int(rate) * k for k in levels]
        if rng is None:
            raise NonIntegerCarryOver(f"{name}={rate} requires stochastic rounding (pass rng)")
        return [int(rng.binomial(k, rate)) for k in levels]

    x = [a + int(d) for a, d in zip(carry(post.u, alpha_t, "alpha"), arrivals_d)]
    y = [b + int(s) for b, s in zip(carry(post.v, beta_t, "beta"), arrivals_s)]
    return SystemState(tuple(x), tuple(y))


def reward_of(rewards_t, decision) -> float:
    r = np.asarray(rewards_t, dtype=float)
    q = as_matrix(decision)
    if r.shape != q.shape:
        raise DimensionMismatch(f"reward shape {r.shape} != decision shape {q.shape}")
    return float(np.sum(r * q))


def period_objective(instance: MatchingInstance, t: int, state: SystemState, q) -> float:
    """Matching reward minus any waiting costs on the leftovers of period ``t``."""
    val = reward_of(instance.rewards[t], q)
    wc = instance.waiting_costs
    if wc is not None:
        post = apply_decision(state, q)
        val -= float(np.dot(wc.c[t], post.u) + np.dot(wc.h[t], post.v))
    return val


# ------------------------------------------------------------ arrivals


def joint_outcomes(instance: MatchingInstance, t: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """All joint arrival outcomes of period ``t`` with their probabilities.

    Returns ``(D, S, p)`` with ``D`` of shape ``(K, m)``, ``S`` of shape
    ``(K, n)`` and ``p`` of shape ``(K,)``.
    """
    models = list(instance.demand_arrivals[t]) + list(instance.supply_arrivals[t])
    outs = [mdl.outcomes() for mdl in models]
    rows, probs = [], []
    for combo in itertools.product(*outs):
        rows.append([c[0] for c in combo])
        probs.append(float(np.prod([c[1] for c in combo])))
    arr = np.array(rows, dtype=np.int64).reshape(len(rows), len(models))
    return arr[:, : instance.m], arr[:, instance.m :], np.array(probs)


def expected_arrivals(instance: MatchingInstance) -> tuple[np.ndarray, np.ndarray]:
    d = np.array([[a.mean for a in row] for row in instance.demand_arrivals])
    s = np.array([[a.mean for a in row] for row in instance.supply_arrivals])
    return d, s


# ------------------------------------------------------------ waiting costs


def _tail_weights(rates: Sequence[float], t: int, T: int) -> np.ndarray:
    """Weights w[tau] = prod_{t <= k < tau} rates[k] for tau = t..T-1."""
    w = np.zeros(T)
    acc = 1.0
    for tau in range(t, T):
        w[tau] = acc
        acc *= rates[tau]
    return w


def fold_waiting_costs(instance: MatchingInstance, costs: WaitingCosts | None = None) -> MatchingInstance:
    """Absorb per-period waiting costs into the rewards.

    A unit matched in period ``t`` avoids all costs it would accrue from ``t``
    onward, discounted by the survival probability. The returned instance has
    no ``waiting_costs`` and stores the folded costs in ``meta["folded_costs"]``.
    """
    costs = costs if costs is not None else instance.waiting_costs
    if costs is None:
        return instance
    if not isinstance(costs, WaitingCosts):
        costs = WaitingCosts(costs["c"], costs["h"])
    T, m, n = instance.T, instance.m, instance.n
    if costs.c.shape != (T, m) or costs.h.shape != (T, n):
        raise DimensionMismatch("waiting costs must be T x m and T x n")
    r = np.array(instance.rewards, dtype=float)
    for t in range(T):
        cd = _tail_weights(instance.alpha, t, T) @ costs.c
        cs = _tail_weights(instance.beta, t, T) @ costs.h
        r[t] += cd[:, None] + cs[None, :]
    meta = dict(instance.meta)
    meta["folded_costs"] = {"c": costs.c.tolist(), "h": costs.h.tolist()}
    return replace(instance, rewards=_frozen(r), waiting_costs=None, meta=meta)


def waiting_cost_constant(instance: MatchingInstance, costs: WaitingCosts | None = None) -> float:
    """Offset between the folded objective and reward-minus-costs objective."""
    costs = costs if costs is not None else instance.waiting_costs
    if costs is None:
        return 0.0
    ed, es = expected_arrivals(instance)
    total = 0.0
    for t in range(instance.T):
        total += float(ed[t] @ (_tail_weights(instance.alpha, t, instance.T) @ costs.c))
        total += float(es[t] @ (_tail_weights(instance.beta, t, instance.T) @ costs.h))
    return total


# ------------------------------------------------------------ serialization

_KEYS = {"m", "n", "T", "rewards", "alpha", "beta", "demand_arrivals", "supply_arrivals", "waiting_costs"}


def parse_arrival_block(block, T: int, k: int, name: str):
    """Type-major JSON layout: ``block[i]`` is a list of T pmfs or ``{"iid": pmf}``."""
    if isinstance(block, Mapping) and set(block) == {"iid"}:
        pmf = _as_model(block["iid"])
        return [[pmf] * k for _ in range(T)]
    if not isinstance(block, list) or len(block) != k:
        raise DimensionMismatch(f"{name} must list {k} types")
    per_type = []
    for entry in block:
        if isinstance(entry, Mapping) and "iid" in entry:
            if set(entry) != {"iid"}:
                raise DimensionMismatch(f"unknown keys in {name}: {sorted(set(entry) - {'iid'})}")
            per_type.append([_as_model(entry["iid"])] * T)
        elif isinstance(entry, Mapping):
            per_type.append([_as_model(entry)] * T)
        else:
            if len(entry) != T:
                raise DimensionMismatch(f"{name} entries must list T={T} pmfs")
            per_type.append([_as_model(e) for e in entry])
    return [[per_type[i][t] for i in range(k)] for t in range(T)]


def instance_from_dict(d: Mapping) -> MatchingInstance:
    """Parse the JSON-shaped instance document. Unknown keys are rejected."""
    unknown = set(d) - _KEYS
    if unknown:
        raise DimensionMismatch(f"unknown instance keys: {sorted(unknown)}")
    missing = (_KEYS - {"waiting_costs"}) - set(d)
    if missing:
        raise DimensionMismatch(f"missing instance keys: {sorted(missing)}")
    T, m, n = int(d["T"]), int(d["m"]), int(d["n"])
    wc = d.get("waiting_costs")
    if wc is not None:
        if set(wc) != {"c", "h"}:
            raise DimensionMismatch("waiting_costs needs exactly the keys c and h")
    return new_instance(
        m,
        n,
        T,
        d["rewards"],
        d["alpha"],
        d["beta"],
        parse_arrival_block(d["demand_arrivals"], T, m, "demand_arrivals"),
        parse_arrival_block(d["supply_arrivals"], T, n, "supply_arrivals"),
        waiting_costs=wc,
    )


def instance_to_json(instance: MatchingInstance) -> str:
    return json.dumps(instance.to_dict(), sort_keys=True)


def instance_from_json(text: str) -> MatchingInstance:
    return instance_from_dict(json.loads(text))
