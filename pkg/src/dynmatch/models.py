"""Instance builders for the horizontal and vertical specializations.

Every builder checks its structural assumptions numerically (tolerance
``1e-9``). Pass ``check=False`` to downgrade failures to warnings, for
instance when studying counterexamples.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import TOL, MatchingInstance, new_instance
from .errors import AssumptionViolated, BadClassOrder, MonotoneParamViolated


def _fail(msg: str, check: bool, exc=AssumptionViolated):
    if check:
        raise exc(msg)
    warnings.warn(msg, stacklevel=3)


def _split_arrivals(arrivals):
    if isinstance(arrivals, dict):
        return arrivals["demand"], arrivals["supply"]
    return arrivals


def _rates(rate, T):
    return [float(rate)] * T if np.isscalar(rate) else [float(r) for r in rate]


# ---------------------------------------------------------------- 2 x 2


def check_horizontal_2x2(rewards, tol: float = TOL) -> str | None:
    """First failing inequality of the 2x2 horizontal assumptions, if any."""
    r = np.asarray(rewards, dtype=float)
    T = r.shape[0]
    for t in range(T):
        for k in (0, 1):
            o = 1 - k
            if r[t, k, k] < max(r[t, k, o], r[t, o, k]) - tol:
                return f"diagonal dominance fails at t={t}, k={k}: r_kk={r[t, k, k]}"
    for t in range(T - 1):
        for k in (0, 1):
            o = 1 - k
            for i in (0, 1):
                if r[t, k, k] - r[t, k, o] < r[t + 1, i, k] - r[t + 1, i, o] - tol:
                    return f"row advantage fails at t={t}, k={k}, i={i}"
            for j in (0, 1):
                if r[t, k, k] - r[t, o, k] < r[t + 1, k, j] - r[t + 1, o, j] - tol:
                    return f"column advantage fails at t={t}, k={k}, j={j}"
    return None


def horizontal_2x2(rewards, alpha, beta, arrivals, check: bool = True) -> MatchingInstance:
    """Two demand and two supply types where ``(k, k)`` are the natural pairs.

    Args:
        rewards: ``(T, 2, 2)`` array.
        arrivals: ``(demand, supply)`` period-major pmf lists, or a dict with
            keys ``demand`` and ``supply``.
    """
    r = np.asarray(rewards, dtype=float)
    problem = check_horizontal_2x2(r)
    if problem:
        _fail(problem, check)
    d, s = _split_arrivals(arrivals)
    return new_instance(2, 2, r.shape[0], r, alpha, beta, d, s, meta={"model": "horizontal_2x2"})


def premier_regular(
    f_p: float,
    f_r: float,
    c_p: float,
    c_r: float,
    penalty: float,
    T: int,
    alpha,
    beta,
    arrivals,
    check: bool = True,
) -> MatchingInstance:
    """Premier/regular service: type 0 is premier, type 1 is regular.

    A regular customer served by a premier provider pays the regular fare
    at premier cost. A premier customer served by a regular provider pays
    the regular fare less ``penalty``.
    """
    r = np.array([[f_p - c_p, f_r - c_r - penalty], [f_r - c_p, f_r - c_r]], dtype=float)
    return horizontal_2x2(np.repeat(r[None], T, axis=0), alpha, beta, arrivals, check)


# ---------------------------------------------------------------- directed line


@dataclass(frozen=True)
class LineLayout:
    """Positions on a directed segment plus prize parameters.

    ``prize`` is either ``R[t]`` (shape ``(T,)``) or per-demand ``R[t][i]``
    (shape ``(T, m)``). Supply at position ``p`` reaches demand at position
    ``p' >= p`` at distance ``p' - p``.
    """

    demand_pos: tuple[float, ...]
    supply_pos: tuple[float, ...]
    prize: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "demand_pos", tuple(float(p) for p in self.demand_pos))
        object.__setattr__(self, "supply_pos", tuple(float(p) for p in self.supply_pos))
        object.__setattr__(self, "prize", np.asarray(self.prize, dtype=float))

    def reachable(self, i: int, j: int) -> bool:
        return self.demand_pos[i] >= self.supply_pos[j]

    def distance(self, i: int, j: int) -> float:
        return self.demand_pos[i] - self.supply_pos[j]


def directed_line(layout: LineLayout, alpha, beta, arrivals) -> MatchingInstance:
    m, n = len(layout.demand_pos), len(layout.supply_pos)
    prize = layout.prize
    T = prize.shape[0]
    if prize.ndim == 1:
        prize = np.repeat(prize[:, None], m, axis=1)
    r = np.zeros((T, m, n))
    reach = []
    for i in range(m):
        for j in range(n):
            if layout.reachable(i, j):
                r[:, i, j] = prize[:, i] - layout.distance(i, j)
                reach.append((i, j))
    d, s = _split_arrivals(arrivals)
    return new_instance(
        m,
        n,
        T,
        r,
        alpha,
        beta,
        d,
        s,
        meta={
            "model": "directed_line",
            "reachable": reach,
            "demand_pos": list(layout.demand_pos),
            "supply_pos": list(layout.supply_pos),
        },
    )


def euclidean_instance(demand_points, supply_points, R, gamma, alpha, beta, arrivals) -> MatchingInstance:
    """Rewards ``R_t - gamma_t * dist`` between points in the plane (or any R^k)."""
    R = np.asarray(R, dtype=float)
    g = np.asarray(gamma, dtype=float)
    if np.any(np.diff(R) > TOL) or np.any(np.diff(g) > TOL):
        raise MonotoneParamViolated("R_t and gamma_t must be nonincreasing in t")
    dp = np.asarray(demand_points, dtype=float)
    sp = np.asarray(supply_points, dtype=float)
    dist = np.linalg.norm(dp[:, None, :] - sp[None, :, :], axis=-1)
    r = R[:, None, None] - g[:, None, None] * dist[None]
    colocated = [(i, j) for i in range(len(dp)) for j in range(len(sp)) if dist[i, j] == 0]
    d, s = _split_arrivals(arrivals)
    return new_instance(
        len(dp), len(sp), len(R), r, alpha, beta, d, s, meta={"model": "euclidean", "colocated": colocated}
    )


# ---------------------------------------------------------------- upgrading


@dataclass(frozen=True)
class UpgradeParams:
    """Class-based upgrading: class 0 is the highest quality.

    ``f[t][i]`` is the fare of demand class ``i`` and ``c[j]`` the cost of
    supply class ``j``. A class-``i`` customer can be served by any class
    ``j <= i`` (same or better).
    """

    f: np.ndarray
    c: tuple[float, ...]
    one_level: bool = False

    def __post_init__(self):
        object.__setattr__(self, "f", np.asarray(self.f, dtype=float))
        object.__setattr__(self, "c", tuple(float(v) for v in self.c))


def upgrading_instance(params: UpgradeParams, alpha, beta, arrivals) -> MatchingInstance:
    c = params.c
    if any(c[k] <= c[k + 1] for k in range(len(c) - 1)):
        raise BadClassOrder("supply costs must strictly decrease with the class index")
    n = len(c)
    f = params.f
    if f.ndim != 2 or f.shape[1] != n:
        raise BadClassOrder("fares must be a T x n matrix (one class per supply class)")
    # distance reading: class k sits at c_0 - c_k on the line
    pos = tuple(c[0] - ck for ck in c)
    prize = f - np.asarray(c)[None, :]
    inst = directed_line(LineLayout(pos, pos, prize), alpha, beta, arrivals)
    r = np.array(inst.rewards)
    if params.one_level:
        for i in range(n):
            for j in range(n):
                if j not in (i, i - 1):
                    r[:, i, j] = 0.0
    meta = {"model": "upgrading", "one_level": params.one_level}
    return new_instance(n, n, inst.T, r, inst.alpha, inst.beta, inst.demand_arrivals, inst.supply_arrivals, meta=meta)


def is_one_level(instance: MatchingInstance) -> bool:
    if instance.m != instance.n:
        return False
    r = instance.rewards
    for i in range(instance.m):
        for j in range(instance.n):
            if j not in (i, i - 1) and np.any(r[:, i, j] != 0):
                return False
    return True


# ---------------------------------------------------------------- vertical


def check_vertical_additive(r_d, r_s, alpha, beta, tol: float = TOL) -> str | None:
    r_d = np.asarray(r_d, dtype=float)
    r_s = np.asarray(r_s, dtype=float)
    T = r_d.shape[0]
    a, b = _rates(alpha, T), _rates(beta, T)
    for name, comp in (("demand", r_d), ("supply", r_s)):
        if np.any(np.diff(comp, axis=1) >= 0):
            return f"{name} components must strictly decrease in the type index"
    for name, comp, rate in (("demand", r_d, a), ("supply", r_s, b)):
        ext = np.concatenate([comp, np.zeros((T, 1))], axis=1)
        gaps = ext[:, :-1] - ext[:, 1:]
        for t in range(T - 1):
            bad = np.nonzero(gaps[t] < rate[t] * gaps[t + 1] - tol)[0]
            if bad.size:
                return f"{name} quality gap at t={t}, type {int(bad[0])} shrinks faster than the carry-over rate"
    return None


def vertical_instance(r_d, r_s, alpha, beta, arrivals, check: bool = True) -> MatchingInstance:
    """Additive rewards ``r_d[t][i] + r_s[t][j]`` with quality-ordered types."""
    r_d = np.asarray(r_d, dtype=float)
    r_s = np.asarray(r_s, dtype=float)
    problem = check_vertical_additive(r_d, r_s, alpha, beta)
    if problem:
        _fail(problem, check)
    r = r_d[:, :, None] + r_s[:, None, :]
    d, s = _split_arrivals(arrivals)
    return new_instance(
        r_d.shape[1],
        r_s.shape[1],
        r_d.shape[0],
        r,
        alpha,
        beta,
        d,
        s,
        meta={"model": "vertical", "r_d": r_d.tolist(), "r_s": r_s.tolist()},
    )


def check_vertical_general(rewards, alpha, beta, tol: float = TOL) -> str | None:
    """Clause-by-clause check of the non-additive vertical assumption.

    (i) rewards decrease in both indices, (ii) quality gaps do not shrink
    faster than the carry-over rate, (iii) rewards are supermodular.
    """
    r = np.asarray(rewards, dtype=float)
    T, m, n = r.shape
    a, b = _rates(alpha, T), _rates(beta, T)
    if np.any(np.diff(r, axis=1) > tol) or np.any(np.diff(r, axis=2) > tol):
        return "clause (i): rewards must decrease in i and j"
    for t in range(T - 1):
        for i in range(m - 1):
            for j in range(n):
                if np.any(r[t, i, j] - r[t, i + 1, j] < a[t] * (r[t + 1, i, :] - r[t + 1, i + 1, :]) - tol):
                    return f"clause (ii): demand gap at t={t}, i={i}, j={j}"
        for j in range(n - 1):
            for i in range(m):
                if np.any(r[t, i, j] - r[t, i, j + 1] < b[t] * (r[t + 1, :, j] - r[t + 1, :, j + 1]) - tol):
                    return f"clause (ii): supply gap at t={t}, i={i}, j={j}"
    sm = r[:, :-1, :-1] + r[:, 1:, 1:] - r[:, :-1, 1:] - r[:, 1:, :-1]
    if np.any(sm < -tol):
        return "clause (iii): rewards must be supermodular"
    return None


def vertical_nonadditive(a, b, gamma, alpha, beta, arrivals, check: bool = True) -> MatchingInstance:
    """Rewards ``a_i + b_j + gamma * a_i * b_j``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    r = a[:, :, None] + b[:, None, :] + gamma * a[:, :, None] * b[:, None, :]
    problem = check_vertical_general(r, alpha, beta)
    if problem:
        _fail(problem, check)
    d, s = _split_arrivals(arrivals)
    return new_instance(
        a.shape[1], b.shape[1], a.shape[0], r, alpha, beta, d, s, meta={"model": "vertical_nonadditive", "gamma": gamma}
    )


def is_vertical(instance: MatchingInstance) -> bool:
    if instance.meta.get("model") in ("vertical", "vertical_nonadditive"):
        return True
    return check_vertical_general(instance.rewards, instance.alpha, instance.beta) is None


BUILDERS = {
    "horizontal_2x2": horizontal_2x2,
    "premier_regular": premier_regular,
    "directed_line": directed_line,
    "euclidean": euclidean_instance,
    "upgrading": upgrading_instance,
    "vertical": vertical_instance,
    "vertical_nonadditive": vertical_nonadditive,
}
