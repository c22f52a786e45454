"""Random small instances whose structural premises hold by construction.

All generators take a ``numpy.random.Generator``. Rewards are multiples
of 1/4 and probabilities multiples of 1/4, so most arithmetic is exact.
"""

from __future__ import annotations

import numpy as np

from ..core import ArrivalModel, MatchingInstance, WaitingCosts, iid, new_instance
from ..models import (
    LineLayout,
    UpgradeParams,
    check_horizontal_2x2,
    directed_line,
    euclidean_instance,
    horizontal_2x2,
    upgrading_instance,
    vertical_instance,
    vertical_nonadditive,
)
from ..monge import build_dominance_graph

_QUARTERS = [(1.0,), (0.5, 0.5), (0.25, 0.75), (0.75, 0.25), (0.25, 0.5, 0.25), (0.5, 0.25, 0.25), (0.25, 0.25, 0.5)]


def random_pmf(rng: np.random.Generator, max_q: int = 1) -> ArrivalModel:
    """Pmf on a subset of ``{0..max_q}`` with probabilities in quarters."""
    k = int(rng.integers(1, max_q + 2))
    options = [p for p in _QUARTERS if len(p) == k]
    probs = options[int(rng.integers(len(options)))]
    support = sorted(rng.choice(max_q + 1, size=k, replace=False).tolist())
    return ArrivalModel(tuple(support), probs)


def random_arrivals(rng, T: int, k: int, max_q: int = 1, stationary: bool | None = None):
    if stationary is None:
        stationary = bool(rng.integers(2))
    if stationary:
        return iid([random_pmf(rng, max_q) for _ in range(k)], T)
    return [[random_pmf(rng, max_q) for _ in range(k)] for _ in range(T)]


def _quarters(rng, lo, hi, size=None):
    return rng.integers(int(lo * 4), int(hi * 4) + 1, size=size) / 4.0


def _carry(rng, choices=((0, 0), (1, 1), (0, 1), (1, 0))):
    return choices[int(rng.integers(len(choices)))]


# ---------------------------------------------------------------- transport


def transport_case(rng, max_dim: int = 3, max_q: int = 3):
    m, n = (int(v) for v in rng.integers(1, max_dim + 1, size=2))
    r = _quarters(rng, -2, 5, (m, n))
    x = tuple(int(v) for v in rng.integers(0, max_q + 1, m))
    y = tuple(int(v) for v in rng.integers(0, max_q + 1, n))
    return r, x, y


# ---------------------------------------------------------------- horizontal


def horizontal_2x2_case(rng, alpha=None, beta=None, T=None, max_q: int = 2) -> MatchingInstance:
    """2x2 rewards that are constant or uniformly shifted in time."""
    T = int(rng.integers(2, 5)) if T is None else T
    if alpha is None:
        alpha, beta = _carry(rng)
    while True:
        base = _quarters(rng, 0, 3, (2, 2))
        base[0, 0] += _quarters(rng, 0, 2)
        base[1, 1] += _quarters(rng, 0, 2)
        drift = _quarters(rng, 0, 0.5) * int(rng.integers(2))
        r = np.stack([base - drift * t for t in range(T)])
        if r.min() >= 0 and check_horizontal_2x2(r) is None:
            break
    q = max_q if T <= 3 else 1
    return horizontal_2x2(r, alpha, beta, (random_arrivals(rng, T, 2, q), random_arrivals(rng, T, 2, q)))


def line_case(rng, m=None, n=None, T=None, alpha=None, beta=None, max_q: int = 1) -> MatchingInstance:
    m = int(rng.integers(2, 4)) if m is None else m
    n = int(rng.integers(2, 4)) if n is None else n
    T = int(rng.integers(2, 4)) if T is None else T
    if alpha is None:
        alpha, beta = _carry(rng)
    dpos = sorted(rng.integers(0, 5, m).tolist())
    spos = sorted(rng.integers(0, 5, n).tolist())
    R0 = _quarters(rng, 4, 7)
    step = _quarters(rng, 0, 0.5)
    prize = np.array([R0 - step * t for t in range(T)])
    lay = LineLayout(dpos, spos, prize)
    return directed_line(lay, alpha, beta, (random_arrivals(rng, T, m, max_q), random_arrivals(rng, T, n, max_q)))


def euclid_case(rng, T=None, alpha=None, beta=None) -> MatchingInstance:
    m = int(rng.integers(2, 4))
    T = int(rng.integers(2, 4)) if T is None else T
    if alpha is None:
        alpha, beta = _carry(rng)
    pts = rng.integers(0, 3, (m, 2)).astype(float)
    spts = pts.copy()
    if rng.integers(2):
        spts[-1] = rng.integers(0, 3, 2)
    R0 = _quarters(rng, 3, 6)
    R = [R0 - 0.25 * t * int(rng.integers(2)) for t in range(T)]
    R = np.minimum.accumulate(R)
    gamma = np.full(T, _quarters(rng, 0.25, 1.5))
    return euclidean_instance(
        pts, spts, R, gamma, alpha, beta, (random_arrivals(rng, T, m, 1), random_arrivals(rng, T, m, 1))
    )


# ---------------------------------------------------------------- vertical


def _decreasing_gaps(rng, T: int, k: int, rate: float) -> np.ndarray:
    """Components ``c[t][i]`` strictly decreasing in ``i`` whose gaps shrink no faster than ``rate``.

    Gaps (with a zero appended after the last type) satisfy
    ``gap[t] >= rate * gap[t + 1]``, built backward in time.
    """
    gaps = np.zeros((T, k))
    gaps[T - 1] = _quarters(rng, 0.25, 2, k)
    for t in range(T - 2, -1, -1):
        gaps[t] = rate * gaps[t + 1] + _quarters(rng, 0, 1, k) * int(rng.integers(2))
        gaps[t] = np.maximum(gaps[t], 0.25)
    return np.cumsum(gaps[:, ::-1], axis=1)[:, ::-1]


def vertical_case(rng, alpha=1, beta=1, m=None, n=None, T=None, max_q: int = 1) -> MatchingInstance:
    m = int(rng.integers(2, 4)) if m is None else m
    n = int(rng.integers(2, 4)) if n is None else n
    T = int(rng.integers(2, 4)) if T is None else T
    r_d = _decreasing_gaps(rng, T, m, float(alpha))
    r_s = _decreasing_gaps(rng, T, n, float(beta))
    return vertical_instance(r_d, r_s, alpha, beta, (random_arrivals(rng, T, m, max_q), random_arrivals(rng, T, n, max_q)))


def vertical_nonadditive_case(rng, alpha=1, beta=1, T=None, max_q: int = 1) -> MatchingInstance:
    m, n = (int(v) for v in rng.integers(2, 4, 2))
    T = int(rng.integers(2, 4)) if T is None else T
    for _ in range(200):
        a = np.repeat(np.sort(_quarters(rng, 0.5, 3, m))[::-1][None], T, axis=0)
        b = np.repeat(np.sort(_quarters(rng, 0.5, 3, n))[::-1][None], T, axis=0)
        gamma = _quarters(rng, 0, 0.5)
        try:
            return vertical_nonadditive(
                a, b, gamma, alpha, beta, (random_arrivals(rng, T, m, max_q), random_arrivals(rng, T, n, max_q))
            )
        except Exception:
            continue
    raise RuntimeError("could not draw a non-additive vertical instance")


# ---------------------------------------------------------------- upgrading


def one_level_case(
    rng, n=None, T=None, alpha=None, beta=None, max_q: int = 1, intended_first: bool = True
) -> MatchingInstance:
    """Fares nonincreasing in time so intended pairs never gain by waiting.

    With ``intended_first`` the fares are also nonincreasing in the class
    index, so no upgrade earns more than the intended pair it displaces.
    """
    n = int(rng.integers(2, 4)) if n is None else n
    T = int(rng.integers(2, 4)) if T is None else T
    if alpha is None:
        alpha, beta = _carry(rng)
    c = np.sort(_quarters(rng, 0, 4, n))[::-1]
    c = c + np.arange(n)[::-1] * 0.25  # strictly decreasing
    f0 = c + _quarters(rng, 0.25, 3, n)
    drops = _quarters(rng, 0, 0.5, (T, n))
    drops[0] = 0
    f = f0[None, :] - np.cumsum(drops, axis=0)
    f = np.maximum(f, c[None, :])  # margins stay nonnegative
    if intended_first:
        f = np.minimum.accumulate(f, axis=1)  # stays above c since c decreases
    params = UpgradeParams(f, tuple(c), one_level=True)
    return upgrading_instance(params, alpha, beta, (random_arrivals(rng, T, n, max_q), random_arrivals(rng, T, n, max_q)))


# ---------------------------------------------------------------- generic


def general_case(rng, m=None, n=None, T=None, alpha=None, beta=None, max_q: int = 1) -> MatchingInstance:
    m = int(rng.integers(2, 4)) if m is None else m
    n = int(rng.integers(2, 4)) if n is None else n
    T = int(rng.integers(2, 4)) if T is None else T
    if alpha is None:
        alpha, beta = _carry(rng)
    r = _quarters(rng, -1, 5, (T, m, n))
    return new_instance(m, n, T, r, alpha, beta, random_arrivals(rng, T, m, max_q), random_arrivals(rng, T, n, max_q))


def strong_valid_case(rng, max_tries: int = 200) -> MatchingInstance:
    """Draw from the structured families until the strong relation is valid."""
    makers = [line_case, vertical_case, horizontal_2x2_case, euclid_case, one_level_case]
    for _ in range(max_tries):
        maker = makers[int(rng.integers(len(makers)))]
        if maker is vertical_case:
            a, b = _carry(rng, ((1, 1), (0, 1), (1, 0), (0, 0)))
            inst = maker(rng, alpha=a, beta=b)
        elif maker is horizontal_2x2_case:
            inst = maker(rng, T=int(rng.integers(2, 4)), max_q=1)
        else:
            inst = maker(rng)
        if build_dominance_graph(inst).strong_valid:
            return inst
    raise RuntimeError("no strong-valid instance found")


def with_waiting_costs(rng, instance: MatchingInstance) -> MatchingInstance:
    c = _quarters(rng, 0, 1, (instance.T, instance.m))
    h = _quarters(rng, 0, 1, (instance.T, instance.n))
    return new_instance(
        instance.m,
        instance.n,
        instance.T,
        instance.rewards,
        instance.alpha,
        instance.beta,
        instance.demand_arrivals,
        instance.supply_arrivals,
        waiting_costs=WaitingCosts(c, h),
        meta=instance.meta,
    )


# ---------------------------------------------------------------- counterexamples


def _det(values):
    return [ArrivalModel.deterministic(v) for v in values]


def necessity_case(clause: str):
    """Instances where one dominance inequality fails and the optimum breaks priority.

    Returns ``(instance, dominant, dominated)``: the optimum matches the
    dominated pair while the nominally dominant pair still has leftovers.

    Clauses: ``row_i`` / ``col_i`` break the same-period reward ordering,
    ``row_ii`` / ``col_ii`` break the carried-advantage inequality, and
    ``strong`` breaks the exchange inequality.
    """
    if clause == "col_i":
        # the nominal priority pair (0, 0) earns less than (0, 1) right now
        r = np.array([[[2.0, 3.0], [0.0, 0.0]]])
        inst = new_instance(2, 2, 1, r, 0, 0, [_det([1, 0])], [_det([1, 1])])
        return inst, (0, 0), (0, 1)
    if clause == "row_i":
        r = np.array([[[2.0, 0.0], [3.0, 0.0]]])
        inst = new_instance(2, 2, 1, r, 0, 0, [_det([1, 1])], [_det([1, 0])])
        return inst, (0, 0), (1, 0)
    if clause == "col_ii":
        # demand 0 meets both supplies now; supply 0 can wait for demand 1
        r = np.array([[[3.0, 2.5], [0.0, 0.0]], [[3.0, 2.5], [2.0, 0.0]]])
        dem = [_det([1, 0]), _det([0, 1])]
        sup = [_det([1, 1]), _det([0, 0])]
        inst = new_instance(2, 2, 2, r, 0, 1, dem, sup)
        return inst, (0, 0), (0, 1)
    if clause == "row_ii":
        r = np.array([[[3.0, 0.0], [2.5, 0.0]], [[3.0, 2.0], [2.5, 0.0]]])
        dem = [_det([1, 1]), _det([0, 0])]
        sup = [_det([1, 0]), _det([0, 1])]
        inst = new_instance(2, 2, 2, r, 1, 0, dem, sup)
        return inst, (0, 0), (1, 0)
    if clause == "strong":
        # (0,0) dominates both neighbors yet the cross pairs earn more together
        r = np.array([[[3.0, 2.5], [2.5, 0.0]]])
        inst = new_instance(2, 2, 1, r, 0, 0, [_det([1, 1])], [_det([1, 1])])
        return inst, (0, 0), (0, 1)
    raise ValueError(f"unknown clause {clause!r}")


NECESSITY_CLAUSES = ("row_i", "row_ii", "col_i", "col_ii", "strong")
