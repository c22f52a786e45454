"""Monte Carlo evaluation with common random numbers."""

from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from ..core import Infeasible, MatchingInstance, SystemState, apply_decision, period_objective
from ..dp import PolicyHandle
from ..errors import PolicyInfeasibleDecision
from ..rng import rounding_generator, sample_path


@dataclass(frozen=True)
class ReplicationResult:
    total_reward: float
    matched: tuple[int, ...]  # per period
    demand_abandoned: int
    supply_abandoned: int


@dataclass
class PolicySummary:
    name: str
    mean: float
    std_error: float
    matched: tuple[float, ...]
    demand_abandoned: float
    supply_abandoned: float
    replications: list = field(default_factory=list, repr=False)


@dataclass
class SimulationReport:
    seed: int
    replications: int
    T: int
    policies: list

    def summary(self, name: str) -> PolicySummary:
        return next(p for p in self.policies if p.name == name)

    def header(self) -> list[str]:
        return [
            "kind",
            "policy",
            "replication",
            "total_reward",
            "std_error",
            "demand_abandoned",
            "supply_abandoned",
        ] + [f"matched_t{t + 1}" for t in range(self.T)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header())
        for p in self.policies:
            for k, rep in enumerate(p.replications):
                w.writerow(
                    ["replication", p.name, k, repr(rep.total_reward), "", rep.demand_abandoned, rep.supply_abandoned]
                    + list(rep.matched)
                )
        for p in self.policies:
            w.writerow(
                [
                    "summary",
                    p.name,
                    self.replications,
                    repr(p.mean),
                    repr(p.std_error),
                    repr(p.demand_abandoned),
                    repr(p.supply_abandoned),
                ]
                + [repr(v) for v in p.matched]
            )
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "replications": self.replications,
            "policies": [
                {
                    "name": p.name,
                    "mean": p.mean,
                    "std_error": p.std_error,
                    "matched": list(p.matched),
                    "demand_abandoned": p.demand_abandoned,
                    "supply_abandoned": p.supply_abandoned,
                }
                for p in self.policies
            ],
        }


def _carry(levels, rate: float, gen_factory) -> list[int]:
    if rate in (0.0, 1.0):
        return [int(rate) * k for k in levels]
    g = gen_factory()
    return [int(g.binomial(k, rate)) for k in levels]


def run_path(instance: MatchingInstance, policy, D: np.ndarray, S: np.ndarray, seed: int, replication: int) -> ReplicationResult:
    """Follow one policy along fixed arrival realizations."""
    T = instance.T
    x, y = list(D[0]), list(S[0])
    total = 0.0
    matched = []
    lost_d = lost_s = 0
    for t in range(T):
        state = SystemState(tuple(x), tuple(y))
        q = np.asarray(policy(t, state), dtype=np.int64)
        try:
            post = apply_decision(state, q)
        except Infeasible as exc:
            name = getattr(policy, "name", "policy")
            raise PolicyInfeasibleDecision(f"{name} at period {t}, state {state}: {q.tolist()} ({exc})") from exc
        total += period_objective(instance, t, state, q)
        matched.append(int(q.sum()))
        if t == T - 1:
            lost_d += sum(post.u)
            lost_s += sum(post.v)
            break
        cu = _carry(post.u, instance.alpha[t], lambda: rounding_generator(seed, replication, t, 0))
        cv = _carry(post.v, instance.beta[t], lambda: rounding_generator(seed, replication, t, 1))
        lost_d += sum(post.u) - sum(cu)
        lost_s += sum(post.v) - sum(cv)
        x = [a + int(d) for a, d in zip(cu, D[t + 1])]
        y = [b + int(s) for b, s in zip(cv, S[t + 1])]
    return ReplicationResult(total, tuple(matched), lost_d, lost_s)


def simulate(
    instance: MatchingInstance,
    policies: Sequence[PolicyHandle] | Mapping[str, PolicyHandle],
    replications: int,
    seed: int,
    workers: int = 1,
) -> SimulationReport:
    """Evaluate policies on the same sampled paths.

    Replication ``k`` uses the arrival stream ``(seed, k)`` for every
    policy. Results are collected in replication order, so the report does
    not depend on ``workers``.
    """
    if isinstance(policies, Mapping):
        named = list(policies.items())
    else:
        named = [(p.name, p) for p in policies]

    def one(k: int):
        D, S = sample_path(instance, seed, k)
        return [run_path(instance, pol, D, S, seed, k) for _, pol in named]

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(one, range(replications)))
    else:
        results = [one(k) for k in range(replications)]

    summaries = []
    for idx, (name, _) in enumerate(named):
        reps = [res[idx] for res in results]
        totals = np.array([r.total_reward for r in reps])
        se = float(totals.std(ddof=1) / np.sqrt(len(totals))) if len(totals) > 1 else 0.0
        matched = tuple(float(v) for v in np.mean([r.matched for r in reps], axis=0)) if reps else ()
        summaries.append(
            PolicySummary(
                name,
                float(totals.mean()) if len(totals) else 0.0,
                se,
                matched,
                float(np.mean([r.demand_abandoned for r in reps])) if reps else 0.0,
                float(np.mean([r.supply_abandoned for r in reps])) if reps else 0.0,
                reps,
            )
        )
    return SimulationReport(seed, replications, instance.T, summaries)
