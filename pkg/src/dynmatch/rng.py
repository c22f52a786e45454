"""Reproducible random streams.

All randomness comes from the counter-based Philox4x64-10 generator
(``numpy.random.Philox``). A stream is identified by a tuple of
nonnegative integers ``(seed, k1, k2, ...)``. The 128-bit Philox key is
the first two 64-bit words of
``numpy.random.SeedSequence([seed, k1, k2, ...]).generate_state(2, uint64)``,
and the counter starts at zero. Uniforms are drawn with
``Generator.random()``, i.e. the top 53 bits of each 64-bit output
scaled by 2**-53.

Arrival paths use the stream ``(seed, replication)``. Period ``t`` reads
``m + n`` consecutive uniforms: demand types first, then supply types, so
the uniform for period ``t`` and demand type ``i`` is number
``t * (m + n) + i`` and for supply type ``j`` it is ``t * (m + n) + m + j``.
Each uniform is turned into a quantity by inverse-CDF lookup over the
sorted support.
"""

from __future__ import annotations

import numpy as np

from .core import MatchingInstance


def generator(*key: int) -> np.random.Generator:
    words = np.random.SeedSequence([int(k) & 0xFFFFFFFFFFFFFFFF for k in key]).generate_state(2, np.uint64)
    return np.random.Generator(np.random.Philox(key=int(words[0]) | (int(words[1]) << 64)))


def path_uniforms(instance: MatchingInstance, seed: int, replication: int = 0) -> np.ndarray:
    """Uniforms of one path, shape ``(T, m + n)``."""
    g = generator(seed, replication)
    return g.random(instance.T * (instance.m + instance.n)).reshape(instance.T, instance.m + instance.n)


def sample_path(instance: MatchingInstance, seed: int, replication: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Arrival realizations ``(D, S)`` with shapes ``(T, m)`` and ``(T, n)``."""
    u = path_uniforms(instance, seed, replication)
    m = instance.m
    D = np.array([[instance.demand_arrivals[t][i].quantile(u[t, i]) for i in range(m)] for t in range(instance.T)])
    S = np.array(
        [[instance.supply_arrivals[t][j].quantile(u[t, m + j]) for j in range(instance.n)] for t in range(instance.T)]
    )
    return D.reshape(instance.T, m).astype(np.int64), S.reshape(instance.T, instance.n).astype(np.int64)


def rounding_generator(seed: int, replication: int, t: int, side: int) -> np.random.Generator:
    """Stream for stochastic rounding of fractional carry-over.

    ``side`` is 0 for demand and 1 for supply. The stream tag 1 keeps it
    apart from arrival streams.
    """
    return generator(seed, replication, 1, t, side)
