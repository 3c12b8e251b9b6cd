"""Seeded Monte Carlo estimation of (T_N, U_2^N, ..., U_jmax^N).

One replication draws coupons until every type has been seen.  Because the
j-th copy of a type is the one that fills album j, the number of empty slots
in album j at completion is ``#{k : counts[k] < j}``.

Replications are grouped in fixed-size blocks.  Block ``b`` draws from a
Philox stream keyed by ``(seed, b)``, so every replication is a fixed
function of the seed and its index, whatever the thread count.  Per-block
integer sums are combined exactly, in block order.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numba
import numpy as np

from .families import ProbVector

DRAW_CAP = 10**10
REPS_PER_BLOCK = 1024


class CapExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class CollectionOutcome:
    t: int
    counts: np.ndarray


@dataclass(frozen=True)
class AliasTable:
    """Vose's alias table: O(1) categorical draws after O(N) setup."""

    prob: np.ndarray
    alias: np.ndarray

    @classmethod
    def build(cls, p) -> "AliasTable":
        p = np.asarray(p, dtype=np.float64)
        n = p.size
        scaled = p * (n / p.sum())
        prob = np.ones(n)
        alias = np.arange(n, dtype=np.int64)
        small = [i for i in range(n) if scaled[i] < 1.0]
        large = [i for i in range(n) if scaled[i] >= 1.0]
        while small and large:
            s = small.pop()
            g = large.pop()
            prob[s] = scaled[s]
            alias[s] = g
            scaled[g] -= 1.0 - scaled[s]
            (small if scaled[g] < 1.0 else large).append(g)
        # leftovers are 1 up to rounding
        return cls(prob, alias)

    def implied_probabilities(self) -> np.ndarray:
        n = self.prob.size
        out = self.prob / n
        np.add.at(out, self.alias, (1.0 - self.prob) / n)
        return out


@numba.njit(nogil=True, cache=True)
def _collect(prob, alias, uniform, rng, counts, cap):
    n = counts.size
    counts[:] = 0
    remaining = n
    t = 0
    while remaining > 0:
        if t >= cap:
            return -1
        if uniform:
            k = rng.integers(0, n)
        else:
            k = int(rng.random() * n)
            if k >= n:
                k = n - 1
            if rng.random() >= prob[k]:
                k = alias[k]
        if counts[k] == 0:
            remaining -= 1
        counts[k] += 1
        t += 1
    return t


@numba.njit(nogil=True, cache=True)
def _block(prob, alias, uniform, rng, reps, jmax, cap):
    n = prob.size
    counts = np.zeros(n, dtype=np.int64)
    ts = np.empty(reps, dtype=np.int64)
    us = np.zeros((reps, jmax - 1), dtype=np.int64)
    below = np.zeros(jmax + 1, dtype=np.int64)
    for r in range(reps):
        t = _collect(prob, alias, uniform, rng, counts, cap)
        if t < 0:
            return ts[:r], us[:r], False
        ts[r] = t
        below[:] = 0
        for k in range(n):
            c = counts[k]
            if c < jmax:
                below[c] += 1
        # U_j = #{count < j}
        acc = 0
        for j in range(2, jmax + 1):
            acc += below[j - 1]
            us[r, j - 2] = acc
    return ts, us, True


def _stream(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(block,))))


def _prepare(p: ProbVector):
    uniform = bool(np.all(p.p == p.p[0]))
    table = AliasTable.build(p.p)
    return table.prob, table.alias, uniform


def run_once(p: ProbVector, rng: np.random.Generator, cap: int = DRAW_CAP) -> CollectionOutcome:
    """Draw until all N types are seen; return the draw count and per-type counts."""
    prob, alias, uniform = _prepare(p)
    counts = np.zeros(p.N, dtype=np.int64)
    t = _collect(prob, alias, uniform, rng, counts, cap)
    if t < 0:
        raise CapExceeded(f"no completion within {cap} draws")
    return CollectionOutcome(int(t), counts)


def unfilled_from_counts(outcome: CollectionOutcome, j_max: int) -> np.ndarray:
    """[U_2, ..., U_jmax] with U_j = #{k : counts[k] < j}."""
    if j_max < 2:
        raise ValueError("j_max must be >= 2")
    counts = np.asarray(outcome.counts)
    return np.array([int(np.count_nonzero(counts < j)) for j in range(2, j_max + 1)])


@dataclass(frozen=True)
class SimEstimate:
    reps: int
    seed: int
    j_max: int
    mean_t: float
    se_t: float
    var_t: float
    mean_u: dict[int, float]
    se_u: dict[int, float]
    var_u: dict[int, float]
    # u_hist[j][m] = number of replications with U_j = m
    u_hist: dict[int, np.ndarray] = field(repr=False)

    def empirical_cdf(self, j: int) -> np.ndarray:
        h = self.u_hist[j]
        return np.cumsum(h) / h.sum()

    def rows(self) -> list[dict]:
        out = [
            {"j": j, "mean": self.mean_u[j], "se": self.se_u[j], "reps": self.reps, "seed": self.seed}
            for j in range(2, self.j_max + 1)
        ]
        return out


def _moments(s1: int, s2: int, n: int) -> tuple[float, float, float]:
    mean = Fraction(s1, n)
    if n < 2:
        return float(mean), math.nan, math.nan
    var = Fraction(n * s2 - s1 * s1, n * (n - 1))
    return float(mean), math.sqrt(var / n), float(var)


def estimate(
    p: ProbVector,
    j_max: int,
    reps: int,
    seed: int,
    *,
    threads: int | None = None,
    cap: int = DRAW_CAP,
) -> SimEstimate:
    """Sample means and standard errors (sd / sqrt(reps), n-1 denominator)."""
    if j_max < 2:
        raise ValueError("j_max must be >= 2")
    if reps < 1:
        raise ValueError("reps must be >= 1")
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError("seed must be a 64-bit unsigned integer")
    prob, alias, uniform = _prepare(p)
    nblocks = -(-reps // REPS_PER_BLOCK)

    def work(b):
        n = min(REPS_PER_BLOCK, reps - b * REPS_PER_BLOCK)
        ts, us, ok = _block(prob, alias, uniform, _stream(seed, b), n, j_max, cap)
        if not ok:
            raise CapExceeded(f"replication {b * REPS_PER_BLOCK + ts.size} exceeded {cap} draws")
        hist = np.stack([np.bincount(us[:, i], minlength=p.N + 1) for i in range(j_max - 1)])
        return (
            int(ts.sum()),
            int((ts.astype(object) ** 2).sum()),
            [int(v) for v in us.sum(axis=0)],
            [int(v) for v in (us * us).sum(axis=0)],
            hist,
        )

    if threads is None:
        threads = int(os.environ.get("SIBLING_THREADS", "0")) or (os.cpu_count() or 1)
    if threads > 1 and nblocks > 1:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(work, range(nblocks)))
    else:
        parts = [work(b) for b in range(nblocks)]

    st = sum(x[0] for x in parts)
    st2 = sum(x[1] for x in parts)
    mean_t, se_t, var_t = _moments(st, st2, reps)
    mean_u, se_u, var_u, hist = {}, {}, {}, {}
    for i, j in enumerate(range(2, j_max + 1)):
        s1 = sum(x[2][i] for x in parts)
        s2 = sum(x[3][i] for x in parts)
        mean_u[j], se_u[j], var_u[j] = _moments(s1, s2, reps)
        hist[j] = sum(x[4][i] for x in parts)
    return SimEstimate(reps, seed, j_max, mean_t, se_t, var_t, mean_u, se_u, var_u, hist)
