"""Numerical evaluation of E[U_j^N] for arbitrary coupon probabilities.

The expectation is the Poissonized integral

    E[U_j^N] = sum_k int_0^inf p_k e^{-p_k t} (p_k t)^{j-1}/(j-1)!
                              * prod_{i != k} (1 - e^{-p_i t}) dt.

Every node shares the log-survival sum S(t) = sum_i log(1 - e^{-p_i t}), so
the k-th product is exp(S(t) - log(1 - e^{-p_k t})) and a node costs O(N).
Integration runs in u = log t with Gauss-Legendre panels that are bisected
adaptively; both ends of the infinite range are cut where a certified bound
on the discarded mass falls below ``abs_tol / 1000``.
"""

from __future__ import annotations

import heapq
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy.special import gammaincc, gammaln

from .families import ProbVector

_LOG_FACTORIAL = [math.log(math.factorial(n)) for n in range(21)]
UNDERFLOW_LOG = -745.0
# elements per vectorized block (nodes x distinct probabilities)
_BLOCK = 1 << 20


def log_factorial(n: int) -> float:
    return _LOG_FACTORIAL[n] if n <= 20 else float(gammaln(n + 1.0))


def log1mexp(x: np.ndarray) -> np.ndarray:
    """log(1 - exp(-x)) for x > 0 without cancellation at either end."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    small = x <= math.log(2.0)
    out[small] = np.log(-np.expm1(-x[small]))
    out[~small] = np.log1p(-np.exp(-x[~small]))
    return out


@dataclass(frozen=True)
class QuadratureConfig:
    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    max_panel_doublings: int = 16
    nodes_per_panel: int = 64
    initial_panels: int = 4

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.nodes_per_panel < 2:
            raise ValueError("nodes_per_panel must be >= 2")
        if self.initial_panels < 1 or self.max_panel_doublings < 1:
            raise ValueError("initial_panels and max_panel_doublings must be >= 1")


@dataclass(frozen=True)
class ExpectationResult:
    value: float
    error_estimate: float
    nodes_used: int
    elapsed: float
    N: int
    j: int
    method: str = "quadrature"

    def to_dict(self, timing: bool = False) -> dict:
        d = {
            "method": self.method,
            "N": self.N,
            "j": self.j,
            "value": self.value,
            "error_estimate": self.error_estimate,
            "nodes_used": self.nodes_used,
        }
        if timing:
            d["ms"] = round(self.elapsed * 1e3, 3)
        return d


class NonConvergence(RuntimeError):
    """Panel refinement ran out of budget; ``value``/``error_estimate`` hold the best effort."""

    def __init__(self, message: str, value: float, error_estimate: float, nodes_used: int):
        super().__init__(message)
        self.value = value
        self.error_estimate = error_estimate
        self.nodes_used = nodes_used


@lru_cache(maxsize=16)
def _gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(n)


@dataclass(frozen=True)
class PanelIntegral:
    value: float
    error_estimate: float
    nodes_used: int


def integrate_panels(
    f: Callable[[np.ndarray], np.ndarray],
    edges: Sequence[float],
    cfg: QuadratureConfig,
) -> PanelIntegral:
    """Adaptive composite Gauss-Legendre integration of a vectorized f.

    Each panel carries its n-point estimate and the sum of the n-point
    estimates on its two halves; the difference is the panel's error.  The
    panels with the largest errors are bisected (each bisection is one
    doubling of that panel) until the summed error meets
    max(rel_tol * |value|, abs_tol).  All nodes of a refinement round are
    evaluated in a single call to ``f``.
    """
    x, w = _gauss_legendre(cfg.nodes_per_panel)
    nodes_used = 0

    def quad_many(intervals):
        nonlocal nodes_used
        if not intervals:
            return []
        a = np.array([iv[0] for iv in intervals])
        b = np.array([iv[1] for iv in intervals])
        half = 0.5 * (b - a)
        pts = (0.5 * (a + b))[:, None] + half[:, None] * x[None, :]
        vals = np.asarray(f(pts.ravel()), dtype=np.float64).reshape(pts.shape)
        nodes_used += vals.size
        return list(half * (vals @ w))

    edges = [float(e) for e in edges]
    if any(b <= a for a, b in zip(edges, edges[1:])):
        raise ValueError("panel edges must be strictly increasing")

    # panel record: [a, b, depth, left_est, right_est, err]
    def refine(parents):
        """parents: list of (a, b, depth, whole_estimate)."""
        halves = []
        for a, b, _, _ in parents:
            m = 0.5 * (a + b)
            halves += [(a, m), (m, b)]
        est = quad_many(halves)
        out = []
        for i, (a, b, depth, whole) in enumerate(parents):
            left, right = est[2 * i], est[2 * i + 1]
            out.append([a, b, depth, left, right, abs(whole - (left + right))])
        return out

    coarse = quad_many(list(zip(edges, edges[1:])))
    panels = refine([(a, b, 0, c) for (a, b), c in zip(zip(edges, edges[1:]), coarse)])

    while True:
        total = math.fsum(p[3] + p[4] for p in panels)
        err = math.fsum(p[5] for p in panels)
        target = max(cfg.rel_tol * abs(total), cfg.abs_tol)
        if err <= target:
            return PanelIntegral(total, err, nodes_used)
        # bisect every panel above its fair share of the budget, worst first
        share = target / len(panels)
        worst = heapq.nlargest(
            max(1, sum(p[5] > share for p in panels)), range(len(panels)), key=lambda i: panels[i][5]
        )
        if any(panels[i][2] + 1 > cfg.max_panel_doublings for i in worst):
            raise NonConvergence(
                f"panel doubling budget ({cfg.max_panel_doublings}) exhausted; "
                f"value={total!r} error={err!r}",
                total,
                err,
                nodes_used,
            )
        split = set(worst)
        parents = []
        for i in sorted(split):
            a, b, depth, left, right, _ = panels[i]
            m = 0.5 * (a + b)
            parents += [(a, m, depth + 1, left), (m, b, depth + 1, right)]
        children = iter(refine(parents))
        new = []
        for i, p in enumerate(panels):
            if i in split:
                new += [next(children), next(children)]
            else:
                new.append(p)
        panels = new


def _resolve_threads(threads: int | None) -> int:
    if threads is None:
        threads = int(os.environ.get("SIBLING_THREADS", "0")) or (os.cpu_count() or 1)
    return max(1, int(threads))


class _Problem:
    """Distinct probabilities with multiplicities, shared by both parameterizations."""

    def __init__(self, p: ProbVector, j: int):
        if int(j) != j or j < 2:
            raise ValueError(f"j must be an integer >= 2, got {j}")
        vals, counts = np.unique(p.p, return_counts=True)
        self.N = p.N
        self.j = int(j)
        self.v = vals
        self.logv = np.log(vals)
        self.c = counts.astype(np.float64)
        self.log_fact = log_factorial(self.j - 1)

    def integrand_t(self, logt: np.ndarray, threads: int = 1) -> np.ndarray:
        """sum_k of the k-th integrand at t = exp(logt), vectorized over nodes."""
        logt = np.asarray(logt, dtype=np.float64)
        out = np.zeros(logt.size)
        rows = max(1, _BLOCK // self.v.size)
        chunks = [slice(i, min(i + rows, logt.size)) for i in range(0, logt.size, rows)]

        def work(sl):
            out[sl] = self._block(logt[sl])

        if threads > 1 and len(chunks) > 1:
            with ThreadPoolExecutor(threads) as ex:
                list(ex.map(work, chunks))
        else:
            for sl in chunks:
                work(sl)
        return out

    def _block(self, logt: np.ndarray) -> np.ndarray:
        lx = logt[:, None] + self.logv[None, :]
        x = np.exp(lx)
        lme = log1mexp(x)
        S = (lme * self.c).sum(axis=1)
        res = np.zeros(logt.size)
        live = S >= UNDERFLOW_LOG
        if not live.any():
            return res
        lx, x, lme = lx[live], x[live], lme[live]
        logterm = (
            S[live][:, None]
            - lme
            + self.logv[None, :]
            - x
            + (self.j - 1) * lx
            - self.log_fact
        )
        res[live] = (np.exp(logterm) * self.c).sum(axis=1)
        return res

    def upper_tail(self, t: float) -> float:
        """Mass beyond t, bounded by sum_k P(Gamma(j, p_k) > t) (products <= 1)."""
        return float((gammaincc(self.j, self.v * t) * self.c).sum())

    def lower_tail(self, t: float) -> float:
        """Mass below t, bounded by t * G(t) with G a nondecreasing majorant.

        G(t) = sum_k p_k (p_k t)^{j-1}/(j-1)! prod_{i != k} min(1, p_i t).
        """
        lt = math.log(t)
        clip = np.minimum(0.0, self.logv + lt)
        M = float((clip * self.c).sum())
        logs = M - clip + self.logv + (self.j - 1) * (self.logv + lt) - self.log_fact
        top = logs.max()
        return math.exp(lt + top) * float((np.exp(logs - top) * self.c).sum())

    def time_window(self, abs_tol: float) -> tuple[float, float, float, float]:
        """(t_lo, t_break, t_hi, discarded) with certified discarded mass."""
        target = 1e-3 * abs_tol
        pmin = float(self.v[0])
        # median of 1/p_k over all N types
        inv = 1.0 / self.v[::-1]
        cum = np.cumsum(self.c[::-1])
        t_break = float(inv[np.searchsorted(cum, 0.5 * self.N)])
        t_hi = max(math.log(self.N / abs_tol) / pmin, t_break * 2.0)
        while self.upper_tail(t_hi) > target:
            t_hi *= 1.5
        t_lo = t_break
        while self.lower_tail(t_lo) > target:
            t_lo *= 0.5
        return t_lo, t_break, t_hi, self.upper_tail(t_hi) + self.lower_tail(t_lo)


def _edges(lo: float, mid: float, hi: float, n: int) -> list[float]:
    if mid <= lo or mid >= hi:
        return list(np.linspace(lo, hi, 2 * n + 1))
    return list(np.linspace(lo, mid, n + 1)) + list(np.linspace(mid, hi, n + 1)[1:])


def log_survival_sum(p: ProbVector, t: float) -> float:
    """S(t) = sum_i log(1 - exp(-p_i t)), finite for every t > 0."""
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    return math.fsum(log1mexp(np.asarray(p.p) * t))


def expected_unfilled(
    p: ProbVector,
    j: int,
    cfg: QuadratureConfig | None = None,
    *,
    threads: int | None = None,
) -> ExpectationResult:
    """E[U_j^N] by adaptive quadrature of the Poissonized integral."""
    cfg = cfg or QuadratureConfig()
    start = time.perf_counter()
    prob = _Problem(p, j)
    nthreads = _resolve_threads(threads)
    t_lo, t_break, t_hi, discarded = prob.time_window(cfg.abs_tol)

    def f(u):
        return np.exp(u) * prob.integrand_t(u, nthreads)

    edges = _edges(math.log(t_lo), math.log(t_break), math.log(t_hi), cfg.initial_panels)
    tight = replace(cfg, abs_tol=max(cfg.abs_tol - discarded, 0.5 * cfg.abs_tol))
    res = integrate_panels(f, edges, tight)
    return ExpectationResult(
        value=res.value,
        error_estimate=res.error_estimate + discarded,
        nodes_used=res.nodes_used,
        elapsed=time.perf_counter() - start,
        N=p.N,
        j=int(j),
    )


def expected_unfilled_on_unit_interval(
    p: ProbVector,
    j: int,
    cfg: QuadratureConfig | None = None,
) -> ExpectationResult:
    """Same expectation through the substitution x = exp(-t) on (0, 1).

    The weights are rescaled to a_k = p_k * tau with tau = 2 / p_min
    (harmless, the expectation is scale invariant) so that the integrand
    vanishes smoothly at x = 0; panels are uniform in x rather than log t:

        (1/(j-1)!) int_0^1 sum_k a_k^j x^{a_k}/(1-x^{a_k})
                           * prod_k (1-x^{a_k}) |ln x|^{j-1} dx/x
    """
    cfg = cfg or QuadratureConfig()
    start = time.perf_counter()
    prob = _Problem(p, j)
    t_lo, t_break, t_hi, discarded = prob.time_window(cfg.abs_tol)
    # smallest exponent a_min = 2 keeps x^(a-1) smooth at x = 0
    tau = 2.0 / float(prob.v[0])

    a = prob.v * tau
    loga = np.log(a)

    def f(xs):
        y = -np.log(xs)
        ay = a[None, :] * y[:, None]
        lme = log1mexp(ay)
        logF = (lme * prob.c).sum(axis=1)
        # log of a^j x^a / (1 - x^a)
        logL = prob.j * loga[None, :] - ay - lme
        top = logL.max(axis=1)
        L = np.exp(top) * (np.exp(logL - top[:, None]) * prob.c).sum(axis=1)
        with np.errstate(divide="ignore"):
            logval = np.log(L) + logF + (prob.j - 1) * np.log(y) - prob.log_fact - np.log(xs)
        out = np.exp(logval)
        out[logF < UNDERFLOW_LOG] = 0.0
        return out

    x_lo = math.exp(-t_hi / tau)
    x_hi = math.exp(-t_lo / tau)
    x_mid = math.exp(-t_break / tau)
    if not x_hi < 1.0:
        x_hi = math.nextafter(1.0, 0.0)
    edges = _edges(x_lo, x_mid, x_hi, cfg.initial_panels)
    tight = replace(cfg, abs_tol=max(cfg.abs_tol - discarded, 0.5 * cfg.abs_tol))
    res = integrate_panels(f, edges, tight)
    return ExpectationResult(
        value=res.value,
        error_estimate=res.error_estimate + discarded,
        nodes_used=res.nodes_used,
        elapsed=time.perf_counter() - start,
        N=p.N,
        j=int(j),
        method="quadrature:unit_interval",
    )
