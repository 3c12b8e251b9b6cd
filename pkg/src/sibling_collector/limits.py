"""Limits N -> infinity for growing weight sequences a_k -> infinity.

For 0 < x < x_alpha the functions

    S(x) = sum_k x^{a_k}
    F(x) = prod_k (1 - x^{a_k})
    L(x; j) = sum_k a_k^j x^{a_k} / (1 - x^{a_k})

are finite, and the candidate limit of E[U_j^N] is

    I(alpha; j) = 1/(j-1)! int_{-ln x_alpha}^inf L(e^-t) F(e^-t) t^(j-1) dt.

Series are summed exactly up to a cutoff K.  The remainder comes from
Euler-Maclaurin applied to the summand a(u)^m exp(-s a(u)), whose integral
is known in closed form for most kinds, and is bounded through the
Bernoulli remainder.  Geometric and factorial growth use a ratio bound
instead.  Every evaluation reports its bound as ``tail_bound``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import integrate
from scipy.special import exp1, gammaincc, gammaln

from .families import FamilySpec, Kind, log_weights_at
from .quadrature import QuadratureConfig, integrate_panels, log1mexp, log_factorial

K_MAX = 1 << 22
_K_START = 256
# summands below exp(-_NEGLIGIBLE) relative to the total are dropped
_NEGLIGIBLE = 745.0


class DiagnosedDivergent(ArithmeticError):
    """The divergence witness grows without visible bound (diagnosed, not proven)."""

    def __init__(self, message: str, witness: Sequence[float]):
        super().__init__(message)
        self.witness = tuple(witness)


class SAtXAlpha(enum.Enum):
    FINITE = "finite"
    INFINITE = "infinite"
    NOT_APPLICABLE = "not_applicable"


@dataclass(frozen=True)
class GrowthProfile:
    x_alpha: float
    s_at_x_alpha: SAtXAlpha
    s_value: float | None = None
    counting_exponent_nu: float | None = None


@dataclass(frozen=True)
class SeriesValue:
    value: float
    truncation_k: int
    tail_bound: float

    def __float__(self) -> float:
        return self.value


class Verdict(enum.Enum):
    FINITE_BY_COR2 = "FiniteByCor2"
    DIVERGENT_BY_PROP2 = "DivergentByProp2"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class Diagnostic:
    verdict: Verdict
    nu_hat: float | None = None
    witness: tuple[float, ...] = ()
    slope: float | None = None
    note: str = ""

    def to_dict(self) -> dict:
        d = {"verdict": self.verdict.value, "nu_hat": self.nu_hat}
        if self.witness:
            d["witness"] = list(self.witness)
            d["witness_slope"] = self.slope
        if self.verdict is Verdict.DIVERGENT_BY_PROP2:
            d["note"] = "diagnosed, not proven"
        elif self.note:
            d["note"] = self.note
        return d


@dataclass(frozen=True)
class LimitIntegralResult:
    value: float
    truncation_k: int
    tail_bound: float
    quad_error: float
    nodes_used: int = 0


# x_alpha and the index range of each kind ---------------------------------


def _require_growing(spec: FamilySpec) -> None:
    if spec.kind is Kind.EXPLICIT:
        raise ValueError("x_alpha is not defined for explicit lists; use finiteness_diagnostic")
    if not spec.is_growing:
        raise ValueError(f"{spec.label()} is not a growing sequence (a_k must tend to infinity)")


def x_alpha(spec: FamilySpec) -> float:
    """exp(-limsup ln k / a_k), analytic per kind."""
    _require_growing(spec)
    if spec.kind in (Kind.LOG, Kind.LOGLOG):
        return math.exp(-1.0)
    return 1.0


def _s_alpha(spec: FamilySpec) -> float:
    return -math.log(x_alpha(spec))


def _inverse_log(spec: FamilySpec, v: float) -> float:
    """ln of the real u >= start with a(u) = v (clamped to the start index)."""
    lo = math.log(spec.start_index)
    kind = spec.kind
    if kind is Kind.LINEAR:
        r = math.log(v) if v > 0 else -math.inf
    elif kind is Kind.POWER:
        r = math.log(v) / spec.p if v > 0 else -math.inf
    elif kind is Kind.GEOMETRIC:
        r = math.log(max(math.log(v), 1e-300) / spec.p) if v > 1 else -math.inf
    elif kind is Kind.LOG:
        # a = ln u
        r = v
    elif kind is Kind.LOGLOG:
        # w + c ln w = v with w = ln u
        w = max(v, 1.0)
        for _ in range(60):
            step = (w + spec.c * math.log(w) - v) / (1 + spec.c / w)
            w = max(w - step, 1e-3)
            if abs(step) < 1e-13 * w:
                break
        r = w
    elif kind is Kind.FACTORIAL:
        if v < 1:
            return lo
        k = 1
        lv = math.log(v)
        while gammaln(k + 2.0) <= lv:
            k += 1
        r = math.log(k)
    else:
        raise ValueError(kind)
    return max(r, lo)


def log_counting(spec: FamilySpec, m: float) -> float:
    """ln A*(m) with A*(m) = #{k : a_k <= m}; -inf when the count is 0."""
    if spec.kind is Kind.EXPLICIT:
        n = int(np.count_nonzero(np.asarray(spec.values[spec.start_index - 1 :]) <= m))
        return math.log(n) if n else -math.inf
    if spec.kind is Kind.EQUAL:
        return math.inf if m >= 1 else -math.inf
    s = spec.start_index
    lu = _inverse_log(spec, m)
    if lu > 700:
        # count = floor(u) - s + 1 ~ u
        return lu
    u = math.exp(lu)
    kmax = math.floor(u * (1 + 1e-12))
    # guard the floor against rounding in the inverse
    while kmax >= s and float(log_weights_at(spec, np.array([kmax]))[0]) > math.log(m) + 1e-12:
        kmax -= 1
    n = kmax - s + 1
    return math.log(n) if n > 0 else -math.inf


# series engine -------------------------------------------------------------


class _Series:
    """Partial sums with bracketed tails for one growing family."""

    def __init__(self, spec: FamilySpec):
        _require_growing(spec)
        self.spec = spec
        self.kind = spec.kind
        self.ratio_tail = spec.kind in (Kind.GEOMETRIC, Kind.FACTORIAL)
        self._loga = np.empty(0)

    def loga(self, K: int) -> np.ndarray:
        if self._loga.size < K:
            n = max(K, 2 * self._loga.size)
            k = np.arange(self.spec.start_index, self.spec.start_index + n, dtype=np.float64)
            self._loga = log_weights_at(self.spec, k)
        return self._loga[:K]

    def a_real(self, u: float) -> float:
        return math.exp(float(log_weights_at(self.spec, np.array([u]))[0]))

    def tail_integral(self, m: int, s: float, y: float) -> float:
        """int_y^inf a(u)^m exp(-s a(u)) du in closed form (or by quad for loglog)."""
        kind = self.kind
        if kind in (Kind.LINEAR, Kind.POWER):
            p = 1.0 if kind is Kind.LINEAR else self.spec.p
            nu = m + 1.0 / p
            q = gammaincc(nu, s * y**p)
            if q <= 0:
                return 0.0
            return math.exp(gammaln(nu) + math.log(q) - nu * math.log(s)) / p
        if kind is Kind.LOG:
            r = s - 1.0
            if not r > 0:
                return math.inf
            q = gammaincc(m + 1.0, r * math.log(y))
            if q <= 0:
                return 0.0
            return math.exp(gammaln(m + 1.0) + math.log(q) - (m + 1) * math.log(r))
        if kind is Kind.LOGLOG:
            c = self.spec.c
            r = s - 1.0
            if r < 0 or (r == 0 and m - c * s >= -1):
                return math.inf
            w0 = math.log(y)

            def h(w):
                return (w + c * math.log(w)) ** m * math.exp(-r * w - c * s * math.log(w))

            val, _ = integrate.quad(h, w0, math.inf, epsabs=0.0, epsrel=1e-13, limit=400)
            return val
        if kind is Kind.GEOMETRIC:
            p = self.spec.p
            z = s * math.exp(p * y)
            if m == 0:
                return float(exp1(z)) / p
            q = gammaincc(m, z)
            return 0.0 if q <= 0 else math.exp(gammaln(m) + math.log(q) - m * math.log(s)) / p
        raise ValueError(f"no tail integral for {kind.value}")

    def _g(self, m: int, s: float, u: float) -> float:
        la = min(float(log_weights_at(self.spec, np.array([u]))[0]), 700.0)
        a = math.exp(la)
        return math.exp(m * la - s * a) if s * a < _NEGLIGIBLE + 50 else 0.0

    def _dloga(self, u: float) -> float:
        """d ln a(u) / du."""
        kind = self.kind
        if kind is Kind.LINEAR:
            return 1.0 / u
        if kind is Kind.POWER:
            return self.spec.p / u
        if kind is Kind.LOG:
            return 1.0 / (u * math.log(u))
        if kind is Kind.LOGLOG:
            lu = math.log(u)
            return (1.0 + self.spec.c / lu) / (u * (lu + self.spec.c * math.log(lu)))
        raise ValueError(kind)

    def _dg(self, m: int, s: float, u: float) -> float:
        # d/du exp(m ln a - s a) = g (m - s a) d(ln a)/du
        return self._g(m, s, u) * (m - s * self.a_real(u)) * self._dloga(u)

    def k_min(self, m: int, s: float) -> int:
        # past s a = 2m + 2 the summand a^m e^{-s a} and its low derivatives
        # are monotone, which the remainder bound in power_tail relies on
        lu = _inverse_log(self.spec, (2 * m + 2) / s + 1.0)
        if lu > math.log(K_MAX):
            return K_MAX
        return max(int(math.ceil(math.exp(lu))) - self.spec.start_index + 1, 1)

    def power_tail(self, m: int, s: float, K: int) -> tuple[float, float]:
        """(estimate, half-width) of sum_{k > last} a_k^m exp(-s a_k) after K terms.

        Euler-Maclaurin through the g' term.  With g''' of one sign the
        remainder is at most sup|B_3|/3! * |g''(n)| = 0.00802 |g''(n)|.
        """
        last = self.spec.start_index + K - 1
        if self.ratio_tail:
            la = log_weights_at(self.spec, np.array([last + 1.0, last + 2.0]))
            la = np.minimum(la, 700.0)
            t1 = m * la[0] - s * math.exp(la[0])
            t2 = m * la[1] - s * math.exp(la[1])
            if t1 < -_NEGLIGIBLE:
                return 0.0, 0.0
            r = math.exp(t2 - t1)
            if not r < 1:
                return math.inf, math.inf
            bound = math.exp(t1) / (1 - r)
            return 0.5 * bound, 0.5 * bound
        n = last + 1.0
        est = self.tail_integral(m, s, n) + 0.5 * self._g(m, s, n) - self._dg(m, s, n) / 12.0
        d = max(0.5, 1e-3 * n)
        g2 = (self._dg(m, s, n + d) - self._dg(m, s, n - d)) / (2 * d)
        # factor 2 covers the finite-difference estimate of g''
        return est, 2 * 0.00802 * abs(g2)

    def evaluate(self, s: float, j: int | None, tol: float, need: str = "SFL"):
        """Return {'S','logF','L'} SeriesValues at x = exp(-s)."""
        if not s > 0:
            raise ValueError("x must lie in (0, 1)")
        m = j or 0
        K = max(_K_START, self.k_min(m, s), self.k_min(0, s))
        while True:
            out = self._evaluate_at(s, m, K, need)
            worst = max(v.tail_bound / max(abs(v.value), 1e-300) for v in out.values())
            if worst <= tol or K >= K_MAX:
                return out
            K = min(4 * K, K_MAX)

    def _evaluate_at(self, s: float, m: int, K: int, need: str):
        la = self.loga(K)
        # clipping only touches summands that are zero anyway
        sa = s * np.exp(np.minimum(la, 700.0))
        live = sa < _NEGLIGIBLE
        last = self.spec.start_index + K - 1
        out = {}
        u_last = math.exp(-float(sa[-1]))
        # sum over n >= 2 of x^{n a}: ratio of the n-th to the first layer
        n_max = 1
        while n_max < 60 and u_last ** n_max > 1e-17:
            n_max += 1
        if "S" in need:
            part = math.fsum(np.exp(-sa[live]))
            est, hw = self.power_tail(0, s, K)
            out["S"] = SeriesValue(part + est, last, hw)
        if "F" in need:
            part = math.fsum(log1mexp(sa[live]))
            est, hw = 0.0, 0.0
            for n in range(1, n_max + 1):
                e, h = self.power_tail(0, n * s, K)
                est += e / n
                hw += h / n
            # remaining layers n > n_max are below u_last^n_max of the first
            hw += u_last**n_max / (1 - u_last) * (est + hw)
            out["logF"] = SeriesValue(part - est, last, hw)
        if "L" in need and m:
            lv = la[live]
            part = math.fsum(np.exp(m * lv - sa[live] - log1mexp(sa[live])))
            est, hw = 0.0, 0.0
            for n in range(1, n_max + 1):
                e, h = self.power_tail(m, n * s, K)
                est += e
                hw += h
            hw += u_last**n_max / (1 - u_last) * (est + hw)
            out["L"] = SeriesValue(part + est, last, hw)
        return out


def _check_x(spec: FamilySpec, x: float) -> float:
    xa = x_alpha(spec)
    if not 0 < x < xa:
        raise ValueError(f"x must lie in (0, x_alpha={xa:.6g}), got {x}")
    return -math.log(x)


def tail_sum_S(spec: FamilySpec, x: float, tol: float = 1e-12) -> SeriesValue:
    """S(x) = sum_k x^{a_k}; tail_bound is absolute."""
    s = _check_x(spec, x)
    v = _Series(spec).evaluate(s, None, tol, "S")["S"]
    return v


def survival_product_F(spec: FamilySpec, x: float, tol: float = 1e-12) -> SeriesValue:
    """F(x) = prod_k (1 - x^{a_k}) = exp(sum_k log(1 - x^{a_k}))."""
    s = _check_x(spec, x)
    lf = _Series(spec).evaluate(s, None, tol, "F")["logF"]
    val = math.exp(lf.value)
    return SeriesValue(val, lf.truncation_k, val * math.expm1(lf.tail_bound))


def lambert_weight_L(spec: FamilySpec, x: float, j: int, tol: float = 1e-12) -> SeriesValue:
    """L(x; j) = sum_k a_k^j x^{a_k} / (1 - x^{a_k})."""
    if int(j) != j or j < 2:
        raise ValueError("j must be an integer >= 2")
    s = _check_x(spec, x)
    return _Series(spec).evaluate(s, int(j), tol, "L")["L"]


# limit integral ------------------------------------------------------------


def growth_profile(spec: FamilySpec) -> GrowthProfile:
    xa = x_alpha(spec)
    nu = {
        Kind.LINEAR: 1.0,
        Kind.POWER: 1.0 / spec.p if spec.p else None,
        Kind.GEOMETRIC: 0.0,
        Kind.FACTORIAL: 0.0,
    }.get(spec.kind)
    if xa == 1.0:
        return GrowthProfile(xa, SAtXAlpha.NOT_APPLICABLE, None, nu)
    # both kinds with x_alpha = 1/e: S(1/e) = sum 1/(k (ln k)^c), c = 0 for log
    c = spec.c if spec.kind is Kind.LOGLOG else 0.0
    if c <= 1.0:
        return GrowthProfile(xa, SAtXAlpha.INFINITE, None, nu)
    series = _Series(spec)
    K = 1 << 16
    part = math.fsum(np.exp(-np.exp(series.loga(K))))
    est, _ = series.power_tail(0, 1.0, K)
    return GrowthProfile(xa, SAtXAlpha.FINITE, part + est, nu)


def limit_integral_I(
    spec: FamilySpec,
    j: int,
    cfg: QuadratureConfig | None = None,
    *,
    series_tol: float = 1e-13,
) -> LimitIntegralResult:
    """I(alpha; j), after the divergence diagnostic has had its say.

    Raises DiagnosedDivergent when the witness sum keeps growing.
    """
    if int(j) != j or j < 2:
        raise ValueError("j must be an integer >= 2")
    j = int(j)
    cfg = cfg or QuadratureConfig()
    diag = finiteness_diagnostic(spec, j)
    if diag.verdict is Verdict.DIVERGENT_BY_PROP2:
        raise DiagnosedDivergent(
            f"{spec.label()}, j={j}: witness sum keeps growing (diagnosed, not proven)",
            diag.witness,
        )
    series = _Series(spec)
    t0 = _s_alpha(spec)
    logfact = log_factorial(j - 1)
    worst = {"rel": 0.0, "K": 0}

    def h_scalar(w: float) -> float:
        t = t0 + math.exp(w)
        vals = series.evaluate(t, j, series_tol, "FL")
        lf, L = vals["logF"], vals["L"]
        rel = lf.tail_bound + L.tail_bound / max(L.value, 1e-300)
        worst["rel"] = max(worst["rel"], rel)
        worst["K"] = max(worst["K"], lf.truncation_k)
        logv = lf.value + math.log(L.value) + (j - 1) * math.log(t) - logfact + w
        return math.exp(logv) if logv > -_NEGLIGIBLE else 0.0

    def h(ws):
        return np.array([h_scalar(float(w)) for w in ws])

    lo, hi = _support(h_scalar)
    edges = list(np.linspace(lo, hi, 4 * cfg.initial_panels + 1))
    res = integrate_panels(h, edges, cfg)
    return LimitIntegralResult(
        value=res.value,
        truncation_k=worst["K"],
        tail_bound=worst["rel"] * res.value,
        quad_error=res.error_estimate,
        nodes_used=res.nodes_used,
    )


def _support(h: Callable[[float], float], step: float = 0.5) -> tuple[float, float]:
    """Scan outward from w = 0 until h drops 40 decades below its running max."""
    peak = h(0.0)
    ends = []
    for direction in (-1.0, 1.0):
        w, below = 0.0, 0
        while below < 2:
            w += direction * step
            v = h(w)
            peak = max(peak, v)
            below = below + 1 if v <= 1e-40 * peak else 0
            if abs(w) > 60:
                raise ValueError("integrand support not found within |ln(t - t0)| <= 60")
        ends.append(w)
    return ends[0], ends[1]


# Lambert coefficients ------------------------------------------------------


def lambert_coefficients(
    A: Mapping[int, int] | Sequence[int] | Callable[[int], int], n_max: int, j: int
) -> list[int]:
    """A_L(n) = sum_{d | n} d^j A(d) for n = 1..n_max, as exact integers.

    A may be a mapping m -> A(m), a sequence with A[m-1] = A(m), or a callable.
    """
    if n_max < 1:
        return []
    if callable(A):
        get = A
    elif isinstance(A, Mapping):
        get = lambda d: A.get(d, 0)  # noqa: E731
    else:
        get = lambda d: A[d - 1] if d <= len(A) else 0  # noqa: E731
    out = [0] * (n_max + 1)
    for d in range(1, n_max + 1):
        ad = int(get(d))
        if ad:
            w = d**j * ad
            for n in range(d, n_max + 1, d):
                out[n] += w
    return out[1:]


def counting_histogram(spec: FamilySpec, m_max: int) -> dict[int, int]:
    """A(m) = #{k : a_k = m} for integer-valued sequences, m <= m_max."""
    hist: dict[int, int] = {}
    if spec.kind is Kind.EXPLICIT:
        vals = spec.values[spec.start_index - 1 :]
    else:
        kmax = math.exp(_inverse_log(spec, m_max))
        n = int(math.floor(kmax + 1e-9)) - spec.start_index + 1
        vals = np.exp(log_weights_at(spec, np.arange(spec.start_index, spec.start_index + max(n, 0))))
    for v in vals:
        iv = int(round(v))
        if abs(v - iv) > 1e-9 * max(1.0, abs(v)):
            raise ValueError(f"{spec.label()} is not integer valued")
        if iv <= m_max:
            hist[iv] = hist.get(iv, 0) + 1
    return hist


# finiteness diagnostic -----------------------------------------------------

_WINDOW = 16.0
_SLOPE_TOL = 0.05
_DIVERGENT_SLOPE = -1.5


def _counting_slopes(spec: FamilySpec, K: float) -> list[float]:
    """d ln A* / d ln m over the last three windows m in [K/16^(i+1), K/16^i]."""
    ms = [K / _WINDOW**i for i in range(4)][::-1]
    logs = [log_counting(spec, m) for m in ms]
    slopes = []
    for (m0, l0), (m1, l1) in zip(zip(ms, logs), zip(ms[1:], logs[1:])):
        if math.isfinite(l0) and math.isfinite(l1):
            slopes.append((l1 - l0) / math.log(m1 / m0))
        elif l0 == -math.inf and math.isfinite(l1):
            slopes.append(math.nan)
    return slopes


def finiteness_diagnostic(spec: FamilySpec, j: int, K: int = 10**6) -> Diagnostic:
    """Classify lim E[U_j^N] via the counting function or the divergence witness.

    FiniteByCor2: the growth exponent of A*(m) = #{a_k <= m} over m <= K does
    not increase (A* = O(m^nu)).  DivergentByProp2: x_alpha < 1, S(x_alpha) is
    finite and the witness sum_k a_k^(j-1) x_alpha^(a_k) keeps growing over
    dyadic windows of k <= K.  Anything else is Inconclusive.
    """
    slopes = _counting_slopes(spec, float(K))
    if len(slopes) == 3 and not any(math.isnan(v) for v in slopes):
        s2, s1, s0 = slopes
        if s0 <= s1 + _SLOPE_TOL and s1 <= s2 + _SLOPE_TOL and s0 < 50:
            return Diagnostic(Verdict.FINITE_BY_COR2, nu_hat=max(s0, 0.0))
    if spec.kind is Kind.EXPLICIT or not spec.is_growing:
        return Diagnostic(Verdict.INCONCLUSIVE, note="counting exponent not stable")
    prof = growth_profile(spec)
    if prof.x_alpha < 1.0 and prof.s_at_x_alpha is SAtXAlpha.FINITE:
        witness, slope = _witness(spec, j, K, -math.log(prof.x_alpha))
        if slope > _DIVERGENT_SLOPE:
            return Diagnostic(Verdict.DIVERGENT_BY_PROP2, witness=witness, slope=slope)
        return Diagnostic(Verdict.INCONCLUSIVE, witness=witness, slope=slope,
                          note="witness increments decay too fast to diagnose divergence")
    return Diagnostic(Verdict.INCONCLUSIVE, note="S(x_alpha) infinite or x_alpha = 1")


def _witness(spec: FamilySpec, j: int, K: int, s: float) -> tuple[tuple[float, ...], float]:
    """Partial sums of a_k^(j-1) exp(-s a_k) at k = 2^i and the decay exponent of
    the window increments against the window index i."""
    start = spec.start_index
    k = np.arange(start, start + K, dtype=np.float64)
    la = log_weights_at(spec, k)
    terms = np.exp((j - 1) * la - s * np.exp(la))
    csum = np.cumsum(terms)
    edges = [2**i for i in range(2, int(math.log2(K)) + 1) if 2**i - start < K]
    partial = tuple(float(csum[e - start]) for e in edges)
    inc = np.diff(partial)
    idx = np.arange(len(inc)) + 3.0
    half = len(inc) // 2
    slope = float(np.polyfit(np.log(idx[half:]), np.log(inc[half:]), 1)[0])
    return partial, slope
