"""Exact values for the equal-probability problem and the N = 2, 3 closed forms.

All rational results are `fractions.Fraction` instances (always in lowest
terms).  Sums over many terms are carried as integer numerators over a
common denominator and reduced once at the end, which keeps harmonic
numbers with tens of thousands of digits cheap to build.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

ALTERNATING_MAX_N = 200


class Formula(enum.Enum):
    HARMONIC = "harmonic"
    RECURSION = "recursion"
    ALTERNATING_SUM = "alternating_sum"
    TWO_TYPES = "two_types"
    THREE_TYPES = "three_types"
    MEAN_T = "mean_T"
    VAR_U2 = "var_U2"


@dataclass(frozen=True)
class ExactResult:
    value: Fraction
    formula: Formula
    N: int | None = None
    j: int | None = None

    @property
    def as_float(self) -> float:
        # Fraction.__float__ is correctly rounded
        return float(self.value)

    def to_dict(self) -> dict:
        return {
            "method": f"exact:{self.formula.value}",
            "N": self.N,
            "j": self.j,
            "value_num": str(self.value.numerator),
            "value_den": str(self.value.denominator),
            "value_float": self.as_float,
        }


def _check(N: int, j: int | None = None) -> None:
    if int(N) != N or N < 1:
        raise ValueError(f"N must be an integer >= 1, got {N}")
    if j is not None and (int(j) != j or j < 2):
        raise ValueError(f"j must be an integer >= 2, got {j}")


def _harmonic_split(lo: int, hi: int) -> tuple[int, int]:
    """Unreduced (num, den) of sum_{m=lo}^{hi-1} 1/m by binary splitting."""
    if hi - lo == 1:
        return 1, lo
    mid = (lo + hi) // 2
    a, b = _harmonic_split(lo, mid)
    c, d = _harmonic_split(mid, hi)
    return a * d + b * c, b * d


@lru_cache(maxsize=64)
def harmonic(N: int) -> Fraction:
    """H_N = 1 + 1/2 + ... + 1/N."""
    _check(N)
    num, den = _harmonic_split(1, N + 1)
    return Fraction(num, den)


@lru_cache(maxsize=8)
def _lcm_upto(N: int) -> int:
    return math.lcm(*range(1, N + 1))


@lru_cache(maxsize=64)
def _hyperharmonic_table(N: int, j: int) -> tuple[int, ...]:
    """Numerators E_j(m) * D**(j-1) for m = 1..N with D = lcm(1..N)."""
    D = _lcm_upto(N)
    quot = [D // m for m in range(1, N + 1)]
    # level 1 is the constant U_1 = 1 placeholder so that level 2 gives H_m
    row = [1] * N
    for _ in range(2, j + 1):
        acc = 0
        nxt = []
        for r, q in zip(row, quot):
            acc += r * q
            nxt.append(acc)
        row = nxt
    return tuple(row)


def hyperharmonic(N: int, j: int) -> Fraction:
    """E[U_j^N] for equal probabilities via the iterated-average recursion.

    E[U_2^N] = H_N and E[U_j^N] = sum_{m<=N} E[U_{j-1}^m] / m.
    """
    _check(N, j)
    if j == 2:
        return harmonic(N)
    D = _lcm_upto(N)
    return Fraction(_hyperharmonic_table(N, j)[-1], D ** (j - 1))


def alternating_sum(N: int, j: int) -> Fraction:
    """sum_{k=1}^N C(N,k) (-1)^(k+1) / k^(j-1), evaluated exactly.

    The alternating terms cancel catastrophically in floating point, so this
    is an exact-only validation route; N is capped at 200.
    """
    _check(N, j)
    if N > ALTERNATING_MAX_N:
        raise ValueError(f"alternating_sum is limited to N <= {ALTERNATING_MAX_N}")
    D = _lcm_upto(N) ** (j - 1)
    num = 0
    for k in range(1, N + 1):
        term = math.comb(N, k) * (D // k ** (j - 1))
        num += term if k % 2 else -term
    return Fraction(num, D)


def mean_T_equal(N: int) -> Fraction:
    """E[T_N] = N * H_N."""
    _check(N)
    return N * harmonic(N)


def variance_u2_equal(N: int) -> Fraction:
    """Var[U_2^N] = 4 * sum_{m<=N} H_m/m - 3 H_N - H_N^2."""
    _check(N)
    h = harmonic(N)
    return 4 * hyperharmonic(N, 3) - 3 * h - h * h


def two_types(p1: float, j: int) -> float:
    """E[U_j^2] = 2 - p1^j - p2^j with p2 = 1 - p1."""
    if not 0 < p1 < 1:
        raise ValueError(f"p1 must lie strictly inside (0, 1), got {p1}")
    _check(2, j)
    return 2.0 - p1**j - (1.0 - p1) ** j


def three_types_j2(p1: float, p2: float, p3: float) -> float:
    """E[U_2^3] for three coupon types with probabilities p1, p2, p3."""
    ps = (p1, p2, p3)
    if not all(p > 0 for p in ps):
        raise ValueError("all three probabilities must be positive")
    if abs(math.fsum(ps) - 1.0) > 1e-12:
        raise ValueError(f"probabilities sum to {math.fsum(ps)!r}, not 1")
    s1, s2, s3 = p1 * p1, p2 * p2, p3 * p3
    return math.fsum(
        [
            3.0,
            s1,
            s2,
            s3,
            -(s1 + s2) / (p1 + p2) ** 2,
            -(s1 + s3) / (p1 + p3) ** 2,
            -(s2 + s3) / (p2 + p3) ** 2,
        ]
    )


def evaluate(N: int, j: int, formula: Formula = Formula.RECURSION) -> ExactResult:
    """Tagged exact value of E[U_j^N] (equal probabilities)."""
    if formula is Formula.HARMONIC:
        if j != 2:
            raise ValueError("the harmonic formula covers j = 2 only")
        value = harmonic(N)
    elif formula is Formula.RECURSION:
        value = hyperharmonic(N, j)
    elif formula is Formula.ALTERNATING_SUM:
        value = alternating_sum(N, j)
    else:
        raise ValueError(f"{formula.value} is not an E[U_j^N] formula for equal probabilities")
    return ExactResult(value, formula, N, j)
