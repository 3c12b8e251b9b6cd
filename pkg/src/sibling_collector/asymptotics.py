"""Large-N expansions of E[U_j^N] for decaying weight families a_k = 1/f(k).

With delta = 1 / ln(f(N)/f'(N)) the three retained terms are

    j = 2:  (1/delta) [1 + delta ln delta + (gamma - 1) delta]
    j >= 3: 1/((j-1)! delta^(j-1)) [1 + (j-1) delta ln delta + ((j-1) gamma - 2) delta]

with a relative remainder of order delta^2 ln^2 delta.  Only families whose
f and f' are known in closed form are admitted (generalized Zipf and
stretched exponential decay).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .families import FamilySpec, Kind

EULER_GAMMA = 0.57721566490153286061
# expansion is only evaluated once delta drops below this
DELTA_THRESHOLD = 0.5
REMAINDER_ORDER = "O(delta^2 ln^2 delta)"


class DomainTooSmall(ValueError):
    pass


@dataclass(frozen=True)
class SmoothFamily:
    """f(x) = x^p (zipf) or f(x) = exp(p x^q) (stretched_exp)."""

    kind: Kind
    p: float
    q: float | None = None

    def __post_init__(self):
        if self.kind not in (Kind.ZIPF, Kind.STRETCHED_EXP):
            raise ValueError(f"{self.kind.value} has no admissible smooth f")
        if not self.p > 0:
            raise ValueError("p must be positive")
        if self.kind is Kind.STRETCHED_EXP and not (self.q is not None and 0 < self.q < 1):
            raise ValueError("q must lie in (0, 1)")

    @classmethod
    def from_spec(cls, spec: FamilySpec) -> "SmoothFamily":
        if spec.kind not in (Kind.ZIPF, Kind.STRETCHED_EXP):
            raise ValueError(
                f"{spec.label()} does not satisfy the decay conditions; only zipf and "
                "stretched_exp families are admitted"
            )
        if spec.start_index != 1:
            raise ValueError("expansions assume the sequence starts at k = 1")
        return cls(spec.kind, spec.p, spec.q)

    def f(self, x: float) -> float:
        if self.kind is Kind.ZIPF:
            return x**self.p
        return math.exp(self.p * x**self.q)

    def fprime(self, x: float) -> float:
        if self.kind is Kind.ZIPF:
            return self.p * x ** (self.p - 1)
        return self.p * self.q * x ** (self.q - 1) * self.f(x)

    def log_ratio(self, N: float) -> float:
        """ln(f(N)/f'(N)), in closed form so it never overflows."""
        if self.kind is Kind.ZIPF:
            return math.log(N) - math.log(self.p)
        return (1 - self.q) * math.log(N) - math.log(self.p * self.q)


def _family(fam) -> SmoothFamily:
    return fam if isinstance(fam, SmoothFamily) else SmoothFamily.from_spec(fam)


def delta(fam: SmoothFamily | FamilySpec, N: float) -> float:
    fam = _family(fam)
    lr = fam.log_ratio(N)
    if not lr > 0:
        raise DomainTooSmall(f"f(N)/f'(N) <= 1 at N={N}; expansion undefined")
    return 1.0 / lr


@dataclass(frozen=True)
class ExpansionTerms:
    delta: float
    j: int
    term0: float
    term1: float
    term2: float
    remainder_order: str = REMAINDER_ORDER

    @property
    def value(self) -> float:
        return self.term0 + self.term1 + self.term2

    @property
    def leading(self) -> float:
        """1/((j-1)! delta^(j-1)), the factor the relative remainder multiplies."""
        return self.term0


def theorem1(fam: SmoothFamily | FamilySpec, N: float, j: int) -> ExpansionTerms:
    """Three-term expansion of E[U_j^N]."""
    if int(j) != j or j < 2:
        raise ValueError(f"j must be an integer >= 2, got {j}")
    d = delta(fam, N)
    if d >= DELTA_THRESHOLD:
        raise DomainTooSmall(f"delta={d:.3g} >= {DELTA_THRESHOLD} at N={N}; N too small")
    j = int(j)
    lead = 1.0 / (math.factorial(j - 1) * d ** (j - 1))
    term1 = lead * (j - 1) * d * math.log(d)
    if j == 2:
        term2 = lead * (EULER_GAMMA - 1) * d
    else:
        term2 = lead * ((j - 1) * EULER_GAMMA - 2) * d
    return ExpansionTerms(d, j, lead, term1, term2)


def leading_term(fam: SmoothFamily | FamilySpec, N: float, j: int) -> float:
    """ln(f(N)/f'(N))^(j-1) / (j-1)!."""
    d = delta(fam, N)
    return (1.0 / d) ** (j - 1) / math.factorial(j - 1)


def equal_leading(N: float, j: int) -> float:
    """(ln N)^(j-1)/(j-1)!, the leading behaviour for equal probabilities."""
    if N < 2:
        raise ValueError("N must be >= 2")
    return math.log(N) ** (j - 1) / math.factorial(j - 1)


def zipf_expansion(N: float, j: int, p: float) -> tuple[float, float, float]:
    """The zipf expansion rewritten in powers of ln N (no delta).

    j = 2:  ln N - ln ln N + (gamma - 1 - ln p)
    j >= 3: (ln N)^(j-1)/(j-1)! - (ln N)^(j-2) ln ln N/(j-2)!
            + ((j-1)(gamma - ln p) - 2)/(j-1)! (ln N)^(j-2)
    """
    L = math.log(N)
    if j == 2:
        return L, -math.log(L), EULER_GAMMA - 1 - math.log(p)
    return (
        L ** (j - 1) / math.factorial(j - 1),
        -(L ** (j - 2)) * math.log(L) / math.factorial(j - 2),
        ((j - 1) * (EULER_GAMMA - math.log(p)) - 2) / math.factorial(j - 1) * L ** (j - 2),
    )


def remainder_scale(terms: ExpansionTerms) -> float:
    """delta^2 ln^2 delta times the leading factor: the size of the neglected term."""
    d = terms.delta
    return d * d * math.log(d) ** 2 * terms.leading


def normalized_remainder(terms: ExpansionTerms, reference: float) -> float:
    return abs(reference - terms.value) / remainder_scale(terms)
