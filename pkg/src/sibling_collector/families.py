"""Coupon-weight sequences and their normalization into probability vectors.

A family describes an infinite sequence of strictly positive weights
``a_k``.  For a given number of coupon types ``N`` the first ``N`` weights
(starting at ``start_index``) are normalized into probabilities
``p_k = a_k / sum(a)``.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np
from scipy.special import gammaln, logsumexp

MAX_EXPLICIT = 10**7
# exp() overflows double precision just above this
_LOG_OVERFLOW = 709.0
# normalize() switches to the log-sum-exp path beyond this magnitude
_LOG_SWITCH = 600.0


class Kind(enum.Enum):
    EQUAL = "equal"
    ZIPF = "zipf"
    STRETCHED_EXP = "stretched_exp"
    LINEAR = "linear"
    POWER = "power"
    GEOMETRIC = "geometric"
    LOG = "log"
    LOGLOG = "loglog"
    FACTORIAL = "factorial"
    EXPLICIT = "explicit"


DECAYING = frozenset({Kind.ZIPF, Kind.STRETCHED_EXP})
GROWING = frozenset(
    {Kind.LINEAR, Kind.POWER, Kind.GEOMETRIC, Kind.LOG, Kind.LOGLOG, Kind.FACTORIAL}
)
_DEFAULT_START = {Kind.LOG: 3, Kind.LOGLOG: 3}


@dataclass(frozen=True)
class FamilySpec:
    """Declarative description of a weight sequence.

    Parameters are only meaningful for the kinds that use them: ``p`` for
    zipf, stretched_exp, power and geometric; ``q`` for stretched_exp; ``c``
    for loglog; ``values`` for explicit lists.
    """

    kind: Kind
    p: float | None = None
    q: float | None = None
    c: float | None = None
    values: tuple[float, ...] = field(default=(), repr=False)
    start_index: int | None = None

    def __post_init__(self):
        kind = Kind(self.kind)
        object.__setattr__(self, "kind", kind)
        if self.start_index is None:
            object.__setattr__(self, "start_index", _DEFAULT_START.get(kind, 1))
        if int(self.start_index) != self.start_index or self.start_index < 1:
            raise ValueError(f"start_index must be an integer >= 1, got {self.start_index}")
        object.__setattr__(self, "start_index", int(self.start_index))
        if kind in (Kind.LOG, Kind.LOGLOG) and self.start_index < 3:
            raise ValueError(f"{kind.value} weights are defined for k >= 3 only")

        if kind in (Kind.ZIPF, Kind.STRETCHED_EXP, Kind.POWER, Kind.GEOMETRIC):
            if self.p is None or not self.p > 0 or not math.isfinite(self.p):
                raise ValueError(f"{kind.value} requires a positive finite p, got {self.p}")
        if kind is Kind.STRETCHED_EXP:
            if self.q is None or not 0 < self.q < 1:
                raise ValueError(f"stretched_exp requires q in (0, 1), got {self.q}")
        if kind is Kind.LOGLOG:
            if self.c is None or not self.c > 0 or not math.isfinite(self.c):
                raise ValueError(f"loglog requires a positive finite c, got {self.c}")
        if kind is Kind.EXPLICIT:
            vals = tuple(float(v) for v in self.values)
            if not vals:
                raise ValueError("explicit weight list must be nonempty")
            if len(vals) > MAX_EXPLICIT:
                raise ValueError(f"explicit weight list longer than {MAX_EXPLICIT}")
            if not all(v > 0 and math.isfinite(v) for v in vals):
                raise ValueError("explicit weights must be strictly positive and finite")
            object.__setattr__(self, "values", vals)

    @property
    def is_decaying(self) -> bool:
        return self.kind in DECAYING

    @property
    def is_growing(self) -> bool:
        return self.kind in GROWING

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "FamilySpec":
        d = dict(d)
        try:
            kind = Kind(str(d.pop("kind")).lower())
        except KeyError:
            raise ValueError("family object needs a 'kind' field") from None
        start = d.pop("start", d.pop("start_index", None))
        values = d.pop("weights", d.pop("values", ()))
        kwargs = {k: float(d.pop(k)) for k in ("p", "q", "c") if k in d}
        if d:
            raise ValueError(f"unknown family fields: {sorted(d)}")
        return cls(kind=kind, values=tuple(values), start_index=start, **kwargs)

    @classmethod
    def from_json(cls, text_or_path: str) -> "FamilySpec":
        """Parse a JSON object, or the contents of a file holding one."""
        text = text_or_path
        if not text.lstrip().startswith("{"):
            text = Path(text_or_path).read_text()
        return cls.from_dict(json.loads(text))

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"kind": self.kind.value}
        for name in ("p", "q", "c"):
            v = getattr(self, name)
            if v is not None:
                d[name] = v
        if self.kind is Kind.EXPLICIT:
            d["weights"] = list(self.values)
        d["start"] = self.start_index
        return d

    def label(self) -> str:
        params = ",".join(
            f"{k}={getattr(self, k)!r}" for k in ("p", "q", "c") if getattr(self, k) is not None
        )
        return f"{self.kind.value}({params})" if params else self.kind.value


def equal() -> FamilySpec:
    return FamilySpec(Kind.EQUAL)


def zipf(p: float) -> FamilySpec:
    return FamilySpec(Kind.ZIPF, p=p)


def stretched_exp(p: float, q: float) -> FamilySpec:
    return FamilySpec(Kind.STRETCHED_EXP, p=p, q=q)


def linear() -> FamilySpec:
    return FamilySpec(Kind.LINEAR)


def power(p: float) -> FamilySpec:
    return FamilySpec(Kind.POWER, p=p)


def geometric(p: float) -> FamilySpec:
    return FamilySpec(Kind.GEOMETRIC, p=p)


def log_growth() -> FamilySpec:
    return FamilySpec(Kind.LOG)


def loglog_growth(c: float) -> FamilySpec:
    return FamilySpec(Kind.LOGLOG, c=c)


def factorial() -> FamilySpec:
    return FamilySpec(Kind.FACTORIAL)


def explicit(values: Sequence[float]) -> FamilySpec:
    return FamilySpec(Kind.EXPLICIT, values=tuple(values))


def indices(spec: FamilySpec, N: int) -> np.ndarray:
    return np.arange(spec.start_index, spec.start_index + N, dtype=np.float64)


def log_weights_at(spec: FamilySpec, k: np.ndarray) -> np.ndarray:
    """Natural log of a_k evaluated at (possibly non-integer) indices k."""
    k = np.asarray(k, dtype=np.float64)
    kind = spec.kind
    if kind is Kind.EQUAL:
        return np.zeros_like(k)
    if kind is Kind.ZIPF:
        return -spec.p * np.log(k)
    if kind is Kind.STRETCHED_EXP:
        return -spec.p * k**spec.q
    if kind is Kind.LINEAR:
        return np.log(k)
    if kind is Kind.POWER:
        return spec.p * np.log(k)
    if kind is Kind.GEOMETRIC:
        return spec.p * k
    if kind is Kind.LOG:
        return np.log(np.log(k))
    if kind is Kind.LOGLOG:
        lk = np.log(k)
        return np.log(lk + spec.c * np.log(lk))
    if kind is Kind.FACTORIAL:
        return gammaln(k + 1.0)
    raise ValueError(f"{kind.value} weights are not defined at arbitrary indices")


def log_weights(spec: FamilySpec, N: int) -> np.ndarray:
    """Logs of the first N weights of the family (never overflows)."""
    N = _check_n(N)
    if spec.kind is Kind.EXPLICIT:
        vals = _explicit_slice(spec, N)
        return np.log(vals)
    return log_weights_at(spec, indices(spec, N))


def weights(spec: FamilySpec, N: int) -> np.ndarray:
    """The first N weights ``[a_start, ..., a_{start+N-1}]`` as floats.

    Raises OverflowError when a weight is not representable in double
    precision (factorial beyond 170!, steep geometric growth); use
    `log_weights` or `probabilities` for those.
    """
    N = _check_n(N)
    if spec.kind is Kind.EQUAL:
        return np.ones(N)
    if spec.kind is Kind.EXPLICIT:
        return _explicit_slice(spec, N)
    if spec.kind is Kind.ZIPF:
        return indices(spec, N) ** -spec.p
    if spec.kind is Kind.LINEAR:
        return indices(spec, N)
    if spec.kind is Kind.LOG:
        return np.log(indices(spec, N))
    if spec.kind is Kind.FACTORIAL:
        last = spec.start_index + N - 1
        if last > 170:
            raise OverflowError(f"{last}! overflows double precision; use log_weights")
        return np.array([float(math.factorial(k)) for k in range(spec.start_index, last + 1)])
    lw = log_weights(spec, N)
    if lw.max() > _LOG_OVERFLOW:
        raise OverflowError(f"{spec.label()} weights overflow at N={N}; use log_weights")
    return np.exp(lw)


@dataclass(frozen=True)
class ProbVector:
    """Normalized coupon probabilities p_1..p_N."""

    p: np.ndarray

    def __post_init__(self):
        p = np.array(self.p, dtype=np.float64).ravel()
        if p.size == 0:
            raise ValueError("probability vector must be nonempty")
        if not np.all(p > 0):
            raise ValueError("all probabilities must be strictly positive (underflow?)")
        total = math.fsum(p)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {total!r}, not 1")
        p.flags.writeable = False
        object.__setattr__(self, "p", p)

    @property
    def N(self) -> int:
        return self.p.size

    def __len__(self) -> int:
        return self.p.size


def normalize(weights: Sequence[float] | np.ndarray, *, log: bool = False) -> ProbVector:
    """Normalize positive weights, or log-weights when ``log=True``.

    Log-weights whose magnitude stays below 600 are exponentiated and take
    the direct path; larger ones go through log-sum-exp so that factorial
    or geometric families remain representable.
    """
    w = np.asarray(weights, dtype=np.float64).ravel()
    if w.size == 0:
        raise ValueError("cannot normalize an empty weight list")
    if log:
        if not np.all(np.isfinite(w)):
            raise ValueError("log-weights must be finite")
        if np.max(np.abs(w)) <= _LOG_SWITCH:
            return normalize(np.exp(w))
        return ProbVector(np.exp(w - logsumexp(w)))
    if not np.all(w > 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be strictly positive and finite")
    return ProbVector(w / math.fsum(w))


def probabilities(spec: FamilySpec, N: int) -> ProbVector:
    return normalize(log_weights(spec, N), log=True)


def _check_n(N: int) -> int:
    if int(N) != N or N < 1:
        raise ValueError(f"N must be an integer >= 1, got {N}")
    return int(N)


def _explicit_slice(spec: FamilySpec, N: int) -> np.ndarray:
    lo = spec.start_index - 1
    if lo + N > len(spec.values):
        raise ValueError(f"explicit list has {len(spec.values)} entries, need {lo + N}")
    return np.array(spec.values[lo : lo + N])
