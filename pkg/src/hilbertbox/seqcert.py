"""Certified arithmetic on infinite real sequences.

A sequence is a finite explicit head followed by a closed-form tail whose
remainders can be bounded analytically.  Divergence is always decided from
the tail metadata, never from how a truncation grows.
"""
from __future__ import annotations

import math
from fractions import Fraction
from dataclasses import dataclass
from enum import Enum
from typing import ClassVar, Union

import numpy as np

from .errors import InputError, UnsupportedInput

EPS = float(np.finfo(float).eps)
EXPLICIT_CAP = 1 << 22
FINITE_PRODUCT_CAP = 256


class Status(str, Enum):
    CONVERGED = "Converged"
    DIVERGES_TO_INFINITY = "DivergesToInfinity"
    DIVERGES_TO_ZERO = "DivergesToZero"
    DIVERGENT = "Divergent"


@dataclass(frozen=True)
class CertifiedValue:
    """A value with an absolute error bound, or a divergence verdict."""

    status: Status
    value: float | None = None
    error_bound: float | None = None
    note: str = ""

    @classmethod
    def exact(cls, value: float, note: str = "") -> CertifiedValue:
        return cls(Status.CONVERGED, float(value), 0.0, note)

    @classmethod
    def approx(cls, value: float, error: float, note: str = "") -> CertifiedValue:
        return cls(Status.CONVERGED, float(value), float(abs(error)), note)

    @classmethod
    def diverging(cls, status: Status = Status.DIVERGENT, note: str = "") -> CertifiedValue:
        if status is Status.DIVERGES_TO_ZERO:
            return cls(status, 0.0, 0.0, note)
        if status is Status.DIVERGES_TO_INFINITY:
            return cls(status, math.inf, None, note)
        return cls(status, None, None, note)

    @property
    def is_converged(self) -> bool:
        return self.status is Status.CONVERGED

    @property
    def lower(self) -> float:
        if self.status is Status.CONVERGED:
            return self.value - self.error_bound
        if self.status is Status.DIVERGES_TO_ZERO:
            return 0.0
        if self.status is Status.DIVERGES_TO_INFINITY:
            return math.inf
        return -math.inf

    @property
    def upper(self) -> float:
        if self.status is Status.CONVERGED:
            return self.value + self.error_bound
        if self.status is Status.DIVERGES_TO_ZERO:
            return 0.0
        return math.inf

    def to_json(self) -> dict:
        out = {"status": self.status.value}
        if self.status is Status.CONVERGED:
            out["value"] = self.value
            out["error_bound"] = self.error_bound
        elif self.status is Status.DIVERGES_TO_ZERO:
            out["value"] = 0.0
        if self.note:
            out["note"] = self.note
        return out


# ---------------------------------------------------------------------------
# tail families


@dataclass(frozen=True)
class Constant:
    c: float
    kind: ClassVar[str] = "constant"

    def term(self, k: np.ndarray) -> np.ndarray:
        return np.full(np.shape(k), float(self.c))

    @property
    def is_zero(self) -> bool:
        return self.c == 0.0

    @property
    def summable(self) -> bool:
        return self.c == 0.0

    def sup_abs(self, n: int) -> float:
        return abs(self.c)

    def abs_sum(self, n: int) -> float:
        return 0.0 if self.c == 0.0 else math.inf

    def params(self) -> dict:
        return {"c": self.c}


@dataclass(frozen=True)
class GeometricDecay:
    coeff: float
    ratio: float
    kind: ClassVar[str] = "geometric"

    def term(self, k: np.ndarray) -> np.ndarray:
        k = np.asarray(k, dtype=float)
        return self.coeff * np.power(self.ratio, k)

    @property
    def is_zero(self) -> bool:
        return self.coeff == 0.0

    @property
    def summable(self) -> bool:
        return True

    def sup_abs(self, n: int) -> float:
        return abs(self.coeff) * self.ratio ** (n + 1)

    def abs_sum(self, n: int) -> float:
        return abs(self.coeff) * self.ratio ** (n + 1) / (1.0 - self.ratio) * (1 + 8 * EPS)

    def params(self) -> dict:
        return {"coeff": self.coeff, "ratio": self.ratio}


@dataclass(frozen=True)
class PowerDecay:
    coeff: float
    exponent: float
    kind: ClassVar[str] = "power"

    def term(self, k: np.ndarray) -> np.ndarray:
        k = np.asarray(k, dtype=float)
        return self.coeff * np.power(k, -self.exponent)

    @property
    def is_zero(self) -> bool:
        return self.coeff == 0.0

    @property
    def summable(self) -> bool:
        return self.exponent > 1.0 or self.coeff == 0.0

    def sup_abs(self, n: int) -> float:
        return abs(self.coeff) * float(n + 1) ** (-self.exponent)

    def abs_sum(self, n: int) -> float:
        if self.coeff == 0.0:
            return 0.0
        if self.exponent <= 1.0:
            return math.inf
        return abs(self.coeff) * power_tail_bound(self.exponent, n)

    def params(self) -> dict:
        return {"coeff": self.coeff, "exponent": self.exponent}


Tail = Union[Constant, GeometricDecay, PowerDecay]


def power_tail_bound(q: float, n: int) -> float:
    """Upper bound on sum_{k>n} k^-q for q > 1 (integral comparison)."""
    m = float(max(n, 0) + 1)
    return m ** -q * (1.0 + m / (q - 1.0)) * (1 + 8 * EPS)


def _em_error(q: float, n: int) -> float:
    return 2.0 * q * (q + 1) * (q + 2) * (q + 3) * (q + 4) * float(n) ** (-q - 5) / 30240.0


def zeta_tail(q: float, n: int, tol: float = 1e-16) -> tuple[float, float]:
    """sum_{k>n} k^-q for q > 1, returned as (value, error bound).

    Explicit terms are summed until the Euler-Maclaurin remainder (the first
    omitted Bernoulli term, doubled) drops below tol.
    """
    if q <= 1.0:
        raise InputError("power sum diverges for exponent <= 1")
    start = max(n, 8)
    while _em_error(q, start) > tol and start < EXPLICIT_CAP:
        start *= 2
    explicit = 0.0
    if start > n:
        ks = np.arange(n + 1, start + 1, dtype=float)
        explicit = math.fsum(ks ** -q)
    N = float(start)
    em = (N ** (1 - q) / (q - 1) - 0.5 * N ** -q + q * N ** (-q - 1) / 12.0
          - q * (q + 1) * (q + 2) * N ** (-q - 3) / 720.0)
    value = explicit + em
    err = _em_error(q, start) + 8 * EPS * (explicit + abs(em))
    return value, err


def _family_tail_sum(tail: Tail, n: int, tol: float) -> tuple[float, float]:
    """Signed sum_{k>n} term(k) for a summable family."""
    if tail.is_zero:
        return 0.0, 0.0
    if isinstance(tail, GeometricDecay):
        v = tail.coeff * tail.ratio ** (n + 1) / (1.0 - tail.ratio)
        return v, 8 * EPS * abs(v)
    if isinstance(tail, PowerDecay):
        a = abs(tail.coeff)
        v, e = zeta_tail(tail.exponent, n, tol / a)
        return tail.coeff * v, a * e + EPS * a * v
    raise InputError("constant tail is not summable")


def _family_power(tail: Tail, m: int) -> Tail:
    """The family of term(k)**m."""
    if isinstance(tail, Constant):
        return Constant(tail.c ** m)
    if isinstance(tail, GeometricDecay):
        return GeometricDecay(tail.coeff ** m, tail.ratio ** m)
    return PowerDecay(tail.coeff ** m, tail.exponent * m)


def _family_product(a: Tail, b: Tail) -> Tail | None:
    if a.is_zero or b.is_zero:
        return Constant(0.0)
    if isinstance(a, GeometricDecay) and isinstance(b, GeometricDecay):
        return GeometricDecay(a.coeff * b.coeff, a.ratio * b.ratio)
    if isinstance(a, PowerDecay) and isinstance(b, PowerDecay):
        return PowerDecay(a.coeff * b.coeff, a.exponent + b.exponent)
    if isinstance(a, Constant) and isinstance(b, Constant):
        return Constant(a.c * b.c)
    return None


def _same_family(a: Tail, b: Tail) -> bool:
    if isinstance(a, GeometricDecay) and isinstance(b, GeometricDecay):
        return a.ratio == b.ratio
    if isinstance(a, PowerDecay) and isinstance(b, PowerDecay):
        return a.exponent == b.exponent
    return isinstance(a, Constant) and isinstance(b, Constant)


def _with_coeff(t: Tail, coeff: float) -> Tail:
    if isinstance(t, Constant):
        return Constant(coeff)
    if isinstance(t, GeometricDecay):
        return GeometricDecay(coeff, t.ratio)
    return PowerDecay(coeff, t.exponent)


def _coeff(t: Tail) -> float:
    return t.c if isinstance(t, Constant) else t.coeff


# ---------------------------------------------------------------------------
# descriptors


@dataclass(frozen=True)
class TailDescriptor:
    """head[k-1] for k <= len(head), else base + tail.term(k)."""

    head: tuple[float, ...] = ()
    tail: Tail = Constant(0.0)
    base: float = 0.0

    def __post_init__(self):
        head = tuple(float(x) for x in self.head)
        if not all(math.isfinite(x) for x in head):
            raise InputError("non-finite head entry")
        t = self.tail
        base = float(self.base)
        if not math.isfinite(base):
            raise InputError("non-finite base")
        if isinstance(t, Constant):
            if not math.isfinite(t.c):
                raise InputError("non-finite constant tail")
            t, base = Constant(float(t.c) + base), 0.0
        elif isinstance(t, GeometricDecay):
            if not math.isfinite(t.coeff):
                raise InputError("non-finite coefficient")
            if not 0.0 < t.ratio < 1.0:
                raise InputError("geometric ratio must lie strictly inside (0, 1)")
            if t.coeff == 0.0:
                t, base = Constant(base), 0.0
        elif isinstance(t, PowerDecay):
            if not math.isfinite(t.coeff):
                raise InputError("non-finite coefficient")
            if not (t.exponent > 0.0 and math.isfinite(t.exponent)):
                raise InputError("power exponent must be positive")
            if t.coeff == 0.0:
                t, base = Constant(base), 0.0
        else:
            raise InputError(f"unknown tail family {t!r}")
        object.__setattr__(self, "head", head)
        object.__setattr__(self, "tail", t)
        object.__setattr__(self, "base", base)

    # constructors
    @classmethod
    def finite(cls, values) -> TailDescriptor:
        return cls(tuple(values), Constant(0.0))

    @classmethod
    def constant(cls, c: float, head=()) -> TailDescriptor:
        return cls(tuple(head), Constant(c))

    @classmethod
    def geometric(cls, coeff: float, ratio: float, head=(), base: float = 0.0) -> TailDescriptor:
        return cls(tuple(head), GeometricDecay(coeff, ratio), base)

    @classmethod
    def power(cls, coeff: float, exponent: float, head=(), base: float = 0.0) -> TailDescriptor:
        return cls(tuple(head), PowerDecay(coeff, exponent), base)

    # access
    @property
    def H(self) -> int:
        return len(self.head)

    @property
    def limit(self) -> float:
        """Limit of the entries (the tail constant or base)."""
        return self.tail.c if isinstance(self.tail, Constant) else self.base

    @property
    def tail_is_zero(self) -> bool:
        return isinstance(self.tail, Constant) and self.tail.c == 0.0

    def entry(self, k: int) -> float:
        if k < 1:
            raise InputError("indices start at 1")
        if k <= self.H:
            return self.head[k - 1]
        return float(self.base + self.tail.term(np.array([k]))[0])

    def values(self, n: int, start: int = 1) -> np.ndarray:
        """Entries start..n (inclusive) as an array."""
        if n < start:
            return np.zeros(0)
        out = np.empty(n - start + 1)
        h_end = min(n, self.H)
        if h_end >= start:
            out[: h_end - start + 1] = self.head[start - 1:h_end]
        t_start = max(start, self.H + 1)
        if t_start <= n:
            ks = np.arange(t_start, n + 1, dtype=float)
            out[t_start - start:] = self.base + self.tail.term(ks)
        return out

    def padded(self, n: int) -> TailDescriptor:
        """Same sequence with the head extended to at least n entries."""
        if n <= self.H:
            return self
        return TailDescriptor(tuple(self.values(n)), self.tail, self.base)

    def tail_abs_sum_bound(self, n: int) -> float:
        """Upper bound on sum_{k>n} |entry(k)|, possibly +inf."""
        n = max(n, 0)
        part = 0.0
        if n < self.H:
            part = math.fsum(abs(x) for x in self.head[n:]) * (1 + 4 * EPS)
        m = max(n, self.H)
        if self.base != 0.0:
            return math.inf
        return part + self.tail.abs_sum(m)

    def tail_sup(self, n: int) -> float:
        """Upper bound on sup_{k>n} |entry(k)|."""
        n = max(n, 0)
        s = max((abs(x) for x in self.head[n:]), default=0.0)
        m = max(n, self.H)
        return max(s, abs(self.base) + self.tail.sup_abs(m))

    @property
    def abs_summable(self) -> bool:
        return self.base == 0.0 and self.tail.summable

    @property
    def square_summable(self) -> bool:
        if self.base != 0.0:
            return False
        return _family_power(self.tail, 2).summable

    # algebra
    def scaled(self, a: float) -> TailDescriptor:
        return TailDescriptor(tuple(a * x for x in self.head),
                              _with_coeff(self.tail, a * _coeff(self.tail)), a * self.base)

    def abs_power(self, m: int) -> TailDescriptor:
        """|entry(k)|**m as a descriptor (the tail must have base 0)."""
        if self.base != 0.0:
            raise UnsupportedInput("power of a descriptor with nonzero base")
        t = self.tail
        at = _with_coeff(t, abs(_coeff(t)))
        return TailDescriptor(tuple(abs(x) ** m for x in self.head), _family_power(at, m))

    def add(self, other: TailDescriptor) -> TailDescriptor:
        """Entrywise sum; needs compatible tail families."""
        n = max(self.H, other.H)
        head = tuple(self.values(n) + other.values(n))
        a, b = self.tail, other.tail
        if a.is_zero:
            tail = b
        elif b.is_zero:
            tail = a
        elif _same_family(a, b):
            tail = _with_coeff(a, _coeff(a) + _coeff(b))
        else:
            raise UnsupportedInput("sum of descriptors with different tail families")
        return TailDescriptor(head, tail, self.base + other.base)

    def is_same_tail(self, other: TailDescriptor) -> bool:
        return self.tail == other.tail and self.base == other.base

    # serialization
    def to_json(self) -> dict:
        out = {"head": list(self.head), "tail": {"kind": self.tail.kind, **self.tail.params()}}
        if self.base != 0.0:
            out["base"] = self.base
        return out

    @classmethod
    def from_json(cls, obj) -> TailDescriptor:
        if isinstance(obj, (int, float)):
            return cls.constant(float(obj))
        if not isinstance(obj, dict):
            raise InputError("tail descriptor must be an object")
        unknown = set(obj) - {"head", "tail", "base"}
        if unknown:
            raise InputError(f"unknown descriptor fields {sorted(unknown)}")
        head = obj.get("head", [])
        t = obj.get("tail", {"kind": "constant", "c": 0.0})
        try:
            kind = t["kind"]
            if kind == "constant":
                tail = Constant(float(t["c"]))
            elif kind == "geometric":
                tail = GeometricDecay(float(t["coeff"]), float(t["ratio"]))
            elif kind == "power":
                tail = PowerDecay(float(t["coeff"]), float(t["exponent"]))
            else:
                raise InputError(f"unknown tail kind {kind!r}")
        except (KeyError, TypeError) as exc:
            raise InputError(f"malformed tail: {exc}") from exc
        return cls(tuple(head), tail, float(obj.get("base", 0.0)))


# ---------------------------------------------------------------------------
# certified sums and products


def sum_with_certificate(s: TailDescriptor, tol: float = 1e-12) -> CertifiedValue:
    if not tol > 0:
        raise InputError("tol must be positive")
    head_sum = math.fsum(s.head)
    t = s.tail
    if isinstance(t, Constant):
        if t.c != 0.0:
            return CertifiedValue.diverging(note=f"constant tail {t.c} != 0")
        # fsum is correctly rounded; a zero residual means the sum is exact
        exact = math.fsum([*s.head, -head_sum]) == 0.0
        return CertifiedValue.approx(head_sum, 0.0 if exact else EPS * abs(head_sum) / 2)
    if s.base != 0.0:
        return CertifiedValue.diverging(note=f"entries tend to {s.base} != 0")
    if not t.summable:
        return CertifiedValue.diverging(note=f"power tail with exponent {t.exponent} <= 1")
    v, e = _family_tail_sum(t, s.H, tol / 2)
    total = math.fsum([head_sum, v])
    return CertifiedValue.approx(total, e + EPS * (abs(total) + abs(head_sum)))


def _safe_log(f: np.ndarray) -> np.ndarray:
    near = (f >= 0.5) & (f <= 2.0)
    out = np.empty_like(f)
    out[near] = np.log1p(f[near] - 1.0)
    out[~near] = np.log(f[~near])
    return out


def _small_region(t: Tail, n: int, bound: float = 0.5) -> int:
    """Smallest m >= n with |term(k)| <= bound for every k > m."""
    m = n
    a = abs(_coeff(t))
    if isinstance(t, GeometricDecay) and a > bound:
        m = max(m, int(math.ceil(math.log(bound / a) / math.log(t.ratio))) - 1)
    elif isinstance(t, PowerDecay) and a > bound:
        m = max(m, int(math.ceil((a / bound) ** (1.0 / t.exponent))) - 1)
    while t.sup_abs(m) > bound:
        m += 1
    return m


def _abs_power_sum_bound(t: Tail, m: int, n: int) -> float:
    """Upper bound on sum_{k>n} |term(k)|**m."""
    a = abs(_coeff(t)) ** m
    if isinstance(t, GeometricDecay):
        r = t.ratio ** m
        return a * r ** (n + 1) / (1 - r) * (1 + 8 * EPS)
    return a * power_tail_bound(t.exponent * m, n)


def log1p_tail_sum(t: Tail, n: int, tol: float) -> tuple[float, float]:
    """sum_{k>n} log1p(term(k)), assuming |term(k)| <= 1/2 beyond n.

    Uses the alternating series of log1p with each power sum evaluated in
    closed form, so slowly decaying tails cost no explicit terms.
    """
    if t.is_zero:
        return 0.0, 0.0
    parts, err = [], 0.0
    m = 1
    while True:
        fam = _family_power(t, m)
        v, e = _family_tail_sum(fam, n, tol / 4)
        sign = 1.0 if m % 2 == 1 else -1.0
        parts.append(sign * v / m)
        err += e / m
        rem = 2.0 / (m + 1) * _abs_power_sum_bound(t, m + 1, n)
        if rem <= tol / 2 or m >= 400:
            err += rem
            break
        m += 1
    value = math.fsum(parts)
    return value, err + EPS * math.fsum(abs(p) for p in parts)


def _check_factors(f: TailDescriptor) -> None:
    if any(x < 0 for x in f.head):
        raise InputError("negative factor")
    t = f.tail
    if isinstance(t, Constant):
        if t.c < 0:
            raise InputError("negative factor in tail")
        return
    first = f.base + float(t.term(np.array([f.H + 1]))[0])
    if min(first, f.base) < 0:
        raise InputError("negative factor in tail")


def _finite_product(head) -> CertifiedValue | None:
    """Direct product with its rounding error measured against the exact rational product."""
    value = math.prod(head)
    if value == 0.0 or not math.isfinite(value) or value < 1e-300:
        return None
    exact = math.prod(Fraction(x) for x in head)
    diff = abs(exact - Fraction(value))
    if diff == 0:
        return CertifiedValue.exact(value)
    return CertifiedValue.approx(value, float(diff) * (1 + EPS) + 5e-324)


def log_product_with_certificate(factors: TailDescriptor, tol: float = 1e-12) -> CertifiedValue:
    """prod_k f_k evaluated as exp(sum log f_k) with a relative error bound."""
    if not tol > 0:
        raise InputError("tol must be positive")
    _check_factors(factors)
    f = factors
    t = f.tail
    if any(x == 0.0 for x in f.head):
        return CertifiedValue.exact(0.0, "zero factor")
    if isinstance(t, Constant) and t.c == 1.0 and f.H <= FINITE_PRODUCT_CAP:
        direct = _finite_product(f.head)
        if direct is not None:
            return direct
    if isinstance(t, Constant):
        if t.c == 0.0:
            return CertifiedValue.exact(0.0, "zero factor in tail")
        if t.c > 1.0:
            return CertifiedValue.diverging(Status.DIVERGES_TO_INFINITY, f"constant factor {t.c} > 1")
        if t.c < 1.0:
            return CertifiedValue.diverging(Status.DIVERGES_TO_ZERO, f"constant factor {t.c} < 1")
    else:
        if f.base + float(t.term(np.array([f.H + 1]))[0]) == 0.0:
            return CertifiedValue.exact(0.0, "zero factor in tail")
        if f.base > 1.0:
            return CertifiedValue.diverging(Status.DIVERGES_TO_INFINITY, f"factors tend to {f.base} > 1")
        if f.base < 1.0:
            return CertifiedValue.diverging(Status.DIVERGES_TO_ZERO, f"factors tend to {f.base} < 1")
        if not t.summable:
            st = Status.DIVERGES_TO_INFINITY if t.coeff > 0 else Status.DIVERGES_TO_ZERO
            return CertifiedValue.diverging(st, f"factor deviations ~ k^-{t.exponent} not summable")
    logs = _safe_log(np.array(f.head, dtype=float)) if f.H else np.zeros(0)
    pieces = list(logs)
    err = 0.0
    if not isinstance(t, Constant):
        m = _small_region(t, f.H)
        if m > f.H:
            ks = np.arange(f.H + 1, m + 1, dtype=float)
            pieces.extend(np.log1p(t.term(ks)))
        v, e = log1p_tail_sum(t, m, tol / 4)
        pieces.append(v)
        err += e
    total = math.fsum(pieces)
    err += EPS * math.fsum(abs(p) for p in pieces) + EPS * abs(total)
    try:
        value = math.exp(total)
    except OverflowError:
        return CertifiedValue.diverging(Status.DIVERGES_TO_INFINITY, "product overflows")
    if err == 0.0 and total == 0.0:
        return CertifiedValue.exact(value)
    return CertifiedValue.approx(value, value * math.expm1(err) + EPS * value)


def positive_log_sum(lengths: TailDescriptor, tol: float = 1e-12) -> CertifiedValue:
    """sum_k max(0, log d_k), the quantity whose finiteness makes a box measurable."""
    _check_factors(lengths)
    d = lengths
    head = np.array(d.head, dtype=float)
    big = head[head > 1.0]
    pieces = list(_safe_log(big)) if big.size else []
    err = 0.0
    t = d.tail
    if isinstance(t, Constant):
        if t.c > 1.0:
            return CertifiedValue.diverging(note=f"constant edge {t.c} > 1")
    elif d.base > 1.0:
        return CertifiedValue.diverging(note=f"edges tend to {d.base} > 1")
    elif d.base < 1.0:
        k = d.H + 1
        while k <= EXPLICIT_CAP:
            val = d.base + float(t.term(np.array([k]))[0])
            if val <= 1.0:
                break
            pieces.append(math.log(val))
            k += 1
        else:
            raise UnsupportedInput("edge lengths stay above 1 too long")
    elif t.coeff > 0:
        if not t.summable:
            return CertifiedValue.diverging(note=f"edge excess ~ k^-{t.exponent} not summable")
        m = _small_region(t, d.H)
        if m > d.H:
            pieces.extend(np.log1p(t.term(np.arange(d.H + 1, m + 1, dtype=float))))
        v, e = log1p_tail_sum(t, m, tol / 2)
        pieces.append(v)
        err += e
    total = math.fsum(pieces)
    return CertifiedValue.approx(total, err + EPS * math.fsum(abs(p) for p in pieces))


def family_dot(a: Tail, b: Tail, n: int, tol: float = 1e-15) -> tuple[float, float]:
    """Certified sum_{k>n} a.term(k) * b.term(k)."""
    fam = _family_product(a, b)
    if fam is not None:
        if fam.is_zero:
            return 0.0, 0.0
        if not fam.summable:
            raise UnsupportedInput("inner product of non-square-summable tails")
        return _family_tail_sum(fam, n, tol)
    # mixed geometric/power tails: the geometric factor kills the tail fast
    m = max(n, 16)

    def bound(m):
        return min(a.sup_abs(m) * b.abs_sum(m), b.sup_abs(m) * a.abs_sum(m))

    while bound(m) > tol and m < EXPLICIT_CAP:
        m *= 2
    ks = np.arange(n + 1, m + 1, dtype=float)
    mid = a.term(ks) * b.term(ks)
    return math.fsum(mid), bound(m) + EPS * math.fsum(np.abs(mid))


def dot(x: TailDescriptor, y: TailDescriptor, tol: float = 1e-15) -> tuple[float, float]:
    """Certified inner product sum_k x_k y_k of two square-summable sequences."""
    if not (x.square_summable and y.square_summable):
        raise UnsupportedInput("inner product needs square-summable sequences")
    n = max(x.H, y.H)
    head = x.values(n) * y.values(n)
    explicit = math.fsum(head)
    err = EPS * math.fsum(np.abs(head)) if n else 0.0
    v, e = family_dot(x.tail, y.tail, n, tol)
    return explicit + v, err + e + EPS * abs(v)
