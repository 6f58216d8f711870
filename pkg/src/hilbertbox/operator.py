"""Structured orthogonal operators on l2.

An operator is described by a small spec (identity, permutation with signs,
block rotation, embedded finite matrix, Householder reflection, composition).
Internally every spec is lowered to a normal form

    U = R + F + sum_t x_t y_t^T

where R is a block rotation (possibly with infinitely many active blocks), F a
finite dense correction and x_t, y_t infinite vectors with closed-form tails.
All certified quantities (entries, column norms, tail remainders) are read off
that normal form.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Union

import numpy as np

from .errors import InputError, UnsupportedInput
from .seqcert import (EPS, CertifiedValue, Constant, GeometricDecay, PowerDecay, Status, Tail,
                      TailDescriptor, _coeff, _family_power, _family_tail_sum, _small_region,
                      _with_coeff, family_dot, sum_with_certificate)

MAX_DEPTH = 4
SQRT2 = math.sqrt(2.0)
L1_COLUMN_CAP = 1024


# ---------------------------------------------------------------------------
# specs


@dataclass(frozen=True)
class Identity:
    pass


@dataclass(frozen=True)
class PermutationSign:
    """U e_j = s_j e_{perm[j-1]}; s_j = -1 exactly for j in flips."""

    perm: tuple[int, ...] = ()
    flips: tuple[int, ...] = ()

    def __post_init__(self):
        perm = tuple(int(p) for p in self.perm)
        if sorted(perm) != list(range(1, len(perm) + 1)):
            raise InputError("perm must be a permutation of 1..n")
        flips = tuple(sorted(set(int(f) for f in self.flips)))
        if flips and flips[0] < 1:
            raise InputError("sign flips are 1-based indices")
        object.__setattr__(self, "perm", perm)
        object.__setattr__(self, "flips", flips)

    @property
    def size(self) -> int:
        return max(len(self.perm), max(self.flips, default=0))

    def matrix(self) -> np.ndarray:
        n = self.size
        m = np.zeros((n, n))
        for j in range(1, n + 1):
            i = self.perm[j - 1] if j <= len(self.perm) else j
            m[i - 1, j - 1] = -1.0 if j in self.flips else 1.0
        return m


@dataclass(frozen=True)
class BlockRotation:
    """Rotation by angle theta_k on span(e_{2k-1}, e_{2k}).

    The block matrix is [[cos, sin], [-sin, cos]].
    """

    angles: TailDescriptor


@dataclass(frozen=True)
class EmbeddedFinite:
    matrix: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
            raise InputError("embedded matrix must be square and non-empty")
        if not np.all(np.isfinite(m)):
            raise InputError("embedded matrix has non-finite entries")
        if np.max(np.abs(m.T @ m - np.eye(len(m)))) > 1e-12:
            raise InputError("embedded matrix is not orthogonal within 1e-12")
        object.__setattr__(self, "matrix", tuple(tuple(float(x) for x in row) for row in m))

    @classmethod
    def of(cls, m) -> EmbeddedFinite:
        return cls(tuple(tuple(float(x) for x in row) for row in np.asarray(m, float)))

    @property
    def array(self) -> np.ndarray:
        return np.array(self.matrix, dtype=float)


@dataclass(frozen=True)
class HouseholderFromVector:
    """The reflection exchanging e_axis and the unit vector v."""

    axis: int
    vector: TailDescriptor

    def __post_init__(self):
        if self.axis < 1:
            raise InputError("axis is 1-based")
        v = self.vector
        if v.base != 0.0 or not v.square_summable:
            raise InputError("Householder vector must be square-summable")
        norm = sum_with_certificate(v.abs_power(2), 1e-14)
        if not norm.is_converged or abs(norm.value - 1.0) > 1e-12 + norm.error_bound:
            raise InputError("Householder vector is not a unit vector within 1e-12")

    @property
    def is_degenerate(self) -> bool:
        v = self.vector
        if not v.tail_is_zero:
            return False
        n = max(v.H, self.axis)
        e = np.zeros(n)
        e[self.axis - 1] = 1.0
        return bool(np.array_equal(v.values(n), e))


@dataclass(frozen=True)
class Composition:
    """Product factors[0] @ factors[1] @ ... (the last factor acts first)."""

    factors: tuple

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))


Spec = Union[Identity, PermutationSign, BlockRotation, EmbeddedFinite,
             HouseholderFromVector, Composition]


def harmonic_unit_vector() -> TailDescriptor:
    """v_k = sqrt(6)/(pi k): a unit vector outside l1."""
    return TailDescriptor.power(math.sqrt(6.0) / math.pi, 1.0)


def geometric_unit_vector(ratio: float = 0.5) -> TailDescriptor:
    """v_k proportional to ratio**k, normalized."""
    a = math.sqrt((1.0 - ratio * ratio) / (ratio * ratio))
    return TailDescriptor.geometric(a, ratio)


# ---------------------------------------------------------------------------
# vectors with closed-form tails


def _unit(t: Tail) -> Tail:
    return _with_coeff(t, 1.0)


def _family_key(t: Tail):
    if isinstance(t, GeometricDecay):
        return ("g", t.ratio)
    if isinstance(t, PowerDecay):
        return ("p", t.exponent)
    return ("c",)


def _merge_tails(items) -> tuple:
    groups: dict = {}
    for t, e in items:
        key = _family_key(t)
        c, err, mag = groups.get(key, (0.0, 0.0, 0.0))
        groups[key] = (c + _coeff(t), err + e, mag + abs(_coeff(t)))
        groups.setdefault(("proto",) + key, t)
    out = []
    for key, val in groups.items():
        if key[0] == "proto":
            continue
        c, err, mag = val
        err += EPS * mag
        if c == 0.0 and mag == 0.0:
            continue
        out.append((_with_coeff(groups[("proto",) + key], c), err))
    return tuple(out)


@dataclass(frozen=True, eq=False)
class Vec:
    """Explicit entries 1..h (each within err), then a sum of tail families.

    Each tail family carries an absolute error on its coefficient.
    """

    head: np.ndarray
    err: float = 0.0
    tails: tuple = ()

    @classmethod
    def finite(cls, values, err: float = 0.0) -> Vec:
        return cls(np.asarray(values, dtype=float).copy(), float(err), ())

    @classmethod
    def from_desc(cls, d: TailDescriptor) -> Vec:
        if d.base != 0.0 or (isinstance(d.tail, Constant) and d.tail.c != 0.0):
            raise UnsupportedInput("vector entries must tend to zero")
        tails = () if d.tail_is_zero else ((d.tail, 0.0),)
        return cls(np.array(d.head, dtype=float), 0.0, tails)

    @classmethod
    def basis(cls, i: int) -> Vec:
        h = np.zeros(i)
        h[i - 1] = 1.0
        return cls(h)

    @property
    def h(self) -> int:
        return len(self.head)

    @property
    def is_finite(self) -> bool:
        return not self.tails

    @property
    def is_zero(self) -> bool:
        return self.is_finite and self.err == 0.0 and not np.any(self.head)

    def _tail_values(self, lo: int, hi: int) -> np.ndarray:
        ks = np.arange(lo, hi + 1, dtype=float)
        out = np.zeros(len(ks))
        for t, _ in self.tails:
            out += t.term(ks)
        return out

    def _tail_errors(self, lo: int, hi: int) -> np.ndarray:
        ks = np.arange(lo, hi + 1, dtype=float)
        out = np.zeros(len(ks))
        for t, e in self.tails:
            out += e * np.abs(_unit(t).term(ks))
        return out

    def values(self, n: int, start: int = 1) -> np.ndarray:
        """Entries start..n."""
        if n < start:
            return np.zeros(0)
        out = np.zeros(n - start + 1)
        m = min(n, self.h)
        if m >= start:
            out[: m - start + 1] = self.head[start - 1:m]
        lo = max(start, self.h + 1)
        if n >= lo and self.tails:
            out[lo - start:] = self._tail_values(lo, n)
        return out

    def entry_err(self, k: int) -> float:
        if k <= self.h:
            return self.err
        return float(self._tail_errors(k, k)[0]) + EPS * abs(float(self._tail_values(k, k)[0]))

    def padded(self, n: int) -> Vec:
        if n <= self.h:
            return self
        ext = self._tail_values(self.h + 1, n)
        e = max(self.err, float(np.max(self._tail_errors(self.h + 1, n), initial=0.0))
                + EPS * float(np.max(np.abs(ext), initial=0.0)))
        return Vec(np.concatenate([self.head, ext]), e, self.tails)

    def scale(self, a: float, a_err: float = 0.0) -> Vec:
        head = a * self.head
        mx = float(np.max(np.abs(self.head), initial=0.0))
        err = abs(a) * self.err + a_err * (mx + self.err) + EPS * abs(a) * mx
        tails = []
        for t, e in self.tails:
            c = _coeff(t)
            new = a * c
            ne = abs(a) * e + a_err * (abs(c) + e) + EPS * abs(new)
            if new == 0.0 and ne == 0.0:
                continue
            tails.append((_with_coeff(t, new), ne))
        return Vec(head, err, tuple(tails))

    def add(self, other: Vec) -> Vec:
        n = max(self.h, other.h)
        a, b = self.padded(n), other.padded(n)
        head = a.head + b.head
        err = a.err + b.err + EPS * float(np.max(np.abs(head), initial=0.0))
        return Vec(head, err, _merge_tails(a.tails + b.tails))

    # -- norms and tails ---------------------------------------------------

    def _fam_bound(self, m: int, fn) -> float:
        total = 0.0
        for t, e in self.tails:
            total += (abs(_coeff(t)) + e) * fn(_unit(t), m)
        return total

    def tail_abs_bound(self, n: int) -> float:
        """Upper bound on sum_{k>n} |v_k|."""
        part = 0.0
        if n < self.h:
            part = math.fsum(np.abs(self.head[n:])) + self.err * (self.h - n)
        m = max(n, self.h)
        return part + self._fam_bound(m, lambda u, m: u.abs_sum(m) if u.summable else math.inf)

    def tail_sup(self, n: int) -> float:
        """Upper bound on sup_{k>n} |v_k|."""
        part = 0.0
        if n < self.h:
            part = float(np.max(np.abs(self.head[n:]))) + self.err
        m = max(n, self.h)
        return max(part, self._fam_bound(m, lambda u, m: u.sup_abs(m)))

    def tail_l2_bound(self, n: int) -> float:
        part = 0.0
        if n < self.h:
            part = math.sqrt(math.fsum(self.head[n:] ** 2)) + self.err * math.sqrt(self.h - n)
        m = max(n, self.h)
        return part + self._fam_bound(m, lambda u, m: math.sqrt(_family_power(u, 2).abs_sum(m)))

    def l1_status(self) -> str:
        """'finite', 'infinite' or 'unknown' for sum_k |v_k|."""
        uncertain = False
        for t, e in self.tails:
            if _unit(t).summable:
                continue
            if abs(_coeff(t)) > 2.0 * e:
                # a certified non-summable family: any other non-summable family
                # either dominates it or is dominated, so the sum diverges
                return "infinite"
            uncertain = True
        return "unknown" if uncertain else "finite"

    def l1_upper(self) -> float:
        return self.tail_abs_bound(0)

    def l1(self, tol: float = 1e-12) -> CertifiedValue:
        st = self.l1_status()
        if st == "infinite":
            return CertifiedValue.diverging(Status.DIVERGENT, "tail is not absolutely summable")
        if st == "unknown":
            raise UnsupportedInput("cannot decide summability: coefficient may cancel")
        explicit = math.fsum(np.abs(self.head))
        err = self.err * self.h + EPS * explicit
        if not self.tails:
            return CertifiedValue.approx(explicit, err)
        if len(self.tails) == 1:
            t, e = self.tails[0]
            u = _unit(t)
            v, ev = _family_tail_sum(_with_coeff(t, abs(_coeff(t))), self.h, tol)
            return CertifiedValue.approx(explicit + v, err + ev + e * u.abs_sum(self.h)
                                         + EPS * abs(v))
        m, sign = self._sign_settles()
        if sign == 0:
            bound = self.tail_abs_bound(m)
            while bound > tol and m < (1 << 20):
                m = 2 * m + 16
                bound = self.tail_abs_bound(m)
        mid = self._tail_values(self.h + 1, m)
        ex2 = math.fsum(np.abs(mid))
        ex2_err = float(np.sum(self._tail_errors(self.h + 1, m))) + EPS * ex2
        if sign == 0:
            return CertifiedValue.approx(explicit + ex2 + bound / 2, err + ex2_err + bound / 2)
        # beyond m every entry has the sign of the dominant family
        parts, perr = [], 0.0
        for t, e in self.tails:
            v, ev = _family_tail_sum(t, m, tol / len(self.tails))
            parts.append(sign * v)
            perr += ev + e * _unit(t).abs_sum(m)
        rest = math.fsum(parts)
        return CertifiedValue.approx(explicit + ex2 + rest,
                                     err + ex2_err + perr + EPS * math.fsum(np.abs(parts)))

    def _sign_settles(self) -> tuple[int, int]:
        """(m, s): beyond m every tail entry has sign s; s = 0 if not found.

        The slowest-decaying family dominates the others, and each ratio
        other/dominant is decreasing past a computable index, so checking the
        dominance inequality at one index certifies it for all later ones.
        """
        def rank(t):
            return (0, t.exponent) if isinstance(t, PowerDecay) else (1, -t.ratio)

        order = sorted(self.tails, key=lambda te: rank(te[0]))
        (dom, de), others = order[0], order[1:]
        if abs(_coeff(dom)) <= de:
            return self.h, 0
        start = self.h
        if isinstance(dom, PowerDecay):
            for t, _ in others:
                if isinstance(t, GeometricDecay):
                    start = max(start, int(math.ceil(dom.exponent / -math.log(t.ratio))))
        m = start
        while m < (1 << 20):
            k = np.array([m + 1.0])
            lead = (abs(_coeff(dom)) - de) * abs(float(_unit(dom).term(k)[0]))
            rest = sum((abs(_coeff(t)) + e) * abs(float(_unit(t).term(k)[0])) for t, e in others)
            if lead > rest * (1 + 4 * EPS):
                return m, 1 if _coeff(dom) > 0 else -1
            m = 2 * m + 16
        return self.h, 0

    def argmax_abs(self, start_len: int = 0) -> tuple[float, int, float]:
        """(max |v_k|, first index attaining it, error) with the tail certified smaller."""
        m = max(self.h, start_len, 1)
        while True:
            vals = np.abs(self.values(m))
            i = int(np.argmax(vals))
            best = float(vals[i])
            if self.tail_sup(m) < best:
                return best, i + 1, self.padded(m).err
            if m > (1 << 22):
                raise UnsupportedInput("column maximum not located by band search")
            m *= 2

    def dot(self, other: Vec, tol: float = 1e-15) -> tuple[float, float]:
        n = max(self.h, other.h)
        a, b = self.padded(n), other.padded(n)
        prod = a.head * b.head
        value = math.fsum(prod)
        err = (a.err * math.fsum(np.abs(b.head)) + b.err * math.fsum(np.abs(a.head))
               + a.err * b.err * n + EPS * math.fsum(np.abs(prod)))
        parts = []
        for t1, e1 in self.tails:
            for t2, e2 in other.tails:
                v, e = family_dot(t1, t2, n, tol)
                parts.append(v)
                l1 = math.sqrt(_family_power(_unit(t1), 2).abs_sum(n))
                l2 = math.sqrt(_family_power(_unit(t2), 2).abs_sum(n))
                err += e + e1 * l1 * (abs(_coeff(t2)) + e2) * l2 + e2 * l2 * abs(_coeff(t1)) * l1
        # cross terms between explicit heads and the other's tail vanish: both
        # heads were padded to n, so tails only start beyond n
        return value + math.fsum(parts), err + EPS * math.fsum(np.abs(parts))


# ---------------------------------------------------------------------------
# normal form


def _rotation_entries(theta: TailDescriptor | None, r0: int, r1: int, c0: int,
                      c1: int) -> np.ndarray:
    """Dense R on rows r0..r1 and columns c0..c1 (1-based, inclusive)."""
    out = np.zeros((max(r1 - r0 + 1, 0), max(c1 - c0 + 1, 0)))
    if c1 < c0 or r1 < r0:
        return out
    js = np.arange(c0, c1 + 1)
    if theta is None:
        c = np.ones(len(js))
    else:
        k = (js + 1) // 2
        th = theta.values(int(k.max()))[k - 1]
        c, s = np.cos(th), np.sin(th)
        partner = np.where(js % 2 == 1, js + 1, js - 1)
        val = np.where(js % 2 == 1, -s, s)
        m = (partner >= r0) & (partner <= r1)
        out[partner[m] - r0, js[m] - c0] = val[m]
    m = (js >= r0) & (js <= r1)
    out[js[m] - r0, js[m] - c0] = c[m]
    return out


def _rotate(x: np.ndarray, theta: TailDescriptor | None, transpose: bool = False) -> np.ndarray:
    """Apply R (or its transpose) to an explicit vector of even length."""
    if theta is None:
        return x.copy()
    k = len(x) // 2
    th = theta.values(k)
    if transpose:
        th = -th
    c, s = np.cos(th), np.sin(th)
    a, b = x[0::2], x[1::2]
    out = np.empty_like(x)
    out[0::2] = c * a + s * b
    out[1::2] = -s * a + c * b
    return out


def _right_angle_multiple(c: float) -> bool:
    """True when c is a multiple of pi/2 up to the rounding of its float literal."""
    q = c / (math.pi / 2)
    return abs(q - round(q)) <= 4 * EPS * max(1.0, abs(q))


def _even(n: int) -> int:
    return n + (n % 2)


@dataclass(frozen=True, eq=False)
class NormalForm:
    theta: TailDescriptor | None
    fin: np.ndarray
    fin_err: float = 0.0
    terms: tuple = ()

    @property
    def N(self) -> int:
        return self.fin.shape[0]

    @property
    def rotation_finite(self) -> bool:
        return self.theta is None or self.theta.tail_is_zero

    @property
    def rotation_support(self) -> int:
        if self.theta is None:
            return 0
        if self.theta.tail_is_zero:
            return 2 * self.theta.H
        return math.inf

    @property
    def J0(self) -> int:
        """Index beyond which every column follows the generic tail pattern."""
        m = self.N
        if self.theta is not None:
            th = self.theta
            m = max(m, 2 * th.H)
            if not th.tail_is_zero and not isinstance(th.tail, Constant) and th.base == 0.0:
                m = max(m, 2 * _small_region(th.tail, th.H, 0.5))
        for x, y in self.terms:
            m = max(m, x.h, y.h)
        return _even(m)

    # -- construction ------------------------------------------------------

    def transpose(self) -> NormalForm:
        th = None if self.theta is None else self.theta.scaled(-1.0)
        return NormalForm(th, self.fin.T.copy(), self.fin_err, tuple((y, x) for x, y in self.terms))

    def absorb_rotation(self) -> NormalForm:
        """Move a finitely supported rotation into the dense correction."""
        if self.theta is None or not self.theta.tail_is_zero:
            return self
        n = max(_even(self.N), 2 * self.theta.H)
        fin = _rotation_entries(self.theta, 1, n, 1, n) - np.eye(n)
        fin[: self.N, : self.N] += self.fin
        return NormalForm(None, fin, self.fin_err + EPS, self.terms)

    def apply_local(self, v: Vec, transpose: bool = False) -> Vec:
        """(R + F) v, or its transpose."""
        if not self.rotation_finite and not v.is_finite:
            raise UnsupportedInput("rotation with infinitely many active blocks applied to "
                                   "a vector with an infinite tail")
        n = max(v.h, self.N)
        if self.theta is not None:
            n = _even(max(n, self.rotation_support if self.rotation_finite else 0))
        vp = v.padded(n)
        x = vp.head
        y = _rotate(x, self.theta, transpose)
        absF = np.abs(self.fin)
        row_norm = 0.0
        if self.N:
            F = self.fin.T if transpose else self.fin
            y[: self.N] += F @ x[: self.N]
            row_norm = float(np.max(np.sum(np.abs(F), axis=1)))
        err = (vp.err * (SQRT2 + row_norm) + self.fin_err * math.fsum(np.abs(x[: self.N]))
               + 4 * EPS * float(np.max(np.abs(y), initial=0.0)) * (1 + absF.shape[0]))
        return Vec(y, err, vp.tails)

    def matmul(self, other: NormalForm) -> NormalForm:
        a, b = self, other
        if a.theta is not None and b.theta is not None:
            try:
                theta = a.theta.add(b.theta)
            except UnsupportedInput:
                if a.rotation_finite:
                    a = a.absorb_rotation()
                elif b.rotation_finite:
                    b = b.absorb_rotation()
                else:
                    raise
                theta = a.theta if a.theta is not None else b.theta
        else:
            theta = a.theta if a.theta is not None else b.theta
        M = max(a.N, b.N)
        if M and theta is not None:
            M = _even(M)
        Ra, Rb = _rotation_entries(a.theta, 1, M, 1, M), _rotation_entries(b.theta, 1, M, 1, M)
        Fa, Fb = np.zeros((M, M)), np.zeros((M, M))
        Fa[: a.N, : a.N] = a.fin
        Fb[: b.N, : b.N] = b.fin
        fin = Ra @ Fb + Fa @ Rb + Fa @ Fb
        na = float(np.max(np.sum(np.abs(Fa), axis=1), initial=0.0))
        nb = float(np.max(np.sum(np.abs(Fb), axis=0), initial=0.0))
        fin_err = (a.fin_err * (SQRT2 + nb) * max(M, 1) + b.fin_err * (SQRT2 + na) * max(M, 1)
                   + a.fin_err * b.fin_err * M + 4 * EPS * M * (1 + na) * (1 + nb))
        terms = []
        for x2, y2 in b.terms:
            terms.append((a.apply_local(x2), y2))
        for x1, y1 in a.terms:
            terms.append((x1, b.apply_local(y1, transpose=True)))
        for x1, y1 in a.terms:
            for x2, y2 in b.terms:
                v, e = y1.dot(x2)
                terms.append((x1.scale(v, e), y2))
        return NormalForm(theta, fin, fin_err, tuple(terms))._normalized()

    def _normalized(self) -> NormalForm:
        fin, fin_err = self.fin, self.fin_err
        kept = []
        for x, y in self.terms:
            if x.is_zero or y.is_zero:
                continue
            if x.is_finite and y.is_finite:
                n = max(fin.shape[0], x.h, y.h)
                if n > fin.shape[0]:
                    big = np.zeros((n, n))
                    big[: fin.shape[0], : fin.shape[0]] = fin
                    fin = big
                fin[: x.h, : y.h] += np.outer(x.head, y.head)
                fin_err += (x.err * float(np.max(np.abs(y.head), initial=0.0))
                            + y.err * float(np.max(np.abs(x.head), initial=0.0)) + x.err * y.err
                            + EPS * float(np.max(np.abs(fin), initial=0.0)))
                continue
            kept.append((x, y))
        if self.theta is not None and fin.shape[0] % 2:
            big = np.zeros((fin.shape[0] + 1,) * 2)
            big[:-1, :-1] = fin
            fin = big
        theta = self.theta
        if theta is not None and theta.tail_is_zero and not any(theta.head):
            theta = None
        # drop numerically exact zero rows/cols at the end of fin
        return NormalForm(theta, fin, fin_err, tuple(kept))

    # -- entries -----------------------------------------------------------

    def local_block(self, r0: int, r1: int, c0: int, c1: int) -> np.ndarray:
        out = _rotation_entries(self.theta, r0, r1, c0, c1)
        if self.N and r0 <= self.N and c0 <= self.N:
            rr, cc = min(r1, self.N), min(c1, self.N)
            out[: rr - r0 + 1, : cc - c0 + 1] += self.fin[r0 - 1:rr, c0 - 1:cc]
        return out

    def block(self, r0: int, r1: int, c0: int, c1: int) -> tuple[np.ndarray, float]:
        """Dense entries on rows r0..r1, cols c0..c1 with a uniform error bound."""
        C = self.local_block(r0, r1, c0, c1)
        err = self.fin_err if (r0 <= self.N and c0 <= self.N) else 0.0
        for x, y in self.terms:
            xv, yv = x.values(r1, r0), y.values(c1, c0)
            C += np.outer(xv, yv)
            ex = x.padded(r1).err
            ey = y.padded(c1).err
            mx = float(np.max(np.abs(xv), initial=0.0))
            my = float(np.max(np.abs(yv), initial=0.0))
            err += ex * my + ey * mx + ex * ey + EPS * mx * my
        if self.theta is not None or self.terms:
            err += 2 * EPS * float(np.max(np.abs(C), initial=0.0))
        return C, err

    def entry(self, i: int, j: int) -> tuple[float, float]:
        C, e = self.block(i, i, j, j)
        return float(C[0, 0]), e

    def column(self, j: int) -> Vec:
        hi = _even(j) if self.theta is not None else j
        if j <= self.N:
            hi = max(hi, self.N)
        col = Vec.finite(self.local_block(1, hi, j, j)[:, 0], self.fin_err if j <= self.N else 0.0)
        for x, y in self.terms:
            yj = float(y.values(j, j)[0])
            if yj == 0.0 and y.entry_err(j) == 0.0:
                continue
            col = col.add(x.scale(yj, y.entry_err(j)))
        return col

    def row(self, i: int) -> Vec:
        return self.transpose().column(i)

    def apply(self, x: TailDescriptor, n: int) -> tuple[np.ndarray, float]:
        """First n coordinates of U x."""
        xv = Vec.from_desc(x)
        m = max(n, self.N, xv.h)
        if self.theta is not None:
            m = _even(m + 1)
        xp = xv.padded(m)
        # rows <= n only touch x entries <= m for R and F
        y = _rotate(xp.head, self.theta)[:n].copy()
        err = xp.err * SQRT2
        if self.N:
            y[: min(n, self.N)] += (self.fin @ xp.head[: self.N])[: n]
            err += self.fin_err * math.fsum(np.abs(xp.head[: self.N])) + \
                float(np.max(np.sum(np.abs(self.fin), axis=1))) * xp.err
        for u, w in self.terms:
            d, de = w.dot(xv)
            y += u.values(n) * d
            err += u.padded(n).err * abs(d) + de * (float(np.max(np.abs(u.values(n)),
                                                                  initial=0.0)) + u.err)
        return y, err + 4 * EPS * float(np.max(np.abs(y), initial=0.0))

    # -- certified column structure -----------------------------------------

    def _rotation_tail(self, K: int, kind: str, tol: float) -> CertifiedValue:
        """Sum over columns j > 2K of (l_j - 1) or (l_j - alpha_j); R blocks only."""
        th = self.theta
        if th is None or th.tail_is_zero:
            return CertifiedValue.exact(0.0)
        t = th.tail
        if isinstance(t, Constant) or th.base != 0.0:
            c = t.c if isinstance(t, Constant) else th.base
            m = min(abs(math.cos(c)), abs(math.sin(c)))
            if c == 0.0 or _right_angle_multiple(c):
                return CertifiedValue.exact(0.0)
            return CertifiedValue.diverging(
                Status.DIVERGENT, f"angles tend to {c!r}: every block adds at least {m:.3g}")
        if not t.summable:
            return CertifiedValue.diverging(
                Status.DIVERGENT,
                "angles not absolutely summable; each block adds at least |theta|/2")
        absfam = _with_coeff(t, abs(_coeff(t)))
        S, E = {}, 0.0
        for m in (1, 2, 3, 4):
            v, e = _family_tail_sum(_family_power(absfam, m), K, tol / 8)
            S[m] = v
            E += e
        if kind == "l1":
            lo = S[1] - S[2] / 2 - S[3] / 6
            hi = S[1] - S[2] / 2 + S[4] / 24
        else:
            lo, hi = S[1] - S[3] / 6, S[1]
        # two columns per block
        return CertifiedValue.approx(lo + hi, (hi - lo) + 2 * E + 4 * EPS * abs(hi))

    def _block_excess(self, k0: int, k1: int, kind: str) -> np.ndarray:
        """Per-block contributions of pure rotation blocks k0..k1 (two columns each)."""
        if k1 < k0 or self.theta is None:
            return np.zeros(0)
        th = self.theta.values(k1, k0)
        c, s = np.abs(np.cos(th)), np.abs(np.sin(th))
        if kind == "l1":
            return 2.0 * (c + s - 1.0)
        return 2.0 * np.minimum(c, s)

    def _explicit_local(self, n0: int, n1: int, kind: str) -> tuple[float, float]:
        """Sum over local columns n0..n1 whose support lies inside rows 1..J0."""
        if n1 < n0:
            return 0.0, 0.0
        rows = max(self.J0, _even(n1))
        C = np.abs(self.local_block(1, rows, n0, n1))
        l = C.sum(axis=0)
        parts = l - 1.0 if kind == "l1" else l - C.max(axis=0)
        err = (rows * (EPS + self.fin_err) + EPS) * len(parts)
        return math.fsum(parts), err + EPS * math.fsum(np.abs(parts))

    def divergence_witness(self) -> int | None:
        """A column index with certified divergent l1 norm, if one is visible."""
        if not self.terms:
            return None
        for j in range(1, self.J0 + 5):
            if self.column(j).l1_status() == "infinite":
                return j
        return None

    def terms_l1(self) -> bool:
        return all(x.l1_status() == "finite" and y.l1_status() == "finite" for x, y in self.terms)

    def excess(self, kind: str = "l1", tol: float = 1e-10, n: int = 0) -> CertifiedValue:
        """Sum over columns j > n of l_j - 1 (kind 'l1') or l_j - alpha_j ('offdiag')."""
        if not self.terms:
            J = max(self.J0, _even(n))
            explicit, err = self._explicit_local(n + 1, J, kind)
            K = J // 2
            tail = self._rotation_tail(K, kind, tol)
            while tail.is_converged and tail.error_bound > tol and K < (1 << 20):
                K = 2 * K + 8
                tail = self._rotation_tail(K, kind, tol)
            if not tail.is_converged:
                return tail
            blocks = self._block_excess(J // 2 + 1, K, kind)
            value = math.fsum([explicit, math.fsum(blocks), tail.value])
            err += tail.error_bound + 4 * EPS * (len(blocks) + math.fsum(blocks))
            return CertifiedValue.approx(value, err)
        j = self.divergence_witness()
        if j is not None:
            return CertifiedValue.diverging(Status.DIVERGENT,
                                            f"column {j} has a divergent l1 norm")
        if not self.rotation_finite:
            raise UnsupportedInput("low-rank part combined with infinitely many rotation blocks")
        if not self.terms_l1():
            raise UnsupportedInput("no certificate: rank-one factors are not all in l1")
        norms = [x.l1_upper() for x, _ in self.terms]
        J = max(self.J0, n)

        def remainder(J):
            return sum(nx * y.tail_abs_bound(J) for nx, (_, y) in zip(norms, self.terms))

        T = remainder(J)
        while T > tol and J < L1_COLUMN_CAP:
            J = min(2 * J + 2, L1_COLUMN_CAP)
            T = remainder(J)
        parts, err = [], 0.0
        for j in range(n + 1, J + 1):
            col = self.column(j)
            cv = col.l1(tol / max(J, 1))
            if kind == "l1":
                parts.append(cv.value - 1.0)
                err += cv.error_bound
            else:
                a, _, ae = col.argmax_abs(j)
                parts.append(cv.value - a)
                err += cv.error_bound + ae
        total = math.fsum(parts)
        return CertifiedValue.approx(total + T / 2, err + T / 2 + EPS * math.fsum(np.abs(parts)))

    def sup_l1_finite(self) -> bool:
        """Whether sup_j l_j < infinity is certified (False when a column diverges)."""
        if self.divergence_witness() is not None:
            return False
        if not self.terms:
            return True
        if self.terms_l1():
            return True
        raise UnsupportedInput("cannot bound column norms")

    def col_l1_sup(self) -> float:
        """Upper bound on sup_j l_j."""
        if not self.terms:
            J = self.J0
            C = np.abs(self.local_block(1, max(J, 2), 1, max(J, 2)))
            explicit = float(C.sum(axis=0).max()) if J else 1.0
            beyond = 1.0
            if self.theta is not None and not self.theta.tail_is_zero:
                beyond = SQRT2
            return max(explicit, beyond) + J * (EPS + self.fin_err)
        if not self.terms_l1() or not self.rotation_finite:
            return math.inf
        J = self.J0
        best = 1.0
        for j in range(1, J + 1):
            best = max(best, self.column(j).l1().upper)
        extra = sum(x.l1_upper() * y.tail_sup(J) for x, y in self.terms)
        return max(best, 1.0 + extra)

    def col_tail_bounds(self, n: int) -> np.ndarray:
        """Upper bounds on sum_{i>n} |c_ij| for j = 1..n."""
        out = np.zeros(n)
        rl = max(self.N, n + 1 if self.theta is not None else n)
        if rl > n and n:
            out += np.abs(self.local_block(n + 1, rl, 1, n)).sum(axis=0)
            if self.N > n:
                out += self.fin_err * (self.N - n)
        for x, y in self.terms:
            tx = x.tail_abs_bound(n)
            out += (np.abs(y.values(n)) + y.padded(n).err) * tx
        return out * (1 + 4 * EPS * (rl + 1))

    def col_offdiag_tail(self, n: int, tol: float = 1e-12) -> float:
        """Upper bound on sum_{j>n} sum_{i!=j} |c_ij|."""
        J = max(self.J0, _even(n))
        if not self.terms:
            total = 0.0
            if J > n:
                C = np.abs(self.local_block(1, J, n + 1, J))
                d = np.abs(np.diagonal(C[n:, :]))
                rnd = EPS if self.theta is not None else 0.0
                total += float(C.sum() - d.sum()) + J * (J - n) * (rnd + self.fin_err)
            th = self.theta
            if th is not None and not th.tail_is_zero:
                t = th.tail
                if isinstance(t, Constant) or th.base != 0.0 or not t.summable:
                    c = t.c if isinstance(t, Constant) else th.base
                    if isinstance(t, Constant) and _right_angle_multiple(c):
                        return total
                    return math.inf
                total += 2.0 * _with_coeff(t, abs(_coeff(t))).abs_sum(J // 2)
            return total * (1 + 4 * EPS)
        if not self.rotation_finite or not self.terms_l1():
            return math.inf
        total = 0.0
        for j in range(n + 1, J + 1):
            col = self.column(j)
            d = abs(float(col.values(j, j)[0])) - col.entry_err(j)
            total += col.l1().upper - max(d, 0.0)
        total += sum(x.l1_upper() * y.tail_abs_bound(J) for x, y in self.terms)
        return total * (1 + 4 * EPS)

    def diag_min_tail(self, n: int) -> float:
        """Lower bound on inf_{k>n} |c_kk|."""
        J = max(self.J0, _even(n))
        best = 1.0
        if J > n:
            for j in range(n + 1, J + 1):
                v, e = self.entry(j, j)
                best = min(best, abs(v) - e)
        th = self.theta
        if th is not None and not th.tail_is_zero:
            t = th.tail
            if isinstance(t, Constant):
                best = min(best, abs(math.cos(t.c)))
            elif th.base != 0.0:
                return 0.0
            else:
                s = t.sup_abs(J // 2)
                best = min(best, math.cos(min(s, math.pi / 2)))
        for x, y in self.terms:
            best -= x.tail_sup(J) * y.tail_sup(J)
        return best - 4 * EPS


# ---------------------------------------------------------------------------
# lowering specs


def _nf_identity() -> NormalForm:
    return NormalForm(None, np.zeros((0, 0)))


def _flatten(spec) -> list:
    if isinstance(spec, Composition):
        out = []
        for f in spec.factors:
            out.extend(_flatten(f))
        return out
    return [spec]


@lru_cache(maxsize=512)
def normal_form(spec: Spec) -> NormalForm:
    if isinstance(spec, Identity):
        return _nf_identity()
    if isinstance(spec, PermutationSign):
        m = spec.matrix()
        return NormalForm(None, m - np.eye(len(m)))
    if isinstance(spec, EmbeddedFinite):
        m = spec.array
        return NormalForm(None, m - np.eye(len(m)), EPS)
    if isinstance(spec, BlockRotation):
        nf = NormalForm(spec.angles, np.zeros((0, 0)))
        return nf._normalized()
    if isinstance(spec, HouseholderFromVector):
        if spec.is_degenerate:
            return _nf_identity()
        v = Vec.from_desc(spec.vector)
        i0 = spec.axis
        u = Vec.basis(i0).add(v.scale(-1.0))
        s = 1.0 - float(spec.vector.entry(i0))
        x = u.scale(-1.0 / s, EPS / s)
        return NormalForm(None, np.zeros((0, 0)), 0.0, ((x, u),))._normalized()
    if isinstance(spec, Composition):
        factors = _flatten(spec)
        if len(factors) > MAX_DEPTH:
            raise UnsupportedInput(f"composition depth {len(factors)} exceeds {MAX_DEPTH}")
        nf = _nf_identity()
        for f in factors:
            nf = nf.matmul(normal_form(f))
        return nf
    raise InputError(f"unknown operator spec {spec!r}")


# ---------------------------------------------------------------------------
# public operations


def transpose(U: Spec) -> Spec:
    if isinstance(U, Identity):
        return U
    if isinstance(U, PermutationSign):
        n = U.size
        perm = list(U.perm) + list(range(len(U.perm) + 1, n + 1))
        inv = [0] * n
        flips = []
        for j, i in enumerate(perm, start=1):
            inv[i - 1] = j
            if j in U.flips:
                flips.append(i)
        return PermutationSign(tuple(inv), tuple(flips))
    if isinstance(U, BlockRotation):
        return BlockRotation(U.angles.scaled(-1.0))
    if isinstance(U, EmbeddedFinite):
        return EmbeddedFinite.of(U.array.T)
    if isinstance(U, HouseholderFromVector):
        return U
    if isinstance(U, Composition):
        return Composition(tuple(transpose(f) for f in reversed(U.factors)))
    raise InputError(f"unknown operator spec {U!r}")


def _is_zero_rotation(r: BlockRotation) -> bool:
    return r.angles.tail_is_zero and not any(r.angles.head)


def _merge_pair(a, b):
    """Product a @ b as a single factor, or None when it does not simplify."""
    if a == transpose(b):
        return Identity()
    if isinstance(a, BlockRotation) and isinstance(b, BlockRotation):
        try:
            r = BlockRotation(a.angles.add(b.angles))
        except UnsupportedInput:
            return None
        return Identity() if _is_zero_rotation(r) else r
    finite = (PermutationSign, EmbeddedFinite)
    if isinstance(a, finite) and isinstance(b, finite):
        ma = a.matrix() if isinstance(a, PermutationSign) else a.array
        mb = b.matrix() if isinstance(b, PermutationSign) else b.array
        n = max(len(ma), len(mb))
        A, B = np.eye(n), np.eye(n)
        A[: len(ma), : len(ma)] = ma
        B[: len(mb), : len(mb)] = mb
        return EmbeddedFinite.of(A @ B)
    return None


def compose(*specs: Spec) -> Spec:
    """Operator product specs[0] @ specs[1] @ ..., simplified."""
    factors = []
    for s in specs:
        factors.extend(_flatten(s))
    factors = [f for f in factors if not isinstance(f, Identity)]
    changed = True
    while changed:
        changed = False
        for k in range(len(factors) - 1):
            m = _merge_pair(factors[k], factors[k + 1])
            if m is not None:
                factors[k: k + 2] = [] if isinstance(m, Identity) else [m]
                changed = True
                break
    if not factors:
        return Identity()
    if len(factors) == 1:
        return factors[0]
    if len(factors) > MAX_DEPTH:
        raise UnsupportedInput(f"composition depth {len(factors)} exceeds {MAX_DEPTH}")
    return Composition(tuple(factors))


def entry(U: Spec, i: int, j: int) -> CertifiedValue:
    if i < 1 or j < 1:
        raise InputError("indices are 1-based")
    v, e = normal_form(U).entry(i, j)
    return CertifiedValue.approx(v, e)


def entries(U: Spec, n: int, m: int | None = None) -> tuple[np.ndarray, float]:
    """Top-left n x m block and a uniform entry error bound."""
    m = n if m is None else m
    return normal_form(U).block(1, n, 1, m)


def column_gram(U: Spec, n: int) -> tuple[np.ndarray, float]:
    """Inner products of the full columns 1..n, with a uniform error bound."""
    nf = normal_form(U)
    cols = [nf.column(j) for j in range(1, n + 1)]
    G = np.zeros((n, n))
    err = 0.0
    for a in range(n):
        for b in range(a, n):
            v, e = cols[a].dot(cols[b])
            G[a, b] = G[b, a] = v
            err = max(err, e)
    return G, err


def column_l1(U: Spec, j: int, tol: float = 1e-12) -> CertifiedValue:
    if tol <= 0:
        raise InputError("tol must be positive")
    return normal_form(U).column(j).l1(tol)


def row_l1(U: Spec, i: int, tol: float = 1e-12) -> CertifiedValue:
    return column_l1(transpose(U), i, tol)


def alpha_argmax(U: Spec, j: int) -> tuple[float, int]:
    a, m, _ = normal_form(U).column(j).argmax_abs(j)
    return a, m


def apply(U: Spec, x: TailDescriptor, n: int) -> np.ndarray:
    y, _ = normal_form(U).apply(x, n)
    return y


# ---------------------------------------------------------------------------
# json


def to_json(U: Spec) -> dict:
    if isinstance(U, Identity):
        return {"kind": "identity"}
    if isinstance(U, PermutationSign):
        return {"kind": "permutation_sign", "perm": list(U.perm), "flips": list(U.flips)}
    if isinstance(U, BlockRotation):
        return {"kind": "block_rotation", "angles": U.angles.to_json()}
    if isinstance(U, EmbeddedFinite):
        return {"kind": "embedded_finite", "matrix": [list(r) for r in U.matrix]}
    if isinstance(U, HouseholderFromVector):
        return {"kind": "householder", "axis": U.axis, "vector": U.vector.to_json()}
    if isinstance(U, Composition):
        return {"kind": "composition", "factors": [to_json(f) for f in U.factors]}
    raise InputError(f"unknown operator spec {U!r}")


_FIELDS = {
    "identity": set(),
    "permutation_sign": {"perm", "flips"},
    "block_rotation": {"angles"},
    "embedded_finite": {"matrix"},
    "householder": {"axis", "vector"},
    "composition": {"factors"},
}


def from_json(obj: dict) -> Spec:
    if not isinstance(obj, dict) or obj.get("kind") not in _FIELDS:
        raise InputError(f"operator spec needs a 'kind' in {sorted(_FIELDS)}")
    kind = obj["kind"]
    extra = set(obj) - _FIELDS[kind] - {"kind"}
    if extra:
        raise InputError(f"unknown fields for {kind}: {sorted(extra)}")
    try:
        if kind == "identity":
            return Identity()
        if kind == "permutation_sign":
            return PermutationSign(tuple(obj.get("perm", ())), tuple(obj.get("flips", ())))
        if kind == "block_rotation":
            return BlockRotation(TailDescriptor.from_json(obj["angles"]))
        if kind == "embedded_finite":
            return EmbeddedFinite(tuple(tuple(r) for r in obj["matrix"]))
        if kind == "householder":
            return HouseholderFromVector(int(obj["axis"]), TailDescriptor.from_json(obj["vector"]))
        return compose(*[from_json(f) for f in obj["factors"]])
    except KeyError as e:
        raise InputError(f"{kind} spec is missing field {e}") from None
