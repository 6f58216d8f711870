"""Axis-aligned boxes in l2 and their shift-invariant measure.

A box is stored as per-axis centers and edge lengths.  Edges are half-open
intervals [c - d/2, c + d/2); the measure is the product of the lengths.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import InputError, UnsupportedInput
from .seqcert import (CertifiedValue, Constant, TailDescriptor, _check_factors,
                      _same_family, log_product_with_certificate, positive_log_sum)


@dataclass(frozen=True)
class EmptyRectangle:
    basis: str = "E"

    is_empty = True

    def to_json(self) -> dict:
        return {"basis": self.basis, "empty": True}


@dataclass(frozen=True)
class MeasurableRectangle:
    centers: TailDescriptor
    lengths: TailDescriptor
    basis: str = "E"

    is_empty = False

    def __post_init__(self):
        _check_factors(self.lengths)
        if not self.centers.square_summable:
            raise InputError("center sequence is not square-summable")
        cert = positive_log_sum(self.lengths)
        if not cert.is_converged:
            raise InputError(f"rectangle is not measurable: {cert.note}")

    @classmethod
    def box(cls, lengths: TailDescriptor, centers: TailDescriptor | None = None,
            basis: str = "E") -> MeasurableRectangle:
        return cls(centers if centers is not None else TailDescriptor(), lengths, basis)

    @property
    def head_size(self) -> int:
        return max(self.centers.H, self.lengths.H)

    def edges(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Lower and upper edge coordinates on axes 1..n."""
        c = self.centers.values(n)
        d = self.lengths.values(n)
        return c - d / 2, c + d / 2

    def with_axis(self, j: int, center: float, length: float) -> MeasurableRectangle:
        """Copy with axis j replaced by the interval of given center and length."""
        n = max(self.head_size, j)
        c = self.centers.padded(n)
        d = self.lengths.padded(n)
        ch, dh = list(c.head), list(d.head)
        ch[j - 1], dh[j - 1] = float(center), float(length)
        return MeasurableRectangle(TailDescriptor(tuple(ch), c.tail, c.base),
                                   TailDescriptor(tuple(dh), d.tail, d.base), self.basis)

    def to_json(self) -> dict:
        return {"basis": self.basis, "centers": self.centers.to_json(),
                "lengths": self.lengths.to_json()}

    @classmethod
    def from_json(cls, obj: dict) -> Union[MeasurableRectangle, EmptyRectangle]:
        if obj.get("empty"):
            return EmptyRectangle(obj.get("basis", "E"))
        unknown = set(obj) - {"basis", "centers", "lengths"}
        if unknown:
            raise InputError(f"unknown rectangle fields {sorted(unknown)}")
        if "lengths" not in obj:
            raise InputError("rectangle needs 'lengths'")
        centers = TailDescriptor.from_json(obj.get("centers", {"head": []}))
        return cls(centers, TailDescriptor.from_json(obj["lengths"]), obj.get("basis", "E"))


Rectangle = Union[MeasurableRectangle, EmptyRectangle]


def unit_cube(basis: str = "E") -> MeasurableRectangle:
    return MeasurableRectangle(TailDescriptor(), TailDescriptor.constant(1.0), basis)


def is_measurable(lengths: TailDescriptor) -> CertifiedValue:
    """Converged iff sum_k max(0, log d_k) is finite."""
    return positive_log_sum(lengths)


def measure(rect: Rectangle, tol: float = 1e-12) -> CertifiedValue:
    if rect.is_empty:
        return CertifiedValue.exact(0.0, "empty rectangle")
    return log_product_with_certificate(rect.lengths, tol)


def shift(rect: Rectangle, h: TailDescriptor) -> Rectangle:
    if not h.square_summable:
        raise InputError("shift vector is not square-summable")
    if rect.is_empty:
        return rect
    return MeasurableRectangle(rect.centers.add(h), rect.lengths, rect.basis)


def _smaller_tail(a: TailDescriptor, b: TailDescriptor) -> TailDescriptor:
    """Whichever length sequence is pointwise smaller beyond the heads."""
    if a.is_same_tail(b):
        return a
    ta, tb = a.tail, b.tail
    if isinstance(ta, Constant) and isinstance(tb, Constant):
        return a if ta.c <= tb.c else b
    if (a.base == b.base and _same_family(ta, tb) and not isinstance(ta, Constant)
            and getattr(ta, "ratio", 1.0) > 0):
        return a if ta.coeff <= tb.coeff else b
    raise UnsupportedInput("cannot decide tail containment between the two rectangles")


def intersect_same_basis(r1: Rectangle, r2: Rectangle) -> Rectangle:
    if r1.basis != r2.basis:
        raise InputError("rectangles live in different bases")
    if r1.is_empty or r2.is_empty:
        return EmptyRectangle(r1.basis)
    if not r1.centers.is_same_tail(r2.centers):
        raise UnsupportedInput("center tails differ; intersection leaves the tail family")
    n = max(r1.head_size, r2.head_size)
    tail_src = _smaller_tail(r1.lengths, r2.lengths)
    c1, c2 = r1.centers.values(n), r2.centers.values(n)
    d1, d2 = r1.lengths.values(n), r2.lengths.values(n)
    lo1, hi1, lo2, hi2 = c1 - d1 / 2, c1 + d1 / 2, c2 - d2 / 2, c2 + d2 / 2
    lo, hi = np.maximum(lo1, lo2), np.minimum(hi1, hi2)
    if np.any(hi <= lo):
        return EmptyRectangle(r1.basis)
    in2 = (lo1 >= lo2) & (hi1 <= hi2)
    in1 = (lo2 >= lo1) & (hi2 <= hi1)
    c = np.where(in2, c1, np.where(in1, c2, (lo + hi) / 2))
    d = np.where(in2, d1, np.where(in1, d2, hi - lo))
    centers = TailDescriptor(tuple(c), r1.centers.tail, r1.centers.base)
    lengths = TailDescriptor(tuple(d), tail_src.tail, tail_src.base)
    return MeasurableRectangle(centers, lengths, r1.basis)
