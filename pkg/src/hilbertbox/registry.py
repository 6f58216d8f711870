"""Classes of mutually near bases and the glued measure on their rings.

Boxes from different classes meet in null sets, so every cross-class
quantity here is an exact symbolic zero rather than a floating evaluation.
"""
from __future__ import annotations

import itertools
import math
import threading
from dataclasses import dataclass, replace
from typing import Union

from .errors import UnsupportedInput
from .operator import Spec, compose, transpose
from .operator import from_json as spec_from_json, to_json as spec_to_json
from .proximity import Classification, classify
from .rectangle import EmptyRectangle, MeasurableRectangle, intersect_same_basis, measure, shift
from .seqcert import CertifiedValue, TailDescriptor

MAX_SAME_CLASS_PIECES = 16


@dataclass(frozen=True)
class BasisLabel:
    class_id: int
    representative: Spec


@dataclass(frozen=True)
class Piece:
    label: BasisLabel
    rect: MeasurableRectangle | EmptyRectangle


@dataclass(frozen=True)
class RingElement:
    """base minus the union of the subtracted pieces."""

    base: Piece
    subtracted: tuple = ()


@dataclass(frozen=True)
class NullElement:
    """A set known to be null, such as the meet of boxes from two classes."""

    classes: tuple = ()


Element = Union[RingElement, NullElement]


class Registry:
    def __init__(self, tol: float = 1e-10):
        self.tol = tol
        self._lock = threading.Lock()
        self._classes: tuple = ()   # ((class_id, representative), ...)

    @property
    def classes(self) -> tuple:
        return self._classes

    def register_basis(self, U: Spec) -> BasisLabel:
        with self._lock:
            for cid, rep in self._classes:
                r = classify(compose(transpose(rep), U), self.tol, with_m0=False)
                if r.classification is Classification.NEAR:
                    return BasisLabel(cid, U)
                if r.classification is Classification.UNDETERMINED:
                    raise UnsupportedInput(f"cannot compare with class {cid}: {r.reason}")
            cid = len(self._classes)
            self._classes = self._classes + ((cid, U),)
            return BasisLabel(cid, U)

    def to_json(self) -> dict:
        return {"classes": [{"class_id": cid, "representative": spec_to_json(rep)}
                            for cid, rep in self._classes]}

    @classmethod
    def from_json(cls, obj: dict, tol: float = 1e-10) -> Registry:
        reg = cls(tol)
        items = sorted(obj.get("classes", []), key=lambda c: c["class_id"])
        reg._classes = tuple((int(c["class_id"]), spec_from_json(c["representative"]))
                             for c in items)
        return reg


def _same_basis(a: Piece, b: Piece) -> bool:
    return a.label.class_id == b.label.class_id and a.label.representative == b.label.representative


def _intersect(pieces: list[Piece]):
    r = pieces[0].rect
    for p in pieces[1:]:
        if r.is_empty:
            return r
        r = intersect_same_basis(r, replace(p.rect, basis=r.basis) if not p.rect.is_empty
                                 else p.rect)
    return r


def glued_measure(elem: Element, tol: float = 1e-12) -> CertifiedValue:
    if isinstance(elem, NullElement):
        return CertifiedValue.exact(0.0, "null set")
    base = elem.base
    base_m = measure(base.rect, tol)
    same = [p for p in elem.subtracted if p.label.class_id == base.label.class_id]
    if not same:
        return base_m
    for p in same:
        if not _same_basis(p, base):
            raise UnsupportedInput("subtracting a box of another basis in the same class")
    if len(same) > MAX_SAME_CLASS_PIECES:
        raise UnsupportedInput("too many same-class pieces for inclusion-exclusion")
    if not base_m.is_converged:
        raise UnsupportedInput("base box has no finite measure")
    # lambda(A0 \ U A_j) = lambda(A0) - sum over nonempty S of (-1)^{|S|+1} lambda(A0 n A_S)
    parts, err = [base_m.value], base_m.error_bound
    for k in range(1, len(same) + 1):
        for S in itertools.combinations(same, k):
            r = _intersect([base, *S])
            m = measure(r, tol)
            if not m.is_converged:
                raise UnsupportedInput("intersection has no finite measure")
            parts.append(-m.value if k % 2 else m.value)
            err += m.error_bound
    value = math.fsum(parts)
    return CertifiedValue.approx(max(value, 0.0), err + 4e-16 * math.fsum(abs(p) for p in parts))


def indicator_inner_product(A: Piece, B: Piece, tol: float = 1e-12) -> CertifiedValue:
    """(chi_A, chi_B) = measure of A n B."""
    if A.label.class_id != B.label.class_id:
        return CertifiedValue.exact(0.0, "boxes from different classes meet in a null set")
    if not _same_basis(A, B):
        raise UnsupportedInput("boxes of two different bases in one class: the intersection "
                               "is not a box of either basis")
    return measure(_intersect([A, B]), tol)


def intersect_elements(a: Piece, b: Piece) -> Element:
    if a.label.class_id != b.label.class_id:
        return NullElement((a.label.class_id, b.label.class_id))
    if not _same_basis(a, b):
        raise UnsupportedInput("boxes of two different bases in one class")
    return RingElement(Piece(a.label, _intersect([a, b])))


def _classes_of(elem: Element) -> list[int]:
    if isinstance(elem, NullElement):
        return list(elem.classes)
    return [elem.base.label.class_id] + [p.label.class_id for p in elem.subtracted]


def decompose(elems, tol: float = 1e-12) -> dict[int, CertifiedValue]:
    """Per-class components of a disjoint union of ring elements."""
    if isinstance(elems, (RingElement, NullElement)):
        elems = [elems]
    values: dict[int, list] = {}
    for e in elems:
        for cid in _classes_of(e):
            values.setdefault(cid, [])
        if isinstance(e, RingElement):
            values[e.base.label.class_id].append(glued_measure(e, tol))
    out = {}
    for cid in sorted(values):
        cvs = values[cid]
        if not cvs:
            out[cid] = CertifiedValue.exact(0.0, "no atom of this class")
            continue
        out[cid] = CertifiedValue.approx(math.fsum(c.value for c in cvs),
                                         sum(c.error_bound for c in cvs))
    return out


def shift_element(elem: Element, h: TailDescriptor) -> Element:
    """Shift every box by h in its own coordinates."""
    if isinstance(elem, NullElement):
        return elem

    def sh(p: Piece) -> Piece:
        return Piece(p.label, shift(p.rect, h))

    return RingElement(sh(elem.base), tuple(sh(p) for p in elem.subtracted))


def rotate_element(elem: Element, W: Spec, registry: Registry) -> Element:
    """Image under the rotation W: a box of basis F becomes the same box in W(F)."""
    if isinstance(elem, NullElement):
        return NullElement(tuple(sorted({registry.register_basis(
            compose(W, rep)).class_id for cid, rep in registry.classes if cid in elem.classes})))

    def rot(p: Piece) -> Piece:
        return Piece(registry.register_basis(compose(W, p.label.representative)), p.rect)

    return RingElement(rot(elem.base), tuple(rot(p) for p in elem.subtracted))


def piece_to_json(p: Piece) -> dict:
    return {"class_id": p.label.class_id, "basis": spec_to_json(p.label.representative),
            "rectangle": p.rect.to_json()}
