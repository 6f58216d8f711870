"""Near/distant classification of basis pairs from the transition operator.

Two bases are near when sum_j (l_j - 1) converges, l_j being the l1 norm of
column j.  Verdicts come from tail metadata; a finite truncation alone never
decides anything.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import PreconditionError, UnsupportedInput
from .operator import (Identity, PermutationSign, Spec, _even, normal_form, transpose)
from .seqcert import CertifiedValue

INV_SQRT2 = 1.0 / math.sqrt(2.0)
DIAG_SEARCH_CAP = 4096


class Classification(str, Enum):
    NEAR = "Near"
    DISTANT = "Distant"
    UNDETERMINED = "Undetermined"


class CaseTag(str, Enum):
    BOTH_FINITE = "BothSupsFinite"
    BOTH_INFINITE = "BothSupsInfinite"
    MIXED = "Mixed"


@dataclass(frozen=True)
class ProximityReport:
    classification: Classification
    sum_l_minus_1: CertifiedValue | None = None
    offdiag_sum: CertifiedValue | None = None
    case_tag: CaseTag | None = None
    m0: int | None = None
    reason: str = ""

    @property
    def witness(self) -> str:
        for cv in (self.sum_l_minus_1, self.offdiag_sum):
            if cv is not None and not cv.is_converged:
                return cv.note
        return ""

    def to_json(self) -> dict:
        out = {"classification": self.classification.value}
        if self.sum_l_minus_1 is not None:
            out["sum_l_minus_1"] = self.sum_l_minus_1.to_json()
        if self.offdiag_sum is not None:
            out["offdiag_sum"] = self.offdiag_sum.to_json()
        if self.case_tag is not None:
            out["case_tag"] = self.case_tag.value
        if self.m0 is not None:
            out["m0"] = self.m0
        if self.witness:
            out["witness"] = self.witness
        if self.reason:
            out["reason"] = self.reason
        return out


def _case_tag(nf) -> CaseTag | None:
    try:
        cols = nf.sup_l1_finite()
        rows = nf.transpose().sup_l1_finite()
    except UnsupportedInput:
        return None
    if cols and rows:
        return CaseTag.BOTH_FINITE
    if not cols and not rows:
        return CaseTag.BOTH_INFINITE
    return CaseTag.MIXED


def classify(U: Spec, tol: float = 1e-10, with_m0: bool = True) -> ProximityReport:
    try:
        nf = normal_form(U)
        s = nf.excess("l1", tol)
        off = nf.excess("offdiag", tol)
    except UnsupportedInput as e:
        return ProximityReport(Classification.UNDETERMINED, reason=str(e))
    if s.is_converged:
        m0 = None
        if with_m0:
            try:
                _, m0 = _normalize(U, nf)
            except UnsupportedInput:
                m0 = None
        return ProximityReport(Classification.NEAR, s, off, None, m0)
    tag = _case_tag(nf)
    reason = "" if tag is not None else "column/row sup norms not decidable"
    return ProximityReport(Classification.DISTANT, s, off, tag, None, reason)


def offdiag_sum(U: Spec, tol: float = 1e-10) -> CertifiedValue:
    """sum_j sum_{i != m_j} |c_ij| with m_j the row of the column maximum."""
    return normal_form(U).excess("offdiag", tol)


def check_transpose_equivalence(U: Spec, tol: float = 1e-10) -> bool:
    a = classify(U, tol, with_m0=False)
    b = classify(transpose(U), tol, with_m0=False)
    if Classification.UNDETERMINED in (a.classification, b.classification):
        raise UnsupportedInput("classification undetermined: " + (a.reason or b.reason))
    return a.classification == b.classification


def _dominant_tail_start(nf) -> int:
    """Even J with every diagonal entry beyond J positive and above 1/sqrt(2)."""
    th = nf.theta
    if th is not None and not th.tail_is_zero:
        from .seqcert import Constant
        if isinstance(th.tail, Constant) and math.cos(th.tail.c) <= 0.0:
            raise UnsupportedInput("infinitely many diagonal entries need a sign flip")
        if th.base != 0.0:
            raise UnsupportedInput("rotation angles do not tend to zero")
    J = nf.J0
    while nf.diag_min_tail(J) <= INV_SQRT2:
        if J >= DIAG_SEARCH_CAP:
            raise UnsupportedInput("diagonal dominance not reached within the search cap")
        J = _even(2 * J + 2)
    return J


def _normalize(U: Spec, nf) -> tuple[Spec, int]:
    J = _dominant_tail_start(nf)
    if J == 0:
        return Identity(), 0
    cols = [nf.column(j) for j in range(1, J + 1)]
    best = []
    for j, col in enumerate(cols, start=1):
        a, m, _ = col.argmax_abs(J)
        best.append((a, m, j))
    sigma = [0] * (J + 1)
    sign = [1] * (J + 1)
    used = set()
    for a, m, j in sorted(best, key=lambda t: (-t[0], t[2])):
        if m <= J and sigma[m] == 0:
            sigma[m] = j
            sign[m] = -1 if cols[j - 1].values(m, m)[0] < 0 else 1
            used.add(j)
    free = iter(j for j in range(1, J + 1) if j not in used)
    for i in range(1, J + 1):
        if sigma[i] == 0:
            sigma[i] = next(free)
            sign[i] = -1 if cols[sigma[i] - 1].values(i, i)[0] < 0 else 1
    m0 = 0
    for i in range(1, J + 1):
        col = cols[sigma[i] - 1]
        d = sign[i] * float(col.values(i, i)[0]) - col.entry_err(i)
        if not d > INV_SQRT2:
            m0 = i
    perm = tuple(sigma[1:])
    flips = tuple(i for i in range(1, J + 1) if sign[i] < 0)
    if perm == tuple(range(1, J + 1)) and not flips:
        return Identity(), m0
    return PermutationSign(perm, flips), m0


def normalize_diagonal(U: Spec, tol: float = 1e-10) -> tuple[Spec, int]:
    """Permutation-and-sign P and m0 so compose(U, P) is diagonally dominant beyond m0."""
    rep = classify(U, tol, with_m0=False)
    if rep.classification is not Classification.NEAR:
        raise PreconditionError(f"diagonal normalization needs a near pair, got "
                                f"{rep.classification.value}")
    return _normalize(U, normal_form(U))
