"""Measure of a box seen from a rotated basis, squeezed between two bounds.

Q is a box with edges d_k along the first basis e_k.  Its measure in the
second basis f_j = U e_j is bracketed by

* an outer bound: the projection of Q onto span(f_1..f_n) times the lengths
  of the projections on the remaining axes, and
* an inner bound: a cylinder (parallelotope in the first n coordinates, box
  in the rest) that provably sits inside Q.

Both converge to the product of the d_k for near pairs.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .determinant import det_qr
from .errors import InputError, PreconditionError
from .operator import Spec, compose, normal_form
from .proximity import Classification, classify, normalize_diagonal
from .rectangle import MeasurableRectangle, measure
from .seqcert import (EPS, CertifiedValue, Constant, Status, TailDescriptor, _coeff,
                      log_product_with_certificate)


# ---------------------------------------------------------------------------
# edge-length sequence helpers


def _sup(d: TailDescriptor) -> float:
    """Upper bound on sup_k d_k."""
    best = max(d.head, default=-math.inf)
    t = d.tail
    if isinstance(t, Constant):
        return max(best, t.c)
    return max(best, d.base + max(0.0, _coeff(t)) * t.sup_abs(d.H) / abs(_coeff(t)))


def _inf_beyond(d: TailDescriptor, n: int) -> float:
    """Lower bound on inf_{k>n} d_k."""
    best = min(d.head[n:], default=math.inf)
    t = d.tail
    if isinstance(t, Constant):
        return min(best, t.c)
    m = max(n, d.H)
    if _coeff(t) >= 0:
        return min(best, d.base)
    return min(best, d.base - t.sup_abs(m))


def _sup_beyond(d: TailDescriptor, n: int) -> float:
    best = max(d.head[n:], default=-math.inf)
    t = d.tail
    if isinstance(t, Constant):
        return max(best, t.c)
    m = max(n, d.H)
    if _coeff(t) <= 0:
        return max(best, d.base)
    return max(best, d.base + t.sup_abs(m))


def _pos_excess_beyond(d: TailDescriptor, n: int) -> float:
    """Upper bound on sum_{k>n} max(0, d_k - 1)."""
    head = np.asarray(d.head[n:], dtype=float)
    total = math.fsum(np.maximum(head - 1.0, 0.0))
    t = d.tail
    m = max(n, d.H)
    if isinstance(t, Constant):
        return total if t.c <= 1.0 else math.inf
    if d.base > 1.0:
        return math.inf
    if _coeff(t) <= 0:
        return total
    if t.summable:
        return total + t.abs_sum(m)
    # base < 1 and a slowly decaying positive tail: it drops below 1 - base
    k = m
    gap = 1.0 - d.base
    while t.sup_abs(k) > gap:
        k = 2 * k + 16
    vals = d.values(k, m + 1)
    return total + math.fsum(np.maximum(vals - 1.0, 0.0))


def _abs_dev_sum(d: TailDescriptor) -> float:
    """Upper bound on sum_k |d_k - 1| (inf when it diverges)."""
    total = math.fsum(abs(x - 1.0) for x in d.head)
    t = d.tail
    if isinstance(t, Constant):
        return total if t.c == 1.0 else math.inf
    if d.base != 1.0 or not t.summable:
        return math.inf
    return total + t.abs_sum(d.H)


# ---------------------------------------------------------------------------
# projections and couplings


@dataclass(frozen=True)
class ProjectedEdges:
    """Lengths b_j = sum_k d_k |c_kj| of the projections of Q on the axes f_j."""

    values: np.ndarray
    errors: np.ndarray
    abs_dev_bound: float
    note: str = ""


def projected_edge_lengths(U: Spec, d: TailDescriptor, n: int = 16,
                           tol: float = 1e-12) -> ProjectedEdges:
    nf = normal_form(U)
    M = max(n, d.H, nf.J0, 8)
    C, err = nf.block(1, M, 1, n)
    dv = d.values(M)
    explicit = dv @ np.abs(C)
    tail = _sup_beyond(d, M) * nf.col_tail_bounds(M)[:n] if M > 0 else np.zeros(n)
    vals = explicit + tail / 2
    errs = tail / 2 + err * math.fsum(np.abs(dv)) + 4 * EPS * M * explicit
    rep = classify(U, tol, with_m0=False)
    s = rep.sum_l_minus_1
    dev = _abs_dev_sum(d)
    note = ""
    if s is None or not s.is_converged:
        bound = math.inf
        note = "sum of (l_j - 1) diverges" if s is not None else rep.reason
    else:
        Lhat = nf.transpose().col_l1_sup()
        bound = s.upper + Lhat * dev if dev > 0 else s.upper
    return ProjectedEdges(vals, errs, bound, note)


def covering_infimum(U: Spec, tol: float = 1e-10) -> CertifiedValue:
    """prod_j l_j: the cheapest cover of the unit cube by boxes of the second basis."""
    nf = normal_form(U)
    total = nf.excess("l1", tol)
    if not total.is_converged:
        return CertifiedValue.diverging(Status.DIVERGES_TO_INFINITY, total.note)
    J = max(nf.J0, 2)
    while True:
        X = nf.excess("l1", tol, n=J)
        if X.upper ** 2 / 2 <= tol or J >= 4096:
            break
        J *= 2
    logs, err = [], 0.0
    for j in range(1, J + 1):
        cv = nf.column(j).l1(tol / J)
        logs.append(math.log(cv.value))
        err += cv.error_bound / cv.value
    lo = X.lower - X.upper ** 2 / 2
    hi = X.upper
    s = math.fsum(logs)
    mid = (lo + hi) / 2
    value = math.exp(s + mid)
    rel = err + (hi - lo) / 2 + 4 * EPS * J
    return CertifiedValue.approx(value, value * math.expm1(rel))


def tail_coupling(U: Spec, j: int, n: int) -> float:
    """Delta_{j,n} = sum_{k>n} |c_kj| (an upper bound, exact for block-local specs)."""
    if j < 1 or j > n:
        raise InputError("need 1 <= j <= n")
    return float(normal_form(U).col_tail_bounds(n)[j - 1])


def gamma(U: Spec, n: int) -> float:
    """gamma_n = sum_{j<=n} Delta_{j,n}."""
    return math.fsum(normal_form(U).col_tail_bounds(n))


# ---------------------------------------------------------------------------
# bounds


@dataclass(frozen=True)
class Bound:
    value: float
    n: int
    flag: str = ""


def _prepare(U: Spec, Q: MeasurableRectangle, n: int):
    if n < 1:
        raise InputError("truncation must be at least 1")
    nf = normal_form(U)
    C, err = nf.block(1, n, 1, n)
    det = det_qr(C)
    exact = err == 0.0 and np.all(np.isin(C, (-1.0, 0.0, 1.0)))
    det_err = 0.0 if exact else n * n * err + 8 * n * EPS * abs(det) + n * EPS
    return nf, C, err, abs(det), det_err


def outer_bound(U: Spec, Q: MeasurableRectangle, n: int) -> Bound:
    nf, C, err, det, det_err = _prepare(U, Q, n)
    d = Q.lengths
    dn = d.values(n)
    lam = measure(Q)
    D_tail = max(_sup_beyond(d, n), 0.0)
    Delta = nf.col_tail_bounds(n)
    bprime = dn @ np.abs(C) + err * math.fsum(np.abs(dn))
    delta = D_tail * Delta
    nfT = nf.transpose()
    off_tail = nf.col_offdiag_tail(n)
    flag = ""
    if np.any(dn <= 0.0):
        logP = -math.inf
    else:
        logP = math.fsum(np.log(dn))
    # prod(b') (prod(1 + delta/b') - 1), in units of prod_{k<=n} d_k when possible
    if np.all(bprime > 0) and logP > -math.inf:
        grow = math.expm1(math.fsum(np.log1p(delta / bprime)))
        rel_corr = math.exp(math.fsum(np.log(bprime)) - logP) * grow
    else:
        rel_corr = None
    candidates = []
    d0 = _inf_beyond(d, n)
    if d0 > 0 and rel_corr is not None and lam.is_converged:
        kappa = (D_tail / d0) * off_tail
        candidates.append((det + det_err + rel_corr) * lam.upper * math.exp(kappa))
    # second estimate, valid without a positive lower edge bound
    rho = nfT.col_tail_bounds(n)
    pos = math.fsum(np.maximum(dn - 1.0, 0.0) * rho)
    Lhat = nfT.col_l1_sup()
    tail_pos = _pos_excess_beyond(d, n)
    expo = off_tail + pos + (Lhat * tail_pos if tail_pos > 0 else 0.0)
    if logP > -math.inf:
        P = math.exp(logP)
        corr = rel_corr * P if rel_corr is not None else \
            math.exp(math.fsum(np.log(bprime + delta)))
        candidates.append(((det + det_err) * P + corr) * math.exp(expo))
    else:
        corr = math.exp(math.fsum(np.log(bprime + delta))) if np.all(bprime + delta > 0) else 0.0
        candidates.append(corr * math.exp(expo))
    value = min(candidates)
    if not math.isfinite(value):
        flag = "outer bound infinite at this truncation"
    exactish = det_err == 0.0 and off_tail == 0.0 and not np.any(delta)
    if not exactish:
        value *= 1 + 16 * (n + 1) * EPS
    return Bound(value, n, flag)


def inner_bound(U: Spec, Q: MeasurableRectangle, n: int) -> Bound:
    nf, C, err, det, det_err = _prepare(U, Q, n)
    d = Q.lengths
    dn = d.values(n)
    lam = measure(Q)
    if not lam.is_converged or lam.value == 0.0:
        return Bound(0.0, n, "measure of Q is zero")
    d0 = _inf_beyond(d, n)
    if d0 <= 0.0 or np.any(dn <= 0.0):
        return Bound(0.0, n, "edge lengths not bounded away from zero")
    D0 = _sup(d)
    nfT = nf.transpose()
    rho = nfT.col_tail_bounds(n)
    gam = math.fsum(rho)
    eta = rho * D0 * (1.0 + gam) / dn
    bprime = dn @ np.abs(C) + err * math.fsum(np.abs(dn))
    W = max(D0 / 2.0, float(np.max(bprime)) / 2.0)
    E = nfT.col_offdiag_tail(n)
    tail_factor = 1.0 - 2.0 * W * E / d0
    det_lo = det - det_err
    if np.any(eta >= 1.0) or tail_factor <= 0.0 or det_lo <= 0.0:
        return Bound(0.0, n, "truncation too small")
    value = lam.lower * det_lo * math.exp(math.fsum(np.log1p(-eta))) * tail_factor
    if det_err or E or np.any(eta):
        value *= 1 - 16 * (n + 1) * EPS
    return Bound(max(value, 0.0), n)


@dataclass
class SandwichResult:
    n_final: int
    lower: float
    upper: float
    trace: list = field(default_factory=list)
    capped: bool = False
    note: str = ""

    @property
    def value(self) -> float:
        return (self.lower + self.upper) / 2

    @property
    def gap(self) -> float:
        return self.upper - self.lower

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["n", "lower", "upper", "gap"])
        for n, lo, hi in self.trace:
            w.writerow([n, lo, hi, hi - lo])
        return buf.getvalue()

    def to_json(self) -> dict:
        return {"n_final": self.n_final, "lower": self.lower, "upper": self.upper,
                "value": self.value, "gap": self.gap, "capped": self.capped,
                "note": self.note,
                "trace": [{"n": n, "lower": lo, "upper": hi, "gap": hi - lo}
                          for n, lo, hi in self.trace]}


def sandwich(U: Spec, Q: MeasurableRectangle, tol: float = 1e-6,
             n_cap: int = 256) -> SandwichResult:
    """Double n until upper - lower <= tol * value (or n_cap)."""
    rep = classify(U, with_m0=False)
    if rep.classification is not Classification.NEAR:
        raise PreconditionError(f"sandwich needs a near pair, got {rep.classification.value}")
    P, _ = normalize_diagonal(U)
    V = compose(U, P)
    lam = measure(Q)
    zero = lam.status is Status.DIVERGES_TO_ZERO or (lam.is_converged and lam.value == 0.0)
    n = max(8, min(Q.lengths.H, n_cap)) if Q.lengths.H > 8 else 8
    n = min(n, n_cap)
    trace = []
    while True:
        hi = outer_bound(V, Q, n).value
        lo = 0.0 if zero else inner_bound(V, Q, n).value
        hi = max(hi, lo)
        trace.append((n, lo, hi))
        scale = hi if zero else (lo + hi) / 2
        if hi - lo <= tol * max(scale, 0.0) or (zero and hi <= tol):
            return SandwichResult(n, lo, hi, trace, False, "zero measure" if zero else "")
        if n >= n_cap:
            return SandwichResult(n, lo, hi, trace, True, "truncation cap reached")
        n = min(2 * n, n_cap)


# ---------------------------------------------------------------------------
# planar oracle


def _area(poly: np.ndarray) -> float:
    if len(poly) < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * (np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def polygon_intersection_area(poly_a, poly_b) -> float:
    """Area of the intersection of two convex counterclockwise polygons."""
    a = np.asarray(poly_a, dtype=float).reshape(-1, 2)
    b = np.asarray(poly_b, dtype=float).reshape(-1, 2)
    if len(a) < 3 or len(b) < 3 or _area(a) <= 0 or _area(b) <= 0:
        return 0.0
    out = list(a)
    for i in range(len(b)):
        p, q = b[i], b[(i + 1) % len(b)]
        edge = q - p
        inp, out = out, []
        if not inp:
            break

        def side(x):
            return edge[0] * (x[1] - p[1]) - edge[1] * (x[0] - p[0])

        for k in range(len(inp)):
            cur, nxt = inp[k], inp[(k + 1) % len(inp)]
            sc, sn = side(cur), side(nxt)
            if sc >= 0:
                out.append(cur)
            if (sc >= 0) != (sn >= 0):
                t = sc / (sc - sn)
                out.append(cur + t * (nxt - cur))
    return max(_area(np.array(out)), 0.0) if len(out) >= 3 else 0.0


def square(side: float = 1.0, center=(0.0, 0.0), angle: float = 0.0) -> np.ndarray:
    """Counterclockwise vertices of a rotated square."""
    h = side / 2
    pts = np.array([[-h, -h], [h, -h], [h, h], [-h, h]])
    c, s = math.cos(angle), math.sin(angle)
    return pts @ np.array([[c, s], [-s, c]]) + np.asarray(center, float)
