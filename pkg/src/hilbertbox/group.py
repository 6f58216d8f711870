"""The one-parameter block rotation group, its overlap functional and the shift group.

A flow with rates a_k rotates span(e_{2k-1}, e_{2k}) by a_k * t.  The overlap
O(t) = measure(Lambda(t)P n P) factors over blocks for boxes whose edges agree
within each block.  Far out, every block is a centred unit square turned by a
small angle, whose relative area loss L(theta) has the closed form used below.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import InputError, UnsupportedInput
from .geometry import _inf_beyond, polygon_intersection_area, square
from .operator import (BlockRotation, Identity, Spec, _right_angle_multiple, compose,
                       transpose)
from .proximity import ProximityReport, classify
from .rectangle import EmptyRectangle, MeasurableRectangle, measure
from .seqcert import (EPS, CertifiedValue, Constant, Status, TailDescriptor,
                      _family_tail_sum)

HALF_PI = math.pi / 2
EXPLICIT_BLOCK_CAP = 1 << 20
SHIFT_EXPLICIT_CAP = 1 << 22


class Continuity(str, Enum):
    STRONG = "StrongContinuous"
    DISCONTINUOUS = "Discontinuous"


@dataclass(frozen=True)
class RotationFlow:
    rates: TailDescriptor

    def __post_init__(self):
        if not isinstance(self.rates, TailDescriptor):
            raise InputError("rates must be a tail descriptor")

    def angle(self, k: int, t: float) -> float:
        return self.rates.entry(k) * t

    def to_json(self) -> dict:
        return {"rates": self.rates.to_json()}

    @classmethod
    def from_json(cls, obj: dict) -> RotationFlow:
        unknown = set(obj) - {"rates"}
        if unknown or "rates" not in obj:
            raise InputError("flow needs exactly the field 'rates'")
        return cls(TailDescriptor.from_json(obj["rates"]))


def lambda_t(flow: RotationFlow, t: float) -> Spec:
    if not math.isfinite(t):
        raise InputError("t must be finite")
    if t == 0.0 or (flow.rates.tail_is_zero and not any(flow.rates.head)):
        return Identity()
    return BlockRotation(flow.rates.scaled(t))


def _fold(theta):
    """Angle in [0, pi/4] giving the same square overlap."""
    phi = np.mod(np.abs(theta), HALF_PI)
    return np.minimum(phi, HALF_PI - phi)


def block_loss(theta):
    """1 - area(square n rotated square) / area(square) for a centred square."""
    phi = _fold(np.asarray(theta, dtype=float))
    c, s = np.cos(phi), np.sin(phi)
    return (1.0 - np.tan(phi / 2)) * (c + s - 1.0) / (2.0 * c)


def _block_edges(rect: MeasurableRectangle, k: int) -> tuple[float, float, float]:
    c = rect.centers.values(2 * k, 2 * k - 1)
    d = rect.lengths.values(2 * k, 2 * k - 1)
    if d[0] != d[1]:
        raise UnsupportedInput(f"box edges differ inside block {k}; overlap needs "
                               "block-compatible boxes")
    return float(d[0]), float(c[0]), float(c[1])


def _head_block_area(d: float, cx: float, cy: float, theta: float) -> float:
    base = square(d, (cx, cy))
    c, s = math.cos(theta), math.sin(theta)
    M = np.array([[c, s], [-s, c]])
    return polygon_intersection_area(base, base @ M.T)


def _check_block_compatible(rect: MeasurableRectangle) -> None:
    if not isinstance(rect.lengths.tail, Constant):
        raise UnsupportedInput("overlap needs edges that are constant beyond a finite head")
    if not rect.centers.tail_is_zero:
        raise UnsupportedInput("overlap needs centres that vanish beyond a finite head")


def _tail_bracket(dev: TailDescriptor, t: float, K: int, tol: float) -> tuple[float, float, float]:
    """Bounds on sum_{k>K} log(1 - L(dev_k t)) valid once |dev_k t| <= 1/2 beyond K.

    With L between x/2 - x^2/2 and x/2 - x^2/2 + x^3/2 and
    -L - L^2 <= log(1 - L) <= -L, where L <= x/2.
    """
    at = abs(t)
    sums, err = [], 0.0
    for m in (1, 2, 3):
        v, e = _family_tail_sum(dev.abs_power(m).tail, K, tol / 8)
        sums.append(v * at ** m)
        err += e * at ** m
    S1, S2, S3 = sums
    hi = -S1 / 2 + S2 / 2
    lo = hi - S3 / 2 - S2 / 4
    slack = err + 4 * EPS * (S1 + S2 + S3)
    return lo - slack, hi + slack, S3 / 2 + S2 / 4


def partial_overlap(flow: RotationFlow, rect: MeasurableRectangle, t: float, n_blocks: int) -> float:
    """Product of the first n block areas (no tail), the truncated face of O(t)."""
    _check_block_compatible(rect)
    return math.prod(_head_block_area(*_block_edges(rect, k), flow.angle(k, t))
                     for k in range(1, n_blocks + 1))


def overlap(flow: RotationFlow, rect, t: float, tol: float = 1e-12) -> CertifiedValue:
    """O(t) = measure(Lambda(t) rect n rect) with a certified error bound."""
    if not math.isfinite(t):
        raise InputError("t must be finite")
    if isinstance(rect, EmptyRectangle):
        return CertifiedValue.exact(0.0, "empty box")
    _check_block_compatible(rect)
    edge_tail = rect.lengths.tail.c
    rates = flow.rates
    H = max((rect.lengths.H + 1) // 2, (rect.centers.H + 1) // 2, rates.H)
    for k in range(1, H + 1):
        _block_edges(rect, k)
    if t == 0.0:
        return measure(rect, tol)
    if edge_tail < 1.0:
        return CertifiedValue.exact(0.0, "box is null")
    # the angles tend to limit * t; the far blocks see only the deviation from it
    limit = rates.limit * t
    if not _right_angle_multiple(limit):
        return CertifiedValue.diverging(
            Status.DIVERGES_TO_ZERO,
            f"angles tend to {limit:.6g}, not a multiple of pi/2: every far block loses area")
    dev = TailDescriptor((), Constant(0.0) if isinstance(rates.tail, Constant) else rates.tail)
    if not dev.abs_summable:
        return CertifiedValue.diverging(
            Status.DIVERGES_TO_ZERO,
            "rates are not absolutely summable: the block losses sum to infinity")
    head_areas = [_head_block_area(*_block_edges(rect, k), flow.angle(k, t))
                  for k in range(1, H + 1)]
    if any(a == 0.0 for a in head_areas):
        return CertifiedValue.exact(0.0, "a head block misses its rotated copy")
    head_log = math.fsum(math.log(a) for a in head_areas)
    head_err = 16 * EPS * H
    # explicit closed-form blocks until the analytic bracket is tight enough
    K = max(H, 8)
    while dev.tail_sup(K) * abs(t) > 0.5 and K < EXPLICIT_BLOCK_CAP:
        K *= 2
    if dev.tail_sup(K) * abs(t) > 0.5:
        raise UnsupportedInput("rates too large to reach the small-angle regime")
    lo, hi, width = _tail_bracket(dev, t, K, tol)
    while width > tol and 2 * K <= EXPLICIT_BLOCK_CAP:
        K *= 2
        lo, hi, width = _tail_bracket(dev, t, K, tol)
    ks = np.arange(H + 1, K + 1, dtype=float)
    mid = np.log1p(-block_loss(rates.values(K, H + 1) * t)) if K > H else np.zeros(0)
    mid_sum = math.fsum(mid)
    mid_err = 8 * EPS * math.fsum(np.abs(mid)) + 4 * EPS * len(ks)
    log_lo = head_log + mid_sum + lo - head_err - mid_err
    log_hi = head_log + mid_sum + hi + head_err + mid_err
    upper = math.exp(log_hi) * (1 + 2 * EPS)
    lower = math.exp(log_lo) * (1 - 2 * EPS)
    return CertifiedValue.approx((upper + lower) / 2, (upper - lower) / 2,
                                 f"{K} explicit blocks")


def continuity_diagnosis(flow: RotationFlow) -> Continuity:
    """Strongly continuous exactly when the rates are absolutely summable."""
    return Continuity.STRONG if flow.rates.abs_summable else Continuity.DISCONTINUOUS


@dataclass
class OverlapCurve:
    ts: list[float]
    values: list[CertifiedValue]
    verdict: Continuity

    @property
    def error_bounds(self) -> list[float]:
        return [v.error_bound or 0.0 for v in self.values]

    def rows(self) -> list[dict]:
        return [{"t": t, "value": v.value, "error": e, "verdict": self.verdict.value}
                for t, v, e in zip(self.ts, self.values, self.error_bounds)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=["t", "value", "error", "verdict"])
        w.writeheader()
        w.writerows(self.rows())
        return buf.getvalue()

    def to_json(self) -> dict:
        return {"verdict": self.verdict.value,
                "samples": [{"t": t, **v.to_json()} for t, v in zip(self.ts, self.values)]}


def overlap_curve(flow: RotationFlow, rect, ts, tol: float = 1e-12) -> OverlapCurve:
    ts = [float(t) for t in ts]
    return OverlapCurve(ts, [overlap(flow, rect, t, tol) for t in ts],
                        continuity_diagnosis(flow))


def conjugated_flow_classify(flow: RotationFlow, V: Spec, t: float,
                             tol: float = 1e-10) -> ProximityReport:
    """Classify Lambda(t) written in the basis V(E)."""
    return classify(compose(transpose(V), lambda_t(flow, t), V), tol)


def shift_overlap(rect, h: TailDescriptor, t: float, tol: float = 1e-12) -> CertifiedValue:
    """measure((rect - t h) n rect) = prod_k max(0, d_k - |t h_k|)."""
    if not math.isfinite(t):
        raise InputError("t must be finite")
    if not h.square_summable:
        raise InputError("shift vector is not square-summable")
    if isinstance(rect, EmptyRectangle):
        return CertifiedValue.exact(0.0, "empty box")
    full = measure(rect, tol)
    if t == 0.0 or (h.tail_is_zero and not any(h.head)) or not full.is_converged:
        return full
    if full.value == 0.0 and full.error_bound == 0.0:
        return full
    if not h.abs_summable:
        return CertifiedValue.diverging(
            Status.DIVERGES_TO_ZERO,
            "shift is not absolutely summable: the edge losses sum to infinity")
    d = rect.lengths
    K = max(d.H, h.H, 16)
    at = abs(t)

    def tail_ratio(K):
        d0 = _inf_beyond(d, K)
        return math.inf if d0 <= 0 else at * h.tail_abs_sum_bound(K) / d0

    while tail_ratio(K) > min(tol, 0.5) and 2 * K <= SHIFT_EXPLICIT_CAP:
        K *= 2
    X = tail_ratio(K)
    if X > 0.5:
        raise UnsupportedInput("shift tail not small enough within the explicit cap")
    dk = d.values(K)
    hk = np.abs(h.values(K)) * at
    ratios = np.maximum(dk - hk, 0.0) / dk
    if np.any(ratios == 0.0):
        return CertifiedValue.exact(0.0, "an edge is shifted off itself")
    head_log = math.fsum(np.log(ratios))
    # each tail factor is 1 - x_k with x_k <= 1/2, sum x_k <= X
    lower = full.lower * math.exp(head_log - X - X * X - 8 * EPS * K)
    upper = full.upper * math.exp(head_log + 8 * EPS * K)
    lower = max(lower, 0.0)
    return CertifiedValue.approx((upper + lower) / 2, (upper - lower) / 2,
                                 f"{K} explicit axes")
