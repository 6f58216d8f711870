import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hilbertbox.errors import InputError, UnsupportedInput
from hilbertbox.geometry import polygon_intersection_area, square
from hilbertbox.group import (Continuity, RotationFlow, block_loss, conjugated_flow_classify,
                              continuity_diagnosis, lambda_t, overlap, overlap_curve,
                              partial_overlap, shift_overlap)
from hilbertbox.operator import (BlockRotation, HouseholderFromVector, Identity, compose, entries,
                                 harmonic_unit_vector)
from hilbertbox.proximity import Classification
from hilbertbox.rectangle import MeasurableRectangle, unit_cube
from hilbertbox.seqcert import Status, TailDescriptor as T

# 40-digit mpmath references
GEOM_OVERLAP_T1 = 0.6809222504838806276353723682456730952839      # rates 2^-k, t = 1
INV_SQUARE_OVERLAP_T1 = 0.6265251979118881775638618155063538127   # rates 1/k^2, t = 1
SHIFT_GEOM_PRODUCT = 0.6503659421209850908646111382600656970951   # prod (1 - 0.4 * 2^-k)
OCTAGON = 2 * (math.sqrt(2) - 1)

GEOM = RotationFlow(T.geometric(1.0, 0.5))
HARMONIC = RotationFlow(T.power(1.0, 1.0))
CUBE = unit_cube()


def clipped_area(theta):
    sq = square()
    c, s = math.cos(theta), math.sin(theta)
    return polygon_intersection_area(sq, sq @ np.array([[c, s], [-s, c]]).T)


def test_lambda_t_examples():
    assert lambda_t(GEOM, 0.0) == Identity()
    q = lambda_t(RotationFlow(T.finite([math.pi / 2])), 1.0)
    C, _ = entries(q, 4)
    assert np.allclose(C, [[0, 1, 0, 0], [-1, 0, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]], atol=1e-16)
    U = lambda_t(GEOM, 2.0)
    assert isinstance(U, BlockRotation)
    assert np.array_equal(U.angles.values(10), 2.0 ** (1 - np.arange(1, 11)))
    with pytest.raises(InputError):
        lambda_t(GEOM, math.inf)


@pytest.mark.parametrize("flow", [GEOM, HARMONIC, RotationFlow(T.finite([0.3, -1.7]))],
                         ids=["geometric", "harmonic", "finite"])
@pytest.mark.parametrize("s,t", [(0.3, 0.4), (-1.1, 2.5), (0.0, 0.7)])
def test_group_law_on_probe_grid(flow, s, t):
    A, ea = entries(lambda_t(flow, s + t), 40)
    B, eb = entries(compose(lambda_t(flow, s), lambda_t(flow, t)), 40)
    assert np.max(np.abs(A - B)) <= 1e-12 + ea + eb


@pytest.mark.parametrize("theta", np.linspace(-3.5, 3.5, 57))
def test_block_loss_matches_clipping(theta):
    assert 1.0 - block_loss(theta) == pytest.approx(clipped_area(theta), abs=1e-13)


def test_overlap_examples():
    assert overlap(GEOM, CUBE, 0.0).value == 1.0
    single = RotationFlow(T.finite([math.pi / 4]))
    assert abs(overlap(single, CUBE, 1.0).value - OCTAGON) <= 1e-12
    cv = overlap(HARMONIC, CUBE, 1.0)
    assert cv.value == 0.0 and cv.status is Status.DIVERGES_TO_ZERO


@pytest.mark.parametrize("flow,ref", [(GEOM, GEOM_OVERLAP_T1),
                                      (RotationFlow(T.power(1.0, 2.0)), INV_SQUARE_OVERLAP_T1)],
                         ids=["geometric", "inverse-square"])
def test_overlap_against_high_precision_products(flow, ref):
    cv = overlap(flow, CUBE, 1.0, 1e-12)
    assert abs(cv.value - ref) <= cv.error_bound + 1e-15
    assert cv.error_bound <= 1e-10


def test_constant_rates():
    assert overlap(RotationFlow(T.constant(math.pi / 2)), CUBE, 1.0).value == 1.0
    assert overlap(RotationFlow(T.constant(0.3)), CUBE, 1.0).value == 0.0


def test_non_compatible_boxes_rejected():
    with pytest.raises(UnsupportedInput):
        overlap(GEOM, MeasurableRectangle.box(T.constant(1.0, head=[1.0, 2.0])), 0.5)
    with pytest.raises(UnsupportedInput):
        overlap(GEOM, MeasurableRectangle.box(T.geometric(0.5, 0.5, base=1.0)), 0.5)


def test_dichotomy_from_certificates():
    assert continuity_diagnosis(GEOM) is Continuity.STRONG
    assert continuity_diagnosis(RotationFlow(T.power(1.0, 2.0))) is Continuity.STRONG
    assert continuity_diagnosis(HARMONIC) is Continuity.DISCONTINUOUS
    assert continuity_diagnosis(RotationFlow(T.power(1.0, 0.5))) is Continuity.DISCONTINUOUS


def test_harmonic_curve_is_measure_at_zero_and_zero_elsewhere():
    curve = overlap_curve(HARMONIC, CUBE, [-1.0, -1e-6, 0.0, 1e-9, 0.5])
    assert curve.verdict is Continuity.DISCONTINUOUS
    assert [v.value for v in curve.values] == [0.0, 0.0, 1.0, 0.0, 0.0]
    assert curve.to_csv().splitlines()[0] == "t,value,error,verdict"


def test_geometric_curve_is_continuous_at_zero():
    ts = [10.0 ** -k for k in range(1, 9)]
    curve = overlap_curve(GEOM, CUBE, ts)
    assert curve.verdict is Continuity.STRONG
    gaps = [1.0 - v.value for v in curve.values]
    assert all(a > b for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] <= 1e-7


@settings(max_examples=80, deadline=None)
@given(st.floats(-0.95, 0.95))
def test_geometric_lower_product_bound(t):
    bound = math.prod(1.0 - 2.0 ** (1 - k) * abs(t) for k in range(1, 60))
    cv = overlap(GEOM, CUBE, t)
    assert cv.upper >= bound - 1e-15


@settings(max_examples=80, deadline=None)
@given(st.sampled_from([GEOM, RotationFlow(T.power(1.0, 2.0)),
                        RotationFlow(T.geometric(-0.7, 0.6, head=[0.2]))]),
       st.floats(-0.45, 0.45))
def test_loss_is_at_most_linear_in_angle(flow, t):
    cv = overlap(flow, CUBE, t)
    a = np.abs(flow.rates.values(4096))
    cap = 1.0 - math.prod(1.0 - 2.0 * a * abs(t))
    assert -cv.error_bound <= 1.0 - cv.value <= cap + cv.error_bound


@settings(max_examples=60, deadline=None)
@given(st.sampled_from([GEOM, HARMONIC, RotationFlow(T.power(1.0, 2.0)),
                        RotationFlow(T.finite([0.4, 2.2]))]), st.floats(-4, 4))
def test_overlap_is_even_in_t(flow, t):
    a, b = overlap(flow, CUBE, t), overlap(flow, CUBE, -t)
    assert abs(a.value - b.value) <= a.error_bound + b.error_bound + 1e-14


@settings(max_examples=60, deadline=None)
@given(st.floats(-20, 20))
def test_finite_support_is_a_finite_product(t):
    a = [0.3, 1.1]
    flow = RotationFlow(T.finite(a))
    want = clipped_area(a[0] * t) * clipped_area(a[1] * t)
    assert overlap(flow, CUBE, t).value == pytest.approx(want, abs=1e-13)


def test_finite_support_returns_at_right_angles():
    flow = RotationFlow(T.finite([0.3]))
    period = (math.pi / 2) / 0.3
    for m in range(-3, 4):
        assert overlap(flow, CUBE, m * period).value == pytest.approx(1.0, abs=1e-12)
    assert overlap(flow, CUBE, period / 2).value == pytest.approx(OCTAGON, abs=1e-12)


def test_truncated_overlap_keeps_decreasing_for_harmonic_rates():
    ns = [16, 64, 256, 1024, 2048]
    vals = [partial_overlap(HARMONIC, CUBE, 1.0, n) for n in ns]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    # the decay follows n^(-1/2): each fourfold increase roughly halves the product
    for a, b in zip(vals[:3], vals[1:4]):
        assert 0.4 <= b / a <= 0.6
    assert vals[-1] < 0.05


def test_conjugated_flow_examples():
    flow = RotationFlow(T.finite([0.7]))
    H = HouseholderFromVector(2, harmonic_unit_vector())
    assert conjugated_flow_classify(flow, Identity(), 1.3).classification is Classification.NEAR
    far = conjugated_flow_classify(flow, H, 1.0)
    assert far.classification is Classification.DISTANT and far.witness
    assert conjugated_flow_classify(flow, H, 0.0).classification is Classification.NEAR


def test_shift_overlap_examples():
    assert shift_overlap(CUBE, T.geometric(1.0, 0.5), 0.0).value == 1.0
    assert shift_overlap(CUBE, T.finite([1.0]), 0.5).value == 0.5
    cv = shift_overlap(CUBE, T.power(1.0, 1.0), 1.0)
    assert cv.value == 0.0 and cv.status is Status.DIVERGES_TO_ZERO
    cv = shift_overlap(CUBE, T.geometric(0.4, 0.5), 1.0)
    assert abs(cv.value - SHIFT_GEOM_PRODUCT) <= cv.error_bound + 1e-15
    assert cv.error_bound <= 1e-11
    assert shift_overlap(CUBE, T.finite([0.0, 3.0]), 0.5).value == 0.0


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=1, max_size=6),
       st.lists(st.floats(0.2, 3.0), min_size=1, max_size=6), st.floats(-2, 2))
def test_shift_overlap_matches_direct_product(h, d, t):
    rect = MeasurableRectangle.box(T.constant(1.0, head=d))
    want = math.prod(max(0.0, dk - abs(t * hk)) for dk, hk in zip(d + [1.0] * len(h), h + [0.0] * len(d)))
    cv = shift_overlap(rect, T.finite(h), t)
    assert abs(cv.value - want) <= cv.error_bound + 1e-12 * max(want, 1.0)
