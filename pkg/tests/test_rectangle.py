import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hilbertbox.errors import InputError
from hilbertbox.rectangle import (EmptyRectangle, MeasurableRectangle, intersect_same_basis,
                                  is_measurable, measure, shift, unit_cube)
from hilbertbox.seqcert import TailDescriptor as T

PROD_ONE_PLUS_HALF_POW = 2.384231029031371724149899288678397238772


def box(lengths, centers=()):
    return MeasurableRectangle(T.finite(centers), T.constant(1.0, head=lengths))


def test_unit_cube_measure_is_exactly_one():
    cv = measure(unit_cube())
    assert cv.value == 1.0 and cv.error_bound == 0.0


def test_measurability_examples():
    assert is_measurable(T.constant(1.0)).is_converged
    assert not is_measurable(T.constant(2.0)).is_converged
    assert is_measurable(T.geometric(1.0, 0.5, base=1.0)).is_converged
    with pytest.raises(InputError):
        MeasurableRectangle.box(T.constant(2.0))


def test_zero_edge_gives_zero():
    cv = measure(box([1.0, 0.0, 3.0]))
    assert cv.value == 0.0 and cv.error_bound == 0.0


def test_geometric_edges_product():
    cv = measure(MeasurableRectangle.box(T.geometric(1.0, 0.5, base=1.0)))
    assert abs(cv.value - PROD_ONE_PLUS_HALF_POW) <= 1e-9


def test_shift_examples():
    u = unit_cube()
    assert shift(u, T()) == u
    assert measure(shift(u, T.finite([0.5]))).value == 1.0
    assert measure(shift(u, T.power(1.0, 2.0))).value == 1.0
    with pytest.raises(InputError):
        shift(u, T.power(1.0, 0.4))


def test_intersection_examples():
    u = unit_cube()
    assert intersect_same_basis(u, u) == u
    half = intersect_same_basis(u, shift(u, T.finite([0.5])))
    assert measure(half).value == 0.5
    far = intersect_same_basis(u, shift(u, T.finite([3.0])))
    assert isinstance(far, EmptyRectangle) and measure(far).value == 0.0


def test_intersection_rejects_mixed_bases():
    with pytest.raises(InputError):
        intersect_same_basis(unit_cube("E"), unit_cube("F"))


def test_json_round_trip():
    r = MeasurableRectangle(T.finite([0.1, 0.2]), T.geometric(0.5, 0.5, base=1.0, head=[2.0]))
    assert MeasurableRectangle.from_json(r.to_json()) == r
    assert isinstance(MeasurableRectangle.from_json({"empty": True}), EmptyRectangle)


edges = st.lists(st.floats(0.0, 4.0), min_size=1, max_size=12)


@settings(max_examples=200, deadline=None)
@given(edges)
def test_finite_head_matches_direct_product(d):
    cv = measure(box(d))
    direct = math.prod(d)
    assert abs(cv.value - direct) <= 1e-12 * direct + 1e-300


@settings(max_examples=100, deadline=None)
@given(edges, st.lists(st.floats(-10, 10), max_size=12))
def test_shift_invariance_bit_for_bit(d, h):
    r = box(d)
    assert measure(shift(r, T.finite(h))).value == measure(r).value


@settings(max_examples=100, deadline=None)
@given(edges, st.data())
def test_monotone_under_containment(d, data):
    shrink = data.draw(st.lists(st.floats(0.0, 1.0), min_size=len(d), max_size=len(d)))
    small, large = box(np.array(d) * shrink), box(d)
    a, b = measure(small), measure(large)
    assert a.value <= b.value + a.error_bound + b.error_bound


@settings(max_examples=100, deadline=None)
@given(edges, st.floats(0.0, 1.0), st.data())
def test_axis_split_is_additive(d, frac, data):
    j = data.draw(st.integers(1, len(d)))
    r = box(d)
    dj = d[j - 1]
    a = r.with_axis(j, -dj / 2 + frac * dj / 2, frac * dj)
    b = r.with_axis(j, dj / 2 - (1 - frac) * dj / 2, (1 - frac) * dj)
    total = measure(r)
    parts = measure(a).value + measure(b).value
    assert abs(parts - total.value) <= 1e-12 * max(total.value, 1e-300) + 1e-300
