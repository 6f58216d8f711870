import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from corpus import near_specs
from hilbertbox.errors import InputError, PreconditionError
from hilbertbox.geometry import (covering_infimum, gamma, inner_bound, outer_bound,
                                 polygon_intersection_area, projected_edge_lengths, sandwich,
                                 square, tail_coupling)
from hilbertbox.operator import (BlockRotation, HouseholderFromVector, Identity, column_l1,
                                 geometric_unit_vector)
from hilbertbox.rectangle import MeasurableRectangle, measure, unit_cube
from hilbertbox.seqcert import Status, TailDescriptor as T

# prod_k (cos 2^-k + sin 2^-k)^2 and prod_k (1 + 2^-k), 40 digits via mpmath.nprod
COVER_GEOM = 4.319838468921457615880210843208839753041
PROD_ONE_PLUS_HALF_POW = 2.384231029031371724149899288678397238772
OCTAGON = 2 * (math.sqrt(2) - 1)

ROT = BlockRotation(T.geometric(1.0, 0.5))
GEO = geometric_unit_vector(0.5)


def dense_householder(axis, v, n):
    u = -v.copy()
    u[axis - 1] += 1.0
    return np.eye(n) - np.outer(u, u) / (1.0 - v[axis - 1])


def test_projected_edges_examples():
    d = T.geometric(0.5, 0.5, base=1.0, head=[0.3])
    pe = projected_edge_lengths(Identity(), d, 10)
    assert np.allclose(pe.values, d.values(10), atol=1e-15)
    pe = projected_edge_lengths(ROT, T.constant(1.0), 12)
    l1 = [column_l1(ROT, j).value for j in range(1, 13)]
    assert np.all(np.abs(pe.values - l1) <= pe.errors + 1e-14)
    pe = projected_edge_lengths(BlockRotation(T.finite([math.pi / 4])), T.constant(1.0), 6)
    assert np.allclose(pe.values, [math.sqrt(2)] * 2 + [1.0] * 4, atol=1e-15)


def test_projected_edges_divergent_report():
    pe = projected_edge_lengths(BlockRotation(T.power(1.0, 1.0)), T.constant(1.0), 8)
    assert pe.abs_dev_bound == math.inf and pe.note


def test_projected_deviation_bound_holds():
    for U in near_specs()[:40:3]:
        d = T.geometric(0.3, 0.5, base=1.0)
        pe = projected_edge_lengths(U, d, 64)
        assert math.fsum(np.abs(pe.values - 1.0)) <= pe.abs_dev_bound + 1e-9


def test_covering_infimum_examples():
    assert covering_infimum(Identity()).value == 1.0
    th = 0.4
    cv = covering_infimum(BlockRotation(T.finite([th])))
    assert abs(cv.value - (math.cos(th) + math.sin(th)) ** 2) <= cv.error_bound + 1e-15
    cv = covering_infimum(ROT, 1e-12)
    assert abs(cv.value - COVER_GEOM) <= cv.error_bound + 1e-14
    assert cv.error_bound <= 1e-9
    far = covering_infimum(BlockRotation(T.power(1.0, 1.0)))
    assert far.status is Status.DIVERGES_TO_INFINITY


def test_tail_coupling_examples():
    assert gamma(Identity(), 17) == 0.0
    th = [0.3, 0.7, 1.1]
    U = BlockRotation(T.finite(th))
    assert tail_coupling(U, 1, 2) == 0.0 and tail_coupling(U, 2, 2) == 0.0
    # certified upper bounds, tight to a few ulps
    assert abs(math.sin(0.7)) <= tail_coupling(U, 3, 3) <= abs(math.sin(0.7)) + 1e-14
    assert abs(math.sin(1.1)) <= gamma(U, 5) <= abs(math.sin(1.1)) + 1e-14
    with pytest.raises(InputError):
        tail_coupling(U, 4, 3)


def test_householder_coupling_against_dense():
    U = HouseholderFromVector(2, GEO)
    M = dense_householder(2, GEO.values(256), 256)
    n = 32
    for j in range(1, n + 1):
        assert abs(tail_coupling(U, j, n) - np.abs(M[n:, j - 1]).sum()) <= 1e-10
    assert abs(gamma(U, n) - np.abs(M[n:, :n]).sum()) <= 1e-10


def test_identity_bounds_are_exact():
    for n in (1, 5, 8):
        assert outer_bound(Identity(), unit_cube(), n).value == 1.0
    assert inner_bound(Identity(), unit_cube(), 1).value == 1.0


def test_quarter_pi_block_bounds():
    U = BlockRotation(T.finite([math.pi / 4]))
    assert outer_bound(U, unit_cube(), 2).value == pytest.approx(1.0, abs=1e-13)
    assert inner_bound(U, unit_cube(), 2).value == pytest.approx(1.0, abs=1e-13)


def test_geometric_rotation_bounds_converge():
    uppers, lowers = [], []
    for n in (8, 16, 32, 64, 128):
        uppers.append(outer_bound(ROT, unit_cube(), n).value)
        lowers.append(inner_bound(ROT, unit_cube(), n).value)
    assert all(a >= b for a, b in zip(uppers, uppers[1:]))
    assert all(a <= b for a, b in zip(lowers, lowers[1:]))
    assert all(lo <= 1.0 <= hi for lo, hi in zip(lowers, uppers))
    assert uppers[-1] - 1.0 <= 1e-4 and 1.0 - lowers[-1] <= 1e-4


def test_sandwich_examples():
    res = sandwich(Identity(), MeasurableRectangle.box(T.constant(1.0, head=[0.5, 2.0])), 1e-9)
    assert res.lower == res.upper == 1.0
    res = sandwich(BlockRotation(T.finite([math.pi / 6])), unit_cube(), 1e-8)
    assert abs(res.value - 1.0) <= 1e-8
    Q = MeasurableRectangle.box(T.geometric(1.0, 0.5, base=1.0))
    res = sandwich(ROT, Q, 1e-6)
    assert res.lower <= PROD_ONE_PLUS_HALF_POW <= res.upper
    assert abs(res.value - PROD_ONE_PLUS_HALF_POW) <= 1e-6 * PROD_ONE_PLUS_HALF_POW
    assert res.to_csv().splitlines()[0] == "n,lower,upper,gap"


def test_sandwich_pi_over_six_cross_checked_by_clipping():
    # the block maps the unit square onto a rotated unit square: both have area 1
    th = math.pi / 6
    assert polygon_intersection_area(square(angle=th), square(angle=th)) == pytest.approx(1.0)
    res = sandwich(BlockRotation(T.finite([th])), unit_cube(), 1e-10)
    assert res.lower <= 1.0 + 1e-12 and res.upper >= 1.0 - 1e-12


def test_sandwich_contract():
    with pytest.raises(PreconditionError):
        sandwich(BlockRotation(T.power(1.0, 1.0)), unit_cube())
    res = sandwich(ROT, MeasurableRectangle.box(T.constant(0.5)), 1e-6)
    assert res.lower == 0.0 and res.note == "zero measure"


def test_sandwich_reports_cap():
    res = sandwich(ROT, unit_cube(), 1e-12, n_cap=16)
    assert res.capped and res.n_final == 16 and res.lower <= 1.0 <= res.upper


def test_polygon_examples():
    assert polygon_intersection_area(square(), square()) == pytest.approx(1.0, abs=1e-15)
    assert abs(polygon_intersection_area(square(), square(angle=math.pi / 4)) - OCTAGON) <= 1e-12
    assert polygon_intersection_area(square(), square(center=(3.0, 0.0))) == 0.0


@settings(max_examples=60, deadline=None)
@given(st.floats(-math.pi, math.pi), st.floats(0.1, 3.0),
       st.tuples(st.floats(-1, 1), st.floats(-1, 1)))
def test_polygon_area_symmetric_and_bounded(angle, side, center):
    a, b = square(side), square(side, center, angle)
    ab, ba = polygon_intersection_area(a, b), polygon_intersection_area(b, a)
    assert ab == pytest.approx(ba, abs=1e-12)
    assert -1e-15 <= ab <= side * side + 1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10 ** 6), st.sampled_from([4, 8, 16, 32]))
def test_inner_never_exceeds_outer(seed, n):
    pool = near_specs()[:70]
    U = pool[int(np.random.default_rng(seed).integers(len(pool)))]
    Q = MeasurableRectangle.box(T.geometric(0.5, 0.5, base=1.0, head=[0.7, 1.3]))
    assert inner_bound(U, Q, n).value <= outer_bound(U, Q, n).value


@settings(max_examples=10, deadline=None)
@given(st.lists(st.floats(0.3, 2.0), min_size=1, max_size=4), st.floats(-0.5, 0.5))
def test_sandwich_recovers_measure(head, c):
    Q = MeasurableRectangle.box(T.geometric(c, 0.5, base=1.0, head=head))
    res = sandwich(ROT, Q, 1e-5)
    m = measure(Q)
    assert res.lower <= m.upper and m.lower <= res.upper
    assert abs(res.value - m.value) <= 1e-5 * m.value


def test_gamma_follows_block_structure_of_harmonic_rotation():
    # the only coupling across coordinate n comes from the block straddling n and n + 1
    U = BlockRotation(T.power(1.0, 1.0))
    for n in range(1, 400):
        want = 0.0 if n % 2 == 0 else abs(math.sin(2.0 / (n + 1)))
        assert want <= gamma(U, n) <= want + 1e-14
