import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import ortho_group

from corpus import near_specs, power_unit_vector
from hilbertbox.errors import InputError, UnsupportedInput
from hilbertbox.operator import (BlockRotation, Composition, EmbeddedFinite,
                                 HouseholderFromVector, Identity, PermutationSign, alpha_argmax,
                                 apply, column_gram, column_l1, compose, entries, entry,
                                 from_json, geometric_unit_vector, harmonic_unit_vector, row_l1,
                                 to_json, transpose)
from hilbertbox.seqcert import Status, TailDescriptor as T


def dense_rotation(angles, n):
    M = np.eye(n)
    for k, th in enumerate(angles, start=1):
        i = 2 * k - 2
        if i + 1 >= n:
            break
        c, s = math.cos(th), math.sin(th)
        M[i, i], M[i, i + 1], M[i + 1, i], M[i + 1, i + 1] = c, s, -s, c
    return M


def dense_householder(axis, v, n):
    """I - 2 w w^T with w = (e_axis - v)/|e_axis - v|, using the exact norm 2(1 - v_axis)."""
    u = -v.copy()
    u[axis - 1] += 1.0
    return np.eye(n) - np.outer(u, u) / (1.0 - v[axis - 1])


def test_identity_entries():
    C, err = entries(Identity(), 20)
    assert np.array_equal(C, np.eye(20)) and err == 0.0


def test_quarter_turn_entries():
    U = BlockRotation(T.finite([math.pi / 2]))
    assert abs(entry(U, 1, 1).value) <= 1e-16
    assert abs(entry(U, 1, 2).value - 1.0) <= 1e-16


def test_degenerate_householder_is_identity():
    U = HouseholderFromVector(2, T.finite([0.0, 1.0]))
    assert U.is_degenerate
    C, _ = entries(U, 8)
    assert np.array_equal(C, np.eye(8))


@pytest.mark.parametrize("angles", [[0.3, -1.2, 2.0], [math.pi / 3]])
def test_rotation_matches_dense(angles):
    C, err = entries(BlockRotation(T.finite(angles)), 8)
    assert np.max(np.abs(C - dense_rotation(angles, 8))) <= err + 1e-15


def test_geometric_rotation_matches_dense():
    th = 0.5 ** np.arange(1, 40)
    C, err = entries(BlockRotation(T.geometric(1.0, 0.5)), 64)
    assert np.max(np.abs(C - dense_rotation(th, 64))) <= err + 1e-15


@pytest.mark.parametrize("vec", [geometric_unit_vector(0.5), harmonic_unit_vector(),
                                 power_unit_vector(1.5)])
@pytest.mark.parametrize("axis", [1, 2, 5])
def test_householder_matches_dense(vec, axis):
    n = 64
    C, err = entries(HouseholderFromVector(axis, vec), n)
    assert np.max(np.abs(C - dense_householder(axis, vec.values(n), n))) <= err + 1e-14


def test_column_l1_examples():
    assert column_l1(Identity(), 7).value == 1.0
    th = 0.7
    cv = column_l1(BlockRotation(T.finite([0.1, th])), 3)
    assert abs(cv.value - (abs(math.cos(th)) + abs(math.sin(th)))) <= cv.error_bound + 1e-15
    row = row_l1(HouseholderFromVector(2, harmonic_unit_vector()), 2)
    assert row.status is Status.DIVERGENT


def test_column_l1_geometric_householder_against_dense():
    v = geometric_unit_vector(0.5)
    U = HouseholderFromVector(2, v)
    M = dense_householder(2, v.values(200), 200)
    for j in (1, 2, 3, 10):
        cv = column_l1(U, j)
        assert abs(cv.value - np.abs(M[:, j - 1]).sum()) <= cv.error_bound + 1e-13


def test_alpha_argmax_examples():
    assert alpha_argmax(Identity(), 5) == (1.0, 5)
    a, m = alpha_argmax(BlockRotation(T.finite([math.pi / 3])), 1)
    assert m == 2 and abs(a - math.sqrt(3) / 2) <= 1e-15
    rng = np.random.default_rng(3)
    M = ortho_group.rvs(3, random_state=rng)
    U = EmbeddedFinite.of(M)
    for j in range(1, 4):
        a, m = alpha_argmax(U, j)
        col = np.abs(M[:, j - 1])
        assert m == int(np.argmax(col)) + 1 and a == pytest.approx(col.max(), abs=1e-15)


def test_transpose_of_rotation_negates_angles():
    th = T.geometric(0.8, 0.5, head=[1.0])
    assert transpose(BlockRotation(th)) == BlockRotation(th.scaled(-1.0))


def test_apply_identity_returns_head():
    x = T.geometric(1.0, 0.5, head=[3.0, -1.0])
    assert np.array_equal(apply(Identity(), x, 10), x.values(10))


def test_apply_matches_dense_product():
    v = geometric_unit_vector(0.4)
    U = compose(BlockRotation(T.finite([0.3, 0.9])), HouseholderFromVector(3, v))
    x = T.geometric(1.0, 0.5, head=[0.2])
    n = 256
    dense = dense_rotation([0.3, 0.9], n) @ dense_householder(3, v.values(n), n)
    ref = dense @ x.values(n)
    assert np.max(np.abs(apply(U, x, 16) - ref[:16])) <= 1e-12


def test_compose_with_transpose_is_identity_on_probe_grid():
    for U in near_specs()[::4]:
        V = Composition((U, transpose(U))) if not isinstance(U, Composition) else compose(
            U, transpose(U))
        C, err = entries(V, 64)
        assert np.max(np.abs(C - np.eye(64))) <= max(err, 1e-10), U


def test_compose_simplifies():
    R = BlockRotation(T.geometric(1.0, 0.5))
    assert compose(R, transpose(R)) == Identity()
    assert compose(Identity(), R, Identity()) == R
    assert compose(BlockRotation(T.finite([0.1])), BlockRotation(T.finite([0.2]))) == \
        BlockRotation(T.finite([0.1 + 0.2]))
    P = PermutationSign((2, 1))
    assert isinstance(compose(P, EmbeddedFinite.of(np.eye(2))), EmbeddedFinite)


def test_depth_limit():
    hs = [HouseholderFromVector(a, geometric_unit_vector(0.5)) for a in (1, 2, 3, 4, 5)]
    assert isinstance(compose(*hs[:4]), Composition)
    with pytest.raises(UnsupportedInput):
        compose(*hs)


def test_invalid_specs_rejected():
    with pytest.raises(InputError):
        EmbeddedFinite.of([[1.0, 0.1], [0.0, 1.0]])
    with pytest.raises(InputError):
        HouseholderFromVector(1, T.geometric(1.0, 0.5))
    with pytest.raises(InputError):
        PermutationSign((1, 1))


def test_json_round_trip_and_unknown_fields():
    for U in near_specs()[::7]:
        assert from_json(to_json(U)) == U
    with pytest.raises(InputError):
        from_json({"kind": "identity", "extra": 1})


@pytest.mark.parametrize("U", near_specs()[::3], ids=lambda U: type(U).__name__)
def test_full_column_gram_is_identity(U):
    n = 24
    G, err = column_gram(U, n)
    assert np.max(np.abs(G - np.eye(n))) <= n * 1e-12 + err


@pytest.mark.parametrize("U", [s for s in near_specs() if isinstance(s, (BlockRotation,
                                                                        EmbeddedFinite,
                                                                        PermutationSign))][::2],
                         ids=lambda U: type(U).__name__)
def test_truncated_gram_of_banded_specs(U):
    n = 128
    C, err = entries(U, n)
    G = C.T @ C
    assert np.max(np.abs(G - np.eye(n))) <= n * 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_transpose_involution_and_associativity(seed):
    pool = near_specs()
    rng = np.random.default_rng(seed)
    a, b, c = (pool[int(i)] for i in rng.choice(min(len(pool), 70), 3))
    C1, e1 = entries(transpose(transpose(a)), 12)
    C0, e0 = entries(a, 12)
    assert np.max(np.abs(C1 - C0)) <= e0 + e1 + 1e-14
    try:
        left = compose(compose(a, b), c)
        right = compose(a, compose(b, c))
        L, el = entries(left, 12)
        R, er = entries(right, 12)
    except UnsupportedInput:
        return
    assert np.max(np.abs(L - R)) <= el + er + 1e-12
