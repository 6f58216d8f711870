import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from corpus import near_specs
from hilbertbox.determinant import (det_qr, det_sequence, find_N_epsilon, gram_det, gram_trace,
                                    principal_det)
from hilbertbox.errors import CapReached, InputError, PreconditionError
from hilbertbox.operator import (BlockRotation, HouseholderFromVector, Identity, entries,
                                 geometric_unit_vector)
from hilbertbox.seqcert import TailDescriptor as T


def dense_householder(axis, v, n):
    u = -v.copy()
    u[axis - 1] += 1.0
    return np.eye(n) - np.outer(u, u) / (1.0 - v[axis - 1])


GEO = geometric_unit_vector(0.5)
HG = HouseholderFromVector(2, GEO)
ROT = BlockRotation(T.geometric(1.0, 0.5))


def test_gram_trace_examples():
    assert gram_trace(Identity(), 10) == 10.0
    assert gram_trace(BlockRotation(T.finite([math.pi / 4])), 2) == pytest.approx(2.0, abs=1e-15)
    M = dense_householder(2, GEO.values(64), 64)
    assert abs(gram_trace(HG, 64) - np.sum(M * M)) <= 1e-10


def test_principal_det_examples():
    assert principal_det(Identity(), 7) == 1.0
    assert principal_det(BlockRotation(T.finite([math.pi / 3])), 2) == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("n", [8, 16, 32, 64])
def test_householder_det_against_dense(n):
    M = dense_householder(2, GEO.values(n), n)
    assert abs(principal_det(HG, n) - np.linalg.det(M)) <= 1e-10
    if n == 64:
        assert abs(principal_det(HG, n) + 1.0) <= 1e-6


def test_det_qr_sign_on_permutations():
    rng = np.random.default_rng(5)
    for n in range(1, 9):
        P = np.eye(n)[rng.permutation(n)]
        assert det_qr(P) == pytest.approx(np.linalg.det(P), abs=1e-14)


def test_find_n_epsilon_examples():
    assert find_N_epsilon(Identity(), 0.1) == 1
    n_star = find_N_epsilon(ROT, 0.01)
    assert n_star <= 16
    for m in range(n_star, 80):
        assert gram_trace(ROT, m) >= m - 0.01
    # minimality: every m >= n* passes, so n* - 1 itself must fail
    if n_star > 1:
        assert gram_trace(ROT, n_star - 1) < n_star - 1 - 0.01


def test_find_n_epsilon_contract():
    with pytest.raises(PreconditionError):
        find_N_epsilon(BlockRotation(T.power(1.0, 1.0)), 0.1)
    with pytest.raises(InputError):
        find_N_epsilon(ROT, 0.7)
    with pytest.raises(CapReached) as info:
        find_N_epsilon(BlockRotation(T.power(1.0, 1.5)), 1e-4, cap=16)
    assert info.value.diagnostics["n"] == 16


def test_det_sequence_verdicts():
    tr = det_sequence(ROT, [8, 16, 32, 64, 128])
    assert tr.verdict == "converged"
    assert abs(tr.limit_estimate.value - 1.0) <= 1e-6
    far = det_sequence(BlockRotation(T.power(1.0, 1.0)), [8, 16, 32, 64])
    assert far.verdict.startswith("no verdict") and far.limit_estimate is None
    assert far.to_csv().splitlines()[0] == "n,det,gram_det,gram_trace"


def test_truncation_must_be_positive():
    with pytest.raises(InputError):
        principal_det(Identity(), 0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6), st.sampled_from([4, 9, 16, 33, 64]))
def test_gram_det_is_det_squared_and_singular_values_bounded(seed, n):
    pool = near_specs()
    U = pool[int(np.random.default_rng(seed).integers(len(pool)))]
    C, _ = entries(U, n)
    d = det_qr(C)
    g = gram_det(U, n)
    assert abs(g - d * d) <= 1e-9 * max(abs(g), 1e-300) + 1e-15
    assert np.all(np.linalg.svd(C, compute_uv=False) <= 1 + 1e-10)


@pytest.mark.parametrize("eps", [0.1, 0.01])
def test_det_bound_beyond_n_epsilon(eps):
    n_star = find_N_epsilon(ROT, eps)
    for n in range(n_star, 130, 3):
        assert abs(principal_det(ROT, n)) >= 1 - 2 * eps
        assert gram_det(ROT, n) >= 1 - 2 * eps
