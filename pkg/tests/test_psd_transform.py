import itertools

import numpy as np
import pytest

from clapmatch.errors import NotPsdError
from clapmatch.graph_model import build_length_attributes
from clapmatch.psd_transform import (
    FactoredStructure,
    factorize,
    prepare_structure,
    psd_shift,
    row_absolute_radius,
)


def random_symmetric_zero_diag(rng, n, scale=10.0):
    m = rng.uniform(-scale, scale, size=(n, n))
    m = np.triu(m, k=1)
    return m + m.T


def doubly_stochastic(rng, n, iters=200):
    m = rng.uniform(0.1, 1.0, size=(n, n))
    for _ in range(iters):
        m /= m.sum(axis=1, keepdims=True)
        m /= m.sum(axis=0, keepdims=True)
    return m


class TestRowAbsoluteRadius:
    def test_single_edge(self):
        assert row_absolute_radius([[0.0, 1.0], [1.0, 0.0]]).tolist() == [1.0, 1.0]

    def test_signed_entries(self):
        m = [[0.0, -2.0, 3.0], [-2.0, 0.0, 0.0], [3.0, 0.0, 0.0]]
        assert row_absolute_radius(m).tolist() == [5.0, 2.0, 3.0]

    def test_matches_double_loop(self):
        rng = np.random.default_rng(4)
        m = random_symmetric_zero_diag(rng, 8)
        expect = [sum(abs(m[i, k]) for k in range(8) if k != i) for i in range(8)]
        np.testing.assert_allclose(row_absolute_radius(m), expect, rtol=1e-13)


class TestPsdShift:
    def test_direct_application(self):
        a_hat, b_hat, d_max = psd_shift([[0.0, 1.0], [1.0, 0.0]], [[0.0, 3.0], [3.0, 0.0]])
        assert d_max == 3.0
        assert a_hat.tolist() == [[3.0, 1.0], [1.0, 3.0]]
        assert b_hat.tolist() == [[3.0, 3.0], [3.0, 3.0]]

    def test_zero_matrices(self):
        a_hat, b_hat, d_max = psd_shift(np.zeros((3, 3)), np.zeros((2, 2)))
        assert d_max == 0.0
        assert not a_hat.any() and not b_hat.any()

    def test_outputs_are_psd(self):
        rng = np.random.default_rng(8)
        for _ in range(30):
            n, m = rng.integers(2, 12, size=2)
            a_hat, b_hat, _ = psd_shift(random_symmetric_zero_diag(rng, n),
                                        random_symmetric_zero_diag(rng, m))
            assert np.linalg.eigvalsh(a_hat)[0] >= -1e-10
            assert np.linalg.eigvalsh(b_hat)[0] >= -1e-10

    def test_off_diagonals_preserved_exactly(self):
        rng = np.random.default_rng(15)
        a = random_symmetric_zero_diag(rng, 6)
        b = random_symmetric_zero_diag(rng, 6)
        a_hat, b_hat, d_max = psd_shift(a, b)
        off = ~np.eye(6, dtype=bool)
        assert np.array_equal(a_hat[off], a[off])
        assert np.array_equal(b_hat[off], b[off])
        assert np.all(np.diagonal(a_hat) == d_max)
        assert np.all(np.diagonal(b_hat) == d_max)


class TestFactorize:
    def test_rank_one(self):
        h = factorize([[1.0, 1.0], [1.0, 1.0]])
        assert h.shape == (2, 1)
        np.testing.assert_allclose(h @ h.T, [[1.0, 1.0], [1.0, 1.0]], atol=1e-12)
        assert h[0, 0] == pytest.approx(h[1, 0])

    def test_identity(self):
        h = factorize(np.eye(3))
        assert h.shape == (3, 3)
        np.testing.assert_allclose(h @ h.T, np.eye(3), atol=1e-12)

    def test_reconstruction_of_shifted_random(self):
        rng = np.random.default_rng(16)
        a_hat, b_hat, _ = psd_shift(random_symmetric_zero_diag(rng, 8),
                                    random_symmetric_zero_diag(rng, 8))
        for m in (a_hat, b_hat):
            h = factorize(m)
            err = np.linalg.norm(h @ h.T - m) / np.linalg.norm(m)
            assert err <= 1e-8

    def test_zero_matrix_gives_empty_factor(self):
        h = factorize(np.zeros((4, 4)))
        assert h.shape == (4, 0)

    def test_indefinite_raises(self):
        with pytest.raises(NotPsdError):
            factorize([[0.0, 1.0], [1.0, 0.0]])


class TestPrepareStructure:
    def test_zero_inputs(self):
        z = build_length_attributes([(0.0, 0.0), (0.0, 0.0)])
        s = prepare_structure(z, z)
        assert s.d_max == 0.0
        assert s.ranks == (0, 0)

    def test_reconstruction(self):
        rng = np.random.default_rng(17)
        d_a = build_length_attributes(rng.uniform(0, 5, size=(7, 2)))
        d_b = build_length_attributes(rng.uniform(0, 5, size=(9, 2)))
        s = prepare_structure(d_a, d_b)
        np.testing.assert_allclose(s.h_a @ s.h_a.T, s.d_hat_a,
                                   atol=1e-8 * 7 * max(s.d_max, 1.0))
        np.testing.assert_allclose(s.h_b @ s.h_b.T, s.d_hat_b,
                                   atol=1e-8 * 9 * max(s.d_max, 1.0))

    def test_invariants_on_length_matrices(self):
        rng = np.random.default_rng(18)
        d_a = build_length_attributes(rng.uniform(0, 1, size=(10, 2)), normalize=True)
        d_b = build_length_attributes(rng.uniform(0, 1, size=(10, 2)), normalize=True)
        s = prepare_structure(d_a, d_b)
        off = ~np.eye(10, dtype=bool)
        assert np.array_equal(s.d_hat_a[off], d_a.values[off])
        assert np.array_equal(s.d_hat_b[off], d_b.values[off])
        assert np.all(np.diagonal(s.d_hat_a) == s.d_max)
        assert np.all(np.diagonal(s.d_hat_b) == s.d_max)
        assert np.linalg.eigvalsh(s.d_hat_a)[0] >= -1e-8 * s.d_max
        assert np.linalg.eigvalsh(s.d_hat_b)[0] >= -1e-8 * s.d_max

    def test_ranks_bounded(self):
        rng = np.random.default_rng(19)
        s = prepare_structure(
            build_length_attributes(rng.uniform(0, 1, size=(6, 2))),
            build_length_attributes(rng.uniform(0, 1, size=(8, 2))))
        k1, k2 = s.ranks
        assert k1 <= 6 and k2 <= 8


def perm_matrix(perm):
    n = len(perm)
    p = np.zeros((n, n))
    p[np.arange(n), list(perm)] = 1.0
    return p


class TestShiftIdentities:
    def test_constant_trace_offset_over_all_permutations(self):
        # shifting both diagonals adds exactly d_max^2 * n to the trace score
        # of every permutation, so the offset cannot change any argmax
        rng = np.random.default_rng(20)
        for n in (2, 3, 4, 5, 6):
            d_a = random_symmetric_zero_diag(rng, n)
            d_b = random_symmetric_zero_diag(rng, n)
            a_hat, b_hat, d_max = psd_shift(d_a, d_b)
            for perm in itertools.permutations(range(n)):
                p = perm_matrix(perm)
                raw = np.trace(p.T @ d_a @ p @ d_b)
                shifted = np.trace(p.T @ a_hat @ p @ b_hat)
                assert shifted - raw == pytest.approx(d_max ** 2 * n, abs=1e-9 * max(1, d_max ** 2 * n))

    def test_sum_of_squares_identity_for_soft_assignments(self):
        # tr(P^T D_hat_A P D_hat_B) equals ||H_A^T P H_B||_F^2 once both
        # factors exist, for any doubly stochastic P
        rng = np.random.default_rng(22)
        for _ in range(20):
            n = int(rng.integers(2, 9))
            a_hat, b_hat, _ = psd_shift(random_symmetric_zero_diag(rng, n),
                                        random_symmetric_zero_diag(rng, n))
            h_a, h_b = factorize(a_hat), factorize(b_hat)
            p = doubly_stochastic(rng, n)
            trace_form = np.trace(p.T @ a_hat @ p @ b_hat)
            frob_form = np.linalg.norm(h_a.T @ p @ h_b) ** 2
            assert frob_form == pytest.approx(trace_form, rel=1e-8)


class TestFactoredStructureValidation:
    def test_mismatched_factor_rows(self):
        from clapmatch.errors import InvalidInputError
        with pytest.raises(InvalidInputError):
            FactoredStructure(np.eye(3), np.eye(3), np.ones((2, 1)), np.ones((3, 1)), 1.0)
