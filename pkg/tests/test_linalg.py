"""Dense linear-algebra helpers: definitions, failure modes, invariants."""

import numpy as np
import pytest

from qtomo.linalg import (
    NotHermitianError,
    SingularMatrixError,
    eig_hermitian,
    kron,
    pinv,
)

from oracles import kron_oracle, report


class TestKron:
    def test_identity_times_identity(self):
        np.testing.assert_array_equal(kron(np.eye(2), np.eye(2)), np.eye(4))

    def test_block_diagonal_layout(self):
        c = np.array([[1.0, 2.0], [3.0, 4.0]])
        out = kron(np.eye(3), c)
        assert out.shape == (6, 6)
        for block in range(3):
            sl = slice(2 * block, 2 * block + 2)
            np.testing.assert_array_equal(out[sl, sl], c)
        off = out.copy()
        for block in range(3):
            sl = slice(2 * block, 2 * block + 2)
            off[sl, sl] = 0.0
        assert np.all(off == 0.0)

    def test_matches_index_definition(self, oracle_log):
        rng = np.random.default_rng(11)
        for case in range(5):
            a = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
            b = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
            expected = kron_oracle(a, b)
            got = kron(a, b)
            np.testing.assert_allclose(got, expected, atol=1e-15)
            oracle_log.append(report(f"kron-random-{case}", (a, b),
                                     abs(expected).sum(), abs(got).sum()))

    def test_associativity(self):
        rng = np.random.default_rng(12)
        for _ in range(20):
            a, b, c = (rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
                       for _ in range(3))
            np.testing.assert_allclose(kron(kron(a, b), c), kron(a, kron(b, c)),
                                       atol=1e-12)

    def test_trace_multiplicative(self):
        rng = np.random.default_rng(13)
        for _ in range(20):
            a = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
            b = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
            np.testing.assert_allclose(np.trace(kron(a, b)),
                                       np.trace(a) * np.trace(b), atol=1e-12)


class TestPinv:
    def test_identity(self):
        np.testing.assert_allclose(pinv(np.eye(6)), np.eye(6), atol=1e-14)

    def test_diagonal(self):
        np.testing.assert_allclose(pinv(np.diag([2.0, 4.0])),
                                   np.diag([0.5, 0.25]), atol=1e-14)

    def test_penrose_condition(self):
        rng = np.random.default_rng(21)
        for _ in range(10):
            a = rng.standard_normal((4, 4)) + 2.0 * np.eye(4)
            p = pinv(a)
            np.testing.assert_allclose(a @ p @ a, a, atol=1e-9)
            np.testing.assert_allclose(a @ p, np.eye(4), atol=1e-9)

    def test_rectangular_full_rank(self):
        rng = np.random.default_rng(22)
        a = rng.standard_normal((3, 5))
        p = pinv(a)
        np.testing.assert_allclose(a @ p @ a, a, atol=1e-9)

    def test_singular_raises(self):
        singular = np.array([[1.0, 1.0], [1.0, 1.0]])
        with pytest.raises(SingularMatrixError):
            pinv(singular)

    def test_nearly_singular_raises(self):
        a = np.diag([1.0, 1e-14])
        with pytest.raises(SingularMatrixError):
            pinv(a)


class TestEigHermitian:
    def test_identity(self):
        np.testing.assert_allclose(eig_hermitian(np.eye(2)), [1.0, 1.0])

    def test_diagonal(self):
        np.testing.assert_allclose(eig_hermitian(np.diag([0.0, 1.0])), [0.0, 1.0])

    def test_singlet_projector(self):
        # Hand diagonalization: rank-1 projector has eigenvalues (0,0,0,1).
        rho = 0.5 * np.array([
            [0, 0, 0, 0], [0, 1, -1, 0], [0, -1, 1, 0], [0, 0, 0, 0]],
            dtype=complex)
        np.testing.assert_allclose(eig_hermitian(rho), [0, 0, 0, 1], atol=1e-12)

    def test_sum_equals_trace(self):
        rng = np.random.default_rng(31)
        for _ in range(20):
            m = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
            h = m + m.conj().T
            np.testing.assert_allclose(eig_hermitian(h).sum(),
                                       np.trace(h).real, atol=1e-10)

    def test_ascending(self):
        rng = np.random.default_rng(32)
        m = rng.standard_normal((6, 6))
        eigs = eig_hermitian(m + m.T)
        assert np.all(np.diff(eigs) >= 0)

    def test_non_hermitian_raises(self):
        with pytest.raises(NotHermitianError):
            eig_hermitian(np.array([[0.0, 1.0], [0.0, 0.0]]))
