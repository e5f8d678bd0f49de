import numpy as np
import pytest

from qudim.errors import InvalidInput
from qudim.linalg import (
    eig_hermitian,
    expectation,
    fix_phase,
    hermitize,
    hermiticity_residual,
    matrix_element,
    require_hermitian,
)

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]])
SZ = np.array([[1, 0], [0, -1]], dtype=complex)


def random_hermitian(rng, n):
    raw = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return hermitize(raw)


class TestHermitize:
    def test_projects_to_hermitian(self):
        rng = np.random.default_rng(0)
        m = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        h = hermitize(m)
        assert hermiticity_residual(h) < 1e-15
        assert np.max(np.abs(np.diag(h).imag)) == 0.0

    def test_idempotent_on_hermitian(self):
        rng = np.random.default_rng(1)
        h = random_hermitian(rng, 5)
        assert np.array_equal(hermitize(h), h)

    def test_rejects_non_square(self):
        with pytest.raises(InvalidInput):
            hermitize(np.zeros((2, 3)))

    def test_require_hermitian_rejects_skewed(self):
        m = np.array([[0, 1], [0, 0]], dtype=complex)
        with pytest.raises(InvalidInput):
            require_hermitian(m)


class TestEigHermitian:
    def test_diagonal_case(self):
        es = eig_hermitian(np.diag([0.02, 0.32]).astype(complex))
        assert np.allclose(es.eigenvalues, [0.02, 0.32])
        assert np.allclose(np.abs(es.eigenvectors), np.eye(2))

    def test_pauli_x(self):
        es = eig_hermitian(SX)
        assert np.allclose(es.eigenvalues, [-1.0, 1.0])
        inv = 1 / np.sqrt(2)
        # phase convention: largest-modulus entry real and nonnegative
        assert np.allclose(es.eigenvectors[:, 0], [inv, -inv])
        assert np.allclose(es.eigenvectors[:, 1], [inv, inv])

    def test_reconstruction_random(self):
        rng = np.random.default_rng(8)
        h = random_hermitian(rng, 8)
        es = eig_hermitian(h)
        rebuilt = es.eigenvectors @ np.diag(es.eigenvalues) @ es.eigenvectors.conj().T
        scale = 1.0 + np.max(np.abs(h))
        assert np.max(np.abs(h - rebuilt)) < 1e-9 * scale

    def test_orthonormal_columns(self):
        rng = np.random.default_rng(9)
        es = eig_hermitian(random_hermitian(rng, 6))
        v = es.eigenvectors
        assert np.max(np.abs(v.conj().T @ v - np.eye(6))) < 1e-10

    def test_ascending_order(self):
        rng = np.random.default_rng(10)
        es = eig_hermitian(random_hermitian(rng, 7))
        assert np.all(np.diff(es.eigenvalues) >= 0)

    def test_idempotent_under_rediagonalization(self):
        rng = np.random.default_rng(11)
        es = eig_hermitian(random_hermitian(rng, 6))
        rebuilt = hermitize(
            es.eigenvectors @ np.diag(es.eigenvalues) @ es.eigenvectors.conj().T
        )
        es2 = eig_hermitian(rebuilt)
        assert np.max(np.abs(es.eigenvalues - es2.eigenvalues)) < 1e-9

    def test_shift_property(self):
        rng = np.random.default_rng(12)
        h = random_hermitian(rng, 5)
        c = 0.7321
        shifted = eig_hermitian(h + c * np.eye(5))
        base = eig_hermitian(h)
        assert np.max(np.abs(shifted.eigenvalues - base.eigenvalues - c)) < 1e-10

    def test_bit_identical_repeat(self):
        rng = np.random.default_rng(13)
        h = random_hermitian(rng, 6)
        a = eig_hermitian(h)
        b = eig_hermitian(h.copy())
        assert np.array_equal(a.eigenvalues, b.eigenvalues)
        assert np.array_equal(a.eigenvectors, b.eigenvectors)

    def test_phase_convention(self):
        rng = np.random.default_rng(14)
        es = eig_hermitian(random_hermitian(rng, 6))
        for k in range(6):
            v = es.eigenvectors[:, k]
            lead = v[np.argmax(np.abs(v))]
            assert abs(lead.imag) < 1e-14
            assert lead.real >= 0

    def test_rejects_non_finite(self):
        h = np.array([[np.nan, 0], [0, 1]], dtype=complex)
        with pytest.raises(InvalidInput):
            eig_hermitian(h)

    def test_degenerate_levels_do_not_crash(self):
        es = eig_hermitian(np.eye(4, dtype=complex))
        assert np.allclose(es.eigenvalues, 1.0)


class TestFixPhase:
    def test_batched_matches_single(self):
        rng = np.random.default_rng(15)
        stack = np.stack([random_hermitian(rng, 4) for _ in range(3)])
        _, vecs = np.linalg.eigh(stack)
        fixed = fix_phase(vecs)
        for b in range(3):
            assert np.allclose(fixed[b], fix_phase(vecs[b]))


class TestExpectation:
    def test_sigma_z_up(self):
        assert expectation(SZ, [1, 0]) == pytest.approx(1.0)

    def test_sigma_x_plus(self):
        inv = 1 / np.sqrt(2)
        assert expectation(SX, [inv, inv]) == pytest.approx(1.0)

    def test_matches_naive_triple_loop(self):
        rng = np.random.default_rng(16)
        h = random_hermitian(rng, 5)
        psi = rng.standard_normal(5) + 1j * rng.standard_normal(5)
        psi /= np.linalg.norm(psi)
        naive = 0.0
        for i in range(5):
            for j in range(5):
                naive += (psi[i].conjugate() * h[i, j] * psi[j]).real
        assert abs(expectation(h, psi) - naive) < 1e-12

    def test_rejects_unnormalized(self):
        with pytest.raises(InvalidInput):
            expectation(SZ, [1, 1])

    def test_rejects_dimension_mismatch(self):
        with pytest.raises(InvalidInput):
            expectation(SZ, [1, 0, 0])


class TestMatrixElement:
    def test_sigma_x_flip(self):
        assert matrix_element([1, 0], SX, [0, 1]) == pytest.approx(1 + 0j)

    def test_sigma_y_flip(self):
        assert matrix_element([1, 0], SY, [0, 1]) == pytest.approx(-1j)

    def test_conjugate_symmetry(self):
        rng = np.random.default_rng(17)
        h = random_hermitian(rng, 4)
        phi = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        psi = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        psi /= np.linalg.norm(psi)
        phi /= np.linalg.norm(phi)
        forward = matrix_element(phi, h, psi)
        backward = matrix_element(psi, h, phi)
        assert abs(forward - backward.conjugate()) < 1e-12

    def test_rejects_dimension_mismatch(self):
        with pytest.raises(InvalidInput):
            matrix_element([1, 0, 0], SX, [0, 1])
