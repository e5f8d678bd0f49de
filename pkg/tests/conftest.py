import numpy as np
import pytest

from qudim.model import MatrixConfiguration


@pytest.fixture
def pauli() -> MatrixConfiguration:
    """The three Pauli matrices: the exact N=2 model of the unit sphere."""
    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    sy = np.array([[0, -1j], [1j, 0]])
    sz = np.array([[1, 0], [0, -1]], dtype=complex)
    return MatrixConfiguration(np.stack([sx, sy, sz]))


@pytest.fixture
def diag01() -> MatrixConfiguration:
    """Single diagonal operator diag(0, 1): a commuting two-state model."""
    return MatrixConfiguration(np.diag([0.0, 1.0]).astype(complex)[None, :, :])


def random_configuration(rng, d, n) -> MatrixConfiguration:
    raw = rng.standard_normal((d, n, n)) + 1j * rng.standard_normal((d, n, n))
    return MatrixConfiguration(raw)


def random_state(rng, n) -> np.ndarray:
    psi = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return psi / np.linalg.norm(psi)


def finite_difference_gradient(config, batch, w, step=1e-5):
    """Central differences along every Hermitian basis direction, assembled
    back into the (D, N, N) gradient matrix convention."""
    from qudim.training import loss
    ops = np.array(config.operators)
    d, n, _ = ops.shape
    grad = np.zeros((d, n, n), dtype=complex)

    def loss_at(k, direction, h):
        bumped = ops.copy()
        bumped[k] = bumped[k] + h * direction
        return loss(MatrixConfiguration(bumped), batch, w)

    for k in range(d):
        for i in range(n):
            for j in range(i, n):
                real_dir = np.zeros((n, n), dtype=complex)
                real_dir[i, j] += 1.0
                real_dir[j, i] += 1.0
                if i == j:
                    real_dir[i, i] = 1.0
                d_re = (loss_at(k, real_dir, step)
                        - loss_at(k, real_dir, -step)) / (2 * step)
                if i == j:
                    grad[k, i, i] = d_re
                else:
                    imag_dir = np.zeros((n, n), dtype=complex)
                    imag_dir[i, j] = 1j
                    imag_dir[j, i] = -1j
                    d_im = (loss_at(k, imag_dir, step)
                            - loss_at(k, imag_dir, -step)) / (2 * step)
                    grad[k, i, j] = (d_re + 1j * d_im) / 2
                    grad[k, j, i] = (d_re - 1j * d_im) / 2
    return grad
