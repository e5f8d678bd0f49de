"""Dense complex Hermitian kernel: construction, eigendecomposition with a
deterministic phase convention, expectation values and matrix elements.

Every eigendecomposition in the package funnels through this module so that
ordering, phases and validation behave identically everywhere. Matrices are
plain complex ndarrays; batches stack along leading axes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput

__all__ = [
    "EigenSystem",
    "hermitize",
    "hermiticity_residual",
    "require_hermitian",
    "fix_phase",
    "eig_hermitian",
    "eigh_batch",
    "expectation",
    "matrix_element",
]

HERMITICITY_TOL = 1e-12
NORM_TOL = 1e-10


def hermitize(m) -> np.ndarray:
    """Project onto the Hermitian subspace: (M + M^H) / 2.

    Accepts a single square matrix or a stack with shape (..., N, N).
    """
    m = np.asarray(m, dtype=np.complex128)
    if m.ndim < 2 or m.shape[-1] != m.shape[-2]:
        raise InvalidInput(f"expected square matrix, got shape {m.shape}")
    return 0.5 * (m + np.conj(np.swapaxes(m, -1, -2)))


def hermiticity_residual(m) -> float:
    """Max-norm distance from the Hermitian subspace."""
    m = np.asarray(m, dtype=np.complex128)
    return float(np.max(np.abs(m - np.conj(np.swapaxes(m, -1, -2)))))


def require_hermitian(m, tol: float = HERMITICITY_TOL) -> np.ndarray:
    """Return ``m`` unchanged if Hermitian within ``tol`` (scaled by the
    matrix magnitude), else raise InvalidInput."""
    m = np.asarray(m, dtype=np.complex128)
    scale = 1.0 + (float(np.max(np.abs(m))) if m.size else 0.0)
    res = hermiticity_residual(m)
    if not np.isfinite(res) or res > tol * scale:
        raise InvalidInput(f"matrix is not Hermitian (residual {res:.3e})")
    return m


@dataclass(frozen=True)
class EigenSystem:
    """Full spectrum of a Hermitian matrix.

    ``eigenvalues`` are ascending; ``eigenvectors[:, k]`` is the unit
    eigenvector paired with ``eigenvalues[k]``, phased so its largest-modulus
    entry is real and nonnegative. Repeated calls on identical input are
    bit-identical.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dim(self) -> int:
        return int(self.eigenvalues.shape[0])


def fix_phase(vectors: np.ndarray) -> np.ndarray:
    """Rotate each column vector so its largest-modulus entry is real and
    nonnegative. Works on (..., N, K) stacks; columns index vectors."""
    mag = np.abs(vectors)
    lead_row = np.argmax(mag, axis=-2)  # first maximum wins: deterministic
    lead = np.take_along_axis(vectors, lead_row[..., None, :], axis=-2)
    phase = lead / np.abs(lead)
    return vectors * np.conj(phase)


def eig_hermitian(h) -> EigenSystem:
    """Full eigendecomposition of a Hermitian matrix.

    Output is deterministic for identical input: eigenvalues ascending,
    eigenvector phases fixed by :func:`fix_phase`.
    """
    h = np.asarray(h, dtype=np.complex128)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise InvalidInput(f"expected a square matrix, got shape {h.shape}")
    if not np.all(np.isfinite(h)):
        raise InvalidInput("matrix contains non-finite entries")
    require_hermitian(h)
    evals, vecs = np.linalg.eigh(h)
    return EigenSystem(eigenvalues=evals, eigenvectors=fix_phase(vecs))


def eigh_batch(h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a (..., N, N) Hermitian stack.

    Hot path shared by training and geometry: skips per-matrix validation,
    applies the same ordering and phase convention as :func:`eig_hermitian`.
    """
    evals, vecs = np.linalg.eigh(h)
    return evals, fix_phase(vecs)


def _check_state(h: np.ndarray, psi: np.ndarray) -> None:
    if h.ndim != 2 or psi.ndim != 1 or h.shape != (psi.size, psi.size):
        raise InvalidInput(
            f"dimension mismatch: operator {h.shape}, state {psi.shape}"
        )


def expectation(h, psi) -> float:
    """Expectation value <psi|H|psi> of a Hermitian operator on a unit state.

    The imaginary residual must be below 1e-10; it is asserted and discarded.
    """
    h = np.asarray(h, dtype=np.complex128)
    psi = np.asarray(psi, dtype=np.complex128)
    _check_state(h, psi)
    if abs(np.linalg.norm(psi) - 1.0) > NORM_TOL:
        raise InvalidInput("state vector is not normalized")
    val = np.vdot(psi, h @ psi)
    if abs(val.imag) > NORM_TOL:
        raise InvalidInput(
            f"expectation value has imaginary residual {val.imag:.3e}; "
            "operator is not Hermitian"
        )
    return float(val.real)


def matrix_element(phi, h, psi) -> complex:
    """Matrix element <phi|H|psi>; conjugate-symmetric in (phi, psi)."""
    h = np.asarray(h, dtype=np.complex128)
    phi = np.asarray(phi, dtype=np.complex128)
    psi = np.asarray(psi, dtype=np.complex128)
    _check_state(h, psi)
    if phi.shape != psi.shape:
        raise InvalidInput(
            f"dimension mismatch: bra {phi.shape}, ket {psi.shape}"
        )
    return complex(np.vdot(phi, h @ psi))
