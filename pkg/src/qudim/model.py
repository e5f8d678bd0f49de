"""Matrix configurations and their quasi-coherent states.

A matrix configuration is a D-tuple of N x N Hermitian operators acting as a
non-commutative model of the D feature coordinates of a data set. Each data
point x defines an error Hamiltonian

    H(x) = 1/2 * sum_k (A_k - x_k I)^2,

a positive semi-definite operator whose ground state psi_0(x) (the
quasi-coherent state of x) represents the point. The ground energy splits as

    E_0(x) = 1/2 ||A(psi_0) - x||^2 + 1/2 sigma^2(psi_0),

a squared bias plus the total quantum fluctuation of the state, mirroring the
bias/variance decomposition of a squared-error loss.

Model container format
----------------------
``save_config`` writes a NumPy ``.npz`` archive with two members:

* ``operators``: complex128 array of shape (D, N, N), row-major entries of
  the D Hermitian operators;
* ``metadata``: a JSON string (0-d unicode array) holding at least
  ``format``, ``version``, ``seed`` and ``loss_weight``.

The layout is stable; ``load_config`` accepts any archive with these members.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import InvalidInput
from .linalg import EigenSystem, eig_hermitian, eigh_batch, hermitize

__all__ = [
    "MatrixConfiguration",
    "QuasiCoherentState",
    "EnergyDecomposition",
    "error_hamiltonian",
    "quasi_coherent",
    "position",
    "quantum_fluctuation",
    "energy_decomposition",
    "fluctuation_bound",
    "degenerate_gap_tolerance",
    "save_config",
    "load_config",
    "hamiltonian_batch",
    "ground_batch",
    "positions_batch",
    "moments_batch",
]

CONTAINER_FORMAT = "qudim-matrix-config"
CONTAINER_VERSION = 1


@dataclass(frozen=True)
class MatrixConfiguration:
    """Immutable D-tuple of N x N Hermitian operators, stored as a (D, N, N)
    complex array. Hermiticity is enforced by projection at construction."""

    operators: np.ndarray

    def __post_init__(self):
        ops = np.asarray(self.operators, dtype=np.complex128)
        if ops.ndim != 3 or ops.shape[1] != ops.shape[2]:
            raise InvalidInput(
                f"operators must have shape (D, N, N), got {ops.shape}"
            )
        if ops.shape[0] < 1:
            raise InvalidInput("need at least one operator (D >= 1)")
        if ops.shape[1] < 2:
            raise InvalidInput("Hilbert dimension must be at least 2")
        if not np.all(np.isfinite(ops)):
            raise InvalidInput("operators contain non-finite entries")
        ops = hermitize(ops)
        ops.setflags(write=False)
        object.__setattr__(self, "operators", ops)

    @property
    def feature_dim(self) -> int:
        return int(self.operators.shape[0])

    @property
    def hilbert_dim(self) -> int:
        return int(self.operators.shape[1])


@dataclass(frozen=True)
class QuasiCoherentState:
    """Ground eigenstate of the error Hamiltonian at one data point."""

    state: np.ndarray
    energy: float
    spectrum: EigenSystem
    degenerate_ground: bool


class EnergyDecomposition(NamedTuple):
    bias_sq: float
    fluctuation: float
    energy: float


def degenerate_gap_tolerance(e1: float) -> float:
    """Gap below which the ground state is flagged degenerate."""
    return 1e-9 * (1.0 + abs(e1))


def _check_point(config: MatrixConfiguration, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.size != config.feature_dim:
        raise InvalidInput(
            f"point has {x.size} coordinates, configuration has "
            f"{config.feature_dim} features"
        )
    if not np.all(np.isfinite(x)):
        raise InvalidInput("data point contains non-finite entries")
    return x


def _check_unit_state(config: MatrixConfiguration, psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=np.complex128).reshape(-1)
    if psi.size != config.hilbert_dim:
        raise InvalidInput(
            f"state has dimension {psi.size}, expected {config.hilbert_dim}"
        )
    if abs(np.linalg.norm(psi) - 1.0) > 1e-10:
        raise InvalidInput("state vector is not normalized")
    return psi


# ---------------------------------------------------------------------------
# Batched kernels. Points stack along the leading axis; all consumers share
# these code paths so that single-point and batched results agree bitwise.
# ---------------------------------------------------------------------------

def hamiltonian_batch(operators: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Error Hamiltonians H(x) for a (B, D) batch of points -> (B, N, N).

    Uses H(x) = 1/2 (sum_k A_k^2 - 2 sum_k x_k A_k + ||x||^2 I).
    """
    n = operators.shape[1]
    second = np.einsum("kij,kjl->il", operators, operators)
    cross = np.einsum("bk,kij->bij", points, operators)
    norms = np.einsum("bk,bk->b", points, points)
    eye = np.eye(n, dtype=np.complex128)
    return 0.5 * (second[None, :, :] - 2.0 * cross
                  + norms[:, None, None] * eye[None, :, :])


def ground_batch(operators: np.ndarray,
                 points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues and phase-fixed eigenvectors of H(x) per point."""
    return eigh_batch(hamiltonian_batch(operators, points))


def positions_batch(operators: np.ndarray, states: np.ndarray) -> np.ndarray:
    """Positions <psi|A_k|psi> for a (B, N) stack of states -> (B, D)."""
    apsi = np.einsum("kij,bj->bki", operators, states)
    return np.real(np.einsum("bi,bki->bk", states.conj(), apsi))


def moments_batch(operators: np.ndarray,
                  states: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Positions and total fluctuations in one pass -> ((B, D), (B,))."""
    apsi = np.einsum("kij,bj->bki", operators, states)
    pos = np.real(np.einsum("bi,bki->bk", states.conj(), apsi))
    second = np.real(np.einsum("bki,bki->b", apsi.conj(), apsi))
    fluct = second - np.einsum("bk,bk->b", pos, pos)
    return pos, np.maximum(fluct, 0.0)  # clamp round-off negatives


# ---------------------------------------------------------------------------
# Single-point operations
# ---------------------------------------------------------------------------

def error_hamiltonian(config: MatrixConfiguration, x) -> np.ndarray:
    """The PSD operator 1/2 sum_k (A_k - x_k I)^2."""
    x = _check_point(config, x)
    return hamiltonian_batch(config.operators, x[None, :])[0]


def quasi_coherent(config: MatrixConfiguration, x) -> QuasiCoherentState:
    """Ground state of the error Hamiltonian at ``x``.

    ``degenerate_ground`` is set when the first spectral gap falls below
    :func:`degenerate_gap_tolerance`; consumers decide how to react.
    """
    spectrum = eig_hermitian(error_hamiltonian(config, x))
    e0, e1 = spectrum.eigenvalues[0], spectrum.eigenvalues[1]
    return QuasiCoherentState(
        state=spectrum.eigenvectors[:, 0],
        energy=float(e0),
        spectrum=spectrum,
        degenerate_ground=bool(e1 - e0 < degenerate_gap_tolerance(e1)),
    )


def position(config: MatrixConfiguration, psi) -> np.ndarray:
    """Position vector (<psi|A_1|psi>, ..., <psi|A_D|psi>)."""
    psi = _check_unit_state(config, psi)
    return positions_batch(config.operators, psi[None, :])[0]


def quantum_fluctuation(config: MatrixConfiguration, psi) -> float:
    """Total variance sum_k (<psi|A_k^2|psi> - <psi|A_k|psi>^2), >= 0."""
    psi = _check_unit_state(config, psi)
    _, fluct = moments_batch(config.operators, psi[None, :])
    return float(fluct[0])


def energy_decomposition(config: MatrixConfiguration, x) -> EnergyDecomposition:
    """Split the ground energy into squared bias and fluctuation parts:
    energy = bias_sq / 2 + fluctuation / 2."""
    x = _check_point(config, x)
    qc = quasi_coherent(config, x)
    pos, fluct = moments_batch(config.operators, qc.state[None, :])
    delta = pos[0] - x
    return EnergyDecomposition(
        bias_sq=float(delta @ delta),
        fluctuation=float(fluct[0]),
        energy=qc.energy,
    )


def fluctuation_bound(config: MatrixConfiguration) -> float:
    """Configuration-level bound on the total fluctuation of any unit state:
    sum_k (max_eig(A_k) - min_eig(A_k))^2 / 4 (per-coordinate variance bound
    for operators with bounded spectrum)."""
    evals = np.linalg.eigvalsh(config.operators)
    spans = evals[:, -1] - evals[:, 0]
    return float(np.sum(spans**2) / 4.0)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def save_config(config: MatrixConfiguration, path, *, seed=None,
                loss_weight=None, extra: dict | None = None) -> None:
    """Write the configuration container described in the module docstring."""
    meta = {
        "format": CONTAINER_FORMAT,
        "version": CONTAINER_VERSION,
        "feature_dim": config.feature_dim,
        "hilbert_dim": config.hilbert_dim,
        "seed": seed,
        "loss_weight": loss_weight,
    }
    if extra:
        meta.update(extra)
    with open(path, "wb") as fh:
        np.savez(fh, operators=config.operators,
                 metadata=json.dumps(meta, sort_keys=True))


def load_config(path) -> tuple[MatrixConfiguration, dict]:
    """Read a configuration container; returns (configuration, metadata)."""
    with np.load(path) as archive:
        if "operators" not in archive:
            raise InvalidInput(f"{path}: not a matrix-configuration container")
        ops = archive["operators"]
        meta = {}
        if "metadata" in archive:
            meta = json.loads(str(archive["metadata"]))
    return MatrixConfiguration(ops), meta
