"""Point clouds, the quantum metric, and spectral-gap detection.

The point cloud of a trained configuration collects the positions of all
quasi-coherent states; it approximates the data manifold and is where local
geometry is evaluated. At a point y the quantum metric is

    g_{mu nu}(y) = 2 sum_{n>=1} Re <psi_0|A_mu|psi_n><psi_n|A_nu|psi_0>
                                   / (E_n - E_0),

a real symmetric PSD D x D matrix built from the spectrum of H(y). Its rank
is bounded by 2(N-1) and its nonzero eigenvalues sit near 1 on a learned
manifold, so the location of the gap in its ascending spectrum encodes the
local intrinsic dimension. The energy Hessian is exactly I - g.

Two gap detectors are provided: the ratio rule (largest successive eigenvalue
ratio) and a hard-threshold rule calibrated on the Marchenko-Pastur bulk.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .errors import DegenerateGroundState, InvalidInput, NoGap
from .model import (
    MatrixConfiguration,
    ground_batch,
    moments_batch,
)

__all__ = [
    "PointCloud",
    "QuantumMetric",
    "GapEstimate",
    "point_cloud",
    "quantum_metric",
    "quantum_metric_batch",
    "hessian_energy",
    "spectral_gap_ratio",
    "spectral_gap_rmt",
    "marchenko_pastur_median",
    "save_spectra",
]

RATIO_FLOOR = 1e-12
HARD_THRESHOLD_FACTOR = 4.0 / np.sqrt(3.0)


@dataclass(frozen=True)
class PointCloud:
    """Positions, energies and fluctuations of the quasi-coherent states of a
    data set, indexed like the source points."""

    source_indices: np.ndarray
    positions: np.ndarray
    energies: np.ndarray
    fluctuations: np.ndarray

    def __len__(self) -> int:
        return int(self.positions.shape[0])

    def rows(self):
        """Iterate (source_index, position, energy, fluctuation) tuples."""
        for i in range(len(self)):
            yield (int(self.source_indices[i]), self.positions[i],
                   float(self.energies[i]), float(self.fluctuations[i]))


@dataclass(frozen=True)
class QuantumMetric:
    """D x D real symmetric PSD matrix with its ascending eigenvalues."""

    entries: np.ndarray
    eigenvalues: np.ndarray

    def __post_init__(self):
        sym = float(np.max(np.abs(self.entries - self.entries.T)))
        if sym > 1e-10:
            raise InvalidInput(f"metric is not symmetric (residual {sym:.3e})")
        if self.eigenvalues[0] < -1e-8:
            raise InvalidInput(
                f"metric has negative eigenvalue {self.eigenvalues[0]:.3e}"
            )


@dataclass(frozen=True)
class GapEstimate:
    """Location of the spectral gap in one metric spectrum.

    ``local_dim = D - gap_index``; for the threshold detector, ``threshold``
    and ``noise_scale`` carry the calibrated cut and the estimated noise
    level, and ``unreliable`` flags an empty or full signal set.
    """

    local_dim: int
    gap_index: int
    gap_ratio: float
    method: str
    threshold: float | None = None
    noise_scale: float | None = None
    unreliable: bool = False


def _as_points(data) -> np.ndarray:
    pts = np.asarray(getattr(data, "points", data), dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[None, :]
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise InvalidInput(f"expected a nonempty (T, D) array, got {pts.shape}")
    return pts


def point_cloud(config: MatrixConfiguration, data) -> PointCloud:
    """Positions A(psi_0(x)) with ground energies and fluctuations."""
    pts = _as_points(data)
    if pts.shape[1] != config.feature_dim:
        raise InvalidInput("data feature count does not match configuration")
    evals, vecs = ground_batch(config.operators, pts)
    pos, fluct = moments_batch(config.operators, vecs[:, :, 0])
    return PointCloud(
        source_indices=np.arange(pts.shape[0]),
        positions=pos,
        energies=evals[:, 0],
        fluctuations=fluct,
    )


def quantum_metric_batch(operators: np.ndarray, points: np.ndarray,
                         degeneracy_floor: float = 1e-8
                         ) -> tuple[np.ndarray, np.ndarray]:
    """Quantum metrics for a (B, D) batch -> ((B, D, D), degenerate mask).

    Points whose first spectral gap falls below ``degeneracy_floor`` are
    flagged in the mask; their metric rows are not meaningful. Perturbation
    terms across sub-floor gaps are dropped for the remaining points.
    """
    evals, vecs = ground_batch(operators, points)
    psi = vecs[:, :, 0]
    gaps = evals - evals[:, :1]
    degenerate = gaps[:, 1] < degeneracy_floor

    bra = np.einsum("bi,kij->bkj", psi.conj(), operators)
    elements = np.einsum("bkj,bjn->bkn", bra, vecs)  # <psi_0|A_k|psi_n>
    weights = np.zeros_like(gaps)
    open_gap = gaps >= degeneracy_floor
    weights[open_gap] = 2.0 / gaps[open_gap]
    metric = np.real(np.einsum("bkn,bn,bln->bkl", elements, weights,
                               elements.conj()))
    metric = 0.5 * (metric + np.swapaxes(metric, 1, 2))
    return metric, degenerate


def quantum_metric(config: MatrixConfiguration, y,
                   degeneracy_floor: float = 1e-8) -> QuantumMetric:
    """Quantum metric at the point ``y``, from a fresh eigendecomposition of
    H(y). Raises DegenerateGroundState when the first gap is below the floor.
    """
    pts = _as_points(y)
    if pts.shape != (1, config.feature_dim):
        raise InvalidInput("expected a single point matching the configuration")
    metric, degenerate = quantum_metric_batch(config.operators, pts,
                                              degeneracy_floor)
    if degenerate[0]:
        raise DegenerateGroundState(
            "ground state of the error Hamiltonian is degenerate at this point"
        )
    entries = metric[0]
    eigenvalues = np.linalg.eigvalsh(entries)
    rank_cap = 2 * (config.hilbert_dim - 1)
    if int(np.sum(eigenvalues > 0.5)) > rank_cap:
        raise InvalidInput(
            f"metric rank exceeds the 2(N-1) = {rank_cap} bound; "
            "inconsistent configuration"
        )
    return QuantumMetric(entries=entries, eigenvalues=eigenvalues)


def hessian_energy(config: MatrixConfiguration, y,
                   degeneracy_floor: float = 1e-8) -> np.ndarray:
    """Hessian of the ground energy at ``y``: identity minus the metric."""
    metric = quantum_metric(config, y, degeneracy_floor)
    return np.eye(config.feature_dim) - metric.entries


# ---------------------------------------------------------------------------
# Spectral-gap detectors
# ---------------------------------------------------------------------------

def _ascending(eigs) -> np.ndarray:
    e = np.asarray(eigs, dtype=np.float64).reshape(-1)
    if e.size < 2:
        raise InvalidInput("need at least two eigenvalues")
    if np.any(np.diff(e) < -1e-12 * (1.0 + float(np.max(np.abs(e))))):
        raise InvalidInput("eigenvalues must be in ascending order")
    return e


def spectral_gap_ratio(eigs, floor: float = RATIO_FLOOR) -> GapEstimate:
    """Locate the gap as the largest successive eigenvalue ratio.

    Scans indices 1..D-1, smallest index winning ties, with denominators
    floored to avoid division by exact zeros. Raises NoGap when the whole
    spectrum sits below the floor.
    """
    e = np.maximum(_ascending(eigs), 0.0)
    if e[-1] < floor:
        raise NoGap("all eigenvalues are below the floor")
    ratios = e[1:] / np.maximum(e[:-1], floor)
    gap_index = int(np.argmax(ratios)) + 1
    return GapEstimate(
        local_dim=e.size - gap_index,
        gap_index=gap_index,
        gap_ratio=float(ratios[gap_index - 1]),
        method="ratio",
    )


def spectral_gap_rmt(eigs, aspect: float = 1.0) -> GapEstimate:
    """Hard-threshold detector calibrated on the Marchenko-Pastur bulk.

    The noise scale is estimated from the spectrum median against the median
    of the Marchenko-Pastur law with the given aspect ratio; eigenvalues above
    (4/sqrt(3)) * noise_scale count as signal. The estimate is flagged
    unreliable when nothing or everything clears the threshold.
    """
    e = _ascending(eigs)
    if e.size < 4:
        raise InvalidInput("threshold detector needs at least four eigenvalues")
    sigma = float(np.median(e)) / np.sqrt(marchenko_pastur_median(aspect))
    sigma = max(sigma, 0.0)
    threshold = HARD_THRESHOLD_FACTOR * sigma
    local_dim = int(np.sum(e > threshold))
    gap_index = e.size - local_dim
    if 1 <= gap_index <= e.size - 1:
        clipped = np.maximum(e, 0.0)
        ratio = float(clipped[gap_index] / max(clipped[gap_index - 1],
                                               RATIO_FLOOR))
    else:
        ratio = float("nan")
    return GapEstimate(
        local_dim=local_dim,
        gap_index=gap_index,
        gap_ratio=ratio,
        method="rmt",
        threshold=threshold,
        noise_scale=sigma,
        unreliable=local_dim in (0, e.size),
    )


@lru_cache(maxsize=None)
def marchenko_pastur_median(aspect: float) -> float:
    """Median of the Marchenko-Pastur law (unit variance, ratio in (0, 1]).

    Computed by root-finding on the CDF; the integral uses the substitution
    x = lo + (hi - lo) sin^2(t), which removes both edge singularities.
    """
    if not 0.0 < aspect <= 1.0:
        raise InvalidInput("aspect ratio must lie in (0, 1]")
    lo = (1.0 - np.sqrt(aspect)) ** 2
    hi = (1.0 + np.sqrt(aspect)) ** 2
    span = hi - lo

    def integrand(t):
        s2 = np.sin(t) ** 2
        x = lo + span * s2
        return span**2 * s2 * np.cos(t) ** 2 / (np.pi * aspect * x)

    def cdf(m):
        theta = np.arcsin(np.sqrt((m - lo) / span))
        value, _ = quad(integrand, 0.0, theta)
        return value

    eps = 1e-9 * span
    return float(brentq(lambda m: cdf(m) - 0.5, lo + eps, hi - eps,
                        xtol=1e-12))


def save_spectra(path, indices, spectra) -> None:
    """Write one row per point: source index then ascending eigenvalues."""
    spectra = np.asarray(spectra, dtype=np.float64)
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["index"] + [f"e{i}" for i in range(spectra.shape[1])])
        for idx, row in zip(indices, spectra):
            writer.writerow([int(idx)] + [repr(float(v)) for v in row])
