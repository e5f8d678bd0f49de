"""Classical intrinsic dimension estimators used as comparison curves.

Two estimators are implemented with exact brute-force neighbor search, which
is deterministic and fast enough at desk scale:

* ``twonn``: the two-nearest-neighbor estimator. The ratio mu = r2/r1 of the
  first two neighbor distances follows a Pareto law with exponent d on a
  uniformly sampled manifold; d is recovered by a straight-line fit through
  the origin of -log(1 - F(mu)) against log mu, after discarding the largest
  ratios.
* ``mle_dimension``: the k-nearest-neighbor maximum-likelihood estimator,
  averaging the per-point values [ (1/(k-1)) sum_j log(r_k / r_j) ]^{-1}.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .errors import InvalidInput

__all__ = ["BaselineResult", "twonn", "mle_dimension"]


@dataclass(frozen=True)
class BaselineResult:
    method: str
    estimate: float
    params: dict = field(default_factory=dict)


def _as_points(data) -> np.ndarray:
    pts = np.asarray(getattr(data, "points", data), dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise InvalidInput(f"expected a nonempty (T, D) data set, got {pts.shape}")
    return pts


def _dedup(pts: np.ndarray) -> tuple[np.ndarray, int]:
    unique = np.unique(pts, axis=0)
    dropped = pts.shape[0] - unique.shape[0]
    if dropped:
        warnings.warn(f"dropped {dropped} duplicate point(s)")
    return unique, dropped


def _neighbor_distances(pts: np.ndarray, k: int) -> np.ndarray:
    """Sorted distances to the k nearest neighbors (self excluded), computed
    in row chunks so memory stays bounded."""
    n = pts.shape[0]
    out = np.empty((n, k))
    chunk = max(1, int(2**22 // max(n, 1)))  # ~32 MB of doubles per block
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        dist = cdist(pts[lo:hi], pts)
        dist[np.arange(hi - lo), np.arange(lo, hi)] = np.inf
        part = np.partition(dist, k - 1, axis=1)[:, :k]
        out[lo:hi] = np.sort(part, axis=1)
    return out


def twonn(data, discard_fraction: float = 0.1) -> BaselineResult:
    """Two-nearest-neighbor estimate; duplicates are dropped with a warning."""
    if not 0.0 <= discard_fraction < 1.0:
        raise InvalidInput("discard_fraction must lie in [0, 1)")
    pts, dropped = _dedup(_as_points(data))
    n = pts.shape[0]
    if n < 3:
        raise InvalidInput("need at least three distinct points")
    first_two = _neighbor_distances(pts, 2)
    mu = np.sort(first_two[:, 1] / first_two[:, 0])
    keep = n - int(np.floor(discard_fraction * n))
    keep = max(keep, 2)
    x = np.log(mu[:keep])
    y = -np.log(1.0 - np.arange(1, keep + 1) / n)
    denom = float(x @ x)
    if denom <= 0:
        raise InvalidInput("degenerate neighbor ratios; cannot fit dimension")
    estimate = float(x @ y / denom)
    return BaselineResult("twonn", estimate, {
        "discard_fraction": discard_fraction,
        "duplicates_dropped": dropped,
    })


def mle_dimension(data, k: int = 10) -> BaselineResult:
    """Maximum-likelihood estimate from the k nearest neighbors of each point."""
    pts, dropped = _dedup(_as_points(data))
    n = pts.shape[0]
    if k < 2:
        raise InvalidInput("k must be at least 2")
    if n <= k:
        raise InvalidInput(f"need more than k={k} distinct points, have {n}")
    dists = _neighbor_distances(pts, k)
    log_ratios = np.log(dists[:, -1:] / dists[:, :-1])
    local = (k - 1) / log_ratios.sum(axis=1)
    return BaselineResult("mle", float(local.mean()), {
        "k": k,
        "duplicates_dropped": dropped,
    })
