"""End-to-end local intrinsic dimension estimation.

For every data point x the pipeline computes the quasi-coherent state, moves
to its position y on the point cloud, evaluates the quantum metric g(y) there,
and locates the spectral gap in its ascending eigenvalues. Points with a
degenerate ground state (at x or at y) are recorded as skipped; aggregates
are taken over the remaining points.
"""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import EstimationFailed, InvalidInput, NoGap
from .geometry import (
    GapEstimate,
    quantum_metric_batch,
    spectral_gap_ratio,
    spectral_gap_rmt,
)
from .model import MatrixConfiguration, ground_batch, moments_batch

__all__ = [
    "LocalDimension",
    "DimensionReport",
    "estimate_dimensions",
    "aggregate",
    "save_dimension_report",
]

METHODS = ("ratio", "rmt")
AGGREGATIONS = ("mode", "median", "geometric_mean")


@dataclass(frozen=True)
class LocalDimension:
    """Per-point outcome; ``local_dim`` is None when the point was skipped."""

    source_index: int
    local_dim: int | None
    gap_ratio: float | None
    skipped: bool
    threshold: float | None = None
    noise_scale: float | None = None


@dataclass
class DimensionReport:
    """Local estimates plus global aggregates over the non-skipped points.

    ``metric_spectra`` holds the ascending metric eigenvalues per point (NaN
    rows for skipped points) for spectra exports and gap diagnostics.
    """

    entries: list[LocalDimension]
    global_mode: int
    global_median: float
    global_geometric_mean: float
    skipped_count: int
    method: str
    metric_spectra: np.ndarray = field(repr=False, default=None)

    def local_values(self) -> list[int]:
        return [e.local_dim for e in self.entries if not e.skipped]

    @property
    def mean_local(self) -> float:
        values = self.local_values()
        return float(np.mean(values)) if values else float("nan")


def aggregate(local_dims, method: str) -> float:
    """Aggregate local estimates: mode (ties toward the smaller value),
    median (lower median on even counts) or geometric mean."""
    values = list(local_dims)
    if not values:
        raise InvalidInput("cannot aggregate an empty list")
    if method == "mode":
        counts = Counter(values)
        best = max(counts.values())
        return float(min(v for v, c in counts.items() if c == best))
    if method == "median":
        ordered = sorted(values)
        return float(ordered[(len(ordered) - 1) // 2])
    if method == "geometric_mean":
        arr = np.asarray(values, dtype=np.float64)
        if np.any(arr <= 0):
            raise InvalidInput("geometric mean requires positive values")
        return float(np.exp(np.mean(np.log(arr))))
    raise InvalidInput(f"unknown aggregation {method!r}; choose from {AGGREGATIONS}")


def estimate_dimensions(config: MatrixConfiguration, data, method: str = "ratio",
                        *, ratio_floor: float = 1e-12, aspect: float = 1.0,
                        degeneracy_floor: float = 1e-8) -> DimensionReport:
    """Run the full estimator over a data set.

    ``method`` selects the gap detector ("ratio" or "rmt"). Deterministic for
    fixed inputs; raises EstimationFailed if every point is skipped.
    """
    if method not in METHODS:
        raise InvalidInput(f"unknown method {method!r}; choose from {METHODS}")
    pts = np.asarray(getattr(data, "points", data), dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise InvalidInput(f"expected a nonempty (T, D) data set, got {pts.shape}")
    if pts.shape[1] != config.feature_dim:
        raise InvalidInput("data feature count does not match configuration")

    ops = config.operators
    evals_x, vecs_x = ground_batch(ops, pts)
    degenerate_x = (evals_x[:, 1] - evals_x[:, 0]) < degeneracy_floor
    cloud, _ = moments_batch(ops, vecs_x[:, :, 0])

    metric, degenerate_y = quantum_metric_batch(ops, cloud, degeneracy_floor)
    spectra = np.linalg.eigvalsh(metric)

    rank_cap = 2 * (config.hilbert_dim - 1)
    usable = ~(degenerate_x | degenerate_y)
    if np.any(np.sum(spectra[usable] > 0.5, axis=1) > rank_cap):
        raise InvalidInput(
            f"metric rank exceeds the 2(N-1) = {rank_cap} bound; "
            "inconsistent configuration"
        )

    entries: list[LocalDimension] = []
    for i in range(pts.shape[0]):
        if not usable[i]:
            spectra[i] = np.nan
            entries.append(LocalDimension(i, None, None, True))
            continue
        try:
            if method == "ratio":
                gap: GapEstimate = spectral_gap_ratio(spectra[i], ratio_floor)
            else:
                gap = spectral_gap_rmt(spectra[i], aspect)
        except NoGap:
            entries.append(LocalDimension(i, None, None, True))
            continue
        if gap.unreliable:
            # empty or full signal set: no usable local estimate
            entries.append(LocalDimension(i, None, None, True,
                                          threshold=gap.threshold,
                                          noise_scale=gap.noise_scale))
            continue
        entries.append(LocalDimension(
            source_index=i,
            local_dim=gap.local_dim,
            gap_ratio=gap.gap_ratio,
            skipped=False,
            threshold=gap.threshold,
            noise_scale=gap.noise_scale,
        ))

    values = [e.local_dim for e in entries if not e.skipped]
    if not values:
        raise EstimationFailed("every point was skipped")
    return DimensionReport(
        entries=entries,
        global_mode=int(aggregate(values, "mode")),
        global_median=aggregate(values, "median"),
        global_geometric_mean=aggregate(values, "geometric_mean"),
        skipped_count=len(entries) - len(values),
        method=method,
        metric_spectra=spectra,
    )


def save_dimension_report(report: DimensionReport, report_path,
                          table_path, extra: dict | None = None) -> None:
    """Write the key-value summary and the per-point table."""
    lines = {
        "method": report.method,
        "points": len(report.entries),
        "skipped_count": report.skipped_count,
        "global_mode": report.global_mode,
        "global_median": report.global_median,
        "global_geometric_mean": report.global_geometric_mean,
        "mean_local": report.mean_local,
    }
    if extra:
        lines.update(extra)
    with open(report_path, "w", newline="\n") as fh:
        for key, value in lines.items():
            if isinstance(value, float):
                value = repr(value)
            fh.write(f"{key}={value}\n")

    with open(table_path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        header = ["index", "local_dim", "gap_ratio", "skipped"]
        if report.method == "rmt":
            header += ["threshold", "noise_scale"]
        writer.writerow(header)
        for e in report.entries:
            row = [
                e.source_index,
                "" if e.local_dim is None else e.local_dim,
                "" if e.gap_ratio is None else repr(float(e.gap_ratio)),
                int(e.skipped),
            ]
            if report.method == "rmt":
                row += [
                    "" if e.threshold is None else repr(float(e.threshold)),
                    "" if e.noise_scale is None else repr(float(e.noise_scale)),
                ]
            writer.writerow(row)
