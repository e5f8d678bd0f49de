"""Synthetic manifold generators, noise models, scaling, and tabular I/O.

All generators are deterministic under their seed, record their parameters,
and tag the true intrinsic dimension. Noise draws are always generated and
scaled by the level, so runs with the same seed share the same base sample
across noise levels.

File format: comma-separated UTF-8 text with LF line endings, one point per
row, optional header (auto-detected), floats written with 17 significant
digits so that save/load round-trips are value-exact. Each table gets a
``<name>.meta`` sidecar of ``key=value`` lines with the dataset name, true
dimension and scalar generator parameters.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidInput, ParseError

__all__ = [
    "Dataset",
    "gen_sphere",
    "gen_circle",
    "gen_swiss_roll",
    "gen_hypercube",
    "add_feature_scaled_noise",
    "standardize",
    "load_table",
    "save_table",
    "random_rotation",
]

SWISS_ROLL_T_RANGE = (1.5 * np.pi, 4.5 * np.pi)
SWISS_ROLL_HEIGHT = 21.0


@dataclass
class Dataset:
    """A T x D point table with provenance metadata."""

    points: np.ndarray
    name: str = "dataset"
    true_dim: int | None = None
    generator_params: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise InvalidInput(f"points must be a (T, D) matrix, got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise InvalidInput("points contain non-finite entries")
        self.points = pts

    @property
    def n_points(self) -> int:
        return int(self.points.shape[0])

    @property
    def n_features(self) -> int:
        return int(self.points.shape[1])


def gen_sphere(t: int, ambient_pad: int = 0, noise: float = 0.0,
               seed: int = 0) -> Dataset:
    """Uniform sample of the unit two-sphere via normalized 3-D Gaussians,
    zero-padded by ``ambient_pad`` extra coordinates, plus isotropic Gaussian
    noise of the given standard deviation on every coordinate."""
    if t < 1:
        raise InvalidInput("need at least one point")
    rng = np.random.default_rng(seed)
    raw = rng.standard_normal((t, 3))
    base = raw / np.linalg.norm(raw, axis=1, keepdims=True)
    if ambient_pad:
        base = np.hstack([base, np.zeros((t, ambient_pad))])
    pts = base + noise * rng.standard_normal(base.shape)
    return Dataset(pts, name="sphere", true_dim=2, generator_params={
        "generator": "sphere", "t": t, "noise": noise, "seed": seed,
        "ambient_pad": ambient_pad,
    })


def gen_circle(t: int, noise: float = 0.0, seed: int = 0) -> Dataset:
    """Uniform sample of the unit circle via normalized 2-D Gaussians."""
    if t < 1:
        raise InvalidInput("need at least one point")
    rng = np.random.default_rng(seed)
    raw = rng.standard_normal((t, 2))
    base = raw / np.linalg.norm(raw, axis=1, keepdims=True)
    pts = base + noise * rng.standard_normal(base.shape)
    return Dataset(pts, name="circle", true_dim=1, generator_params={
        "generator": "circle", "t": t, "noise": noise, "seed": seed,
    })


def gen_swiss_roll(t: int, noise: float = 0.0, seed: int = 0) -> Dataset:
    """Swiss roll (u cos u, h, u sin u) with u uniform on [1.5 pi, 4.5 pi] and
    h uniform on [0, 21], each coordinate rescaled to unit standard deviation.
    The scales are recorded in ``generator_params`` for invertibility."""
    if t < 1:
        raise InvalidInput("need at least one point")
    rng = np.random.default_rng(seed)
    u = rng.uniform(*SWISS_ROLL_T_RANGE, size=t)
    h = rng.uniform(0.0, SWISS_ROLL_HEIGHT, size=t)
    base = np.column_stack([u * np.cos(u), h, u * np.sin(u)])
    scales = base.std(axis=0)
    base = base / scales
    pts = base + noise * rng.standard_normal(base.shape)
    return Dataset(pts, name="swissroll", true_dim=2, generator_params={
        "generator": "swissroll", "t": t, "noise": noise, "seed": seed,
        "scale_0": float(scales[0]), "scale_1": float(scales[1]),
        "scale_2": float(scales[2]),
    })


def random_rotation(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-ish orthogonal matrix from the QR of a Gaussian matrix, with the
    sign convention that makes the factorization unique."""
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    return q * np.sign(np.diag(r))


def gen_hypercube(t: int, noise: float = 0.0, seed: int = 0, d: int = 17,
                  ambient_dim: int = 18) -> Dataset:
    """Uniform sample of the d-dimensional unit hypercube, zero-padded to the
    ambient dimension and mixed by a seeded random rotation. The rotation is
    kept in ``generator_params["rotation"]`` (in memory only)."""
    if t < 1:
        raise InvalidInput("need at least one point")
    if d >= ambient_dim:
        raise InvalidInput("intrinsic dimension must be below the ambient one")
    rng = np.random.default_rng(seed)
    base = rng.uniform(0.0, 1.0, size=(t, d))
    padded = np.hstack([base, np.zeros((t, ambient_dim - d))])
    rotation = random_rotation(ambient_dim, rng)
    pts = padded @ rotation.T + noise * rng.standard_normal((t, ambient_dim))
    return Dataset(pts, name="hypercube", true_dim=d, generator_params={
        "generator": "hypercube", "t": t, "noise": noise, "seed": seed,
        "d": d, "ambient_dim": ambient_dim, "rotation": rotation,
    })


def add_feature_scaled_noise(dataset: Dataset, eps: float,
                             seed: int = 0) -> Dataset:
    """Per-feature noise: each column gets Gaussian noise with standard
    deviation eps times that column's standard deviation. Constant features
    are left untouched; eps = 0 is the identity."""
    if eps < 0:
        raise InvalidInput("noise fraction must be nonnegative")
    rng = np.random.default_rng(seed)
    sigma = dataset.points.std(axis=0)
    pts = dataset.points + eps * sigma * rng.standard_normal(dataset.points.shape)
    params = dict(dataset.generator_params)
    params.update({"feature_noise_eps": eps, "feature_noise_seed": seed})
    return Dataset(pts, name=dataset.name, true_dim=dataset.true_dim,
                   generator_params=params)


def standardize(dataset: Dataset, mode: str = "zscore") -> tuple[Dataset, dict]:
    """Column-wise scaling; returns the scaled dataset and a scaler record
    {mode, center, scale} for traceability. Zero-variance (or zero-range)
    features pass through with a warning."""
    pts = dataset.points
    if mode == "none":
        center = np.zeros(pts.shape[1])
        scale = np.ones(pts.shape[1])
        scaled = pts.copy()
    elif mode == "zscore":
        center = pts.mean(axis=0)
        scale = pts.std(axis=0)
        flat = scale == 0.0
        if np.any(flat):
            warnings.warn(f"{int(flat.sum())} zero-variance feature(s) passed "
                          "through unscaled")
            scale = np.where(flat, 1.0, scale)
        scaled = (pts - center) / scale
    elif mode == "minmax":
        center = pts.min(axis=0)
        scale = pts.max(axis=0) - center
        flat = scale == 0.0
        if np.any(flat):
            warnings.warn(f"{int(flat.sum())} zero-range feature(s) passed "
                          "through unscaled")
            scale = np.where(flat, 1.0, scale)
        scaled = (pts - center) / scale
    else:
        raise InvalidInput(f"unknown mode {mode!r}; choose none, zscore or minmax")
    params = dict(dataset.generator_params)
    params["standardize"] = mode
    out = Dataset(scaled, name=dataset.name, true_dim=dataset.true_dim,
                  generator_params=params)
    return out, {"mode": mode, "center": center, "scale": scale}


# ---------------------------------------------------------------------------
# Tabular I/O
# ---------------------------------------------------------------------------

def _sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta")


def save_table(dataset: Dataset, path) -> None:
    """Write the point table plus its metadata sidecar."""
    path = Path(path)
    d = dataset.n_features
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(f"x{i}" for i in range(d)) + "\n")
        for row in dataset.points:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    meta: dict = {"name": dataset.name}
    if dataset.true_dim is not None:
        meta["true_dim"] = dataset.true_dim
    for key, value in dataset.generator_params.items():
        if isinstance(value, (int, float, str, bool, np.integer, np.floating)):
            meta[f"param.{key}"] = value
    with open(_sidecar_path(path), "w", newline="\n") as fh:
        for key, value in meta.items():
            if isinstance(value, (float, np.floating)):
                value = repr(float(value))
            fh.write(f"{key}={value}\n")


def _parse_meta_value(text: str):
    for caster in (int, float):
        try:
            return caster(text)
        except ValueError:
            continue
    return text


def load_table(path) -> Dataset:
    """Read a point table; restores metadata from the sidecar when present.

    The header row is auto-detected (any non-numeric cell in the first row).
    Ragged rows and non-numeric cells raise ParseError with 1-based row and
    column positions.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise InvalidInput(f"dataset file not found: {path}") from None
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ParseError(f"{path}: file is empty")

    def try_parse(cells):
        return all(_is_number(c) for c in cells)

    first_cells = [c.strip() for c in lines[0].split(",")]
    has_header = not try_parse(first_cells)
    data_lines = lines[1:] if has_header else lines
    if not data_lines:
        raise ParseError(f"{path}: no data rows")

    width = len(data_lines[0].split(","))
    rows = np.empty((len(data_lines), width))
    for i, line in enumerate(data_lines):
        cells = line.split(",")
        row_no = i + 2 if has_header else i + 1
        if len(cells) != width:
            raise ParseError(
                f"{path}: row {row_no} has {len(cells)} cells, expected {width}",
                row=row_no,
            )
        for j, cell in enumerate(cells):
            try:
                rows[i, j] = float(cell)
            except ValueError:
                raise ParseError(
                    f"{path}: non-numeric cell at row {row_no}, column {j + 1}: "
                    f"{cell.strip()!r}",
                    row=row_no, column=j + 1,
                ) from None

    name = path.stem
    true_dim = None
    params: dict = {}
    sidecar = _sidecar_path(path)
    if sidecar.exists():
        for line in sidecar.read_text(encoding="utf-8").splitlines():
            if "=" not in line:
                continue
            key, _, value = line.partition("=")
            value = _parse_meta_value(value.strip())
            key = key.strip()
            if key == "name":
                name = str(value)
            elif key == "true_dim":
                true_dim = int(value)
            elif key.startswith("param."):
                params[key[len("param."):]] = value
    return Dataset(rows, name=name, true_dim=true_dim, generator_params=params)


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True
