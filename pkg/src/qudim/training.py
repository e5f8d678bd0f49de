"""Gradient-descent training of a matrix configuration on a data set.

The loss over a batch X is

    L(A) = sum_x ||A(psi_0(x)) - x||^2 + w * sigma^2(psi_0(x)),

the squared distance between each point and the position of its quasi-coherent
state, plus an optional fluctuation term weighted by w in [0, 1]. At w = 1 the
loss equals twice the summed ground energies.

The analytic gradient has an explicit part (the operators appearing inside the
expectation values) and an implicit part from the dependence of psi_0(x) on the
operators, handled with first-order eigenvector perturbation through the
excited states; spectral gaps below ``degeneracy_floor`` are skipped.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateBatch, InvalidInput, TrainingDiverged
from .linalg import hermitize
from .model import (
    MatrixConfiguration,
    degenerate_gap_tolerance,
    ground_batch,
    moments_batch,
)

__all__ = [
    "TrainConfig",
    "TrainingReport",
    "init_config",
    "loss",
    "loss_gradient",
    "train",
]

OPTIMIZERS = ("plain_gd", "momentum", "adaptive_moments")
FULL_BATCH_LIMIT = 4096  # above this, auto batching switches to minibatches
AUTO_BATCH_SIZE = 1024


@dataclass
class TrainConfig:
    """Hyperparameters of one training run. Defaults follow the package's
    benchmark setup: adaptive moments, lr 1e-2, full batches at desk scale."""

    hilbert_dim: int
    fluctuation_weight: float = 0.0
    learning_rate: float = 1e-2
    epochs: int = 300
    batch_size: int | str = "auto"  # "auto" | "full" | positive int
    seed: int = 0
    degeneracy_floor: float = 1e-8
    optimizer: str = "adaptive_moments"
    momentum_beta: float = 0.9
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    init_scale: float | str = "auto"

    def __post_init__(self):
        if self.hilbert_dim < 2:
            raise InvalidInput("hilbert_dim must be at least 2")
        if not 0.0 <= self.fluctuation_weight <= 1.0:
            raise InvalidInput("fluctuation_weight must lie in [0, 1]")
        if self.learning_rate <= 0:
            raise InvalidInput("learning_rate must be positive")
        if self.epochs < 1:
            raise InvalidInput("epochs must be a positive integer")
        if self.optimizer not in OPTIMIZERS:
            raise InvalidInput(
                f"unknown optimizer {self.optimizer!r}; choose from {OPTIMIZERS}"
            )
        if isinstance(self.batch_size, str):
            if self.batch_size not in ("auto", "full"):
                raise InvalidInput("batch_size must be 'auto', 'full' or an int")
        elif self.batch_size < 1:
            raise InvalidInput("batch_size must be positive")
        if isinstance(self.init_scale, str):
            if self.init_scale != "auto":
                raise InvalidInput("init_scale must be 'auto' or a positive real")
        elif self.init_scale <= 0:
            raise InvalidInput("init_scale must be positive")


@dataclass
class TrainingReport:
    loss_history: list[float] = field(default_factory=list)
    final_loss: float = float("nan")
    final_mean_energy: float = float("nan")
    degenerate_ground_count: int = 0
    wall_time_seconds: float = 0.0


def _as_batch(batch) -> np.ndarray:
    pts = np.asarray(getattr(batch, "points", batch), dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[None, :]
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise InvalidInput(f"expected a nonempty (B, D) batch, got {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise InvalidInput("batch contains non-finite entries")
    return pts


def init_config(feature_dim: int, hilbert_dim: int, data, seed: int,
                init_scale: float | str = "auto") -> MatrixConfiguration:
    """Seeded random Hermitian initialization.

    Each operator starts from a Gaussian Hermitian matrix. With
    ``init_scale="auto"`` it is then affinely mapped so its eigenvalue range
    equals [mean_k - 2 std_k, mean_k + 2 std_k] of feature k, placing the
    reachable positions around the data. A numeric ``init_scale`` skips the
    data-driven mapping and just scales the raw Gaussian.
    """
    if hilbert_dim < 2:
        raise InvalidInput("hilbert_dim must be at least 2")
    rng = np.random.default_rng(seed)
    auto = isinstance(init_scale, str)
    if auto:
        pts = _as_batch(data)
        if pts.shape[1] != feature_dim:
            raise InvalidInput(
                f"data has {pts.shape[1]} features, expected {feature_dim}"
            )
        means = pts.mean(axis=0)
        stds = pts.std(axis=0)
    ops = np.empty((feature_dim, hilbert_dim, hilbert_dim), dtype=np.complex128)
    for k in range(feature_dim):
        raw = rng.standard_normal((hilbert_dim, hilbert_dim))
        raw = raw + 1j * rng.standard_normal((hilbert_dim, hilbert_dim))
        g = 0.5 * (raw + raw.conj().T)
        if not auto:
            ops[k] = init_scale * g
            continue
        lo, hi = means[k] - 2.0 * stds[k], means[k] + 2.0 * stds[k]
        evals = np.linalg.eigvalsh(g)
        span = evals[-1] - evals[0]
        if hi - lo < 1e-12 or span < 1e-12:
            ops[k] = 0.5 * (lo + hi) * np.eye(hilbert_dim)
        else:
            alpha = (hi - lo) / span
            ops[k] = alpha * (g - evals[0] * np.eye(hilbert_dim)) + lo * np.eye(hilbert_dim)
    return MatrixConfiguration(ops)


def _loss_ops(operators: np.ndarray, points: np.ndarray, w: float) -> float:
    _, vecs = ground_batch(operators, points)
    pos, fluct = moments_batch(operators, vecs[:, :, 0])
    delta = pos - points
    return float(np.einsum("bk,bk->", delta, delta) + w * fluct.sum())


def loss(config: MatrixConfiguration, batch, w: float = 0.0) -> float:
    """Summed loss over the batch; equals 2 * sum of ground energies at w=1."""
    points = _as_batch(batch)
    if points.shape[1] != config.feature_dim:
        raise InvalidInput("batch feature count does not match configuration")
    if w < 0:
        raise InvalidInput("fluctuation weight must be nonnegative")
    return _loss_ops(config.operators, points, w)


def _loss_gradient_ops(operators: np.ndarray, points: np.ndarray, w: float,
                       degeneracy_floor: float) -> np.ndarray:
    evals, vecs = ground_batch(operators, points)
    psi = vecs[:, :, 0]
    pos, _ = moments_batch(operators, psi)
    resid = pos - points

    gaps = evals - evals[:, :1]
    if np.all(gaps[:, 1] < degeneracy_floor):
        raise DegenerateBatch(
            "every batch point has a degenerate ground state; "
            "gradient is undefined"
        )

    # response vector chi = sum_{n>0} <psi_n|C|psi_0> / (E_0 - E_n) psi_n,
    # where C collects the state-derivative of the loss integrand
    second = np.einsum("kij,kjl->il", operators, operators)
    coef = 2.0 * resid - 2.0 * w * pos  # (B, D)
    cmat = np.einsum("bk,kij->bij", coef, operators)
    if w != 0.0:
        cmat = cmat + w * second[None, :, :]
    cpsi = np.einsum("bij,bj->bi", cmat, psi)
    coeffs = np.einsum("bin,bi->bn", vecs.conj(), cpsi)
    weights = np.zeros_like(gaps)
    open_gap = gaps >= degeneracy_floor  # column 0 has gap 0: always skipped
    weights[open_gap] = -1.0 / gaps[open_gap]
    chi = np.einsum("bin,bn->bi", vecs, coeffs * weights)

    # explicit part: coefficients of the ground projector plus, at w > 0,
    # the anticommutator with the summed projector
    grad = np.einsum("bm,bi,bj->mij", coef, psi, psi.conj())
    if w != 0.0:
        pbar = np.einsum("bi,bj->ij", psi, psi.conj())
        grad += w * (np.einsum("mik,kj->mij", operators, pbar)
                     + np.einsum("ik,mkj->mij", pbar, operators))

    # implicit part through the Hamiltonian perturbation
    smat = np.einsum("bi,bj->bij", chi, psi.conj())
    smat = smat + np.conj(np.swapaxes(smat, 1, 2))
    stot = smat.sum(axis=0)
    grad += 0.5 * (np.einsum("mik,kj->mij", operators, stot)
                   + np.einsum("ik,mkj->mij", stot, operators))
    grad -= np.einsum("bm,bij->mij", points, smat)
    return hermitize(grad)


def loss_gradient(config: MatrixConfiguration, batch, w: float = 0.0,
                  degeneracy_floor: float = 1e-8) -> np.ndarray:
    """Gradient of :func:`loss` with respect to each operator, as a (D, N, N)
    Hermitian stack. Perturbation terms across spectral gaps smaller than
    ``degeneracy_floor`` are skipped; raises DegenerateBatch when every point
    in the batch is degenerate."""
    points = _as_batch(batch)
    if points.shape[1] != config.feature_dim:
        raise InvalidInput("batch feature count does not match configuration")
    return _loss_gradient_ops(config.operators, points, w, degeneracy_floor)


# ---------------------------------------------------------------------------
# Optimizers over stacks of Hermitian matrices
# ---------------------------------------------------------------------------

class _PlainGD:
    def __init__(self, lr):
        self.lr = lr

    def step(self, params, grad):
        return params - self.lr * grad


class _Momentum:
    def __init__(self, lr, beta):
        self.lr = lr
        self.beta = beta
        self.velocity = None

    def step(self, params, grad):
        if self.velocity is None:
            self.velocity = np.zeros_like(grad)
        self.velocity = self.beta * self.velocity + grad
        return params - self.lr * self.velocity


class _AdaptiveMoments:
    """Adam on complex matrix entries; the second moment tracks squared
    magnitudes, which keeps Hermitian iterates Hermitian."""

    def __init__(self, lr, beta1, beta2, eps):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = None
        self.v = None

    def step(self, params, grad):
        if self.m is None:
            self.m = np.zeros_like(grad)
            self.v = np.zeros(grad.shape, dtype=np.float64)
        self.step_count += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * np.abs(grad) ** 2
        m_hat = self.m / (1.0 - self.beta1**self.step_count)
        v_hat = self.v / (1.0 - self.beta2**self.step_count)
        return params - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def _make_optimizer(cfg: TrainConfig):
    if cfg.optimizer == "plain_gd":
        return _PlainGD(cfg.learning_rate)
    if cfg.optimizer == "momentum":
        return _Momentum(cfg.learning_rate, cfg.momentum_beta)
    return _AdaptiveMoments(cfg.learning_rate, cfg.adam_beta1,
                            cfg.adam_beta2, cfg.adam_eps)


def _resolve_batch_size(batch_size, n_points: int) -> int:
    if batch_size == "full":
        return n_points
    if batch_size == "auto":
        return n_points if n_points <= FULL_BATCH_LIMIT else AUTO_BATCH_SIZE
    return min(int(batch_size), n_points)


def train(data, cfg: TrainConfig) -> tuple[MatrixConfiguration, TrainingReport]:
    """Run the training loop and return the learned configuration.

    Each epoch recomputes the quasi-coherent states of the batch, takes one
    optimizer step per batch on the mean per-point gradient, re-Hermitizes,
    and records the full-data loss. Deterministic for a fixed seed. Raises
    TrainingDiverged (carrying the last finite state) if the loss leaves the
    finite range.
    """
    points = _as_batch(data)
    n_points, feature_dim = points.shape
    start = time.perf_counter()

    ops = np.array(
        init_config(feature_dim, cfg.hilbert_dim, points, cfg.seed,
                    cfg.init_scale).operators
    )
    batch = _resolve_batch_size(cfg.batch_size, n_points)
    shuffle_rng = np.random.default_rng([cfg.seed, 1])
    optimizer = _make_optimizer(cfg)
    w = cfg.fluctuation_weight

    history: list[float] = []
    last_finite = ops.copy()

    def diverged(epochs_done: int) -> TrainingDiverged:
        report = TrainingReport(
            loss_history=history,
            final_loss=history[-1] if history else float("nan"),
            wall_time_seconds=time.perf_counter() - start,
        )
        return TrainingDiverged(
            f"loss became non-finite after {epochs_done} epochs",
            config=MatrixConfiguration(last_finite),
            report=report,
        )

    for _ in range(cfg.epochs):
        if batch >= n_points:
            order = np.arange(n_points)
        else:
            order = shuffle_rng.permutation(n_points)
        try:
            # divergence is caught by the explicit finiteness checks below,
            # so intermediate overflow need not warn
            with np.errstate(over="ignore", invalid="ignore"):
                for lo in range(0, n_points, batch):
                    idx = order[lo:lo + batch]
                    grad = _loss_gradient_ops(ops, points[idx], w,
                                              cfg.degeneracy_floor)
                    ops = hermitize(optimizer.step(ops, grad / idx.size))
                    if not np.all(np.isfinite(ops)):
                        raise diverged(len(history))
                current = _loss_ops(ops, points, w)
        except np.linalg.LinAlgError:
            # overflow inside the squared operators poisons the eigensolver
            raise diverged(len(history)) from None
        if not np.isfinite(current):
            raise diverged(len(history))
        history.append(current)
        last_finite = ops.copy()

    evals, _ = ground_batch(ops, points)
    tol = degenerate_gap_tolerance(evals[:, 1])
    degenerate = int(np.sum(evals[:, 1] - evals[:, 0] < tol))
    report = TrainingReport(
        loss_history=history,
        final_loss=history[-1],
        final_mean_energy=float(evals[:, 0].mean()),
        degenerate_ground_count=degenerate,
        wall_time_seconds=time.perf_counter() - start,
    )
    return MatrixConfiguration(ops), report
