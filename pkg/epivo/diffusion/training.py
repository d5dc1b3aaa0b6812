"""
Supervised training of the MLP denoiser on labeled pairs.

The objective is the refinement loss
    F₂ = w_samp·L_samp + w_ddpm·L_ddpm + w_rec·L_rec
where L_ddpm is the mean squared noise error per coordinate, L_rec the mean
squared error of the reconstructed clean offset, and L_samp the mean Sampson
distance (px²) of the reconstructed matches under the true pose.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from epivo.core.errors import (
    ConfigError,
    DataError,
    DegenerateTranslationError,
    TrainingDivergedError,
)
from epivo.core.logger import logger
from epivo.diffusion.network import MLPDenoiser, static_features
from epivo.diffusion.process import CoordinateFrame
from epivo.diffusion.schedule import NoiseSchedule
from epivo.geometry.epipolar import fundamental_from_pose
from epivo.matching.types import correspondence_arrays, descriptor_distances
from epivo.pose.solvers import pixel_fundamental
from epivo.settings import diffusion_defaults, training_defaults
from epivo.simulation.noise import fit_isotropic_sigma
from epivo.simulation.pseudo_gt import LabeledPair

DATA_STD_FLOOR = 1e-3


@dataclass(frozen=True)
class RefinementLossWeights:
    sampson: float = 0.05
    ddpm: float = 1.0
    reconstruction: float = 0.1

    def __post_init__(self) -> None:
        for name in ("sampson", "ddpm", "reconstruction"):
            if getattr(self, name) < 0:
                raise ConfigError(f"Loss weight '{name}' must be >= 0")


@dataclass(frozen=True)
class TrainingConfig:
    epochs: int = training_defaults.REFINER_EPOCHS
    learning_rate: float = training_defaults.LEARNING_RATE
    batch_size: int = training_defaults.BATCH_SIZE
    weights: RefinementLossWeights = field(default_factory=RefinementLossWeights)
    jitter_std: float = 0.0
    hidden: int = diffusion_defaults.HIDDEN_WIDTH
    seed: int = 0

    def __post_init__(self) -> None:
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.jitter_std < 0:
            raise ConfigError(f"jitter_std must be >= 0, got {self.jitter_std}")


@dataclass(frozen=True, eq=False)
class TrainingSet:
    """Row-stacked correspondences from all labeled pairs."""

    static: np.ndarray
    k0: np.ndarray
    anchors: np.ndarray
    fundamentals: np.ndarray
    offset_scale: float
    data_std: float

    @property
    def n(self) -> int:
        return len(self.k0)


def _offset_scale(dataset: Sequence[LabeledPair]) -> float:
    displacements = []
    for pair in dataset:
        n1, n2 = correspondence_arrays(pair.noisy)
        c1, c2 = correspondence_arrays(pair.clean)
        displacements.extend([n1 - c1, n2 - c2])
    sigma = fit_isotropic_sigma(np.concatenate(displacements, axis=0)).sigma
    if sigma <= 1e-9:
        logger.debug("Noise-free training data; offsets measured in pixels")
        return 1.0
    return sigma


def build_training_set(
    dataset: Sequence[LabeledPair], offset_scale: Optional[float] = None
) -> TrainingSet:
    """Stack pairs into rows; the conditioning F is re-estimated from the noisy matches."""
    pairs = [pair for pair in dataset if pair.noisy]
    if not pairs:
        raise DataError("Denoiser training needs at least one non-empty labeled pair")
    scale = offset_scale if offset_scale is not None else _offset_scale(pairs)

    static, k0, anchors, fundamentals = [], [], [], []
    for pair in pairs:
        n1, n2 = correspondence_arrays(pair.noisy)
        g1, g2 = correspondence_arrays(pair.pseudo_gt)
        pair_anchors = np.hstack([n1, n2])
        try:
            f_true = fundamental_from_pose(pair.true_pose, pair.cam).matrix
        except DegenerateTranslationError:
            # zero F flags every row as degenerate in the Sampson term
            f_true = np.zeros((3, 3))
        f_cond = pixel_fundamental(n1, n2, pair.cam)
        frame = CoordinateFrame.for_camera(pair.cam, scale)
        distances = descriptor_distances(pair.noisy)
        static.append(static_features(pair_anchors, frame, distances, f_cond))
        k0.append((np.hstack([g1, g2]) - pair_anchors) / scale)
        anchors.append(pair_anchors)
        fundamentals.append(np.broadcast_to(f_true, (len(n1), 3, 3)))

    k0_all = np.concatenate(k0, axis=0)
    data_std = max(float(np.sqrt(np.mean(k0_all**2))), DATA_STD_FLOOR)
    return TrainingSet(
        static=np.concatenate(static, axis=0),
        k0=k0_all,
        anchors=np.concatenate(anchors, axis=0),
        fundamentals=np.concatenate(fundamentals, axis=0),
        offset_scale=scale,
        data_std=data_std,
    )


@dataclass(frozen=True, eq=False)
class TrainingBatch:
    static: np.ndarray
    k0: np.ndarray
    kt: np.ndarray
    eps: np.ndarray
    t: np.ndarray
    alpha_bar: np.ndarray
    anchors: np.ndarray
    fundamentals: np.ndarray
    offset_scale: float
    steps: int


def sample_batch(
    data: TrainingSet,
    rows: np.ndarray,
    schedule: NoiseSchedule,
    rng: np.random.Generator,
    jitter_std: float = 0.0,
) -> TrainingBatch:
    """Uniform t in 1..T per row, forward-diffused offsets."""
    t = rng.integers(1, schedule.T + 1, size=len(rows))
    eps = rng.standard_normal((len(rows), 4))
    alpha_bar = schedule.alpha_bars[t]
    k0 = data.k0[rows]
    kt = np.sqrt(alpha_bar)[:, None] * k0 + np.sqrt(1.0 - alpha_bar)[:, None] * eps
    if jitter_std > 0:
        kt = kt + jitter_std * rng.standard_normal(kt.shape)
    return TrainingBatch(
        static=data.static[rows],
        k0=k0,
        kt=kt,
        eps=eps,
        t=t,
        alpha_bar=alpha_bar,
        anchors=data.anchors[rows],
        fundamentals=data.fundamentals[rows],
        offset_scale=data.offset_scale,
        steps=schedule.T,
    )


def sampson_with_gradient(
    fundamentals: np.ndarray, points: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Sampson distances of (u1, v1, u2, v2) rows under per-row F, and d/d(row).

    Rows with a vanishing denominator contribute zero value and gradient.
    """
    ones = np.ones((len(points), 1))
    h1 = np.hstack([points[:, :2], ones])
    h2 = np.hstack([points[:, 2:], ones])
    f = fundamentals
    fx1 = np.einsum("mij,mj->mi", f, h1)
    ftx2 = np.einsum("mji,mj->mi", f, h2)
    r = np.einsum("mi,mi->m", h2, fx1)
    denom = fx1[:, 0] ** 2 + fx1[:, 1] ** 2 + ftx2[:, 0] ** 2 + ftx2[:, 1] ** 2

    dr = np.column_stack([ftx2[:, 0], ftx2[:, 1], fx1[:, 0], fx1[:, 1]])
    dd = 2.0 * np.column_stack(
        [
            fx1[:, 0] * f[:, 0, 0] + fx1[:, 1] * f[:, 1, 0],
            fx1[:, 0] * f[:, 0, 1] + fx1[:, 1] * f[:, 1, 1],
            ftx2[:, 0] * f[:, 0, 0] + ftx2[:, 1] * f[:, 0, 1],
            ftx2[:, 0] * f[:, 1, 0] + ftx2[:, 1] * f[:, 1, 1],
        ]
    )
    valid = denom > 1e-24
    safe = np.where(valid, denom, 1.0)
    values = np.where(valid, r**2 / safe, 0.0)
    grad = (2.0 * r[:, None] * dr * safe[:, None] - (r**2)[:, None] * dd) / (safe**2)[:, None]
    grad[~valid] = 0.0
    return values, grad


@dataclass(frozen=True)
class LossBreakdown:
    total: float
    sampson: float
    ddpm: float
    reconstruction: float


def loss_and_gradients(
    model: MLPDenoiser, batch: TrainingBatch, weights: RefinementLossWeights
) -> tuple[LossBreakdown, dict[str, np.ndarray]]:
    """F₂ on one batch and its gradient for every network parameter."""
    m = len(batch.kt)
    count = m * 4
    inputs = model.inputs(batch.static, batch.kt, batch.t, batch.alpha_bar, batch.steps)
    cache = model.forward(inputs, batch.kt, batch.alpha_bar)
    eps_hat = cache.eps_hat

    sqrt_ab = np.sqrt(batch.alpha_bar)[:, None]
    sqrt_v = np.sqrt(1.0 - batch.alpha_bar)[:, None]
    x0 = (batch.kt - sqrt_v * eps_hat) / sqrt_ab
    dx0 = -sqrt_v / sqrt_ab

    eps_err = eps_hat - batch.eps
    rec_err = x0 - batch.k0
    pixels = batch.anchors + x0 * batch.offset_scale
    samp, samp_grad = sampson_with_gradient(batch.fundamentals, pixels)

    l_ddpm = float(np.sum(eps_err**2) / count)
    l_rec = float(np.sum(rec_err**2) / count)
    l_samp = float(np.mean(samp))
    total = weights.sampson * l_samp + weights.ddpm * l_ddpm + weights.reconstruction * l_rec

    grad_eps = (
        weights.ddpm * 2.0 * eps_err / count
        + weights.reconstruction * 2.0 * rec_err / count * dx0
        + weights.sampson * samp_grad / m * batch.offset_scale * dx0
    )
    grads = model.backward(cache, grad_eps)
    return LossBreakdown(total, l_samp, l_ddpm, l_rec), grads


class Adam:
    """Adam over a dict of parameter arrays."""

    def __init__(
        self, learning_rate: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8
    ):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.step_count += 1
        b1, b2 = self.beta1, self.beta2
        for name, grad in grads.items():
            m = self._m.get(name, np.zeros_like(grad))
            v = self._v.get(name, np.zeros_like(grad))
            m = b1 * m + (1.0 - b1) * grad
            v = b2 * v + (1.0 - b2) * grad**2
            self._m[name], self._v[name] = m, v
            m_hat = m / (1.0 - b1**self.step_count)
            v_hat = v / (1.0 - b2**self.step_count)
            params[name] = params[name] - self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)


@dataclass(frozen=True, eq=False)
class TrainingResult:
    denoiser: MLPDenoiser
    loss_trace: tuple[float, ...]
    ddpm_trace: tuple[float, ...]

    def smoothed(self, window: int = 10) -> np.ndarray:
        """Trailing moving average of the per-epoch loss."""
        trace = np.asarray(self.loss_trace)
        window = max(1, min(window, len(trace)))
        cumsum = np.cumsum(np.concatenate([[0.0], trace]))
        return (cumsum[window:] - cumsum[:-window]) / window


def train_denoiser(
    dataset: Sequence[LabeledPair],
    schedule: NoiseSchedule,
    config: TrainingConfig = TrainingConfig(),
) -> TrainingResult:
    """Minibatch Adam on F₂ over a seeded, deterministic batch order."""
    if not dataset:
        raise DataError("Denoiser training needs a non-empty dataset")
    data = build_training_set(dataset)
    rng = np.random.default_rng(config.seed)
    model = MLPDenoiser.initialize(
        config.seed,
        hidden=config.hidden,
        offset_scale=data.offset_scale,
        data_std=data.data_std,
        schedule=schedule,
    )
    optimizer = Adam(config.learning_rate)
    logger.info(
        f"Training denoiser on {data.n} correspondence(s) from {len(dataset)} pair(s), "
        f"{config.epochs} epoch(s), offset scale {data.offset_scale:.4g} px"
    )

    loss_trace: list[float] = []
    ddpm_trace: list[float] = []
    for epoch in range(config.epochs):
        order = rng.permutation(data.n)
        epoch_total = epoch_ddpm = 0.0
        for start in range(0, data.n, config.batch_size):
            rows = order[start : start + config.batch_size]
            batch = sample_batch(data, rows, schedule, rng, config.jitter_std)
            losses, grads = loss_and_gradients(model, batch, config.weights)
            finite = all(np.all(np.isfinite(g)) for g in grads.values())
            if not np.isfinite(losses.total) or not finite:
                raise TrainingDivergedError(
                    f"Denoiser loss diverged at epoch {epoch + 1}", loss_trace + [losses.total]
                )
            optimizer.step(model.params, grads)
            epoch_total += losses.total * len(rows)
            epoch_ddpm += losses.ddpm * len(rows)
        loss_trace.append(epoch_total / data.n)
        ddpm_trace.append(epoch_ddpm / data.n)
        if (epoch + 1) % 25 == 0 or epoch + 1 == config.epochs:
            logger.debug(
                f"Epoch {epoch + 1}/{config.epochs}: "
                f"F2 {loss_trace[-1]:.5f}, ddpm {ddpm_trace[-1]:.5f}"
            )

    if loss_trace:
        logger.info(
            f"Denoiser trained: final F2 {loss_trace[-1]:.5f}, prior std {model.prior_std:.4g}"
        )
    return TrainingResult(
        denoiser=model, loss_trace=tuple(loss_trace), ddpm_trace=tuple(ddpm_trace)
    )
