"""
Forward corruption, reverse denoising steps, and partial-diffusion refinement
of matched keypoints.

Refinement diffuses per-correspondence offsets (x1, x2 displacements, in
units of ``CoordinateFrame.offset_scale``) on top of fixed anchors, which are
the input matches.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Protocol, Sequence, Union

import numpy as np

from epivo.core.errors import ConfigError, DataError
from epivo.core.logger import logger
from epivo.diffusion.schedule import NoiseSchedule
from epivo.geometry.types import CameraModel
from epivo.matching.types import (
    Correspondence,
    correspondence_arrays,
    descriptor_distances,
    with_points,
)

SeedLike = Union[int, np.random.SeedSequence]


@dataclass(frozen=True, eq=False)
class KeypointState:
    """Offsets (N, 4) as (dx1, dy1, dx2, dy2) rows at diffusion step ``t``."""

    coords: np.ndarray
    t: int

    def __post_init__(self) -> None:
        coords = np.array(self.coords, dtype=np.float64)
        if coords.ndim == 1 and coords.size % 4 == 0:
            coords = coords.reshape(-1, 4)
        if coords.ndim != 2 or coords.shape[1] != 4 or len(coords) < 1:
            raise DataError(f"KeypointState needs shape (N, 4) with N >= 1, got {coords.shape}")
        if not np.all(np.isfinite(coords)):
            raise DataError("KeypointState coordinates must be finite")
        if self.t < 0:
            raise ConfigError(f"Diffusion step must be >= 0, got {self.t}")
        object.__setattr__(self, "coords", coords)

    @property
    def n(self) -> int:
        return len(self.coords)

    @property
    def flat(self) -> np.ndarray:
        """The 4N-vector of concatenated (x1, x2) pairs."""
        return self.coords.reshape(-1)

    def at(self, coords: np.ndarray, t: int) -> "KeypointState":
        return KeypointState(coords, t)


@dataclass(frozen=True)
class CoordinateFrame:
    """Maps pixels to [-1, 1] by image size; offsets are measured in ``offset_scale`` px."""

    width: float
    height: float
    offset_scale: float = 1.0

    def __post_init__(self) -> None:
        if not (self.width > 0 and self.height > 0):
            raise ConfigError(f"Image size must be positive, got {self.width}x{self.height}")
        if not (np.isfinite(self.offset_scale) and self.offset_scale > 0):
            raise ConfigError(f"Offset scale must be positive, got {self.offset_scale}")

    @classmethod
    def for_camera(cls, cam: CameraModel, offset_scale: float = 1.0) -> "CoordinateFrame":
        return cls(width=float(cam.width), height=float(cam.height), offset_scale=offset_scale)

    @property
    def _size(self) -> np.ndarray:
        return np.array([self.width, self.height, self.width, self.height])

    def normalize(self, pixels: np.ndarray) -> np.ndarray:
        return 2.0 * np.asarray(pixels, dtype=np.float64) / self._size - 1.0

    def denormalize(self, normalized: np.ndarray) -> np.ndarray:
        return (np.asarray(normalized, dtype=np.float64) + 1.0) * 0.5 * self._size


@dataclass(frozen=True, eq=False)
class DenoiserContext:
    """Per-pair conditioning handed to every denoiser call.

    ``anchors`` are the input matches in pixels, one (u1, v1, u2, v2) row each.
    ``fundamental`` is an optional pose-free epipolar estimate (pixel F) that
    learned denoisers may condition on.
    """

    anchors: np.ndarray
    frame: CoordinateFrame
    schedule: NoiseSchedule
    descriptor_distance: np.ndarray
    fundamental: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        anchors = np.asarray(self.anchors, dtype=np.float64).reshape(-1, 4)
        distances = np.asarray(self.descriptor_distance, dtype=np.float64).reshape(-1)
        if len(distances) != len(anchors):
            raise DataError("Context needs one descriptor distance per anchor")
        object.__setattr__(self, "anchors", anchors)
        object.__setattr__(self, "descriptor_distance", distances)

    @property
    def normalized_anchors(self) -> np.ndarray:
        return self.frame.normalize(self.anchors)

    def to_pixels(self, offsets: np.ndarray) -> np.ndarray:
        return self.anchors + np.asarray(offsets).reshape(-1, 4) * self.frame.offset_scale

    def to_offsets(self, pixels: np.ndarray) -> np.ndarray:
        return (np.asarray(pixels).reshape(-1, 4) - self.anchors) / self.frame.offset_scale

    def subset(self, rows: np.ndarray) -> "DenoiserContext":
        return DenoiserContext(
            anchors=self.anchors[rows],
            frame=self.frame,
            schedule=self.schedule,
            descriptor_distance=self.descriptor_distance[rows],
            fundamental=self.fundamental,
        )


class Denoiser(Protocol):
    """Predicts the noise ε̂ in a state; output shape equals ``state.coords.shape``."""

    offset_scale: float

    def predict(self, state: KeypointState, context: DenoiserContext) -> np.ndarray: ...


def make_context(
    matches: Sequence[Correspondence],
    cam: CameraModel,
    schedule: NoiseSchedule,
    offset_scale: float = 1.0,
    fundamental: Optional[np.ndarray] = None,
) -> DenoiserContext:
    x1, x2 = correspondence_arrays(matches)
    return DenoiserContext(
        anchors=np.hstack([x1, x2]),
        frame=CoordinateFrame.for_camera(cam, offset_scale),
        schedule=schedule,
        descriptor_distance=descriptor_distances(matches),
        fundamental=fundamental,
    )


def forward_diffuse(
    k0: KeypointState,
    t: int,
    schedule: NoiseSchedule,
    seed: SeedLike,
    *,
    jitter_std: float = 0.0,
) -> tuple[KeypointState, np.ndarray]:
    """kₜ = √ᾱₜ k₀ + √(1 − ᾱₜ) ε, plus optional N(0, jitter_std²) jitter.

    Returns the corrupted state and the exact ε drawn. t = 0 returns k₀.
    """
    schedule.check_step(t)
    if jitter_std < 0:
        raise ConfigError(f"Jitter std must be >= 0, got {jitter_std}")
    rng = np.random.default_rng(seed)
    eps = rng.standard_normal(k0.coords.shape)
    alpha_bar = schedule.alpha_bar(t)
    kt = np.sqrt(alpha_bar) * k0.coords + np.sqrt(1.0 - alpha_bar) * eps
    if jitter_std > 0:
        kt = kt + jitter_std * rng.standard_normal(k0.coords.shape)
    return KeypointState(kt, t), eps


def predicted_clean(
    state: KeypointState, eps_hat: np.ndarray, schedule: NoiseSchedule
) -> np.ndarray:
    """x̂₀ = (kₜ − √(1 − ᾱₜ) ε̂) / √ᾱₜ."""
    alpha_bar = schedule.alpha_bar(state.t)
    return (state.coords - np.sqrt(1.0 - alpha_bar) * eps_hat) / np.sqrt(alpha_bar)


def reverse_step(
    state: KeypointState,
    denoiser: Denoiser,
    schedule: NoiseSchedule,
    seed: SeedLike,
    context: DenoiserContext,
    *,
    stochastic: bool = True,
) -> KeypointState:
    """One DDPM ancestral step from t to t − 1.

    μ = (kₜ − βₜ/√(1 − ᾱₜ)·ε̂)/√αₜ; for t > 1 and ``stochastic`` the
    posterior std √β̃ₜ times a seeded Gaussian is added.
    """
    t = state.t
    if t < 1:
        raise ConfigError("reverse_step needs state.t >= 1")
    schedule.check_step(t, allow_zero=False)
    eps_hat = np.asarray(denoiser.predict(state, context), dtype=np.float64)
    if eps_hat.shape != state.coords.shape:
        raise DataError(f"Denoiser returned shape {eps_hat.shape}, expected {state.coords.shape}")

    beta = schedule.beta(t)
    shrink = beta / np.sqrt(1.0 - schedule.alpha_bar(t))
    mean = (state.coords - shrink * eps_hat) / np.sqrt(1.0 - beta)
    if stochastic and t > 1:
        z = np.random.default_rng(seed).standard_normal(mean.shape)
        mean = mean + schedule.posterior_std(t) * z
    return KeypointState(mean, t - 1)


def refine(
    noisy: Sequence[Correspondence],
    denoiser: Denoiser,
    schedule: NoiseSchedule,
    start_t: Optional[int] = None,
    seed: int = 0,
    *,
    cam: CameraModel,
    fundamental: Optional[np.ndarray] = None,
    stochastic: bool = True,
) -> list[Correspondence]:
    """Run the reverse chain from ``start_t`` (default T // 4) to 0 on zero offsets.

    Count, order, confidences and descriptor distances are preserved.
    """
    if not noisy:
        return []
    start = schedule.T // 4 if start_t is None else int(start_t)
    schedule.check_step(start)
    if start == 0:
        return list(noisy)

    context = make_context(noisy, cam, schedule, denoiser.offset_scale, fundamental)
    state = KeypointState(np.zeros((len(noisy), 4)), start)
    while state.t > 0:
        state = reverse_step(
            state,
            denoiser,
            schedule,
            np.random.SeedSequence([int(seed), state.t]),
            context,
            stochastic=stochastic,
        )
    pixels = context.to_pixels(state.coords)
    logger.debug(
        f"Refined {len(noisy)} match(es) from t={start}; "
        f"mean shift {np.mean(np.abs(state.coords)) * context.frame.offset_scale:.3f} px"
    )
    return with_points(noisy, pixels[:, :2], pixels[:, 2:])
