"""Variance schedule for keypoint diffusion."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from epivo.core.errors import ConfigError
from epivo.settings import diffusion_defaults


@dataclass(frozen=True, eq=False)
class NoiseSchedule:
    """betas[t-1] = βₜ for t = 1..T; ᾱ₀ = 1 by convention."""

    betas: np.ndarray

    def __post_init__(self) -> None:
        betas = np.array(self.betas, dtype=np.float64).reshape(-1)
        if len(betas) < 1:
            raise ConfigError("Noise schedule needs at least one step")
        if not np.all((betas > 0) & (betas < 1)):
            raise ConfigError("Every beta must lie in (0, 1)")
        betas.setflags(write=False)
        object.__setattr__(self, "betas", betas)
        alpha_bars = np.concatenate([[1.0], np.cumprod(1.0 - betas)])
        alpha_bars.setflags(write=False)
        object.__setattr__(self, "_alpha_bars", alpha_bars)

    @classmethod
    def linear(
        cls,
        steps: int = diffusion_defaults.STEPS,
        beta_start: float = diffusion_defaults.BETA_START,
        beta_end: float = diffusion_defaults.BETA_END,
    ) -> "NoiseSchedule":
        if steps < 1:
            raise ConfigError(f"Schedule needs T >= 1, got {steps}")
        return cls(np.linspace(beta_start, beta_end, steps))

    @property
    def T(self) -> int:
        return len(self.betas)

    @property
    def alpha_bars(self) -> np.ndarray:
        """ᾱ for t = 0..T (index 0 is 1)."""
        return self._alpha_bars

    def check_step(self, t: int, *, allow_zero: bool = True) -> None:
        low = 0 if allow_zero else 1
        if not low <= t <= self.T:
            raise ConfigError(f"Diffusion step {t} outside [{low}, {self.T}]")

    def beta(self, t: int) -> float:
        self.check_step(t, allow_zero=False)
        return float(self.betas[t - 1])

    def alpha(self, t: int) -> float:
        return 1.0 - self.beta(t)

    def alpha_bar(self, t: int) -> float:
        self.check_step(t)
        return float(self._alpha_bars[t])

    def posterior_std(self, t: int) -> float:
        """√β̃ₜ with β̃ₜ = (1 − ᾱₜ₋₁)/(1 − ᾱₜ)·βₜ."""
        beta = self.beta(t)
        return float(np.sqrt((1.0 - self._alpha_bars[t - 1]) / (1.0 - self._alpha_bars[t]) * beta))

    def snr(self, t: int) -> float:
        ab = self.alpha_bar(t)
        return float(np.sqrt(ab / (1.0 - ab)))

    def to_dict(self) -> dict[str, Any]:
        return {"betas": [float(b) for b in self.betas]}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "NoiseSchedule":
        return cls(np.asarray(data["betas"], dtype=np.float64))
