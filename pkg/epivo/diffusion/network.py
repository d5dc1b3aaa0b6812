"""
Trainable keypoint denoiser: a two-hidden-layer tanh MLP with hand-written
gradients and a flat-float weights file.

The network predicts a clean-offset prior mean G and the noise estimate is the
Gaussian posterior one, ε̂ = √(1−ᾱ)(kₜ − √ᾱ G) / ((1−ᾱ) + ᾱ s²), with a
learned prior std s. With G = 0 this is the closed-form linear denoiser for
offsets of std s, so an untrained network already beats predicting zero.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from epivo.core.errors import DataError, ParseError
from epivo.core.logger import logger
from epivo.diffusion.process import CoordinateFrame, DenoiserContext, KeypointState
from epivo.diffusion.schedule import NoiseSchedule
from epivo.settings import diffusion_defaults
from epivo.simulation.pseudo_gt import project_pairs_to_lines

MAGIC = "epivo-denoiser"
PARAMETER_ORDER = ("W1", "b1", "W2", "b2", "W3", "b3", "log_prior_std")

STATIC_DIM = 11
STATE_DIM = 4
OUTPUT_DIM = 4


def input_dim(time_dim: int = diffusion_defaults.TIME_EMBED_DIM) -> int:
    return STATIC_DIM + STATE_DIM + time_dim


def time_embedding(
    t: np.ndarray, steps: int, dim: int = diffusion_defaults.TIME_EMBED_DIM
) -> np.ndarray:
    """sin/cos of π·2ᵏ·t/T for k = 0 .. dim/2 − 1."""
    tau = np.asarray(t, dtype=np.float64).reshape(-1, 1) / steps
    freqs = np.pi * 2.0 ** np.arange(dim // 2)
    angles = tau * freqs[None, :]
    return np.concatenate([np.sin(angles), np.cos(angles)], axis=1)


def line_corrections(
    anchors: np.ndarray, fundamental: Optional[np.ndarray], offset_scale: float
) -> np.ndarray:
    """Offsets (in offset units) that move each anchor pair onto the lines of ``fundamental``."""
    if fundamental is None:
        return np.zeros((len(anchors), 4))
    x1, x2, _ = project_pairs_to_lines(fundamental, anchors[:, :2], anchors[:, 2:])
    return (np.hstack([x1, x2]) - anchors) / offset_scale


def static_features(
    anchors: np.ndarray,
    frame: CoordinateFrame,
    descriptor_distance: np.ndarray,
    fundamental: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Per-correspondence inputs that do not change along the reverse chain.

    Columns: normalized anchors (4), flow x2 − x1 (2), epipolar line
    corrections under the conditioning estimate (4), descriptor distance (1).
    """
    anchors = np.asarray(anchors, dtype=np.float64).reshape(-1, 4)
    flow = (anchors[:, 2:] - anchors[:, :2]) / (frame.offset_scale * diffusion_defaults.FLOW_SCALE)
    return np.hstack(
        [
            frame.normalize(anchors),
            flow,
            line_corrections(anchors, fundamental, frame.offset_scale),
            np.asarray(descriptor_distance, dtype=np.float64).reshape(-1, 1),
        ]
    )


@dataclass(frozen=True, eq=False)
class Preconditioning:
    """Per-row scalars of the posterior noise estimate at steps ``t``."""

    alpha_bar: np.ndarray
    data_std: float

    @property
    def input_scale(self) -> np.ndarray:
        """c_in = 1/√((1−ᾱ) + ᾱ σ_data²)."""
        return 1.0 / np.sqrt(1.0 - self.alpha_bar + self.alpha_bar * self.data_std**2)


@dataclass(eq=False)
class ForwardCache:
    inputs: np.ndarray
    h1: np.ndarray
    h2: np.ndarray
    prior_mean: np.ndarray
    denominator: np.ndarray
    kt: np.ndarray
    alpha_bar: np.ndarray
    eps_hat: np.ndarray


@dataclass(eq=False)
class MLPDenoiser:
    """Small fixed-architecture noise regressor.

    Read-only after training; ``predict`` allocates its own buffers and is
    safe to call from several threads.
    """

    params: dict[str, np.ndarray]
    offset_scale: float = 1.0
    data_std: float = 1.0
    schedule: NoiseSchedule = field(default_factory=NoiseSchedule.linear)
    time_dim: int = diffusion_defaults.TIME_EMBED_DIM

    @classmethod
    def initialize(
        cls,
        seed: int,
        *,
        hidden: int = diffusion_defaults.HIDDEN_WIDTH,
        offset_scale: float = 1.0,
        data_std: float = 1.0,
        schedule: Optional[NoiseSchedule] = None,
        time_dim: int = diffusion_defaults.TIME_EMBED_DIM,
    ) -> "MLPDenoiser":
        """LeCun-normal hidden layers; the output layer starts near zero."""
        rng = np.random.default_rng(seed)
        n_in = input_dim(time_dim)
        params = {
            "W1": rng.normal(0.0, 1.0 / np.sqrt(n_in), (n_in, hidden)),
            "b1": np.zeros(hidden),
            "W2": rng.normal(0.0, 1.0 / np.sqrt(hidden), (hidden, hidden)),
            "b2": np.zeros(hidden),
            "W3": rng.normal(0.0, 0.1 / np.sqrt(hidden), (hidden, OUTPUT_DIM)),
            "b3": np.zeros(OUTPUT_DIM),
            "log_prior_std": np.array([np.log(data_std)]),
        }
        return cls(
            params=params,
            offset_scale=offset_scale,
            data_std=data_std,
            schedule=schedule or NoiseSchedule.linear(),
            time_dim=time_dim,
        )

    @property
    def hidden(self) -> int:
        return int(self.params["b1"].shape[0])

    @property
    def prior_std(self) -> float:
        return float(np.exp(self.params["log_prior_std"][0]))

    # --- flat parameter vector ---------------------------------------------

    def parameter_vector(self) -> np.ndarray:
        return np.concatenate([self.params[name].ravel() for name in PARAMETER_ORDER])

    def with_parameter_vector(self, vector: np.ndarray) -> "MLPDenoiser":
        vector = np.asarray(vector, dtype=np.float64)
        params: dict[str, np.ndarray] = {}
        offset = 0
        for name in PARAMETER_ORDER:
            shape = self.params[name].shape
            size = int(np.prod(shape))
            params[name] = vector[offset : offset + size].reshape(shape).copy()
            offset += size
        if offset != len(vector):
            raise DataError(f"Parameter vector has {len(vector)} values, network needs {offset}")
        return MLPDenoiser(params, self.offset_scale, self.data_std, self.schedule, self.time_dim)

    # --- forward / backward -------------------------------------------------

    def inputs(
        self, static: np.ndarray, kt: np.ndarray, t: np.ndarray, alpha_bar: np.ndarray, steps: int
    ) -> np.ndarray:
        scale = Preconditioning(alpha_bar, self.data_std).input_scale
        return np.hstack([static, kt * scale[:, None], time_embedding(t, steps, self.time_dim)])

    def forward(self, inputs: np.ndarray, kt: np.ndarray, alpha_bar: np.ndarray) -> ForwardCache:
        p = self.params
        h1 = np.tanh(inputs @ p["W1"] + p["b1"])
        h2 = np.tanh(h1 @ p["W2"] + p["b2"])
        prior_mean = h2 @ p["W3"] + p["b3"]
        s2 = self.prior_std**2
        denominator = 1.0 - alpha_bar + alpha_bar * s2
        gain = np.sqrt(1.0 - alpha_bar) / denominator
        eps_hat = gain[:, None] * (kt - np.sqrt(alpha_bar)[:, None] * prior_mean)
        return ForwardCache(inputs, h1, h2, prior_mean, denominator, kt, alpha_bar, eps_hat)

    def backward(self, cache: ForwardCache, grad_eps: np.ndarray) -> dict[str, np.ndarray]:
        """Parameter gradients given dL/dε̂."""
        p = self.params
        ab = cache.alpha_bar
        gain = np.sqrt(1.0 - ab) / cache.denominator
        s2 = self.prior_std**2

        grad_prior = grad_eps * (-gain * np.sqrt(ab))[:, None]
        # dε̂/ds² = −ε̂·ᾱ/denominator and ds²/dlog s = 2s²
        d_eps_d_s2 = cache.eps_hat * (-ab / cache.denominator)[:, None]
        grad_log_s = np.sum(grad_eps * d_eps_d_s2) * 2.0 * s2

        grads = {
            "W3": cache.h2.T @ grad_prior,
            "b3": grad_prior.sum(axis=0),
        }
        grad_z2 = (grad_prior @ p["W3"].T) * (1.0 - cache.h2**2)
        grads["W2"] = cache.h1.T @ grad_z2
        grads["b2"] = grad_z2.sum(axis=0)
        grad_z1 = (grad_z2 @ p["W2"].T) * (1.0 - cache.h1**2)
        grads["W1"] = cache.inputs.T @ grad_z1
        grads["b1"] = grad_z1.sum(axis=0)
        grads["log_prior_std"] = np.array([grad_log_s])
        return grads

    def predict(self, state: KeypointState, context: DenoiserContext) -> np.ndarray:
        if len(context.anchors) != state.n:
            raise DataError(f"Context holds {len(context.anchors)} anchors for {state.n} states")
        schedule = context.schedule
        ab = np.full(state.n, schedule.alpha_bar(state.t))
        static = static_features(
            context.anchors, context.frame, context.descriptor_distance, context.fundamental
        )
        inputs = self.inputs(static, state.coords, np.full(state.n, state.t), ab, schedule.T)
        return self.forward(inputs, state.coords, ab).eps_hat


# --- weights file ------------------------------------------------------------


def save_denoiser(model: MLPDenoiser, path: Path) -> Path:
    """Header line ``epivo-denoiser v1 {json}`` then one ``%.17g`` float per line."""
    path = Path(path)
    header = {
        "architecture": {
            "input": input_dim(model.time_dim),
            "hidden": [model.hidden, model.hidden],
            "output": OUTPUT_DIM,
            "activation": "tanh",
            "time_dim": model.time_dim,
        },
        "parameters": {name: list(model.params[name].shape) for name in PARAMETER_ORDER},
        "offset_scale": model.offset_scale,
        "data_std": model.data_std,
        "schedule": model.schedule.to_dict(),
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        header_json = json.dumps(header, sort_keys=True)
        f.write(f"{MAGIC} {diffusion_defaults.WEIGHTS_VERSION} {header_json}\n")
        for value in model.parameter_vector():
            f.write(f"{value:.17g}\n")
    logger.info(f"Saved denoiser weights to {path}")
    return path


def load_denoiser(path: Path) -> MLPDenoiser:
    path = Path(path)
    with open(path, encoding="utf-8") as f:
        lines = f.read().splitlines()
    if not lines:
        raise ParseError(str(path), 1, "empty weights file")

    parts = lines[0].split(" ", 2)
    if len(parts) != 3 or parts[0] != MAGIC:
        raise ParseError(str(path), 1, f"missing '{MAGIC}' header")
    if parts[1] != diffusion_defaults.WEIGHTS_VERSION:
        raise ParseError(str(path), 1, f"unsupported weights version '{parts[1]}'")
    try:
        header = json.loads(parts[2])
    except json.JSONDecodeError as e:
        raise ParseError(str(path), 1, f"invalid header JSON: {e}") from e

    values = []
    for number, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            values.append(float(line))
        except ValueError as e:
            raise ParseError(str(path), number, f"not a float: {line!r}") from e

    shapes = {name: tuple(header["parameters"][name]) for name in PARAMETER_ORDER}
    expected = sum(int(np.prod(shape)) for shape in shapes.values())
    if len(values) != expected:
        raise ParseError(
            str(path), len(lines), f"expected {expected} parameters, found {len(values)}"
        )

    template = MLPDenoiser(
        params={name: np.zeros(shape) for name, shape in shapes.items()},
        offset_scale=float(header["offset_scale"]),
        data_std=float(header["data_std"]),
        schedule=NoiseSchedule.from_dict(header["schedule"]),
        time_dim=int(header["architecture"]["time_dim"]),
    )
    return template.with_parameter_vector(np.array(values))
