"""Flow-matched Euler-discrete noising, canvas inversion, and denoising.

Noising is the linear interpolation ``(1 - sigma) * data + sigma * noise``.
Inversion initializes the denoise latent from a partially noised encoding
of the current canvas rather than pure noise, which biases generation
toward the original background. The denoise loop is a plain first-order
Euler integration down the sigma grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .backend import Latent, ModelBackend, TokenSet
from .determinism import canonical_bytes, keyed_generator
from .errors import ConfigError, ContractError
from .raster import validate_image

SCHEDULE_SHAPES = ("linear", "shifted")


@dataclass(frozen=True)
class SchedulerConfig:
    """Knobs for schedule construction and canvas inversion."""

    n_steps: int = 28
    shape: str = "shifted"
    shift: float = 3.0
    strength: float = 0.7

    def __post_init__(self):
        if self.n_steps < 1:
            raise ConfigError("n_steps must be >= 1")
        if self.shape not in SCHEDULE_SHAPES:
            raise ConfigError(f"unknown schedule shape {self.shape!r}")
        if self.shift <= 0:
            raise ConfigError("shift must be > 0")
        if not 0.0 < self.strength <= 1.0:
            raise ConfigError("strength must lie in (0, 1]")


@dataclass(frozen=True)
class SigmaSchedule:
    """Strictly decreasing noise levels from exactly 1 down to exactly 0."""

    sigmas: tuple[float, ...]

    def __post_init__(self):
        if len(self.sigmas) < 2:
            raise ContractError("schedule needs at least one step")
        if self.sigmas[0] != 1.0 or self.sigmas[-1] != 0.0:
            raise ContractError("schedule endpoints must be exactly 1 and 0")
        if any(b >= a for a, b in zip(self.sigmas, self.sigmas[1:])):
            raise ContractError("sigmas must be strictly decreasing")

    @property
    def n_steps(self) -> int:
        return len(self.sigmas) - 1

    def as_array(self) -> np.ndarray:
        return np.asarray(self.sigmas, dtype=np.float64)


def make_schedule(n_steps: int, shape: str = "shifted", shift: float = 3.0) -> SigmaSchedule:
    """Build the sigma grid.

    linear:  sigma_k = 1 - k/N
    shifted: sigma_k = shift * u / (1 + (shift - 1) * u) with u = 1 - k/N

    Endpoints are pinned to exactly 1 and 0 regardless of rounding.
    """
    if n_steps < 1:
        raise ConfigError("n_steps must be >= 1")
    if shape not in SCHEDULE_SHAPES:
        raise ConfigError(f"unknown schedule shape {shape!r}")
    if shift <= 0:
        raise ConfigError("shift must be > 0")
    u = 1.0 - np.arange(n_steps + 1) / n_steps
    if shape == "linear":
        sigmas = u
    else:
        sigmas = shift * u / (1.0 + (shift - 1.0) * u)
    sigmas[0], sigmas[-1] = 1.0, 0.0
    return SigmaSchedule(tuple(float(s) for s in sigmas))


def add_noise(x0: Latent, eps: np.ndarray, sigma: float) -> Latent:
    """Linear interpolation between data and noise at level sigma."""
    if x0.sigma != 0.0:
        raise ContractError("add_noise expects a clean latent (sigma = 0)")
    eps = np.asarray(eps, dtype=np.float64)
    if eps.shape != x0.values.shape:
        raise ContractError(
            f"noise shape {eps.shape} does not match latent {x0.values.shape}"
        )
    if not 0.0 <= sigma <= 1.0:
        raise ContractError("sigma must lie in [0, 1]")
    values = (1.0 - sigma) * x0.values + sigma * eps
    return Latent(values, sigma=float(sigma), pixel_shape=x0.pixel_shape)


def draw_inversion_noise(seed: int, shape: tuple[int, ...]) -> np.ndarray:
    """Standard-normal noise keyed only by (seed, shape)."""
    rng = keyed_generator(seed, "inversion-noise", canonical_bytes(tuple(shape)))
    return rng.normal(0.0, 1.0, shape)


def invert_canvas(
    canvas: np.ndarray,
    strength: float,
    schedule: SigmaSchedule,
    seed: int,
    backend: ModelBackend,
) -> tuple[Latent, int]:
    """Encode the canvas and noise it to the first grid sigma <= strength.

    Returns the noised latent and the grid index denoising starts from.
    The noise depends only on (seed, latent shape), never on canvas
    content.
    """
    if not 0.0 < strength <= 1.0:
        raise ConfigError("strength must lie in (0, 1]")
    validate_image(canvas, "canvas")
    x0 = backend.encode_latent(canvas)
    sigmas = schedule.as_array()
    start_index = int(np.argmax(sigmas <= strength))
    eps = draw_inversion_noise(seed, x0.values.shape)
    return add_noise(x0, eps, float(sigmas[start_index])), start_index


def denoise(
    latent: Latent,
    start_index: int,
    schedule: SigmaSchedule,
    tokens: TokenSet,
    backend: ModelBackend,
) -> Latent:
    """Euler-integrate the velocity field from start_index down to sigma 0."""
    sigmas = schedule.as_array()
    if not 0 <= start_index < len(sigmas):
        raise ContractError(f"start_index {start_index} outside the sigma grid")
    if abs(latent.sigma - sigmas[start_index]) > 1e-12:
        raise ContractError(
            f"latent sigma {latent.sigma:g} does not match grid sigma "
            f"{sigmas[start_index]:g} at index {start_index}"
        )
    x = latent.values.copy()
    for k in range(start_index, len(sigmas) - 1):
        sigma_k = float(sigmas[k])
        velocity = backend.predict_velocity(
            Latent(x, sigma=sigma_k, pixel_shape=latent.pixel_shape), sigma_k, tokens
        )
        x = x + (float(sigmas[k + 1]) - sigma_k) * velocity
    if not np.isfinite(x).all():
        raise ContractError("denoised latent contains non-finite values")
    return Latent(x, sigma=0.0, pixel_shape=latent.pixel_shape)
