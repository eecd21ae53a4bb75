"""Model backend interface and the deterministic mock implementation.

The backend abstracts the generative stack behind five operations: a
visual encoder that turns an image into identity tokens, a prompt-driven
token generator, a UNet cross-attention probe, a latent autoencoder, and
a velocity predictor for the flow-matching denoise loop.

Adapter contract for a real multimodal stack (no weights ship here; the
mock below is the only concrete backend):

* ``encode_identity``: the frozen visual encoder path that, jointly
  trained with the image decoder as an autoencoder, yields K tokens from
  which the decoder reconstructs the input near-perfectly. Map its output
  to a (K, D) matrix tagged ``identity``.
* ``generate_tokens``: the language-decoder forward pass over the
  compositional prompt (background render, foreground render, caption,
  target box), returning the K conditioning tokens tagged ``generative``.
* ``attention_probe``: hook the denoiser's cross-attention modules and
  collect, for one forward pass at the given noise level, a (K, H_lat,
  W_lat) map per layer. Average over attention heads *within* each layer;
  layer averaging happens downstream.
* ``encode_latent`` / ``decode_latent``: the VAE pair used by the
  denoiser.
* ``predict_velocity``: the denoiser's prediction mapped to the
  noise-minus-data convention, so an Euler step toward smaller sigma moves
  toward data.

Every operation must be a pure function of (inputs, backend seed).
"""

from __future__ import annotations

import warnings
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from .determinism import canonical_bytes, checksum, keyed_generator
from .document import BoundingBox
from .errors import BackendError, ConfigError, ContractError, InputError
from .raster import area_downsample, nearest_upsample, validate_image

TOKEN_TAGS = ("generative", "identity", "blended")


@dataclass(eq=False)
class TokenSet:
    """A (K, D) conditioning-token matrix plus its provenance tag."""

    tokens: np.ndarray
    source_tag: str

    def __post_init__(self):
        self.tokens = np.asarray(self.tokens, dtype=np.float64)
        if self.tokens.ndim != 2:
            raise ContractError("tokens must be a (K, D) matrix")
        if not np.isfinite(self.tokens).all():
            raise ContractError("tokens contain non-finite entries")
        if self.source_tag not in TOKEN_TAGS:
            raise ContractError(f"unknown source tag {self.source_tag!r}")

    @property
    def count(self) -> int:
        return self.tokens.shape[0]

    @property
    def dim(self) -> int:
        return self.tokens.shape[1]


@dataclass(eq=False)
class Latent:
    """Latent-space values at a given noise level.

    ``pixel_shape`` records the pixel-space provenance (H, W, C) when the
    latent came from ``encode_latent``; it threads through noising and
    denoising so ``decode_latent`` knows its output geometry.
    """

    values: np.ndarray
    sigma: float
    pixel_shape: tuple[int, int, int] | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 3:
            raise ContractError("latent values must be (H_lat, W_lat, C_lat)")
        if not np.isfinite(self.values).all():
            raise ContractError("latent contains non-finite entries")
        if not 0.0 <= self.sigma <= 1.0:
            raise ContractError("latent sigma must lie in [0, 1]")


@dataclass(frozen=True)
class CompositionPrompt:
    """Everything the token generator conditions on for one element."""

    background: np.ndarray
    foreground: np.ndarray
    caption: str
    bbox: BoundingBox

    def __post_init__(self):
        validate_image(self.background, "prompt background")
        validate_image(self.foreground, "prompt foreground")
        if not self.caption:
            raise ContractError("prompt caption must be non-empty")


@dataclass(eq=False)
class AttentionStack:
    """Per-layer cross-attention maps, shape (L, K, H_lat, W_lat)."""

    layers: np.ndarray

    def __post_init__(self):
        self.layers = np.asarray(self.layers, dtype=np.float64)
        if self.layers.ndim != 4:
            raise ContractError("attention stack must be (L, K, H, W)")
        if self.layers.shape[0] < 1:
            raise ContractError("attention stack must contain at least one layer")
        if not np.isfinite(self.layers).all() or (self.layers < 0).any():
            raise ContractError("attention entries must be finite and >= 0")

    @property
    def n_layers(self) -> int:
        return self.layers.shape[0]


class ModelBackend(ABC):
    """Abstract generative stack; see the module docstring for the adapter
    contract a real implementation must satisfy."""

    token_count: int
    token_dim: int
    latent_grid: tuple[int, int]

    @abstractmethod
    def encode_identity(self, image: np.ndarray) -> TokenSet: ...

    @abstractmethod
    def generate_tokens(self, prompt: CompositionPrompt) -> TokenSet: ...

    @abstractmethod
    def attention_probe(self, tokens: TokenSet, latent: Latent, sigma: float) -> AttentionStack: ...

    @abstractmethod
    def encode_latent(self, image: np.ndarray) -> Latent: ...

    @abstractmethod
    def decode_latent(self, latent: Latent) -> np.ndarray: ...

    @abstractmethod
    def predict_velocity(self, latent: Latent, sigma: float, tokens: TokenSet) -> np.ndarray: ...


def _block_basis(n: int) -> np.ndarray:
    """Orthonormal (n, n) basis whose first row is the normalized mean.

    Coefficient 0 of a block is its average (times sqrt(n)); the remaining
    coefficients store the residual detail, making the block transform an
    invertible isometry.
    """
    cols = np.zeros((n, n))
    cols[:, 0] = 1.0 / np.sqrt(n)
    cols[: n - 1, 1:] = np.eye(n - 1)
    q, _ = np.linalg.qr(cols)
    # Fix signs so the basis is reproducible across LAPACK builds.
    for j in range(n):
        pivot = np.flatnonzero(np.abs(q[:, j]) > 1e-12)[0]
        if q[pivot, j] < 0:
            q[:, j] = -q[:, j]
    return q.T  # rows are basis vectors


class MockBackend(ModelBackend):
    """Fully deterministic, millisecond-scale backend for desk testing.

    Determinism: each operation draws from a counter-based Philox generator
    keyed by (seed, operation name, canonicalized input bytes); the backend
    holds no mutable random state.

    Identity semantics: ``encode_identity`` embeds a coarse color sketch
    (area means on ``sketch_grid``) of the input into the mean of the token
    rows, and the denoise target is a fixed linear projection of the token
    mean that reconstructs that sketch in pixel space. Blending identity
    tokens into the conditioning therefore visibly pulls the rendered
    output toward the encoded image, which is what the ablation tests
    measure.

    Autoencoder: ``encode_latent`` applies an orthonormal block transform
    per color channel (first coefficient the block average, the rest the
    stored residuals), an invertible linear map, so ``decode_latent``
    reconstructs in-range images to float precision. The latent grid is
    fixed; the channel count adapts to the canvas size.

    Velocity: ``v(x, sigma) = (x - target(tokens)) / max(sigma, sigma_min)``,
    whose exact flow ``x(sigma) = target + sigma * c`` is linear in sigma,
    hence Euler-exact for any step count.
    """

    sigma_min = 1e-4

    def __init__(
        self,
        seed: int = 0,
        token_count: int = 64,
        token_dim: int = 16,
        latent_grid: tuple[int, int] = (8, 8),
        latent_channels: int = 4,
        attention_layers: int = 3,
        attention_fixture: str | None = None,
        sketch_grid: tuple[int, int] = (2, 2),
        record_calls: bool = False,
    ):
        if token_count < 1 or token_dim < 1:
            raise ConfigError("token_count and token_dim must be >= 1")
        sketch_size = 3 * sketch_grid[0] * sketch_grid[1]
        if token_dim < sketch_size:
            raise ConfigError(
                f"token_dim must be >= {sketch_size} to hold a {sketch_grid} color sketch"
            )
        if attention_fixture not in (None, "delta"):
            raise ConfigError(f"unknown attention fixture {attention_fixture!r}")
        self.seed = int(seed)
        self.token_count = int(token_count)
        self.token_dim = int(token_dim)
        self.latent_grid = (int(latent_grid[0]), int(latent_grid[1]))
        self.latent_channels = int(latent_channels)
        self.attention_layers = int(attention_layers)
        self.attention_fixture = attention_fixture
        self.sketch_grid = (int(sketch_grid[0]), int(sketch_grid[1]))
        self.calls: list[dict] | None = [] if record_calls else None
        self._row_noise_scale = 0.1
        self._extra_target_scale = 0.05

    # -- instrumentation ------------------------------------------------

    def _record(self, operation: str, array: np.ndarray) -> None:
        if self.calls is not None:
            self.calls.append({"op": operation, "input_checksum": checksum(array)})

    # -- token operations -------------------------------------------------

    def _token_rows(self, rng: np.random.Generator, mean_vector: np.ndarray) -> np.ndarray:
        """K rows whose arithmetic mean is exactly ``mean_vector``."""
        noise = rng.normal(0.0, self._row_noise_scale, (self.token_count, self.token_dim))
        noise -= noise.mean(axis=0, keepdims=True)
        return mean_vector[None, :] + noise

    def _sketch(self, image: np.ndarray) -> np.ndarray:
        sh, sw = self.sketch_grid
        rgb = image[..., :3]
        vec = np.zeros(self.token_dim)
        vec[: 3 * sh * sw] = area_downsample(rgb, sh, sw).reshape(-1)
        return vec

    def encode_identity(self, image: np.ndarray) -> TokenSet:
        if not isinstance(image, np.ndarray) or not np.isfinite(image).all():
            raise InputError("encode_identity: non-finite or non-array pixel data")
        validate_image(image, "encode_identity input")
        self._record("encode_identity", image)
        rng = keyed_generator(self.seed, "encode_identity", canonical_bytes(image))
        return TokenSet(self._token_rows(rng, self._sketch(image)), "identity")

    def generate_tokens(self, prompt: CompositionPrompt) -> TokenSet:
        payload = canonical_bytes(
            prompt.background,
            prompt.foreground,
            prompt.caption,
            (prompt.bbox.left, prompt.bbox.top, prompt.bbox.width, prompt.bbox.height),
        )
        self._record("generate_tokens", prompt.background)
        rng = keyed_generator(self.seed, "generate_tokens", payload)
        # Stylization intent: a stable mid-range palette vector per prompt.
        style = rng.uniform(0.1, 0.9, self.token_dim)
        return TokenSet(self._token_rows(rng, style), "generative")

    # -- attention ----------------------------------------------------------

    def attention_probe(self, tokens: TokenSet, latent: Latent, sigma: float) -> AttentionStack:
        if tokens.count != self.token_count:
            raise ContractError(
                f"token count {tokens.count} does not match backend K={self.token_count}"
            )
        h, w = self.latent_grid
        if latent.values.shape[:2] != (h, w):
            raise ContractError(
                f"latent grid {latent.values.shape[:2]} does not match backend {self.latent_grid}"
            )
        k, layers = self.token_count, self.attention_layers
        if self.attention_fixture == "delta":
            cells = np.arange(k) % (h * w)
            flat = np.zeros((k, h * w))
            flat[np.arange(k), cells] = 1.0
            maps = flat.reshape(k, h, w)
            return AttentionStack(np.broadcast_to(maps, (layers, k, h, w)).copy())
        payload = canonical_bytes(tokens.tokens, latent.values, float(sigma))
        rng = keyed_generator(self.seed, "attention_probe", payload)
        scores = rng.normal(0.0, 1.0, (layers, k, h, w)).reshape(layers, k, h * w)
        scores -= scores.max(axis=2, keepdims=True)
        probs = np.exp(scores)
        probs /= probs.sum(axis=2, keepdims=True)
        return AttentionStack(probs.reshape(layers, k, h, w))

    # -- latent autoencoder --------------------------------------------------

    def _block_factors(self, height: int, width: int) -> tuple[int, int]:
        h, w = self.latent_grid
        if height % h or width % w:
            raise ContractError(
                f"mock canvas dimensions ({height}, {width}) must be multiples of the "
                f"latent grid {self.latent_grid}"
            )
        return height // h, width // w

    def encode_latent(self, image: np.ndarray) -> Latent:
        validate_image(image, "encode_latent input")
        self._record("encode_latent", image)
        return Latent(
            self._encode_values(image), sigma=0.0, pixel_shape=tuple(image.shape)
        )

    def _encode_values(self, pixels: np.ndarray) -> np.ndarray:
        height, width, chans = pixels.shape
        fh, fw = self._block_factors(height, width)
        h, w = self.latent_grid
        n = fh * fw
        basis = _block_basis(n)
        blocks = (
            pixels.reshape(h, fh, w, fw, chans)
            .transpose(0, 2, 4, 1, 3)
            .reshape(h, w, chans, n)
        )
        coeffs = blocks @ basis.T
        return coeffs.reshape(h, w, chans * n)

    def decode_latent(self, latent: Latent) -> np.ndarray:
        if latent.sigma != 0.0:
            warnings.warn(
                f"decoding a latent at sigma={latent.sigma:g}; expected 0", stacklevel=2
            )
        if latent.pixel_shape is None:
            raise ContractError("latent has no pixel provenance; cannot decode")
        return np.clip(self._decode_values(latent.values, latent.pixel_shape), 0.0, 1.0)

    def _decode_values(self, values: np.ndarray, pixel_shape: tuple[int, int, int]) -> np.ndarray:
        height, width, chans = pixel_shape
        fh, fw = self._block_factors(height, width)
        h, w = self.latent_grid
        n = fh * fw
        basis = _block_basis(n)
        coeffs = values.reshape(h, w, chans, n)
        blocks = coeffs @ basis
        return (
            blocks.reshape(h, w, chans, fh, fw)
            .transpose(0, 3, 1, 4, 2)
            .reshape(height, width, chans)
        )

    # -- denoise target and velocity ------------------------------------------

    def target_values(
        self, tokens: TokenSet, latent_shape: tuple[int, int, int],
        pixel_shape: tuple[int, int, int] | None,
    ) -> np.ndarray:
        """Closed-form denoise endpoint: a fixed linear projection of the
        token-set mean into latent shape.

        With pixel provenance the projection reconstructs the color sketch
        carried by the mean (plus a small keyed component over the full
        mean, so every token coordinate is observable in the output);
        without provenance it is a pure keyed projection.
        """
        mean = tokens.tokens.mean(axis=0)
        size = int(np.prod(latent_shape))
        rng = keyed_generator(
            self.seed, "target_projection", canonical_bytes(tuple(latent_shape))
        )
        projection = rng.normal(0.0, 1.0, (size, self.token_dim)) / np.sqrt(self.token_dim)
        extra = (projection @ mean).reshape(latent_shape)
        if pixel_shape is None or pixel_shape[2] != 3:
            return extra
        sh, sw = self.sketch_grid
        sketch = mean[: 3 * sh * sw].reshape(sh, sw, 3)
        sketch_pixels = nearest_upsample(sketch, pixel_shape[0], pixel_shape[1])
        return self._encode_values(sketch_pixels) + self._extra_target_scale * extra

    def target_latent(self, tokens: TokenSet, like: Latent) -> Latent:
        """The latent the velocity field flows to, shaped like ``like``."""
        return Latent(
            self.target_values(tokens, like.values.shape, like.pixel_shape),
            sigma=0.0,
            pixel_shape=like.pixel_shape,
        )

    def predict_velocity(self, latent: Latent, sigma: float, tokens: TokenSet) -> np.ndarray:
        if not 0.0 < sigma <= 1.0:
            raise ContractError(
                f"predict_velocity requires sigma in (0, 1]; got {sigma:g}"
            )
        target = self.target_values(tokens, latent.values.shape, latent.pixel_shape)
        velocity = (latent.values - target) / max(sigma, self.sigma_min)
        if not np.isfinite(velocity).all():
            raise BackendError("velocity field contains non-finite entries")
        return velocity
