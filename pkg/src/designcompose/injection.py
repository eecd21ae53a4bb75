"""Attention-guided identity token injection.

The full procedure for one element: generate conditioning tokens from the
compositional prompt, encode the naive foreground-on-background paste into
identity tokens, score every token's regional relevance with a single
attention probe conditioned on the identity tokens, select the top scorers
per region, and blend identity into the generative tokens on those indices
only. Everything else stays bit-identical to the generative tokens.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .backend import CompositionPrompt, ModelBackend, TokenSet
from .determinism import checksum
from .document import BoundingBox
from .errors import ConfigError, ContractError
from .masks import (
    BinaryMask,
    complement,
    downsample_to_latent,
    mask_from_bbox,
    naive_composite,
    placed_alpha_mask,
)
from .raster import fit_to_box, has_alpha, resize_bilinear, validate_image
from .relevance import TokenIndexSet, aggregate_attention, relevance, select_top

OVERLAP_MODES = ("literal", "disjoint")
MASK_RESOLUTIONS = ("pixel", "latent")


@dataclass(frozen=True)
class InjectionConfig:
    """Blend weights, selection sizes, and the ablation switch.

    ``overlap`` controls indices selected for both regions: ``literal``
    applies the background blend last, reading from the generative tokens
    (so it wins on overlap); ``disjoint`` removes foreground indices from
    the background set first. ``scoring_sigma`` of None defers to the
    caller (the compositor uses the sigma-schedule midpoint).
    """

    enabled: bool = True
    beta_fg: float = 0.3
    beta_bg: float = 0.2
    n_fg: int = 16
    n_bg: int = 8
    overlap: str = "literal"
    scoring_sigma: float | None = None

    def __post_init__(self):
        if not (0.0 <= self.beta_fg <= 1.0 and 0.0 <= self.beta_bg <= 1.0):
            raise ConfigError("blend weights must lie in [0, 1]")
        if self.n_fg < 0 or self.n_bg < 0:
            raise ConfigError("selection counts must be >= 0")
        if self.overlap not in OVERLAP_MODES:
            raise ConfigError(f"unknown overlap mode {self.overlap!r}")
        if self.scoring_sigma is not None and not 0.0 < self.scoring_sigma <= 1.0:
            raise ConfigError("scoring_sigma must lie in (0, 1]")


@dataclass
class InjectionTrace:
    """Everything the run recorded, serialized into the run manifest."""

    enabled: bool
    beta_fg: float
    beta_bg: float
    n_fg: int
    n_bg: int
    overlap: str
    scoring_sigma: float | None
    conditioning_tag: str | None
    r_fg: list[float] | None
    r_bg: list[float] | None
    s_fg: list[int]
    s_bg: list[int]
    canvas_checksum: str
    composite_checksum: str | None
    aggregated_ca: np.ndarray | None = None  # probe-CLI export only, not serialized
    masks: tuple[BinaryMask, BinaryMask] | None = None  # same

    def to_jsonable(self) -> dict:
        return {
            "enabled": self.enabled,
            "beta_fg": self.beta_fg,
            "beta_bg": self.beta_bg,
            "n_fg": self.n_fg,
            "n_bg": self.n_bg,
            "overlap": self.overlap,
            "scoring_sigma": self.scoring_sigma,
            "conditioning_tag": self.conditioning_tag,
            "r_fg": self.r_fg,
            "r_bg": self.r_bg,
            "s_fg": self.s_fg,
            "s_bg": self.s_bg,
            "canvas_checksum": self.canvas_checksum,
            "composite_checksum": self.composite_checksum,
        }


def blend_tokens(
    gen: TokenSet,
    identity: TokenSet,
    s_fg: TokenIndexSet,
    s_bg: TokenIndexSet,
    cfg: InjectionConfig,
) -> TokenSet:
    """Convex per-row blend of identity into generative tokens.

    Rows outside both selections stay bit-identical to the generative
    tokens. Both assignments read from the generative tokens, so in
    ``literal`` mode an index in both sets ends with the background blend.
    """
    if gen.tokens.shape != identity.tokens.shape:
        raise ContractError("token sets must share (K, D)")
    k = gen.count
    for name, sel in (("s_fg", s_fg), ("s_bg", s_bg)):
        if any(i >= k for i in sel):
            raise ContractError(f"{name} contains indices outside [0, {k})")
    out = gen.tokens.copy()
    fg_idx = np.fromiter(s_fg, dtype=int)
    bg_indices = list(s_bg)
    if cfg.overlap == "disjoint":
        fg_set = set(s_fg)
        bg_indices = [i for i in bg_indices if i not in fg_set]
    bg_idx = np.array(bg_indices, dtype=int)
    if fg_idx.size:
        out[fg_idx] = (1.0 - cfg.beta_fg) * gen.tokens[fg_idx] + cfg.beta_fg * identity.tokens[fg_idx]
    if bg_idx.size:
        out[bg_idx] = (1.0 - cfg.beta_bg) * gen.tokens[bg_idx] + cfg.beta_bg * identity.tokens[bg_idx]
    return TokenSet(out, "blended")


def _foreground_mask_latent(
    foreground: np.ndarray,
    bbox: BoundingBox,
    canvas_h: int,
    canvas_w: int,
    latent_grid: tuple[int, int],
    threshold: float,
    resolution: str,
) -> BinaryMask:
    h_lat, w_lat = latent_grid
    if resolution == "latent":
        if has_alpha(foreground):
            x0, y0, bw, bh = bbox.to_pixel_box(canvas_w, canvas_h)
            placed = np.zeros((canvas_h, canvas_w, 1))
            placed[y0 : y0 + bh, x0 : x0 + bw, 0] = foreground[..., 3]
            small = resize_bilinear(placed, h_lat, w_lat)[..., 0]
            return BinaryMask((small > threshold).astype(np.uint8))
        return mask_from_bbox(bbox, h_lat, w_lat)
    if has_alpha(foreground):
        pixel_mask = placed_alpha_mask(foreground, bbox, canvas_h, canvas_w, threshold)
    else:
        pixel_mask = mask_from_bbox(bbox, canvas_h, canvas_w)
    return downsample_to_latent(pixel_mask, h_lat, w_lat)


def run_token_injection(
    foreground: np.ndarray,
    canvas: np.ndarray,
    bbox: BoundingBox,
    caption: str,
    backend: ModelBackend,
    cfg: InjectionConfig,
    alpha_threshold: float = 0.5,
    mask_resolution: str = "pixel",
) -> tuple[TokenSet, InjectionTrace]:
    """Produce the final conditioning tokens for one placed element.

    With ``cfg.enabled`` false the generative tokens are returned untouched
    and no scoring pass runs (the ablation arm). The trace records scores,
    index sets, blend weights, and input checksums.
    """
    validate_image(canvas, "canvas")
    validate_image(foreground, "foreground")
    if mask_resolution not in MASK_RESOLUTIONS:
        raise ConfigError(f"unknown mask resolution {mask_resolution!r}")
    canvas_h, canvas_w = canvas.shape[:2]
    x0, y0, bw, bh = bbox.to_pixel_box(canvas_w, canvas_h)
    fitted = foreground if foreground.shape[:2] == (bh, bw) else fit_to_box(foreground, bh, bw)

    prompt = CompositionPrompt(
        background=canvas, foreground=foreground, caption=caption, bbox=bbox
    )
    gen = backend.generate_tokens(prompt)

    if not cfg.enabled:
        trace = InjectionTrace(
            enabled=False,
            beta_fg=cfg.beta_fg,
            beta_bg=cfg.beta_bg,
            n_fg=cfg.n_fg,
            n_bg=cfg.n_bg,
            overlap=cfg.overlap,
            scoring_sigma=None,
            conditioning_tag=None,
            r_fg=None,
            r_bg=None,
            s_fg=[],
            s_bg=[],
            canvas_checksum=checksum(canvas),
            composite_checksum=None,
        )
        return gen, trace

    composite = naive_composite(canvas, fitted, bbox)
    identity = backend.encode_identity(composite)
    assert identity.source_tag == "identity"

    m_fg = _foreground_mask_latent(
        fitted, bbox, canvas_h, canvas_w, backend.latent_grid, alpha_threshold, mask_resolution
    )
    m_bg = complement(m_fg)

    scoring_sigma = cfg.scoring_sigma if cfg.scoring_sigma is not None else 0.5
    probe_latent = backend.encode_latent(composite)
    stack = backend.attention_probe(identity, probe_latent, scoring_sigma)
    ca = aggregate_attention(stack)
    scores = relevance(ca, m_fg, m_bg)
    s_fg = select_top(scores.r_fg, cfg.n_fg)
    s_bg = select_top(scores.r_bg, cfg.n_bg)

    final = blend_tokens(gen, identity, s_fg, s_bg, cfg)
    trace = InjectionTrace(
        enabled=True,
        beta_fg=cfg.beta_fg,
        beta_bg=cfg.beta_bg,
        n_fg=cfg.n_fg,
        n_bg=cfg.n_bg,
        overlap=cfg.overlap,
        scoring_sigma=scoring_sigma,
        conditioning_tag=identity.source_tag,
        r_fg=[float(v) for v in scores.r_fg],
        r_bg=[float(v) for v in scores.r_bg],
        s_fg=list(s_fg),
        s_bg=list(s_bg),
        canvas_checksum=checksum(canvas),
        composite_checksum=checksum(composite),
        aggregated_ca=ca,
        masks=(m_fg, m_bg),
    )
    return final, trace
