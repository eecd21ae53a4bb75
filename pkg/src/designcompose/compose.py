"""Sequential per-element composition.

The canvas starts as the rasterized background element. Each foreground
element is then composed in layer order: build its prompt, run token
injection, invert the current canvas to initialize the latent, denoise
with the blended tokens, decode, and update the canvas. Because the canvas
threads through the loop, every element is conditioned on all previously
composed ones.

Image elements replace the whole canvas with the generated result; SVG
elements paste back only the generated pixels inside their own mask, so
the rest of the canvas is bit-identical to the pre-step state.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace

import numpy as np

from .backend import ModelBackend
from .determinism import checksum, derive_seed
from .document import COMPOSABLE_KINDS, DesignDocument, DesignElement, foreground_elements
from .errors import ConfigError, ContractError, ElementCompositionError, InputError
from .injection import InjectionConfig, InjectionTrace, run_token_injection
from .masks import placed_alpha_mask
from .raster import fit_to_box, flatten_to_rgb, load_image, resize_bilinear
from .scheduler import SchedulerConfig, denoise, invert_canvas, make_schedule
from .svg_raster import rasterize_svg

IMAGE_UPDATE_MODES = ("full", "bbox")


@dataclass(frozen=True)
class ComposeConfig:
    injection: InjectionConfig = field(default_factory=InjectionConfig)
    scheduler: SchedulerConfig = field(default_factory=SchedulerConfig)
    seed: int = 0
    svg_paste_back: bool = True
    alpha_threshold: float = 0.5
    mask_resolution: str = "pixel"
    image_update: str = "full"
    bbox_dilation_px: int = 8
    keep_intermediates: bool = False

    def __post_init__(self):
        if not 0.0 <= self.alpha_threshold <= 1.0:
            raise ConfigError("alpha_threshold must lie in [0, 1]")
        if self.image_update not in IMAGE_UPDATE_MODES:
            raise ConfigError(f"unknown image update mode {self.image_update!r}")
        if self.bbox_dilation_px < 0:
            raise ConfigError("bbox_dilation_px must be >= 0")


@dataclass
class ElementRecord:
    """Per-element trace entry, serializable into the run manifest."""

    element_id: str
    kind: str
    pixel_box: tuple[int, int, int, int]
    caption: str
    injection: InjectionTrace
    sigma_grid: list[float]
    start_index: int
    canvas_before_checksum: str
    canvas_after_checksum: str

    def to_jsonable(self) -> dict:
        return {
            "element_id": self.element_id,
            "kind": self.kind,
            "pixel_box": list(self.pixel_box),
            "caption": self.caption,
            "injection": self.injection.to_jsonable(),
            "sigma_grid": self.sigma_grid,
            "start_index": self.start_index,
            "canvas_before_checksum": self.canvas_before_checksum,
            "canvas_after_checksum": self.canvas_after_checksum,
        }


@dataclass
class CompositionTrace:
    seed: int
    records: list[ElementRecord] = field(default_factory=list)
    text_passthrough: list[dict] = field(default_factory=list)
    debug_canvases: list[np.ndarray] | None = None

    def to_jsonable(self) -> dict:
        return {
            "seed": self.seed,
            "elements": [r.to_jsonable() for r in self.records],
            "text_passthrough": self.text_passthrough,
        }


def default_caption(element: DesignElement) -> str:
    return f"a {element.kind} design element ({element.id})"


def load_foreground_asset(
    element: DesignElement, box_w: int, box_h: int, asset_root: str = "."
) -> np.ndarray:
    """Load and size an element's asset to its pixel box (RGBA).

    SVG sources rasterize directly at box size; raster sources are
    letterboxed in with preserved aspect.
    """
    path = os.path.join(asset_root, element.asset_ref)
    if element.kind == "svg":
        try:
            with open(path, encoding="utf-8") as fh:
                svg_text = fh.read()
        except OSError as exc:
            raise InputError(f"unreadable asset {path}: {exc}") from exc
        return rasterize_svg(svg_text, box_w, box_h)
    image = load_image(path)
    if element.alpha_ref is not None:
        matte = load_image(os.path.join(asset_root, element.alpha_ref))
        if matte.shape[:2] != image.shape[:2]:
            raise InputError(
                f"alpha matte for {element.id!r} does not match the asset size"
            )
        alpha = matte[..., :3].mean(axis=2, keepdims=True)
        image = np.concatenate([image[..., :3], alpha], axis=2)
    return fit_to_box(image, box_h, box_w)


def _dilated_box(
    box: tuple[int, int, int, int], dilation: int, width: int, height: int
) -> tuple[int, int, int, int]:
    x0, y0, w, h = box
    nx0 = max(0, x0 - dilation)
    ny0 = max(0, y0 - dilation)
    nx1 = min(width, x0 + w + dilation)
    ny1 = min(height, y0 + h + dilation)
    return nx0, ny0, nx1 - nx0, ny1 - ny0


def compose_element(
    canvas: np.ndarray,
    element: DesignElement,
    cfg: ComposeConfig,
    backend: ModelBackend,
    asset_root: str = ".",
) -> tuple[np.ndarray, ElementRecord]:
    """Compose one foreground element onto the current canvas."""
    if element.kind not in COMPOSABLE_KINDS:
        raise ContractError(f"element {element.id!r} of kind {element.kind!r} is not composable")
    height, width = canvas.shape[:2]
    box = element.bbox.to_pixel_box(width, height)
    x0, y0, bw, bh = box
    fitted = load_foreground_asset(element, bw, bh, asset_root)
    caption = element.caption or default_caption(element)

    schedule = make_schedule(cfg.scheduler.n_steps, cfg.scheduler.shape, cfg.scheduler.shift)
    inj_cfg = cfg.injection
    if inj_cfg.scoring_sigma is None:
        mid = schedule.sigmas[schedule.n_steps // 2]
        inj_cfg = replace(inj_cfg, scoring_sigma=float(mid))

    before_sum = checksum(canvas)
    tokens, inj_trace = run_token_injection(
        fitted,
        canvas,
        element.bbox,
        caption,
        backend,
        inj_cfg,
        alpha_threshold=cfg.alpha_threshold,
        mask_resolution=cfg.mask_resolution,
    )

    element_seed = derive_seed(cfg.seed, "element-noise", element.id)
    noised, start_index = invert_canvas(
        canvas, cfg.scheduler.strength, schedule, element_seed, backend
    )
    clean = denoise(noised, start_index, schedule, tokens, backend)
    generated = backend.decode_latent(clean)

    if element.kind == "svg" and cfg.svg_paste_back:
        mask = placed_alpha_mask(fitted, element.bbox, height, width, cfg.alpha_threshold)
        out = canvas.copy()
        sel = mask.grid.astype(bool)
        out[sel] = generated[sel]
    elif cfg.image_update == "bbox":
        dx0, dy0, dw, dh = _dilated_box(box, cfg.bbox_dilation_px, width, height)
        out = canvas.copy()
        out[dy0 : dy0 + dh, dx0 : dx0 + dw] = generated[dy0 : dy0 + dh, dx0 : dx0 + dw]
    else:
        out = generated

    record = ElementRecord(
        element_id=element.id,
        kind=element.kind,
        pixel_box=box,
        caption=caption,
        injection=inj_trace,
        sigma_grid=[float(s) for s in schedule.sigmas],
        start_index=start_index,
        canvas_before_checksum=before_sum,
        canvas_after_checksum=checksum(out),
    )
    return out, record


def init_canvas(doc: DesignDocument, asset_root: str = ".") -> np.ndarray:
    """Rasterize the background element to the document resolution (RGB)."""
    background = next(e for e in doc.elements if e.kind == "background")
    image = load_image(os.path.join(asset_root, background.asset_ref))
    rgb = flatten_to_rgb(image)
    return np.clip(resize_bilinear(rgb, doc.canvas.height, doc.canvas.width), 0.0, 1.0)


def compose_document(
    doc: DesignDocument,
    cfg: ComposeConfig,
    backend: ModelBackend,
    asset_root: str = ".",
) -> tuple[np.ndarray, CompositionTrace]:
    """Compose every foreground element in layer order onto the background.

    Text elements are not rendered; they pass through to the trace for
    downstream typography. Element failures abort with the partial trace
    attached to the raised error.
    """
    trace = CompositionTrace(seed=cfg.seed)
    if cfg.keep_intermediates:
        trace.debug_canvases = []
    canvas = init_canvas(doc, asset_root)
    if cfg.keep_intermediates:
        trace.debug_canvases.append(canvas.copy())
    for element in foreground_elements(doc):
        if element.kind == "text":
            trace.text_passthrough.append(
                {
                    "id": element.id,
                    "asset": element.asset_ref,
                    "caption": element.caption,
                    "bbox": [
                        element.bbox.left,
                        element.bbox.top,
                        element.bbox.width,
                        element.bbox.height,
                    ],
                    "layer": element.layer,
                }
            )
            continue
        try:
            canvas, record = compose_element(canvas, element, cfg, backend, asset_root)
        except ElementCompositionError:
            raise
        except Exception as exc:
            raise ElementCompositionError(element.id, exc, trace) from exc
        trace.records.append(record)
        if cfg.keep_intermediates:
            trace.debug_canvases.append(canvas.copy())
    return canvas, trace
