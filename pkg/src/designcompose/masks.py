"""Binary masks at pixel and latent resolution, and naive alpha-over pasting.

The foreground mask comes from the element's alpha channel when it has one,
otherwise from a hard bounding-box mask. The background mask is its
complement at latent resolution. Downsampling uses any-overlap max pooling
so thin strokes survive at coarse latent grids.
"""

from __future__ import annotations

import math

import numpy as np
from PIL import Image

from .document import BoundingBox
from .errors import ContractError, InputError
from .raster import validate_image


class BinaryMask:
    """A {0,1}-valued (H, W) grid."""

    __slots__ = ("grid",)

    def __init__(self, grid: np.ndarray):
        arr = np.asarray(grid)
        if arr.ndim != 2:
            raise ContractError("mask grid must be 2-dimensional")
        if not np.isin(arr, (0, 1)).all():
            raise ContractError("mask values must be exactly 0 or 1")
        self.grid = arr.astype(np.uint8)

    @property
    def height(self) -> int:
        return self.grid.shape[0]

    @property
    def width(self) -> int:
        return self.grid.shape[1]

    def __eq__(self, other) -> bool:
        return isinstance(other, BinaryMask) and np.array_equal(self.grid, other.grid)

    def __repr__(self) -> str:
        return f"BinaryMask({self.height}x{self.width}, {int(self.grid.sum())} set)"


def mask_from_alpha(image: np.ndarray, threshold: float = 0.5) -> BinaryMask:
    """Threshold an RGBA image's alpha: cell = 1 iff alpha > threshold."""
    validate_image(image, "image")
    if image.shape[2] != 4:
        raise InputError(
            "image has no alpha channel; use mask_from_bbox for a hard box mask"
        )
    if not 0 <= threshold <= 1:
        raise ContractError("threshold must lie in [0, 1]")
    return BinaryMask((image[..., 3] > threshold).astype(np.uint8))


def mask_from_bbox(bbox: BoundingBox, height: int, width: int) -> BinaryMask:
    """Hard box mask: ones exactly on the pixel box derived from bbox."""
    if height < 1 or width < 1:
        raise ContractError("mask dimensions must be >= 1")
    x0, y0, w, h = bbox.to_pixel_box(width, height)
    grid = np.zeros((height, width), dtype=np.uint8)
    grid[y0 : y0 + h, x0 : x0 + w] = 1
    return BinaryMask(grid)


def complement(mask: BinaryMask) -> BinaryMask:
    return BinaryMask(1 - mask.grid)


def downsample_to_latent(mask: BinaryMask, h_lat: int, w_lat: int) -> BinaryMask:
    """Max-pool to (h_lat, w_lat): output cell is 1 iff any overlapped input
    cell is 1. Non-integer ratios pool over every input cell the output
    cell touches."""
    if h_lat > mask.height or w_lat > mask.width:
        raise ContractError("latent grid must not exceed the mask resolution")
    if h_lat < 1 or w_lat < 1:
        raise ContractError("latent grid must be >= 1")
    grid = mask.grid
    out = np.zeros((h_lat, w_lat), dtype=np.uint8)
    for i in range(h_lat):
        r0 = math.floor(i * mask.height / h_lat)
        r1 = math.ceil((i + 1) * mask.height / h_lat)
        for j in range(w_lat):
            c0 = math.floor(j * mask.width / w_lat)
            c1 = math.ceil((j + 1) * mask.width / w_lat)
            out[i, j] = grid[r0:r1, c0:c1].max()
    return BinaryMask(out)


def naive_composite(
    background: np.ndarray, foreground: np.ndarray, bbox: BoundingBox
) -> np.ndarray:
    """Standard alpha-over paste of the foreground into the pixel box.

    The foreground must already be sized to the pixel box. Pixels outside
    the box are bit-identical to the background. A 3-channel foreground is
    treated as fully opaque.
    """
    validate_image(background, "background")
    validate_image(foreground, "foreground")
    h, w = background.shape[:2]
    x0, y0, bw, bh = bbox.to_pixel_box(w, h)
    if foreground.shape[:2] != (bh, bw):
        raise ContractError(
            f"foreground shape {foreground.shape[:2]} does not match pixel box ({bh}, {bw})"
        )
    out = background.copy()
    region = out[y0 : y0 + bh, x0 : x0 + bw]
    if foreground.shape[2] == 4:
        fa = foreground[..., 3:4]
        fg_rgb = foreground[..., :3]
    else:
        fa = np.ones((bh, bw, 1))
        fg_rgb = foreground
    region[..., :3] = fg_rgb * fa + region[..., :3] * (1.0 - fa)
    if background.shape[2] == 4:
        region[..., 3:4] = fa + region[..., 3:4] * (1.0 - fa)
    out[y0 : y0 + bh, x0 : x0 + bw] = region
    return out


def placed_alpha_mask(
    foreground: np.ndarray,
    bbox: BoundingBox,
    height: int,
    width: int,
    threshold: float = 0.5,
) -> BinaryMask:
    """Foreground mask at canvas resolution: the box-sized RGBA foreground's
    alpha thresholded in place, zeros everywhere else."""
    validate_image(foreground, "foreground")
    if foreground.shape[2] != 4:
        raise InputError(
            "foreground has no alpha channel; use mask_from_bbox for a hard box mask"
        )
    x0, y0, bw, bh = bbox.to_pixel_box(width, height)
    if foreground.shape[:2] != (bh, bw):
        raise ContractError(
            f"foreground shape {foreground.shape[:2]} does not match pixel box ({bh}, {bw})"
        )
    grid = np.zeros((height, width), dtype=np.uint8)
    grid[y0 : y0 + bh, x0 : x0 + bw] = (foreground[..., 3] > threshold).astype(np.uint8)
    return BinaryMask(grid)


def save_mask_png(path: str, mask: BinaryMask) -> None:
    """Export as a single-channel PNG (0 or 255)."""
    Image.fromarray(mask.grid * np.uint8(255), mode="L").save(path, format="PNG")
