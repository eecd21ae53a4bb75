"""Raster image helpers.

Images are plain numpy arrays of shape (H, W, C), C in {3, 4}, float64,
channel values in [0, 1], sRGB. PNG is the interchange format.
"""

from __future__ import annotations

import numpy as np
from PIL import Image

from .errors import InputError


def validate_image(image: np.ndarray, name: str = "image") -> np.ndarray:
    if not isinstance(image, np.ndarray) or image.ndim != 3 or image.shape[2] not in (3, 4):
        raise InputError(f"{name}: expected (H, W, 3|4) array")
    if not np.isfinite(image).all():
        raise InputError(f"{name}: non-finite pixel data")
    if image.min() < 0 or image.max() > 1:
        raise InputError(f"{name}: pixel values outside [0, 1]")
    return image


def has_alpha(image: np.ndarray) -> bool:
    return image.shape[2] == 4


def load_image(path: str) -> np.ndarray:
    """Load a raster file to float64 RGB(A) in [0, 1]."""
    try:
        with Image.open(path) as img:
            mode = "RGBA" if "A" in img.getbands() or img.mode == "P" else "RGB"
            arr = np.asarray(img.convert(mode), dtype=np.float64) / 255.0
    except FileNotFoundError as exc:
        raise InputError(f"asset not found: {path}") from exc
    except OSError as exc:
        raise InputError(f"unreadable asset {path}: {exc}") from exc
    return arr


def save_image_png(path: str, image: np.ndarray) -> None:
    arr = np.clip(image, 0.0, 1.0)
    data = np.floor(arr * 255.0 + 0.5).astype(np.uint8)
    mode = "RGBA" if data.shape[2] == 4 else "RGB"
    Image.fromarray(data, mode=mode).save(path, format="PNG")


def flatten_to_rgb(image: np.ndarray, matte: float = 0.0) -> np.ndarray:
    """Drop an alpha channel by compositing over a constant matte."""
    if image.shape[2] == 3:
        return image.copy()
    alpha = image[..., 3:4]
    return image[..., :3] * alpha + matte * (1.0 - alpha)


def resize_bilinear(image: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resampling with half-pixel centers (align_corners=False)."""
    h, w = image.shape[:2]
    if (h, w) == (out_h, out_w):
        return image.copy()
    src_y = (np.arange(out_h) + 0.5) * (h / out_h) - 0.5
    src_x = (np.arange(out_w) + 0.5) * (w / out_w) - 0.5
    y0 = np.clip(np.floor(src_y).astype(int), 0, h - 1)
    x0 = np.clip(np.floor(src_x).astype(int), 0, w - 1)
    y1 = np.clip(y0 + 1, 0, h - 1)
    x1 = np.clip(x0 + 1, 0, w - 1)
    wy = np.clip(src_y - y0, 0.0, 1.0)[:, None, None]
    wx = np.clip(src_x - x0, 0.0, 1.0)[None, :, None]
    top = image[y0][:, x0] * (1 - wx) + image[y0][:, x1] * wx
    bot = image[y1][:, x0] * (1 - wx) + image[y1][:, x1] * wx
    return top * (1 - wy) + bot * wy


def area_downsample(image: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Exact area-weighted downsampling (each output cell averages the
    source region it covers, with fractional edge overlap)."""
    h, w = image.shape[:2]

    def weights(n_in: int, n_out: int) -> np.ndarray:
        scale = n_in / n_out
        mat = np.zeros((n_out, n_in))
        for i in range(n_out):
            lo, hi = i * scale, (i + 1) * scale
            cells = np.arange(n_in)
            overlap = np.clip(np.minimum(hi, cells + 1) - np.maximum(lo, cells), 0.0, None)
            mat[i] = overlap / scale
        return mat

    wr = weights(h, out_h)
    wc = weights(w, out_w)
    return np.einsum("oh,hwc,pw->opc", wr, image, wc)


def nearest_upsample(image: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Nearest-neighbor resize; linear in the input values."""
    h, w = image.shape[:2]
    rows = np.clip(((np.arange(out_h) + 0.5) * h / out_h).astype(int), 0, h - 1)
    cols = np.clip(((np.arange(out_w) + 0.5) * w / out_w).astype(int), 0, w - 1)
    return image[rows][:, cols]


def fit_to_box(image: np.ndarray, box_h: int, box_w: int) -> np.ndarray:
    """Aspect-preserving letterbox into (box_h, box_w); returns RGBA.

    The image is scaled to fit inside the box and centered; padding is
    fully transparent. A source without alpha becomes opaque inside its
    scaled extent.
    """
    h, w = image.shape[:2]
    scale = min(box_w / w, box_h / h)
    new_h = max(1, int(np.floor(h * scale + 0.5)))
    new_w = max(1, int(np.floor(w * scale + 0.5)))
    new_h, new_w = min(new_h, box_h), min(new_w, box_w)
    resized = resize_bilinear(image, new_h, new_w)
    if resized.shape[2] == 3:
        resized = np.concatenate([resized, np.ones((new_h, new_w, 1))], axis=2)
    out = np.zeros((box_h, box_w, 4))
    oy = (box_h - new_h) // 2
    ox = (box_w - new_w) // 2
    out[oy : oy + new_h, ox : ox + new_w] = resized
    return np.clip(out, 0.0, 1.0)
