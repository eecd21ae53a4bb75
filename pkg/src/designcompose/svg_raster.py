"""Minimal deterministic SVG rasterizer.

Covers the shape subset used by design assets in tests and demos: rect,
circle, ellipse, line, polygon and polyline with solid fills/strokes,
hex or named colors, and opacity. Coverage is evaluated at pixel centers
(hard edges, no antialiasing) so output bytes are fully deterministic.
The viewBox maps into the target box with uniform scale, centered
(the SVG default preserveAspectRatio behavior).
"""

from __future__ import annotations

import xml.etree.ElementTree as ET

import numpy as np

from .errors import InputError

_NAMED_COLORS = {
    "black": (0, 0, 0),
    "white": (255, 255, 255),
    "red": (255, 0, 0),
    "green": (0, 128, 0),
    "lime": (0, 255, 0),
    "blue": (0, 0, 255),
    "yellow": (255, 255, 0),
    "cyan": (0, 255, 255),
    "magenta": (255, 0, 255),
    "gray": (128, 128, 128),
    "grey": (128, 128, 128),
    "orange": (255, 165, 0),
    "purple": (128, 0, 128),
    "teal": (0, 128, 128),
    "navy": (0, 0, 128),
}


def _parse_color(spec: str | None) -> tuple[float, float, float] | None:
    """Returns RGB in [0,1], or None for 'none'."""
    if spec is None:
        spec = "black"
    spec = spec.strip().lower()
    if spec in ("none", "transparent"):
        return None
    if spec.startswith("#"):
        hexpart = spec[1:]
        if len(hexpart) == 3:
            hexpart = "".join(c * 2 for c in hexpart)
        if len(hexpart) != 6:
            raise InputError(f"unsupported color {spec!r}")
        r, g, b = (int(hexpart[i : i + 2], 16) for i in (0, 2, 4))
        return (r / 255.0, g / 255.0, b / 255.0)
    if spec in _NAMED_COLORS:
        r, g, b = _NAMED_COLORS[spec]
        return (r / 255.0, g / 255.0, b / 255.0)
    raise InputError(f"unsupported color {spec!r}")


def _local_name(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def _fget(node: ET.Element, name: str, default: float = 0.0) -> float:
    raw = node.get(name)
    if raw is None:
        return default
    return float(raw.strip().removesuffix("px"))


def _shape_coverage(node: ET.Element, ux: np.ndarray, uy: np.ndarray) -> np.ndarray | None:
    """Boolean coverage of one shape over user-space pixel-center grids."""
    kind = _local_name(node.tag)
    if kind == "rect":
        x, y = _fget(node, "x"), _fget(node, "y")
        w, h = _fget(node, "width"), _fget(node, "height")
        return (ux >= x) & (ux < x + w) & (uy >= y) & (uy < y + h)
    if kind == "circle":
        cx, cy, r = _fget(node, "cx"), _fget(node, "cy"), _fget(node, "r")
        return (ux - cx) ** 2 + (uy - cy) ** 2 <= r**2
    if kind == "ellipse":
        cx, cy = _fget(node, "cx"), _fget(node, "cy")
        rx, ry = _fget(node, "rx"), _fget(node, "ry")
        if rx <= 0 or ry <= 0:
            return None
        return ((ux - cx) / rx) ** 2 + ((uy - cy) / ry) ** 2 <= 1.0
    if kind == "line":
        x1, y1 = _fget(node, "x1"), _fget(node, "y1")
        x2, y2 = _fget(node, "x2"), _fget(node, "y2")
        half = _fget(node, "stroke-width", 1.0) / 2.0
        dx, dy = x2 - x1, y2 - y1
        length2 = dx * dx + dy * dy
        if length2 == 0:
            return (ux - x1) ** 2 + (uy - y1) ** 2 <= half**2
        t = np.clip(((ux - x1) * dx + (uy - y1) * dy) / length2, 0.0, 1.0)
        px, py = x1 + t * dx, y1 + t * dy
        return (ux - px) ** 2 + (uy - py) ** 2 <= half**2
    if kind in ("polygon", "polyline"):
        raw = (node.get("points") or "").replace(",", " ").split()
        pts = np.array([float(v) for v in raw], dtype=float)
        if pts.size < 6:
            return None
        pts = pts.reshape(-1, 2)
        # Even-odd winding test against each edge (polyline closed implicitly).
        inside = np.zeros(ux.shape, dtype=bool)
        n = len(pts)
        for i in range(n):
            x1, y1 = pts[i]
            x2, y2 = pts[(i + 1) % n]
            crosses = (y1 <= uy) != (y2 <= uy)
            with np.errstate(divide="ignore", invalid="ignore"):
                xi = x1 + (uy - y1) * (x2 - x1) / (y2 - y1)
            inside ^= crosses & (ux < xi)
        return inside
    return None


def rasterize_svg(svg_text: str, out_w: int, out_h: int) -> np.ndarray:
    """Rasterize SVG markup to an RGBA float array of shape (out_h, out_w, 4).

    The drawing is scaled uniformly to fit the output box and centered;
    uncovered pixels stay fully transparent.
    """
    try:
        root = ET.fromstring(svg_text)
    except ET.ParseError as exc:
        raise InputError(f"invalid SVG: {exc}") from exc
    if _local_name(root.tag) != "svg":
        raise InputError("invalid SVG: root element is not <svg>")

    viewbox = root.get("viewBox")
    if viewbox is not None:
        vx, vy, vw, vh = (float(v) for v in viewbox.replace(",", " ").split())
    else:
        vx, vy = 0.0, 0.0
        vw = _fget(root, "width", float(out_w))
        vh = _fget(root, "height", float(out_h))
    if vw <= 0 or vh <= 0:
        raise InputError("invalid SVG: non-positive viewBox size")

    scale = min(out_w / vw, out_h / vh)
    off_x = (out_w - vw * scale) / 2.0
    off_y = (out_h - vh * scale) / 2.0

    # User-space coordinates of every output pixel center.
    xs = (np.arange(out_w) + 0.5 - off_x) / scale + vx
    ys = (np.arange(out_h) + 0.5 - off_y) / scale + vy
    ux, uy = np.meshgrid(xs, ys)

    out = np.zeros((out_h, out_w, 4))
    for node in root.iter():
        if _local_name(node.tag) not in ("rect", "circle", "ellipse", "line", "polygon", "polyline"):
            continue
        coverage = _shape_coverage(node, ux, uy)
        if coverage is None or not coverage.any():
            continue
        kind = _local_name(node.tag)
        if kind == "line":
            color = _parse_color(node.get("stroke") or "black")
        else:
            color = _parse_color(node.get("fill"))
        if color is None:
            continue
        opacity = float(node.get("opacity", 1.0)) * float(
            node.get("fill-opacity" if kind != "line" else "stroke-opacity", 1.0)
        )
        alpha = np.where(coverage, np.clip(opacity, 0.0, 1.0), 0.0)[..., None]
        src_rgb = np.broadcast_to(np.array(color), out[..., :3].shape)
        # Standard over-compositing in straight-alpha form.
        out_a = alpha + out[..., 3:4] * (1 - alpha)
        with np.errstate(divide="ignore", invalid="ignore"):
            out_rgb = np.where(
                out_a > 0,
                (src_rgb * alpha + out[..., :3] * out[..., 3:4] * (1 - alpha)) / np.where(out_a > 0, out_a, 1.0),
                0.0,
            )
        out = np.concatenate([out_rgb, out_a], axis=2)
    return np.clip(out, 0.0, 1.0)
