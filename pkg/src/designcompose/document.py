"""Layered design documents: typed model, JSON ingestion, validation.

A document is a canvas plus a layer-ordered set of elements. Layout comes
from upstream tooling as normalized coordinates, so one document serves any
render resolution; pixel boxes are derived on demand.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

from .errors import DegenerateBoxWarning, SchemaError, SchemaWarning, ValidationError

ELEMENT_KINDS = ("background", "image", "svg", "text")
COMPOSABLE_KINDS = ("image", "svg")

_BBOX_EPS = 1e-9


@dataclass(frozen=True)
class Canvas:
    """Output canvas size in pixels."""

    width: int
    height: int

    def __post_init__(self):
        if not (isinstance(self.width, int) and isinstance(self.height, int)):
            raise ValidationError("canvas dimensions must be integers")
        if self.width < 1 or self.height < 1:
            raise ValidationError("canvas dimensions must be >= 1")


@dataclass(frozen=True)
class BoundingBox:
    """Normalized placement box: fractions of the canvas in [0, 1]."""

    left: float
    top: float
    width: float
    height: float

    def __post_init__(self):
        if self.left < 0 or self.top < 0:
            raise ValidationError("bbox left/top must be >= 0")
        if self.width <= 0 or self.height <= 0:
            raise ValidationError("bbox width/height must be > 0")
        if self.left + self.width > 1 + _BBOX_EPS:
            raise ValidationError("bbox exceeds canvas: left + width > 1")
        if self.top + self.height > 1 + _BBOX_EPS:
            raise ValidationError("bbox exceeds canvas: top + height > 1")

    def to_pixel_box(self, canvas_width: int, canvas_height: int) -> tuple[int, int, int, int]:
        """Pixel box (x0, y0, w, h): floored origin, half-up rounded size.

        Sizes are clamped to at least 1 px; a box that rounds to zero area
        emits :class:`DegenerateBoxWarning`. The box never leaves the canvas.
        """
        x0 = math.floor(self.left * canvas_width)
        y0 = math.floor(self.top * canvas_height)
        w = math.floor(self.width * canvas_width + 0.5)
        h = math.floor(self.height * canvas_height + 0.5)
        if w == 0 or h == 0:
            warnings.warn(
                f"bbox {self} rounds to zero area on {canvas_width}x{canvas_height}; clamped to 1x1",
                DegenerateBoxWarning,
                stacklevel=2,
            )
        x0 = min(x0, canvas_width - 1)
        y0 = min(y0, canvas_height - 1)
        w = max(1, min(w, canvas_width - x0))
        h = max(1, min(h, canvas_height - y0))
        return x0, y0, w, h

    def is_full_canvas(self) -> bool:
        return (
            abs(self.left) <= _BBOX_EPS
            and abs(self.top) <= _BBOX_EPS
            and abs(self.width - 1) <= _BBOX_EPS
            and abs(self.height - 1) <= _BBOX_EPS
        )


@dataclass(frozen=True)
class DesignElement:
    """One layer of a design: an asset placed at a bbox with a z-order."""

    id: str
    kind: str
    asset_ref: str
    bbox: BoundingBox
    layer: int
    caption: str | None = None
    alpha_ref: str | None = None

    def __post_init__(self):
        if not self.id:
            raise ValidationError("element id must be non-empty")
        if self.kind not in ELEMENT_KINDS:
            raise ValidationError(f"element {self.id!r}: unknown kind {self.kind!r}")


@dataclass(frozen=True)
class DesignDocument:
    """A validated canvas + elements, sorted ascending by layer."""

    canvas: Canvas
    elements: tuple[DesignElement, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if len(self.elements) == 0:
            raise ValidationError("document must contain at least one element")
        object.__setattr__(
            self, "elements", tuple(sorted(self.elements, key=lambda e: e.layer))
        )
        _validate_elements(self.canvas, self.elements)


def _validate_elements(canvas: Canvas, elements: tuple[DesignElement, ...]) -> None:
    backgrounds = [e for e in elements if e.kind == "background"]
    if len(backgrounds) == 0:
        raise ValidationError("missing background element")
    if len(backgrounds) > 1:
        ids = ", ".join(e.id for e in backgrounds)
        raise ValidationError(f"multiple backgrounds: {ids}")
    if not backgrounds[0].bbox.is_full_canvas():
        raise ValidationError(
            f"background {backgrounds[0].id!r} must cover the full canvas"
        )
    seen: dict[int, str] = {}
    for e in elements:
        if e.layer in seen:
            raise ValidationError(
                f"duplicate layer {e.layer}: elements {seen[e.layer]!r} and {e.id!r}"
            )
        seen[e.layer] = e.id
    ids = [e.id for e in elements]
    if len(set(ids)) != len(ids):
        raise ValidationError("element ids must be unique")


_ELEMENT_FIELDS = {"id", "kind", "asset", "caption", "bbox", "layer", "alpha"}
_CANVAS_FIELDS = {"width", "height"}
_TOP_FIELDS = {"canvas", "elements"}


def _expect(mapping: dict, key: str, types, path: str):
    if key not in mapping:
        raise SchemaError(f"{path}.{key}: missing required field")
    value = mapping[key]
    if not isinstance(value, types) or isinstance(value, bool):
        raise SchemaError(f"{path}.{key}: expected {types}, got {type(value).__name__}")
    return value


def _warn_unknown(mapping: dict, known: set, path: str) -> None:
    for key in mapping:
        if key not in known:
            warnings.warn(f"{path}.{key}: unknown field ignored", SchemaWarning, stacklevel=3)


def load_design(source: str) -> DesignDocument:
    """Parse and validate a design JSON document.

    Schema errors name the offending field; invariant violations (duplicate
    layers, missing or multiple backgrounds) raise :class:`ValidationError`.
    Elements come back sorted ascending by layer. Asset paths are recorded
    as-is; existence is checked lazily at compose time.
    """
    try:
        raw = json.loads(source)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise SchemaError("document: expected a JSON object at top level")
    _warn_unknown(raw, _TOP_FIELDS, "document")

    canvas_raw = _expect(raw, "canvas", dict, "document")
    _warn_unknown(canvas_raw, _CANVAS_FIELDS, "document.canvas")
    canvas = Canvas(
        width=_expect(canvas_raw, "width", int, "document.canvas"),
        height=_expect(canvas_raw, "height", int, "document.canvas"),
    )

    elements_raw = _expect(raw, "elements", list, "document")
    elements = []
    for i, item in enumerate(elements_raw):
        path = f"document.elements[{i}]"
        if not isinstance(item, dict):
            raise SchemaError(f"{path}: expected a JSON object")
        _warn_unknown(item, _ELEMENT_FIELDS, path)
        bbox_raw = _expect(item, "bbox", list, path)
        if len(bbox_raw) != 4 or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in bbox_raw
        ):
            raise SchemaError(f"{path}.bbox: expected [left, top, width, height] numbers")
        elements.append(
            DesignElement(
                id=_expect(item, "id", str, path),
                kind=_expect(item, "kind", str, path),
                asset_ref=_expect(item, "asset", str, path),
                caption=item.get("caption"),
                bbox=BoundingBox(*(float(v) for v in bbox_raw)),
                layer=_expect(item, "layer", int, path),
                alpha_ref=item.get("alpha"),
            )
        )
    return DesignDocument(canvas=canvas, elements=tuple(elements))


def dump_design(doc: DesignDocument) -> str:
    """Serialize a document back to design JSON (round-trip stable)."""
    payload = {
        "canvas": {"width": doc.canvas.width, "height": doc.canvas.height},
        "elements": [
            {
                "id": e.id,
                "kind": e.kind,
                "asset": e.asset_ref,
                **({"caption": e.caption} if e.caption is not None else {}),
                "bbox": [e.bbox.left, e.bbox.top, e.bbox.width, e.bbox.height],
                "layer": e.layer,
                **({"alpha": e.alpha_ref} if e.alpha_ref is not None else {}),
            }
            for e in doc.elements
        ],
    }
    return json.dumps(payload, indent=2, sort_keys=True)


def foreground_elements(doc: DesignDocument) -> list[DesignElement]:
    """All non-background elements, ascending layer order."""
    return [e for e in doc.elements if e.kind != "background"]
