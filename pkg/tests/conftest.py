import json
import os

import numpy as np
import pytest

from designcompose import MockBackend
from designcompose.raster import save_image_png


@pytest.fixture
def backend():
    return MockBackend(seed=7)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def make_disc_foreground(size=32, color=(0.95, 0.15, 0.1)):
    """Bright disc on transparent ground, RGBA."""
    fg = np.zeros((size, size, 4))
    yy, xx = np.mgrid[0:size, 0:size]
    c = (size - 1) / 2
    disc = (yy - c) ** 2 + (xx - c) ** 2 <= (size * 0.44) ** 2
    for ch, val in enumerate(color):
        fg[..., ch] = np.where(disc, val, 0.0)
    fg[..., 3] = disc.astype(float)
    return fg


SVG_SQUARE = (
    '<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 10 10">'
    '<rect x="1" y="1" width="8" height="8" fill="#20c040"/></svg>'
)

SVG_TRANSPARENT = '<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 10 10"></svg>'


def write_design(
    tmp_path,
    elements,
    canvas=(64, 64),
    background_value=(0.12, 0.14, 0.2),
    name="design.json",
):
    """Write a design JSON plus a flat background asset; returns the path.

    ``elements`` holds dicts without the background, which is synthesized.
    """
    bg = np.zeros((canvas[1], canvas[0], 3))
    bg[...] = background_value
    save_image_png(os.path.join(tmp_path, "bg.png"), bg)
    doc = {
        "canvas": {"width": canvas[0], "height": canvas[1]},
        "elements": [
            {"id": "bg", "kind": "background", "asset": "bg.png", "bbox": [0, 0, 1, 1], "layer": 0},
            *elements,
        ],
    }
    path = os.path.join(tmp_path, name)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
    return path


def write_disc_asset(tmp_path, name="fg.png", size=32, color=(0.95, 0.15, 0.1)):
    save_image_png(os.path.join(tmp_path, name), make_disc_foreground(size, color))
    return name


def write_svg_asset(tmp_path, name="shape.svg", markup=SVG_SQUARE):
    with open(os.path.join(tmp_path, name), "w", encoding="utf-8") as fh:
        fh.write(markup)
    return name
