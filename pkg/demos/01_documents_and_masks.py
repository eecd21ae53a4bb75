"""Layered design documents, pixel boxes, masks, and naive pasting.

Builds a small design JSON from scratch, loads it, derives pixel boxes and
foreground masks at canvas and latent resolution, and shows the naive
alpha-over paste the pipeline starts from.
"""

import json
import os

import numpy as np

from designcompose import (
    complement,
    downsample_to_latent,
    foreground_elements,
    load_design,
    mask_from_alpha,
    mask_from_bbox,
    naive_composite,
)
from designcompose.masks import placed_alpha_mask, save_mask_png
from designcompose.raster import fit_to_box, save_image_png

OUT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "output", "01_documents")
os.makedirs(OUT, exist_ok=True)

design = {
    "canvas": {"width": 64, "height": 64},
    "elements": [
        {"id": "bg", "kind": "background", "asset": "bg.png", "bbox": [0, 0, 1, 1], "layer": 0},
        {"id": "badge", "kind": "image", "asset": "badge.png", "caption": "a gold badge",
         "bbox": [0.55, 0.1, 0.35, 0.35], "layer": 2},
        {"id": "ribbon", "kind": "svg", "asset": "ribbon.svg", "bbox": [0.05, 0.6, 0.9, 0.3], "layer": 1},
    ],
}
doc = load_design(json.dumps(design))
print("canvas:", doc.canvas)
print("layer order:", [e.id for e in doc.elements])
print("foregrounds:", [e.id for e in foreground_elements(doc)])

badge = doc.elements[-1]
box = badge.bbox.to_pixel_box(doc.canvas.width, doc.canvas.height)
print(f"badge pixel box (x0, y0, w, h): {box}")

# A soft-edged disc as the badge asset, with its own alpha channel.
size = 40
yy, xx = np.mgrid[0:size, 0:size]
dist = np.sqrt((yy - size / 2 + 0.5) ** 2 + (xx - size / 2 + 0.5) ** 2)
asset = np.zeros((size, size, 4))
asset[..., 0] = 0.9
asset[..., 1] = 0.75
asset[..., 2] = 0.1
asset[..., 3] = np.clip((size * 0.45 - dist) / 3 + 0.5, 0, 1)

alpha_mask = mask_from_alpha(asset, threshold=0.5)
print("asset alpha mask coverage:", alpha_mask.grid.mean().round(3))

x0, y0, bw, bh = box
fitted = fit_to_box(asset, bh, bw)
canvas_mask = placed_alpha_mask(fitted, badge.bbox, doc.canvas.height, doc.canvas.width)
latent_mask = downsample_to_latent(canvas_mask, 8, 8)
print("latent-resolution foreground mask:")
print(latent_mask.grid)
print("background mask is its complement; total cells:",
      int(latent_mask.grid.sum() + complement(latent_mask).grid.sum()))

bbox_mask = mask_from_bbox(badge.bbox, doc.canvas.height, doc.canvas.width)
print("hard box mask covers", int(bbox_mask.grid.sum()), "pixels",
      "(fallback when an element has no alpha)")

background = np.linspace(0.1, 0.4, 64)[None, :, None] * np.ones((64, 64, 3))
pasted = naive_composite(background, fitted, badge.bbox)
save_image_png(os.path.join(OUT, "naive_paste.png"), pasted)
save_mask_png(os.path.join(OUT, "m_fg_latent.png"), latent_mask)
print("wrote", OUT)
