"""Command-line entry points: compose, probe, eval.

Exit codes are stable contracts: 0 success, 1 input or validation failure,
2 backend or internal contract failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys

import numpy as np
from PIL import Image

from .compose import (
    compose_document,
    compose_element,
    default_caption,
    init_canvas,
    load_foreground_asset,
)
from .config import load_pipeline_config
from .determinism import checksum
from .document import BoundingBox, foreground_elements, load_design
from .errors import (
    BackendError,
    ContractError,
    DesignComposeError,
    ElementCompositionError,
    InputError,
)
from .identity import evaluate_pairs, get_embedder
from .injection import run_token_injection
from .masks import save_mask_png
from .raster import load_image, save_image_png
from .scheduler import make_schedule

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_BACKEND = 2


def _classify(exc: Exception) -> int:
    if isinstance(exc, ElementCompositionError):
        return _classify(exc.cause)
    if isinstance(exc, (BackendError, ContractError)):
        return EXIT_BACKEND
    return EXIT_INPUT


def _load_inputs(design_path: str, config_path: str | None, seed: int | None):
    overrides = {} if seed is None else {"seed": seed}
    cfg = load_pipeline_config(config_path, overrides)
    try:
        with open(design_path, encoding="utf-8") as fh:
            doc = load_design(fh.read())
    except OSError as exc:
        raise InputError(f"unreadable design {design_path}: {exc}") from exc
    return cfg, doc


def _json_dump(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_compose(
    design_path: str,
    config_path: str | None,
    out_dir: str,
    seed: int | None = None,
    debug_intermediates: bool = False,
) -> int:
    """Compose a design document; writes backing.png and manifest.json."""
    cfg, doc = _load_inputs(design_path, config_path, seed)
    backend = cfg.build_backend()
    compose_cfg = cfg.compose_config()
    if debug_intermediates:
        compose_cfg = dataclasses.replace(compose_cfg, keep_intermediates=True)
    asset_root = os.path.dirname(os.path.abspath(design_path))
    canvas, trace = compose_document(doc, compose_cfg, backend, asset_root)
    os.makedirs(out_dir, exist_ok=True)
    save_image_png(os.path.join(out_dir, "backing.png"), canvas)
    manifest = {
        "design": os.path.basename(design_path),
        "config": cfg.resolved,
        "trace": trace.to_jsonable(),
        "backing_checksum": checksum(canvas),
    }
    _json_dump(os.path.join(out_dir, "manifest.json"), manifest)
    if debug_intermediates and trace.debug_canvases:
        for i, step_canvas in enumerate(trace.debug_canvases):
            save_image_png(os.path.join(out_dir, f"canvas_step_{i:03d}.png"), step_canvas)
    return EXIT_OK


def cmd_probe(
    design_path: str,
    config_path: str | None,
    element_id: str,
    out_dir: str,
    seed: int | None = None,
) -> int:
    """Export relevance scores, CA heatmaps, and selections for one element
    at its current canvas state (all earlier layers composed first)."""
    cfg, doc = _load_inputs(design_path, config_path, seed)
    backend = cfg.build_backend()
    compose_cfg = cfg.compose_config()
    asset_root = os.path.dirname(os.path.abspath(design_path))

    target = next((e for e in foreground_elements(doc) if e.id == element_id), None)
    if target is None:
        raise InputError(f"unknown element id {element_id!r}")
    if target.kind == "text":
        raise InputError(f"element {element_id!r} is a text element; nothing to probe")

    canvas = init_canvas(doc, asset_root)
    for element in foreground_elements(doc):
        if element.id == element_id:
            break
        if element.kind == "text":
            continue
        canvas, _ = compose_element(canvas, element, compose_cfg, backend, asset_root)

    height, width = canvas.shape[:2]
    x0, y0, bw, bh = target.bbox.to_pixel_box(width, height)
    fitted = load_foreground_asset(target, bw, bh, asset_root)
    schedule = make_schedule(
        compose_cfg.scheduler.n_steps, compose_cfg.scheduler.shape, compose_cfg.scheduler.shift
    )
    inj_cfg = compose_cfg.injection
    if inj_cfg.scoring_sigma is None:
        inj_cfg = dataclasses.replace(
            inj_cfg, scoring_sigma=float(schedule.sigmas[schedule.n_steps // 2])
        )
    if not inj_cfg.enabled:
        # The probe is a diagnostic surface; it always runs the scoring pass.
        inj_cfg = dataclasses.replace(inj_cfg, enabled=True)
    _, trace = run_token_injection(
        fitted,
        canvas,
        target.bbox,
        target.caption or default_caption(target),
        backend,
        inj_cfg,
        alpha_threshold=compose_cfg.alpha_threshold,
        mask_resolution=compose_cfg.mask_resolution,
    )

    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "relevance.csv"), "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["token_index", "r_fg", "r_bg"])
        for i, (fg, bg) in enumerate(zip(trace.r_fg, trace.r_bg)):
            writer.writerow([i, repr(fg), repr(bg)])
    _json_dump(
        os.path.join(out_dir, "selection.json"),
        {
            "element_id": element_id,
            "s_fg": trace.s_fg,
            "s_bg": trace.s_bg,
            "n_fg": trace.n_fg,
            "n_bg": trace.n_bg,
            "scoring_sigma": trace.scoring_sigma,
        },
    )
    ca = trace.aggregated_ca
    peak = float(ca.max()) if ca.max() > 0 else 1.0
    for i in range(ca.shape[0]):
        gray = np.floor(ca[i] / peak * 255.0 + 0.5).astype(np.uint8)
        Image.fromarray(gray, mode="L").save(
            os.path.join(out_dir, f"heatmap_token_{i:03d}.png"), format="PNG"
        )
    m_fg, m_bg = trace.masks
    save_mask_png(os.path.join(out_dir, "m_fg.png"), m_fg)
    save_mask_png(os.path.join(out_dir, "m_bg.png"), m_bg)
    return EXIT_OK


def cmd_eval(pairs_manifest: str, config_path: str | None, out_path: str) -> int:
    """Evaluate identity metrics over (foreground, composed, bbox) triples."""
    cfg = load_pipeline_config(config_path)
    embedder = get_embedder(cfg.embedder_name)
    try:
        with open(pairs_manifest, encoding="utf-8") as fh:
            entries = json.load(fh)
    except OSError as exc:
        raise InputError(f"unreadable pairs manifest {pairs_manifest}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"invalid pairs manifest JSON: {exc}") from exc
    if not isinstance(entries, list) or not entries:
        raise InputError("pairs manifest must be a non-empty JSON list")

    root = os.path.dirname(os.path.abspath(pairs_manifest))
    pairs = []
    for i, entry in enumerate(entries):
        for key in ("foreground", "composed", "bbox"):
            if key not in entry:
                raise InputError(f"pairs[{i}]: missing {key!r}")
        fg = load_image(os.path.join(root, entry["foreground"]))
        composed = load_image(os.path.join(root, entry["composed"]))
        bbox = BoundingBox(*(float(v) for v in entry["bbox"]))
        h, w = composed.shape[:2]
        x0, y0, bw, bh = bbox.to_pixel_box(w, h)
        pairs.append((fg, composed[y0 : y0 + bh, x0 : x0 + bw]))

    report = evaluate_pairs(pairs, embedder)
    os.makedirs(os.path.dirname(os.path.abspath(out_path)), exist_ok=True)
    _json_dump(out_path, report.to_jsonable())
    table_path = os.path.splitext(out_path)[0] + ".txt"
    with open(table_path, "w", encoding="utf-8") as fh:
        fh.write(report.format_table())
    sys.stdout.write(report.format_table())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="designcompose",
        description="Identity-preserving compositing of layered design documents",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_compose = sub.add_parser("compose", help="compose a design into a backing image")
    p_compose.add_argument("--design", required=True)
    p_compose.add_argument("--config", default=None)
    p_compose.add_argument("--out", required=True)
    p_compose.add_argument("--seed", type=int, default=None)
    p_compose.add_argument("--debug-intermediates", action="store_true")

    p_probe = sub.add_parser("probe", help="export relevance diagnostics for one element")
    p_probe.add_argument("--design", required=True)
    p_probe.add_argument("--config", default=None)
    p_probe.add_argument("--element", required=True)
    p_probe.add_argument("--out", required=True)
    p_probe.add_argument("--seed", type=int, default=None)

    p_eval = sub.add_parser("eval", help="identity metrics over composed outputs")
    p_eval.add_argument("--pairs", required=True)
    p_eval.add_argument("--config", default=None)
    p_eval.add_argument("--out", required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "compose":
            return cmd_compose(
                args.design, args.config, args.out, args.seed, args.debug_intermediates
            )
        if args.command == "probe":
            return cmd_probe(args.design, args.config, args.element, args.out, args.seed)
        return cmd_eval(args.pairs, args.config, args.out)
    except DesignComposeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _classify(exc)


if __name__ == "__main__":
    sys.exit(main())
