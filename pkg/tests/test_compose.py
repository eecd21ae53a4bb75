import dataclasses
import json
import os

import numpy as np
import pytest

from designcompose import (
    ComposeConfig,
    InjectionConfig,
    MockBackend,
    SchedulerConfig,
    compose_document,
    load_design,
    run_token_injection,
)
from designcompose.compose import load_foreground_asset
from designcompose.determinism import checksum
from designcompose.errors import ElementCompositionError
from designcompose.masks import naive_composite, placed_alpha_mask

from conftest import SVG_TRANSPARENT, write_design, write_disc_asset, write_svg_asset


def quick_cfg(**kw):
    base = dict(
        injection=InjectionConfig(),
        scheduler=SchedulerConfig(n_steps=8, shape="shifted", shift=3.0, strength=0.7),
        seed=11,
    )
    base.update(kw)
    return ComposeConfig(**base)


def load_doc(path):
    with open(path, encoding="utf-8") as fh:
        return load_design(fh.read()), os.path.dirname(path)


class TestSvgHandling:
    def test_transparent_svg_leaves_canvas_untouched(self, tmp_path, backend):
        tmp = str(tmp_path)
        svg = write_svg_asset(tmp, markup=SVG_TRANSPARENT)
        path = write_design(
            tmp,
            [{"id": "ghost", "kind": "svg", "asset": svg, "bbox": [0.25, 0.25, 0.5, 0.5], "layer": 1}],
        )
        doc, root = load_doc(path)
        cfg = quick_cfg(keep_intermediates=True)
        canvas, trace = compose_document(doc, cfg, backend, root)
        assert np.array_equal(canvas, trace.debug_canvases[0])

    def test_svg_locality_outside_mask(self, tmp_path, backend):
        tmp = str(tmp_path)
        svg = write_svg_asset(tmp)
        path = write_design(
            tmp,
            [{"id": "sq", "kind": "svg", "asset": svg, "bbox": [0.125, 0.25, 0.5, 0.5], "layer": 1}],
        )
        doc, root = load_doc(path)
        cfg = quick_cfg(keep_intermediates=True)
        canvas, trace = compose_document(doc, cfg, backend, root)
        before = trace.debug_canvases[0]
        element = doc.elements[1]
        h, w = canvas.shape[:2]
        x0, y0, bw, bh = element.bbox.to_pixel_box(w, h)
        fitted = load_foreground_asset(element, bw, bh, root)
        mask = placed_alpha_mask(fitted, element.bbox, h, w, cfg.alpha_threshold)
        outside = mask.grid == 0
        assert np.array_equal(canvas[outside], before[outside])
        assert not np.array_equal(canvas, before)  # something was pasted

    def test_paste_back_disabled_replaces_canvas(self, tmp_path, backend):
        tmp = str(tmp_path)
        svg = write_svg_asset(tmp)
        path = write_design(
            tmp,
            [{"id": "sq", "kind": "svg", "asset": svg, "bbox": [0.25, 0.25, 0.5, 0.5], "layer": 1}],
        )
        doc, root = load_doc(path)
        on, _ = compose_document(doc, quick_cfg(), backend, root)
        off, _ = compose_document(doc, quick_cfg(svg_paste_back=False), backend, root)
        assert not np.array_equal(on, off)


class TestImageHandling:
    def make_image_doc(self, tmp):
        asset = write_disc_asset(tmp)
        path = write_design(
            tmp,
            [
                {
                    "id": "disc",
                    "kind": "image",
                    "asset": asset,
                    "caption": "a bright red disc",
                    "bbox": [0.25, 0.25, 0.5, 0.5],
                    "layer": 1,
                }
            ],
        )
        return load_doc(path)

    def test_image_output_matches_mock_closed_form(self, tmp_path, backend):
        # On the mock the denoise loop lands exactly on target(T_final), so
        # the composed canvas must equal decode(target(T_final)) and differ
        # from the naive paste.
        doc, root = self.make_image_doc(str(tmp_path))
        cfg = quick_cfg(keep_intermediates=True)
        canvas, trace = compose_document(doc, cfg, backend, root)

        element = doc.elements[1]
        before = trace.debug_canvases[0]
        h, w = before.shape[:2]
        x0, y0, bw, bh = element.bbox.to_pixel_box(w, h)
        fitted = load_foreground_asset(element, bw, bh, root)
        from designcompose.scheduler import make_schedule

        sched = make_schedule(cfg.scheduler.n_steps, cfg.scheduler.shape, cfg.scheduler.shift)
        inj = dataclasses.replace(
            cfg.injection, scoring_sigma=float(sched.sigmas[sched.n_steps // 2])
        )
        tokens, _ = run_token_injection(
            fitted, before, element.bbox, "a bright red disc", backend, inj
        )
        base = backend.encode_latent(before)
        expected = backend.decode_latent(backend.target_latent(tokens, base))
        assert np.abs(canvas - expected).max() <= 1e-9
        naive = naive_composite(before, fitted, element.bbox)
        assert not np.array_equal(canvas, naive)

    def test_determinism(self, tmp_path):
        doc, root = self.make_image_doc(str(tmp_path))
        runs = []
        for _ in range(2):
            backend = MockBackend(seed=11)
            canvas, trace = compose_document(doc, quick_cfg(), backend, root)
            runs.append((canvas, json.dumps(trace.to_jsonable(), sort_keys=True)))
        assert np.array_equal(runs[0][0], runs[1][0])
        assert runs[0][1] == runs[1][1]

    def test_bbox_update_mode_preserves_far_background(self, tmp_path, backend):
        doc, root = self.make_image_doc(str(tmp_path))
        cfg = quick_cfg(image_update="bbox", bbox_dilation_px=2, keep_intermediates=True)
        canvas, trace = compose_document(doc, cfg, backend, root)
        before = trace.debug_canvases[0]
        # Corner pixels sit outside the dilated box and must be untouched.
        assert np.array_equal(canvas[:10, :10], before[:10, :10])
        assert not np.array_equal(canvas, before)


class TestSequentialConditioning:
    def build_three_element_doc(self, tmp):
        a1 = write_disc_asset(tmp, "a.png", color=(0.9, 0.2, 0.1))
        a2 = write_disc_asset(tmp, "b.png", color=(0.1, 0.8, 0.3))
        a3 = write_disc_asset(tmp, "c.png", color=(0.2, 0.3, 0.9))
        path = write_design(
            tmp,
            [
                {"id": "e1", "kind": "image", "asset": a1, "bbox": [0.0, 0.0, 0.5, 0.5], "layer": 1},
                {"id": "e2", "kind": "image", "asset": a2, "bbox": [0.5, 0.0, 0.5, 0.5], "layer": 2},
                {"id": "e3", "kind": "image", "asset": a3, "bbox": [0.25, 0.5, 0.5, 0.5], "layer": 3},
            ],
        )
        return load_doc(path)

    def test_checksum_chain(self, tmp_path, backend):
        doc, root = self.build_three_element_doc(str(tmp_path))
        _, trace = compose_document(doc, quick_cfg(), backend, root)
        assert len(trace.records) == 3
        for prev, cur in zip(trace.records, trace.records[1:]):
            assert cur.canvas_before_checksum == prev.canvas_after_checksum
            assert cur.injection.canvas_checksum == prev.canvas_after_checksum

    def test_identity_encoder_sees_running_canvas(self, tmp_path):
        # The recorded encode_identity inputs must be composites built on
        # the canvas after the previous element, not the original background.
        tmp = str(tmp_path)
        doc, root = self.build_three_element_doc(tmp)
        backend = MockBackend(seed=11, record_calls=True)
        cfg = quick_cfg(keep_intermediates=True)
        _, trace = compose_document(doc, cfg, backend, root)
        identity_inputs = [c for c in backend.calls if c["op"] == "encode_identity"]
        assert len(identity_inputs) == 3
        h, w = trace.debug_canvases[0].shape[:2]
        for k, element in enumerate(e for e in doc.elements if e.kind != "background"):
            canvas_before = trace.debug_canvases[k]
            x0, y0, bw, bh = element.bbox.to_pixel_box(w, h)
            fitted = load_foreground_asset(element, bw, bh, root)
            expected = naive_composite(canvas_before, fitted, element.bbox)
            assert identity_inputs[k]["input_checksum"] == checksum(expected)
            if k > 0:
                original_bg = trace.debug_canvases[0]
                not_expected = naive_composite(original_bg, fitted, element.bbox)
                assert identity_inputs[k]["input_checksum"] != checksum(not_expected)

    def test_layer_permutation_changes_output(self, tmp_path, backend):
        tmp = str(tmp_path)
        a1 = write_disc_asset(tmp, "a.png", color=(0.9, 0.2, 0.1))
        a2 = write_disc_asset(tmp, "b.png", color=(0.1, 0.8, 0.3))
        outs = []
        for name, (l1, l2) in (("fwd.json", (1, 2)), ("rev.json", (2, 1))):
            path = write_design(
                tmp,
                [
                    {"id": "e1", "kind": "image", "asset": a1, "bbox": [0.0, 0.0, 0.5, 0.5], "layer": l1},
                    {"id": "e2", "kind": "image", "asset": a2, "bbox": [0.5, 0.5, 0.5, 0.5], "layer": l2},
                ],
                name=name,
            )
            doc, root = load_doc(path)
            canvas, _ = compose_document(doc, quick_cfg(), backend, root)
            outs.append(canvas)
        assert not np.array_equal(outs[0], outs[1])


class TestDocumentLevelBehavior:
    def test_background_only_document(self, tmp_path, backend):
        tmp = str(tmp_path)
        path = write_design(tmp, [])
        doc, root = load_doc(path)
        canvas, trace = compose_document(doc, quick_cfg(), backend, root)
        assert trace.records == []
        assert canvas.shape == (64, 64, 3)

    def test_background_asset_resized_to_document_resolution(self, tmp_path, backend):
        from designcompose.compose import init_canvas
        from designcompose.raster import save_image_png

        tmp = str(tmp_path)
        small = np.zeros((16, 16, 3))
        small[...] = (0.3, 0.6, 0.9)
        save_image_png(os.path.join(tmp, "small_bg.png"), small)
        path = write_design(tmp, [])
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        raw["elements"][0]["asset"] = "small_bg.png"
        doc = load_design(json.dumps(raw))
        canvas = init_canvas(doc, tmp)
        assert canvas.shape == (64, 64, 3)
        assert np.allclose(canvas[0, 0], [0.3, 0.6, 0.9], atol=0.01)

    def test_text_elements_pass_through(self, tmp_path, backend):
        tmp = str(tmp_path)
        path = write_design(
            tmp,
            [
                {
                    "id": "headline",
                    "kind": "text",
                    "asset": "headline.txt",
                    "caption": "SALE",
                    "bbox": [0.1, 0.1, 0.8, 0.2],
                    "layer": 1,
                }
            ],
        )
        doc, root = load_doc(path)
        canvas, trace = compose_document(doc, quick_cfg(keep_intermediates=True), backend, root)
        assert trace.records == []
        assert trace.text_passthrough == [
            {
                "id": "headline",
                "asset": "headline.txt",
                "caption": "SALE",
                "bbox": [0.1, 0.1, 0.8, 0.2],
                "layer": 1,
            }
        ]
        assert np.array_equal(canvas, trace.debug_canvases[0])

    def test_missing_asset_names_element(self, tmp_path, backend):
        tmp = str(tmp_path)
        path = write_design(
            tmp,
            [{"id": "lost", "kind": "image", "asset": "nope.png", "bbox": [0.1, 0.1, 0.4, 0.4], "layer": 1}],
        )
        doc, root = load_doc(path)
        with pytest.raises(ElementCompositionError, match="lost") as err:
            compose_document(doc, quick_cfg(), backend, root)
        assert err.value.trace is not None

    def test_partial_trace_on_mid_document_failure(self, tmp_path, backend):
        tmp = str(tmp_path)
        good = write_disc_asset(tmp)
        path = write_design(
            tmp,
            [
                {"id": "ok", "kind": "image", "asset": good, "bbox": [0.0, 0.0, 0.5, 0.5], "layer": 1},
                {"id": "broken", "kind": "image", "asset": "nope.png", "bbox": [0.5, 0.5, 0.4, 0.4], "layer": 2},
            ],
        )
        doc, root = load_doc(path)
        with pytest.raises(ElementCompositionError, match="broken") as err:
            compose_document(doc, quick_cfg(), backend, root)
        assert [r.element_id for r in err.value.trace.records] == ["ok"]

    def test_caption_fallback(self, tmp_path, backend):
        tmp = str(tmp_path)
        asset = write_disc_asset(tmp)
        path = write_design(
            tmp,
            [{"id": "disc", "kind": "image", "asset": asset, "bbox": [0.25, 0.25, 0.5, 0.5], "layer": 1}],
        )
        doc, root = load_doc(path)
        _, trace = compose_document(doc, quick_cfg(), backend, root)
        assert trace.records[0].caption == "a image design element (disc)"

    def test_scoring_sigma_defaults_to_schedule_midpoint(self, tmp_path, backend):
        tmp = str(tmp_path)
        asset = write_disc_asset(tmp)
        path = write_design(
            tmp,
            [{"id": "disc", "kind": "image", "asset": asset, "bbox": [0.25, 0.25, 0.5, 0.5], "layer": 1}],
        )
        doc, root = load_doc(path)
        cfg = quick_cfg(scheduler=SchedulerConfig(n_steps=8, shape="linear", strength=0.7))
        _, trace = compose_document(doc, cfg, backend, root)
        assert trace.records[0].injection.scoring_sigma == 0.5  # sigma at index 4 of N=8


class TestAblation:
    def test_injection_changes_output_and_improves_identity(self, tmp_path):
        from designcompose import cosine_similarity, embed, get_embedder
        from designcompose.raster import load_image

        tmp = str(tmp_path)
        asset = write_disc_asset(tmp)
        path = write_design(
            tmp,
            [
                {
                    "id": "disc",
                    "kind": "image",
                    "asset": asset,
                    "caption": "a bright red disc",
                    "bbox": [0.25, 0.25, 0.5, 0.5],
                    "layer": 1,
                }
            ],
        )
        doc, root = load_doc(path)
        embedder = get_embedder("reference")
        fg_img = load_image(os.path.join(root, asset))
        fg_ref = embed(fg_img[..., :3] * fg_img[..., 3:4], embedder)

        cosines = {}
        canvases = {}
        for enabled in (True, False):
            cfg = quick_cfg(
                injection=InjectionConfig(enabled=enabled, n_fg=32, n_bg=16)
            )
            backend = MockBackend(seed=11)
            canvas, trace = compose_document(doc, cfg, backend, root)
            x0, y0, bw, bh = trace.records[0].pixel_box
            crop = canvas[y0 : y0 + bh, x0 : x0 + bw]
            cosines[enabled] = cosine_similarity(embed(crop, embedder), fg_ref)
            canvases[enabled] = canvas
        assert not np.array_equal(canvases[True], canvases[False])
        assert cosines[True] >= cosines[False]
