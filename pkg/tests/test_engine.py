"""Job orchestration: artifact tree, provenance, selective regeneration."""

from __future__ import annotations

import json

import numpy as np
import pytest

from layoutgen.config import load_config
from layoutgen.engine import (
    JobPaths,
    build_backends,
    new_job_id,
    regenerate_object,
    run_layout,
    run_single_object,
)
from layoutgen.errors import ValidationError
from layoutgen.layout import Layout, ObjectSpec, layouts_equal, load_layout_file

from .conftest import rect_mask

CANVAS = 16


@pytest.fixture()
def layout():
    return Layout(
        canvas_height=CANVAS,
        canvas_width=CANVAS,
        global_prompt="two shapes on a table",
        objects=(
            ObjectSpec(id="left", prompt="a red cube", seed=11,
                       mask=rect_mask(CANVAS, CANVAS, 2, 9, 1, 7)),
            ObjectSpec(id="right", prompt="a blue ball", seed=22,
                       mask=rect_mask(CANVAS, CANVAS, 5, 13, 8, 15)),
        ),
    )


@pytest.fixture()
def config():
    # few steps keep the suite fast; the step plan itself is covered elsewhere
    return load_config({"sog": {"num_steps": 8}, "cc": {"num_steps": 8}, "seed": 5})


def read_bytes(path):
    return path.read_bytes()


class TestRunLayout:
    def test_artifact_tree_complete(self, layout, config, tmp_path):
        scene, paths = run_layout(layout, config, tmp_path, job_id="jobA")
        assert paths.job_dir == tmp_path / "jobA"
        assert paths.layout_json.is_file()
        assert (paths.job_dir / "masks" / "left.png").is_file()
        for oid in ("left", "right"):
            d = paths.object_dir(oid)
            assert (d / "image.png").is_file()
            assert (d / "latent.npy").is_file()
            assert (d / "mask.png").is_file()
            assert (d / "refined_mask.png").is_file()
        assert paths.scene_png.is_file()
        assert paths.scene_latent.is_file()
        assert paths.provenance.is_file()
        assert scene.image.shape == (CANVAS, CANVAS, 3)

    def test_saved_layout_reloads_identically(self, layout, config, tmp_path):
        _, paths = run_layout(layout, config, tmp_path)
        assert layouts_equal(load_layout_file(paths.layout_json), layout)

    def test_provenance_records_config_and_seeds(self, layout, config, tmp_path):
        _, paths = run_layout(layout, config, tmp_path, job_id="jobP")
        prov = json.loads(paths.provenance.read_text())
        assert prov["job_id"] == "jobP"
        assert prov["scene_seed"] == 5
        assert prov["object_seeds"] == {"left": 11, "right": 22}
        assert prov["config"]["sog"]["num_steps"] == 8
        assert prov["timesteps"][0] == 800
        assert "a red cube" in json.dumps(prov["group_prompts"])

    def test_saved_latent_matches_returned_scene(self, layout, config, tmp_path):
        scene, paths = run_layout(layout, config, tmp_path)
        assert np.array_equal(np.load(paths.scene_latent), scene.latent_x0)

    def test_rerun_same_inputs_byte_identical(self, layout, config, tmp_path):
        _, a = run_layout(layout, config, tmp_path / "a")
        _, b = run_layout(layout, config, tmp_path / "b")
        assert read_bytes(a.scene_latent) == read_bytes(b.scene_latent)
        assert read_bytes(a.scene_png) == read_bytes(b.scene_png)
        for oid in ("left", "right"):
            assert read_bytes(a.object_dir(oid) / "latent.npy") == read_bytes(
                b.object_dir(oid) / "latent.npy"
            )

    def test_progress_sequence(self, layout, config, tmp_path):
        events = []
        run_layout(layout, config, tmp_path, progress=lambda s, d: events.append((s, d)))
        stages = [s for s, _ in events]
        assert stages[0] == "running:sog"
        assert ("running:sog", "left") in events
        assert ("running:sog", "right") in events
        assert stages.index("running:cc") > stages.index("running:sog")
        assert stages[-1] == "done"

    def test_intermediate_dumps_one_image_per_step(self, layout, config, tmp_path):
        dump = tmp_path / "dump"
        run_layout(layout, config, tmp_path / "out", dump_intermediate=dump)
        sog_steps = sorted((dump / "sog" / "left").glob("step_*.png"))
        cc_steps = sorted((dump / "cc").glob("step_*.png"))
        n = len(config.make_schedule().beta)  # T=1000
        assert n == 1000
        plan_len = 8  # sog/cc num_steps above survive truncation intact
        assert len(sog_steps) == plan_len
        assert len(cc_steps) == plan_len
        assert sog_steps[0].name == "step_000_t0800.png"

    def test_attention_dumps_written(self, layout, config, tmp_path):
        dump = tmp_path / "attn"
        run_layout(layout, config, tmp_path / "out", dump_attention=dump)
        sog_maps = list((dump / "sog" / "left").glob("*.png"))
        cc_maps = list((dump / "cc").glob("*.png"))
        assert sog_maps and cc_maps


class TestRunSingleObject:
    def test_writes_object_artifacts_only(self, layout, config, tmp_path):
        result, paths = run_single_object(layout, "left", config, tmp_path, job_id="solo")
        assert result.object_id == "left"
        d = paths.object_dir("left")
        assert (d / "image.png").is_file()
        assert (d / "latent.npy").is_file()
        assert (d / "refined_mask.png").is_file()
        assert not paths.scene_png.exists()
        prov = json.loads(paths.provenance.read_text())
        assert prov["stage"] == "sog-only"
        assert prov["object_id"] == "left"
        assert prov["seed"] == 11

    def test_matches_full_run_stage1_output(self, layout, config, tmp_path):
        result, _ = run_single_object(layout, "left", config, tmp_path / "solo")
        _, full = run_layout(layout, config, tmp_path / "full")
        stored = np.load(full.object_dir("left") / "latent.npy")
        assert np.array_equal(result.latent_x0, stored)

    def test_unknown_object_id(self, layout, config, tmp_path):
        with pytest.raises(KeyError):
            run_single_object(layout, "ghost", config, tmp_path)


class TestRegenerateObject:
    def test_untouched_latents_byte_identical(self, layout, config, tmp_path):
        _, source = run_layout(layout, config, tmp_path / "src")
        _, regen = regenerate_object(
            source.job_dir, "right", config, tmp_path / "dst", new_seed=99
        )
        assert read_bytes(regen.object_dir("left") / "latent.npy") == read_bytes(
            source.object_dir("left") / "latent.npy"
        )
        assert read_bytes(regen.object_dir("right") / "latent.npy") != read_bytes(
            source.object_dir("right") / "latent.npy"
        )

    def test_scene_recomposed_with_new_object(self, layout, config, tmp_path):
        _, source = run_layout(layout, config, tmp_path / "src")
        scene, regen = regenerate_object(
            source.job_dir, "right", config, tmp_path / "dst", new_seed=99
        )
        assert not np.array_equal(np.load(regen.scene_latent), np.load(source.scene_latent))
        prov = json.loads(regen.provenance.read_text())
        assert prov["regenerated_from"]["object_id"] == "right"
        assert prov["regenerated_from"]["old_seed"] == 22
        assert prov["regenerated_from"]["new_seed"] == 99
        assert prov["object_seeds"]["right"] == 99
        saved = load_layout_file(regen.layout_json)
        assert saved.object_by_id("right").seed == 99

    def test_same_seed_regeneration_reproduces_scene(self, layout, config, tmp_path):
        _, source = run_layout(layout, config, tmp_path / "src")
        _, regen = regenerate_object(source.job_dir, "right", config, tmp_path / "dst")
        assert read_bytes(regen.scene_latent) == read_bytes(source.scene_latent)
        assert read_bytes(regen.scene_png) == read_bytes(source.scene_png)

    def test_source_job_never_modified(self, layout, config, tmp_path):
        _, source = run_layout(layout, config, tmp_path / "src")
        before = {
            p.relative_to(source.job_dir): p.read_bytes()
            for p in sorted(source.job_dir.rglob("*"))
            if p.is_file()
        }
        regenerate_object(source.job_dir, "left", config, tmp_path / "dst", new_seed=7)
        after = {
            p.relative_to(source.job_dir): p.read_bytes()
            for p in sorted(source.job_dir.rglob("*"))
            if p.is_file()
        }
        assert before == after

    def test_rejects_non_job_directory(self, config, tmp_path):
        with pytest.raises(ValidationError, match="not a job directory"):
            regenerate_object(tmp_path, "left", config, tmp_path / "dst")

    def test_rejects_unknown_object(self, layout, config, tmp_path):
        _, source = run_layout(layout, config, tmp_path / "src")
        with pytest.raises(KeyError):
            regenerate_object(source.job_dir, "ghost", config, tmp_path / "dst")


class TestHelpers:
    def test_new_job_id_unique_and_sortable(self):
        a, b = new_job_id(), new_job_id()
        assert a != b
        assert len(a.split("-")) == 3

    def test_build_backends_resolves_toy_set(self, config):
        backends = build_backends(config, config.make_schedule())
        # unregistered prompts must still denoise via the hash fallback
        latent = backends.text_encoder.encode("never registered")
        assert latent is not None

    def test_job_paths_layout(self, tmp_path):
        paths = JobPaths(tmp_path / "j")
        assert paths.object_dir("x") == tmp_path / "j" / "objects" / "x"
        assert paths.scene_png.name == "scene.png"
