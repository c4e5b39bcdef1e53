"""Command-line interface: subcommands, exit codes, printed outputs."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from layoutgen.cli import build_parser, main
from layoutgen.layout import Layout, ObjectSpec, save_layout_file

from .conftest import rect_mask

CANVAS = 12
FAST = ["--set", "sog.num_steps=6", "--set", "cc.num_steps=6"]


def make_layout():
    return Layout(
        canvas_height=CANVAS,
        canvas_width=CANVAS,
        global_prompt="a tiny scene",
        objects=(
            ObjectSpec(id="a", prompt="first thing", seed=1,
                       mask=rect_mask(CANVAS, CANVAS, 1, 6, 1, 6)),
            ObjectSpec(id="b", prompt="second thing", seed=2,
                       mask=rect_mask(CANVAS, CANVAS, 6, 11, 6, 11)),
        ),
    )


@pytest.fixture()
def layout_file(tmp_path):
    path = tmp_path / "layout" / "layout.json"
    save_layout_file(make_layout(), path)
    return path


def run_generate(layout_file, out, job_id="job1", extra=()):
    return main(
        ["generate", "--layout", str(layout_file), "--job-id", job_id,
         "--out", str(out), *FAST, *extra]
    )


class TestGenerate:
    def test_full_run_exit_zero_prints_job_dir(self, layout_file, tmp_path, capsys):
        out = tmp_path / "runs"
        assert run_generate(layout_file, out) == 0
        printed = capsys.readouterr().out.strip()
        assert printed == str(out / "job1")
        assert (out / "job1" / "scene.png").is_file()
        assert (out / "job1" / "objects" / "a" / "latent.npy").is_file()

    def test_missing_layout_is_exit_two(self, capsys):
        assert main(["generate", *FAST]) == 2
        assert "error:" in capsys.readouterr().err

    def test_seed_flag_overrides_scene_seed(self, layout_file, tmp_path):
        out = tmp_path / "runs"
        assert run_generate(layout_file, out, extra=["--seed", "42"]) == 0
        prov = json.loads((out / "job1" / "provenance.json").read_text())
        assert prov["scene_seed"] == 42

    def test_regenerate_object_reuses_other_latents(self, layout_file, tmp_path, capsys):
        out = tmp_path / "runs"
        assert run_generate(layout_file, out) == 0
        capsys.readouterr()
        code = main(
            ["generate", "--from-job", str(out / "job1"), "--regenerate-object", "b",
             "--seed", "77", "--job-id", "job2", "--out", str(out), *FAST]
        )
        assert code == 0
        a1 = (out / "job1" / "objects" / "a" / "latent.npy").read_bytes()
        a2 = (out / "job2" / "objects" / "a" / "latent.npy").read_bytes()
        assert a1 == a2
        prov = json.loads((out / "job2" / "provenance.json").read_text())
        assert prov["regenerated_from"]["new_seed"] == 77

    def test_regenerate_without_source_is_exit_two(self, capsys):
        assert main(["generate", "--regenerate-object", "b", *FAST]) == 2
        assert "--from-job" in capsys.readouterr().err

    def test_runtime_failure_is_exit_one(self, layout_file, tmp_path, capsys):
        code = main(
            ["generate", "--layout", str(layout_file), "--out", str(tmp_path / "r"),
             "--set", "sog.num_steps=2000"]
        )
        assert code == 1
        assert "error:" in capsys.readouterr().err

    def test_malformed_set_pair_is_exit_two(self, layout_file, tmp_path, capsys):
        code = main(["generate", "--layout", str(layout_file), "--set", "novalue"])
        assert code == 2
        assert "KEY=VALUE" in capsys.readouterr().err

    def test_bad_config_file_is_exit_two(self, layout_file, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text("{oops")
        code = main(["generate", "--layout", str(layout_file), "--config", str(cfg)])
        assert code == 2
        assert "error:" in capsys.readouterr().err

    def test_dump_flags_write_artifacts(self, layout_file, tmp_path):
        out = tmp_path / "runs"
        dump = tmp_path / "dump"
        attn = tmp_path / "attn"
        code = run_generate(
            layout_file, out,
            extra=["--dump-intermediate", str(dump), "--dump-attention", str(attn)],
        )
        assert code == 0
        assert list((dump / "sog" / "a").glob("step_*.png"))
        assert list((attn / "cc").glob("*.png"))


class TestSog:
    def test_single_object_run(self, layout_file, tmp_path, capsys):
        out = tmp_path / "runs"
        code = main(
            ["sog", "--layout", str(layout_file), "--object", "a",
             "--job-id", "solo", "--out", str(out), *FAST]
        )
        assert code == 0
        printed = capsys.readouterr().out.strip()
        assert printed.endswith(str(Path("solo") / "objects" / "a"))
        assert (out / "solo" / "objects" / "a" / "image.png").is_file()
        assert not (out / "solo" / "scene.png").exists()

    def test_unknown_object_is_exit_two(self, layout_file, tmp_path, capsys):
        code = main(
            ["sog", "--layout", str(layout_file), "--object", "ghost",
             "--out", str(tmp_path / "r"), *FAST]
        )
        assert code == 2
        assert "ghost" in capsys.readouterr().err


class TestCompose:
    def test_recompose_is_byte_stable(self, layout_file, tmp_path, capsys):
        out = tmp_path / "runs"
        assert run_generate(layout_file, out) == 0
        code = main(
            ["compose", "--from-job", str(out / "job1"), "--job-id", "re",
             "--out", str(out), *FAST]
        )
        assert code == 0
        assert (out / "re" / "scene_latent.npy").read_bytes() == (
            out / "job1" / "scene_latent.npy"
        ).read_bytes()
        prov = json.loads((out / "re" / "provenance.json").read_text())
        assert prov["recomposed_from"] == str(out / "job1")

    def test_non_job_directory_is_exit_two(self, tmp_path, capsys):
        code = main(["compose", "--from-job", str(tmp_path), *FAST])
        assert code == 2
        assert "not a job directory" in capsys.readouterr().err

    def test_missing_stage1_result_is_exit_two(self, layout_file, tmp_path, capsys):
        out = tmp_path / "runs"
        code = main(
            ["sog", "--layout", str(layout_file), "--object", "a",
             "--job-id", "partial", "--out", str(out), *FAST]
        )
        assert code == 0
        code = main(
            ["compose", "--from-job", str(out / "partial"), "--out", str(out), *FAST]
        )
        assert code == 2
        err = capsys.readouterr().err
        assert "'b'" in err and "stage-1" in err


def annotations_file(tmp_path):
    doc = {
        "images": [{"id": 1, "height": 100, "width": 100, "file_name": "img1.jpg"}],
        "categories": [{"id": 7, "name": "cat"}],
        "annotations": [
            {
                "id": 11,
                "image_id": 1,
                "category_id": 7,
                "segmentation": {"size": [100, 100], "counts": [0, 3000, 7000]},
                "bbox": [0, 0, 30, 100],
                "area": 3000,
            }
        ],
    }
    path = tmp_path / "instances.json"
    path.write_text(json.dumps(doc))
    return path


class TestEval:
    def test_benchmark_over_annotations(self, tmp_path, capsys):
        ann = annotations_file(tmp_path)
        report = tmp_path / "report.json"
        table = tmp_path / "report.txt"
        code = main(
            ["eval", "--annotations", str(ann), "--target-size", "16",
             "--report", str(report), "--table", str(table),
             "--out", str(tmp_path / "runs"), *FAST]
        )
        assert code == 0
        data = json.loads(report.read_text())
        assert data["n_layouts"] == 1
        assert data["n_objects"] == 1
        assert 0.0 <= data["clip_local"] <= 100.0
        assert 0.0 <= data["iou_local"] <= 1.0
        assert data["notes"]  # protocol assumptions written into the report
        assert "CLIP" in capsys.readouterr().out
        assert table.is_file()

    def test_score_one_job(self, layout_file, tmp_path, capsys):
        out = tmp_path / "runs"
        assert run_generate(layout_file, out) == 0
        report = tmp_path / "job_report.json"
        code = main(
            ["eval", "--job", str(out / "job1"), "--report", str(report), *FAST]
        )
        assert code == 0
        assert json.loads(report.read_text())["n_objects"] == 2

    def test_needs_exactly_one_source(self, tmp_path, capsys):
        assert main(["eval", "--report", str(tmp_path / "r.json")]) == 2
        ann = annotations_file(tmp_path)
        assert (
            main(["eval", "--annotations", str(ann), "--job", "x",
                  "--report", str(tmp_path / "r.json")])
            == 2
        )

    def test_empty_filter_result_is_exit_two(self, tmp_path, capsys):
        ann = annotations_file(tmp_path)
        code = main(
            ["eval", "--annotations", str(ann), "--min-area-fraction", "0.9",
             "--report", str(tmp_path / "r.json"), "--out", str(tmp_path / "runs")]
        )
        assert code == 2
        assert "no layouts" in capsys.readouterr().err


class TestAblateStart:
    def test_grid_image_dimensions(self, layout_file, tmp_path, capsys):
        grid = tmp_path / "grid.png"
        code = main(
            ["ablate-start", "--layout", str(layout_file), "--object", "a",
             "--t-start", "800,400", "--flat-color=-1.0,1.0",
             "--grid", str(grid), *FAST]
        )
        assert code == 0
        with Image.open(grid) as im:
            assert im.size == (2 * CANVAS, 2 * CANVAS)  # (w, h): 2 colors x 2 starts
        assert "t_start=[800, 400]" in capsys.readouterr().out

    def test_empty_sweep_lists_rejected(self, layout_file, tmp_path):
        code = main(
            ["ablate-start", "--layout", str(layout_file), "--object", "a",
             "--t-start", ",", "--grid", str(tmp_path / "g.png"), *FAST]
        )
        assert code == 2


class TestParser:
    def test_serve_subcommand_parses(self):
        args = build_parser().parse_args(["serve", "--port", "9123", "--workers", "2"])
        assert args.command == "serve"
        assert args.port == 9123
        assert args.workers == 2

    def test_unknown_subcommand_rejected(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["warp"])
