"""End-to-end orchestration: layout in, job directory of artifacts out.

A job directory is self-contained and append-only:

    <out>/<job-id>/
        layout.json + masks/           the exact input, reloadable
        objects/<id>/image.png         decoded stage-1 object
        objects/<id>/latent.npy        stage-1 clean latent (float64, exact)
        objects/<id>/mask.png          layout mask
        objects/<id>/refined_mask.png  segmenter-refined mask
        scene.png / scene_latent.npy   final composed scene
        provenance.json                config snapshot, seeds, timesteps

Regeneration builds a new job directory, rerunning stage 1 only for the
changed object; every other object's latent is loaded back from the
source job, so untouched stage-1 artifacts are byte-identical.
"""

from __future__ import annotations

import json
import secrets
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import __version__
from .backends import BackendSet, ToyWorld, hash_pattern_target, resolve_backend_set
from .composition import SceneResult, compose_scene
from .config import EngineConfig
from .errors import ValidationError
from .images import save_image, save_mask
from .layout import Layout, load_layout_file, save_layout_file
from .segmentation import refine_results
from .sog import ObjectResult, generate_object


def new_job_id() -> str:
    return time.strftime("%Y%m%d-%H%M%S") + "-" + secrets.token_hex(3)


def build_backends(config: EngineConfig, schedule) -> BackendSet:
    """Resolve the configured backend names into live components.

    The bundled toy denoiser needs a target for every prompt; ad-hoc
    prompts fall back to a deterministic hash-derived pattern so command
    line runs work without registering anything.
    """
    world = ToyWorld(default_target=hash_pattern_target)
    return resolve_backend_set(config.backend_names, world, schedule)


ProgressFn = Callable[[str, str], None]


@dataclass(frozen=True)
class JobPaths:
    job_dir: Path

    @property
    def scene_png(self) -> Path:
        return self.job_dir / "scene.png"

    @property
    def scene_latent(self) -> Path:
        return self.job_dir / "scene_latent.npy"

    @property
    def provenance(self) -> Path:
        return self.job_dir / "provenance.json"

    @property
    def layout_json(self) -> Path:
        return self.job_dir / "layout.json"

    def object_dir(self, object_id: str) -> Path:
        return self.job_dir / "objects" / object_id


def _write_object_artifacts(paths: JobPaths, result: ObjectResult) -> None:
    d = paths.object_dir(result.object_id)
    d.mkdir(parents=True, exist_ok=True)
    save_image(d / "image.png", result.image)
    np.save(d / "latent.npy", result.latent_x0)
    save_mask(d / "mask.png", result.original_mask)
    if result.refined_mask is not None:
        save_mask(d / "refined_mask.png", result.refined_mask)


def _load_object_result(paths: JobPaths, layout: Layout, object_id: str, backends: BackendSet) -> ObjectResult:
    """Rebuild a stage-1 result from a job directory's exact latent dump."""
    from .layout import bbox

    latent_path = paths.object_dir(object_id) / "latent.npy"
    if not latent_path.is_file():
        raise ValidationError(
            f"job {str(paths.job_dir)!r} has no stage-1 result for object {object_id!r}"
            " — every object needs one before composition"
        )
    latent = np.load(latent_path)
    spec = layout.object_by_id(object_id)
    return ObjectResult(
        object_id=object_id,
        image=backends.latent_codec.decode(latent),
        latent_x0=latent,
        original_mask=spec.mask,
        bbox=bbox(spec.mask),
    )


def run_layout(
    layout: Layout,
    config: EngineConfig,
    out_root: str | Path,
    *,
    job_id: str | None = None,
    backends: BackendSet | None = None,
    reuse_from: JobPaths | None = None,
    only_regenerate: Sequence[str] | None = None,
    progress: ProgressFn | None = None,
    dump_intermediate: str | Path | None = None,
    dump_attention: str | Path | None = None,
    extra_provenance: dict | None = None,
) -> tuple[SceneResult, JobPaths]:
    """Run both stages over a layout and write the job directory.

    With reuse_from set, objects not listed in only_regenerate skip stage 1
    and load their latent from the source job instead.
    """
    job_id = job_id or new_job_id()
    paths = JobPaths(Path(out_root) / job_id)
    paths.job_dir.mkdir(parents=True, exist_ok=True)
    schedule = config.make_schedule()
    if backends is None:
        backends = build_backends(config, schedule)
    sog_cfg = config.sog_config()
    cc_cfg = config.cc_config()
    regen = set(only_regenerate or [])

    def note(stage: str, detail: str = "") -> None:
        if progress is not None:
            progress(stage, detail)

    save_layout_file(layout, paths.layout_json)

    note("running:sog")
    results: list[ObjectResult] = []
    for spec in layout.objects:
        note("running:sog", spec.id)
        if reuse_from is not None and spec.id not in regen:
            result = _load_object_result(reuse_from, layout, spec.id, backends)
        else:
            step_cb = None
            if dump_intermediate is not None:
                step_cb = _intermediate_dumper(
                    Path(dump_intermediate) / "sog" / spec.id, backends
                )
            attn_dir = Path(dump_attention) / "sog" / spec.id if dump_attention else None
            result = generate_object(
                spec, sog_cfg, backends, schedule,
                step_callback=step_cb, attention_dump_dir=attn_dir,
            )
        results.append(result)

    results = refine_results(results, backends.segmenter)
    for result in results:
        _write_object_artifacts(paths, result)

    note("running:cc")
    cc_dump = Path(dump_intermediate) / "cc" if dump_intermediate else None
    scene = compose_scene(
        results, layout, cc_cfg, backends, schedule,
        scene_seed=config.seed,
        step_callback=_intermediate_dumper(cc_dump, backends) if cc_dump else None,
        attention_dump_dir=Path(dump_attention) / "cc" if dump_attention else None,
    )

    save_image(paths.scene_png, scene.image)
    np.save(paths.scene_latent, scene.latent_x0)
    provenance = {
        "job_id": job_id,
        "engine_version": __version__,
        "config": config.to_dict(),
        **scene.provenance,
    }
    if extra_provenance:
        provenance.update(extra_provenance)
    paths.provenance.write_text(json.dumps(provenance, indent=2) + "\n")
    note("done")
    return scene, paths


def _intermediate_dumper(out_dir: Path, backends: BackendSet):
    """Write the decoded clean-latent estimate after every sampler step."""
    out_dir.mkdir(parents=True, exist_ok=True)

    def dump(step) -> None:
        image = backends.latent_codec.decode(step.x0_pred)
        save_image(out_dir / f"step_{step.index:03d}_t{step.t:04d}.png", image)

    return dump


def run_single_object(
    layout: Layout,
    object_id: str,
    config: EngineConfig,
    out_root: str | Path,
    *,
    job_id: str | None = None,
    backends: BackendSet | None = None,
    dump_intermediate: str | Path | None = None,
    dump_attention: str | Path | None = None,
) -> tuple[ObjectResult, JobPaths]:
    """Stage 1 only, for one object; no scene is composed."""
    job_id = job_id or new_job_id()
    paths = JobPaths(Path(out_root) / job_id)
    paths.job_dir.mkdir(parents=True, exist_ok=True)
    schedule = config.make_schedule()
    if backends is None:
        backends = build_backends(config, schedule)
    spec = layout.object_by_id(object_id)
    step_cb = None
    if dump_intermediate is not None:
        step_cb = _intermediate_dumper(Path(dump_intermediate) / "sog" / spec.id, backends)
    attn_dir = Path(dump_attention) / "sog" / spec.id if dump_attention else None
    result = generate_object(
        spec, config.sog_config(), backends, schedule,
        step_callback=step_cb, attention_dump_dir=attn_dir,
    )
    result = refine_results([result], backends.segmenter)[0]
    save_layout_file(layout, paths.layout_json)
    _write_object_artifacts(paths, result)
    paths.provenance.write_text(
        json.dumps(
            {
                "job_id": job_id,
                "engine_version": __version__,
                "config": config.to_dict(),
                "stage": "sog-only",
                "object_id": object_id,
                "seed": int(spec.seed),
            },
            indent=2,
        )
        + "\n"
    )
    return result, paths


def regenerate_object(
    source_job: str | Path,
    object_id: str,
    config: EngineConfig,
    out_root: str | Path,
    *,
    new_seed: int | None = None,
    job_id: str | None = None,
    backends: BackendSet | None = None,
    progress: ProgressFn | None = None,
) -> tuple[SceneResult, JobPaths]:
    """Rerun one object (optionally with a new seed) and recompose the scene.

    Every other object's stage-1 latent is copied bit-for-bit from the
    source job; the source directory itself is never modified.
    """
    source = JobPaths(Path(source_job))
    if not source.layout_json.exists():
        raise ValidationError(f"{source.job_dir} is not a job directory (no layout.json)")
    layout = load_layout_file(source.layout_json)
    target = layout.object_by_id(object_id)
    if new_seed is not None:
        layout = replace(
            layout,
            objects=tuple(
                replace(o, seed=new_seed) if o.id == object_id else o for o in layout.objects
            ),
        )
    extra = {
        "regenerated_from": {
            "job_dir": str(source.job_dir),
            "object_id": object_id,
            "old_seed": int(target.seed),
            "new_seed": int(new_seed if new_seed is not None else target.seed),
        }
    }
    return run_layout(
        layout, config, out_root,
        job_id=job_id, backends=backends,
        reuse_from=source, only_regenerate=[object_id],
        progress=progress, extra_provenance=extra,
    )
