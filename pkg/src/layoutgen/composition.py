"""Stage 2: inpaint a coherent background around the composed objects.

The composite known image is frozen into the sampling trajectory: after
every step above t_min the known region is overwritten with the known
latent forward-noised to the step's timestep, so the sampler only ever
invents the background. Below t_min the replacement stops and the
conditioning mask opens to the whole image, letting the model polish the
seams between objects and background; t_min = 0 turns that phase off and
keeps the anchor all the way to the clean latent.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .backends import BackendSet
from .diffusion import (
    Schedule,
    blend_background,
    ddim_step,
    forward_noise,
    plan_timesteps,
    predict_x0,
)
from .errors import BackendFailure, InvalidRange, ShapeMismatch, ValidationError
from .layout import BBox, Layout, downsample_mask
from .regca import DEFAULT_SEPARATOR, RegcaController, build_group_prompts
from .segmentation import compose_known
from .sog import ObjectResult


@dataclass(frozen=True)
class CcConfig:
    """Stage-2 sampling parameters.

    t_min bounds the anchored phase: the known region is pinned to its
    forward-noised trajectory for timesteps above t_min and evolves freely
    at or below it. t_min = 0 disables the free phase and anchors every
    step, including the final one.
    """

    t_start: int = 800
    t_min: int = 100
    num_steps: int = 40
    guidance_scale: float = 7.5
    regca_separator: str = DEFAULT_SEPARATOR
    regca_max_resolution: int | None = None

    def __post_init__(self):
        if not 0 <= self.t_min < self.t_start:
            raise InvalidRange(f"need 0 <= t_min < t_start, got t_min={self.t_min} t_start={self.t_start}")


@dataclass(frozen=True, eq=False)
class SceneResult:
    """Final composed scene plus everything needed to reproduce it."""

    image: np.ndarray
    latent_x0: np.ndarray
    per_object_bboxes: tuple[tuple[str, BBox], ...]
    provenance: dict


@dataclass(frozen=True)
class CcStep:
    """Post-step snapshot handed to step callbacks."""

    index: int
    t: int
    t_prev: int
    latent: np.ndarray
    x0_pred: np.ndarray
    anchored: bool
    conditioning_mask_open: bool


CcStepCallback = Callable[[CcStep], None]


def init_inpaint_latent(
    known_code: np.ndarray,
    inpaint_mask: np.ndarray,
    t_start: int,
    s: Schedule,
    eps1: np.ndarray,
    eps2: np.ndarray,
) -> np.ndarray:
    """Starting latent: noised known latent where pixels are known, pure noise elsewhere.

    The known region is seeded with the known latent forward-noised to
    t_start; the to-inpaint region (mask = 1) starts as pure noise.
    """
    known_code = np.asarray(known_code, dtype=np.float64)
    eps2 = np.asarray(eps2)
    if eps2.shape != known_code.shape:
        raise ShapeMismatch(f"eps2 {eps2.shape} vs known_code {known_code.shape}")
    noised = forward_noise(known_code, t_start, eps1, s)
    return blend_background(eps2, noised, inpaint_mask)


def compose_scene(
    results: Sequence[ObjectResult],
    layout: Layout,
    cfg: CcConfig,
    backends: BackendSet,
    schedule: Schedule,
    *,
    scene_seed: int = 0,
    step_callback: CcStepCallback | None = None,
    attention_dump_dir: str | Path | None = None,
    regca_controller: RegcaController | None = None,
) -> SceneResult:
    """Run the full stage-2 loop over refined stage-1 results.

    Deterministic in scene_seed, which is independent of the per-object
    seeds: a fresh generator draws the known-region anchor noise first and
    the inpaint-region starting noise second. The anchor noise is reused at
    every replacement step, so the known region follows one consistent
    forward trajectory exactly like the stage-1 flat background does.
    """
    ids = [r.object_id for r in results]
    if ids != [o.id for o in layout.objects]:
        raise ValidationError(
            f"results order {ids} does not match layout objects {[o.id for o in layout.objects]}"
        )
    plan = plan_timesteps(cfg.num_steps, schedule.T, cfg.t_start)
    composite = compose_known(results)

    def fail(exc: Exception) -> BackendFailure:
        if isinstance(exc, BackendFailure):
            return exc.with_context(stage="cc")
        return BackendFailure(f"{type(exc).__name__}: {exc}", stage="cc")

    prompts = build_group_prompts(layout.objects, layout.global_prompt, cfg.regca_separator)
    try:
        controller = regca_controller
        if controller is None:
            controller = RegcaController(
                composite.refined_masks,
                ids,
                prompts,
                backends.text_encoder,
                dump_dir=attention_dump_dir,
                max_attention_resolution=cfg.regca_max_resolution,
            )
        known_code = backends.latent_codec.encode(composite.known_image)
        emb_cond = backends.text_encoder.encode(layout.global_prompt)
        emb_uncond = backends.text_encoder.encode("")
    except Exception as exc:
        raise fail(exc) from exc

    lat_h, lat_w = known_code.shape[-2], known_code.shape[-1]
    inpaint_lat = downsample_mask(composite.inpaint_mask, lat_h, lat_w)
    open_mask = np.ones((lat_h, lat_w), dtype=np.uint8)
    rng = np.random.default_rng(scene_seed)
    eps_known = rng.standard_normal(known_code.shape)
    eps_free = rng.standard_normal(known_code.shape)

    def hook(scores, site):
        controller.on_site(site)
        return scores

    x = init_inpaint_latent(known_code, inpaint_lat, cfg.t_start, schedule, eps_known, eps_free)
    for index, (t, t_prev) in enumerate(plan.transitions()):
        mask_open = t <= cfg.t_min
        cond_mask = open_mask if mask_open else inpaint_lat
        try:
            eps_c = backends.inpaint_denoiser.predict(
                x, t, emb_cond,
                known_code=known_code, inpaint_mask=cond_mask,
                conditional=True, attention_hook=hook,
            )
            eps_u = backends.inpaint_denoiser.predict(
                x, t, emb_uncond,
                known_code=known_code, inpaint_mask=cond_mask,
                conditional=False, attention_hook=hook,
            )
        except Exception as exc:
            raise fail(exc) from exc
        eps = eps_u + cfg.guidance_scale * (eps_c - eps_u)
        x0_pred = predict_x0(x, eps, t, schedule)
        x = ddim_step(x, eps, t, t_prev, schedule)
        anchored = cfg.t_min == 0 or t_prev > cfg.t_min
        if anchored:
            x = blend_background(
                x, forward_noise(known_code, t_prev, eps_known, schedule), inpaint_lat
            )
        if step_callback is not None:
            step_callback(
                CcStep(
                    index=index, t=t, t_prev=t_prev, latent=x, x0_pred=x0_pred,
                    anchored=anchored, conditioning_mask_open=mask_open,
                )
            )

    try:
        image = backends.latent_codec.decode(x)
    except Exception as exc:
        raise fail(exc) from exc
    provenance = {
        "scene_seed": scene_seed,
        "object_seeds": {o.id: o.seed for o in layout.objects},
        "cc": {
            "t_start": cfg.t_start,
            "t_min": cfg.t_min,
            "num_steps": cfg.num_steps,
            "guidance_scale": cfg.guidance_scale,
            "regca_separator": cfg.regca_separator,
        },
        "group_prompts": {
            "conditional": list(prompts.conditional),
            "unconditional": list(prompts.unconditional),
        },
        "timesteps": list(plan.steps),
    }
    return SceneResult(
        image=image,
        latent_x0=x,
        per_object_bboxes=tuple((r.object_id, r.bbox) for r in results),
        provenance=provenance,
    )
