"""Stage 1: generate each object alone on a flat background.

One object per run, full model capacity on that object. The starting
latent is pure noise inside the object's mask and the noised flat
background outside; each sampler step is followed by re-imposing the flat
background's forward trajectory outside the mask, so the final latent is
bit-equal to the clean flat background everywhere the object is not.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .backends import BackendSet
from .diffusion import (
    Schedule,
    blend_background,
    compose_starting_latent,
    ddim_step,
    flat_latent,
    plan_timesteps,
    predict_x0,
)
from .errors import BackendFailure, EmptyMask
from .layout import BBox, ObjectSpec, bbox, downsample_mask
from .paca import PacaConfig, PacaController


@dataclass(frozen=True)
class SogConfig:
    """Stage-1 sampling parameters.

    t_start is where sampling begins (the noising horizon of the starting
    latent); num_steps is the effective step count after truncating the
    nominal full-range grid at t_start.
    """

    t_start: int = 800
    num_steps: int = 40
    guidance_scale: float = 7.5
    paca: PacaConfig = field(default_factory=PacaConfig)
    flat_color: float = -1.0


@dataclass(frozen=True, eq=False)
class ObjectResult:
    """Everything stage 2 needs about one generated object."""

    object_id: str
    image: np.ndarray
    latent_x0: np.ndarray
    original_mask: np.ndarray
    bbox: BBox
    refined_mask: np.ndarray | None = None


@dataclass(frozen=True)
class SogStep:
    """Post-step snapshot handed to step callbacks."""

    index: int
    t: int
    t_prev: int
    latent: np.ndarray
    x0_pred: np.ndarray


StepCallback = Callable[[SogStep], None]


def generate_object(
    spec: ObjectSpec,
    cfg: SogConfig,
    backends: BackendSet,
    schedule: Schedule,
    *,
    step_callback: StepCallback | None = None,
    attention_dump_dir: str | Path | None = None,
    paca_controller: PacaController | None = None,
) -> ObjectResult:
    """Run the full stage-1 loop for one object.

    Deterministic in spec.seed: a fresh generator seeded with it draws the
    flat-background noise first and the in-mask starting noise second, so
    regenerating one object never consumes another object's randomness.
    Both guidance branches are evaluated every step; the attention surgery
    hook is installed on both but only touches the conditional branch.
    """
    if not spec.mask.any():
        raise EmptyMask(f"object {spec.id!r} has an empty mask")
    plan = plan_timesteps(cfg.num_steps, schedule.T, cfg.t_start)
    box = bbox(spec.mask)

    h, w = spec.mask.shape
    flat_image = np.full((h, w, 3), cfg.flat_color, dtype=np.float64)

    controller = paca_controller
    if controller is None:
        controller = PacaController(spec.mask, cfg.paca, schedule, dump_dir=attention_dump_dir)

    def fail(exc: Exception) -> BackendFailure:
        if isinstance(exc, BackendFailure):
            return exc.with_context(stage="sog", object_id=spec.id)
        return BackendFailure(f"{type(exc).__name__}: {exc}", stage="sog", object_id=spec.id)

    try:
        flat_code = backends.latent_codec.encode(flat_image)
        emb_cond = backends.text_encoder.encode(spec.prompt)
        emb_uncond = backends.text_encoder.encode("")
    except Exception as exc:
        raise fail(exc) from exc
    controller.bind_eot(emb_cond.eot_index)

    lat_h, lat_w = flat_code.shape[-2], flat_code.shape[-1]
    mask_lat = downsample_mask(spec.mask, lat_h, lat_w)
    rng = np.random.default_rng(spec.seed)
    eps_flat = rng.standard_normal(flat_code.shape)
    eps_fg = rng.standard_normal(flat_code.shape)

    x = compose_starting_latent(
        flat_latent(flat_code, cfg.t_start, eps_flat, schedule), mask_lat, eps_fg
    )
    for index, (t, t_prev) in enumerate(plan.transitions()):
        try:
            eps_c = backends.denoiser.predict(
                x, t, emb_cond, conditional=True, attention_hook=controller
            )
            eps_u = backends.denoiser.predict(
                x, t, emb_uncond, conditional=False, attention_hook=controller
            )
        except Exception as exc:
            raise fail(exc) from exc
        eps = eps_u + cfg.guidance_scale * (eps_c - eps_u)
        x0_pred = predict_x0(x, eps, t, schedule)
        x = ddim_step(x, eps, t, t_prev, schedule)
        x = blend_background(x, flat_latent(flat_code, t_prev, eps_flat, schedule), mask_lat)
        if step_callback is not None:
            step_callback(SogStep(index=index, t=t, t_prev=t_prev, latent=x, x0_pred=x0_pred))

    try:
        image = backends.latent_codec.decode(x)
    except Exception as exc:
        raise fail(exc) from exc
    return ObjectResult(
        object_id=spec.id,
        image=image,
        latent_x0=x,
        original_mask=spec.mask,
        bbox=box,
    )
