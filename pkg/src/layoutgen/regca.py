"""Region-grouped cross-attention.

Latent pixels are partitioned into one group per object plus a background
group. Each group attends to its own prompt's keys and values on the
conditional branch; on the unconditional branch, object groups use an
empty prompt while the background group uses the comma-joined
concatenation of all object prompts, which acts as a negative prompt
against re-generating the objects in the background.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import DimensionMismatch, MissingGroupKV
from .images import save_indexed
from .layout import ObjectSpec, downsample_mask

BACKGROUND = "__background__"

DEFAULT_SEPARATOR = ", "


@dataclass(frozen=True)
class GroupAssignment:
    """Exact partition of flattened latent pixels into group ids.

    Group ids are contiguous 0..G-1; the background group is always
    present, as the last id.
    """

    group_of_pixel: np.ndarray
    groups: tuple[tuple[int, str], ...]
    height: int
    width: int

    @property
    def background_group(self) -> int:
        return len(self.groups) - 1

    def pixels_of(self, group_id: int) -> np.ndarray:
        return np.flatnonzero(self.group_of_pixel == group_id)

    def as_map(self) -> np.ndarray:
        return self.group_of_pixel.reshape(self.height, self.width)


def assign_groups(
    refined_masks: Sequence[np.ndarray],
    latent_h: int,
    latent_w: int,
    object_ids: Sequence[str] | None = None,
) -> GroupAssignment:
    """Partition latent pixels by the refined object masks.

    Masks are given at full canvas resolution and downsampled here. A pixel
    covered by several masks goes to the highest-index object (later in the
    layout wins); a pixel covered by none goes to the background group.
    """
    n = len(refined_masks)
    if object_ids is None:
        object_ids = [str(i) for i in range(n)]
    labels = np.full((latent_h, latent_w), n, dtype=np.int64)
    for idx, mask in enumerate(refined_masks):
        small = downsample_mask(np.asarray(mask), latent_h, latent_w)
        labels[small.astype(bool)] = idx
    groups = tuple((i, object_ids[i]) for i in range(n)) + ((n, BACKGROUND),)
    return GroupAssignment(
        group_of_pixel=labels.ravel(), groups=groups, height=latent_h, width=latent_w
    )


@dataclass(frozen=True)
class GroupPrompts:
    """Conditional / unconditional prompt text per group, background last."""

    conditional: tuple[str, ...]
    unconditional: tuple[str, ...]

    @property
    def n_groups(self) -> int:
        return len(self.conditional)


def build_group_prompts(
    objects: Sequence[ObjectSpec], global_prompt: str, separator: str = DEFAULT_SEPARATOR
) -> GroupPrompts:
    """Object groups: (object prompt, ""). Background: (global prompt, joined object prompts)."""
    cond = tuple(o.prompt for o in objects) + (global_prompt,)
    uncond = tuple("" for _ in objects) + (separator.join(o.prompt for o in objects),)
    return GroupPrompts(conditional=cond, unconditional=uncond)


@dataclass(frozen=True)
class GroupKV:
    k_cond: np.ndarray
    v_cond: np.ndarray
    k_uncond: np.ndarray
    v_uncond: np.ndarray


def scaled_dot_attention(q: np.ndarray, k: np.ndarray, v: np.ndarray) -> np.ndarray:
    """softmax(q k^T / sqrt(d)) v with a max-subtracted stable softmax."""
    q = np.asarray(q, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if q.shape[-1] != k.shape[-1]:
        raise DimensionMismatch(f"query dim {q.shape[-1]} vs key dim {k.shape[-1]}")
    if k.shape[0] != v.shape[0]:
        raise DimensionMismatch(f"{k.shape[0]} keys vs {v.shape[0]} values")
    scores = q @ k.T / np.sqrt(q.shape[-1])
    scores -= scores.max(axis=-1, keepdims=True)
    weights = np.exp(scores)
    weights /= weights.sum(axis=-1, keepdims=True)
    return weights @ v


def regca_attention(
    queries: np.ndarray,
    assignment: GroupAssignment,
    group_kv: Mapping[int, GroupKV],
) -> tuple[np.ndarray, np.ndarray]:
    """Route each pixel's query through its group's K/V, both branches.

    Equivalent to running one independent attention call per group on the
    gathered query sub-sequence and scattering results back to the original
    pixel positions. Changing one group's K/V can only change that group's
    pixels.
    """
    queries = np.asarray(queries, dtype=np.float64)
    if queries.ndim != 2 or queries.shape[0] != assignment.group_of_pixel.size:
        raise DimensionMismatch(
            f"queries must be (pixels, d) with {assignment.group_of_pixel.size} pixels, got {queries.shape}"
        )
    missing = [g for g, _ in assignment.groups if g not in group_kv]
    if missing:
        raise MissingGroupKV(f"groups without K/V entries: {missing}")
    dv = next(iter(group_kv.values())).v_cond.shape[-1]
    out_cond = np.zeros((queries.shape[0], dv), dtype=np.float64)
    out_uncond = np.zeros_like(out_cond)
    for group_id, _ in assignment.groups:
        idx = assignment.pixels_of(group_id)
        if idx.size == 0:
            continue
        kv = group_kv[group_id]
        out_cond[idx] = scaled_dot_attention(queries[idx], kv.k_cond, kv.v_cond)
        out_uncond[idx] = scaled_dot_attention(queries[idx], kv.k_uncond, kv.v_uncond)
    return out_cond, out_uncond


class RegcaController:
    """Per-generation routing state for the grouped attention.

    Encodes every group prompt once (text embeddings are timestep
    independent), then serves cached group maps at any attention-map
    resolution. A denoiser adapter asks for the assignment at its layer's
    resolution and the per-group conditioning to build grouped K/V.
    """

    def __init__(
        self,
        refined_masks: Sequence[np.ndarray],
        object_ids: Sequence[str],
        prompts: GroupPrompts,
        text_encoder,
        dump_dir: str | Path | None = None,
        max_attention_resolution: int | None = None,
    ):
        self.refined_masks = [np.asarray(m, dtype=np.uint8) for m in refined_masks]
        self.object_ids = list(object_ids)
        self.prompts = prompts
        self.dump_dir = Path(dump_dir) if dump_dir is not None else None
        self.max_attention_resolution = max_attention_resolution
        self.sites_seen = 0
        cache: dict[str, object] = {}

        def encode_once(text: str):
            if text not in cache:
                cache[text] = text_encoder.encode(text)
            return cache[text]

        self.cond_embeddings = tuple(encode_once(p) for p in prompts.conditional)
        self.uncond_embeddings = tuple(encode_once(p) for p in prompts.unconditional)
        self._assignments: dict[tuple[int, int], GroupAssignment] = {}

    def assignment_at(self, h: int, w: int) -> GroupAssignment:
        key = (h, w)
        if key not in self._assignments:
            a = assign_groups(self.refined_masks, h, w, object_ids=self.object_ids)
            self._assignments[key] = a
            if self.dump_dir is not None:
                self.dump_dir.mkdir(parents=True, exist_ok=True)
                save_indexed(self.dump_dir / f"groups_{h}x{w}.png", a.as_map())
        return self._assignments[key]

    def embeddings_for(self, conditional: bool):
        return self.cond_embeddings if conditional else self.uncond_embeddings

    def selects(self, h: int, w: int) -> bool:
        """Routing applies everywhere unless a resolution ceiling is configured."""
        if self.max_attention_resolution is None:
            return True
        return max(h, w) <= self.max_attention_resolution

    def on_site(self, site) -> None:
        """Register one cross-attention call site.

        Keeps the per-resolution group map warm (and dumped, if enabled)
        exactly where an adapter would route K/V; grouping stays active at
        every timestep, including the final whole-image refinement phase.
        """
        if self.selects(site.h, site.w):
            self.assignment_at(site.h, site.w)
            self.sites_seen += 1
