"""Mask refinement and known-image assembly between the two stages.

Generated objects rarely fill their layout mask edge to edge; the
segmenter finds the object's actual extent inside the mask's bounding
box, and intersecting that with the layout mask trims background bleed
without ever growing past what the layout allows. The refined masks then
assemble the composite known image and the inpainting mask for stage 2.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .backends import Segmenter
from .errors import EmptyMask, ShapeMismatch, ValidationError
from .layout import as_binary_mask, background_mask, bbox
from .sog import ObjectResult

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class CompositeKnown:
    """Stage-2 inputs assembled from refined stage-1 outputs.

    known_image holds each object's pixels under its refined mask (zero
    elsewhere); inpaint_mask marks everything left to synthesize, i.e. the
    complement of the refined-mask union.
    """

    known_image: np.ndarray
    inpaint_mask: np.ndarray
    refined_masks: tuple[np.ndarray, ...]


def refine_mask(image: np.ndarray, original_mask: np.ndarray, segmenter: Segmenter) -> np.ndarray:
    """Segment the object inside its bounding box and clip to the layout mask.

    The segmenter gets the full image plus the original mask's bounding box
    as its prompt; its highest-confidence candidate is intersected with the
    original mask. Any failure mode — segmenter error, no candidates, empty
    intersection — falls back to the original mask with a warning, keeping
    the pipeline total at degraded quality.
    """
    original_mask = as_binary_mask(original_mask)
    if not original_mask.any():
        raise EmptyMask("cannot refine an empty mask")
    box = bbox(original_mask)
    try:
        candidates = segmenter.segment(image, box)
    except Exception:
        log.warning("segmenter raised; falling back to the original mask", exc_info=True)
        return original_mask.copy()
    if not candidates:
        log.warning("segmenter returned no candidates; falling back to the original mask")
        return original_mask.copy()
    best, _ = max(candidates, key=lambda pair: pair[1])
    best = as_binary_mask(best)
    if best.shape != original_mask.shape:
        raise ShapeMismatch(f"segmenter mask {best.shape} vs original {original_mask.shape}")
    refined = best & original_mask
    if not refined.any():
        log.warning("refined mask is empty; falling back to the original mask")
        return original_mask.copy()
    return refined


def refine_results(results: Sequence[ObjectResult], segmenter: Segmenter) -> list[ObjectResult]:
    """Fill refined_mask on every result, preserving order."""
    return [
        replace(r, refined_mask=refine_mask(r.image, r.original_mask, segmenter))
        for r in results
    ]


def compose_known(results: Sequence[ObjectResult]) -> CompositeKnown:
    """Paste refined object pixels onto a zero canvas, later index on top.

    Overlapping refined masks resolve to the later object, matching the
    pixel-group precedence used by the grouped cross-attention, so the
    visible pixel and its prompt group always agree.
    """
    if not results:
        raise ValidationError("cannot compose zero objects")
    missing = [r.object_id for r in results if r.refined_mask is None]
    if missing:
        raise ValidationError([f"object {oid!r} has no refined mask" for oid in missing])
    shape = results[0].image.shape
    for r in results:
        if r.image.shape != shape:
            raise ShapeMismatch(f"object {r.object_id!r} image {r.image.shape} vs {shape}")
        if r.refined_mask.shape != shape[:2]:
            raise ShapeMismatch(
                f"object {r.object_id!r} mask {r.refined_mask.shape} vs canvas {shape[:2]}"
            )

    known = np.zeros(shape, dtype=np.float64)
    for r in results:
        sel = r.refined_mask.astype(bool)
        known[sel] = r.image[sel]
    refined = tuple(r.refined_mask for r in results)
    return CompositeKnown(
        known_image=known,
        inpaint_mask=background_mask(list(refined)),
        refined_masks=refined,
    )
