"""Per-object metrics and benchmark-layout preparation.

Local CLIP score crops each object by its mask's bounding box and measures
image/text embedding cosine (scaled to 0..100, clamped at 0); local IoU
compares a box-prompted segmenter's raw prediction against the layout
mask. Layouts for benchmarking are ingested from COCO-style instance
annotations with a minimum-area filter and nearest-neighbor resize.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image, ImageDraw

from .backends import ImageTextEmbedder, Segmenter
from .errors import AnnotationParseError, ShapeMismatch
from .layout import BBox, Layout, ObjectSpec, bbox, mask_area_fraction

log = logging.getLogger(__name__)

# The benchmark protocol leaves two choices open; these are this
# implementation's picks, surfaced in every report so numbers are
# comparable only across runs sharing them.
PROTOCOL_NOTES = (
    "object prompts use the template 'a photo of a {category}'",
    "global prompt is the comma-joined category list (assumption, not part of the protocol)",
)

PROMPT_TEMPLATE = "a photo of a {category}"


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))


def iou(a: np.ndarray, b: np.ndarray) -> float:
    """Intersection over union of two binary masks; 0 when both are empty."""
    a = np.asarray(a).astype(bool)
    b = np.asarray(b).astype(bool)
    if a.shape != b.shape:
        raise ShapeMismatch(f"mask shapes differ: {a.shape} vs {b.shape}")
    union = np.logical_or(a, b).sum()
    if union == 0:
        return 0.0
    return float(np.logical_and(a, b).sum() / union)


def crop_to_bbox(image: np.ndarray, box: BBox) -> np.ndarray:
    rows, cols = box.slices
    return image[rows, cols]


def local_clip_score(image: np.ndarray, layout: Layout, embedder: ImageTextEmbedder) -> float:
    """Mean over objects of max(100 * cosine(image crop, prompt), 0)."""
    image = np.asarray(image)
    if image.shape[:2] != (layout.canvas_height, layout.canvas_width):
        raise ShapeMismatch(f"image {image.shape[:2]} vs canvas {(layout.canvas_height, layout.canvas_width)}")
    scores = []
    for obj in layout.objects:
        crop = crop_to_bbox(image, bbox(obj.mask))
        c = cosine(embedder.embed_image(crop), embedder.embed_text(obj.prompt))
        scores.append(max(100.0 * c, 0.0))
    return float(np.mean(scores))


def local_iou(image: np.ndarray, layout: Layout, segmenter: Segmenter) -> float:
    """Mean over objects of IoU(raw segmenter prediction, layout mask).

    The prediction is NOT intersected with the layout mask here — the
    metric scores the predicted shape itself, and clipping would inflate
    it. Segmenter failures score that object 0 with a warning.
    """
    image = np.asarray(image)
    if image.shape[:2] != (layout.canvas_height, layout.canvas_width):
        raise ShapeMismatch(f"image {image.shape[:2]} vs canvas {(layout.canvas_height, layout.canvas_width)}")
    scores = []
    for obj in layout.objects:
        box = bbox(obj.mask)
        try:
            candidates = segmenter.segment(image, box)
        except Exception:
            log.warning("segmenter raised for object %r; scoring 0", obj.id, exc_info=True)
            scores.append(0.0)
            continue
        if not candidates:
            log.warning("segmenter returned no candidates for object %r; scoring 0", obj.id)
            scores.append(0.0)
            continue
        best, _ = max(candidates, key=lambda pair: pair[1])
        scores.append(iou(best, obj.mask))
    return float(np.mean(scores))


@dataclass(frozen=True)
class ObjectEval:
    layout_index: int
    object_id: str
    box: BBox
    clip: float
    iou: float


@dataclass(frozen=True)
class EvalReport:
    clip_local: float
    iou_local: float
    per_object: tuple[ObjectEval, ...]
    n_layouts: int
    n_objects: int
    notes: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "notes": list(self.notes),
            "clip_local": self.clip_local,
            "iou_local": self.iou_local,
            "n_layouts": self.n_layouts,
            "n_objects": self.n_objects,
            "per_object": [
                {
                    "layout": r.layout_index,
                    "object": r.object_id,
                    "bbox": r.box.as_list(),
                    "clip": r.clip,
                    "iou": r.iou,
                }
                for r in self.per_object
            ],
        }


def evaluate_pairs(
    pairs: Sequence[tuple[np.ndarray, Layout]],
    embedder: ImageTextEmbedder,
    segmenter: Segmenter,
    notes: tuple[str, ...] = (),
) -> EvalReport:
    """Score (image, layout) pairs and aggregate object-mean metrics."""
    records: list[ObjectEval] = []
    for index, (image, layout) in enumerate(pairs):
        image = np.asarray(image)
        for obj in layout.objects:
            box = bbox(obj.mask)
            crop = crop_to_bbox(image, box)
            c = max(100.0 * cosine(embedder.embed_image(crop), embedder.embed_text(obj.prompt)), 0.0)
            try:
                candidates = segmenter.segment(image, box)
                if candidates:
                    best, _ = max(candidates, key=lambda pair: pair[1])
                    j = iou(best, obj.mask)
                else:
                    log.warning("segmenter returned no candidates for object %r; scoring 0", obj.id)
                    j = 0.0
            except Exception:
                log.warning("segmenter raised for object %r; scoring 0", obj.id, exc_info=True)
                j = 0.0
            records.append(ObjectEval(index, obj.id, box, c, j))
    n_objects = len(records)
    return EvalReport(
        clip_local=float(np.mean([r.clip for r in records])) if records else 0.0,
        iou_local=float(np.mean([r.iou for r in records])) if records else 0.0,
        per_object=tuple(records),
        n_layouts=len(pairs),
        n_objects=n_objects,
        notes=notes,
    )


def format_report(report: EvalReport) -> str:
    """Human-readable table with the protocol notes up top."""
    lines = [f"# {note}" for note in report.notes]
    lines.append(f"layouts: {report.n_layouts}  objects: {report.n_objects}")
    lines.append(f"CLIP (local): {report.clip_local:.2f}")
    lines.append(f"IoU  (local): {report.iou_local:.4f}")
    lines.append("")
    lines.append(f"{'layout':>6}  {'object':<16} {'clip':>7}  {'iou':>6}")
    for r in report.per_object:
        lines.append(f"{r.layout_index:>6}  {r.object_id:<16} {r.clip:>7.2f}  {r.iou:>6.4f}")
    return "\n".join(lines) + "\n"


def write_report(report: EvalReport, json_path: str | Path, table_path: str | Path | None = None) -> None:
    Path(json_path).write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    if table_path is not None:
        Path(table_path).write_text(format_report(report))


# ---------------------------------------------------------------------------
# Benchmark-layout ingestion from COCO-style instance annotations.
# ---------------------------------------------------------------------------


def resize_mask_nn(mask: np.ndarray, target_h: int, target_w: int) -> np.ndarray:
    """Nearest-neighbor mask resize: out[i, j] = src[i*H // th, j*W // tw]."""
    mask = np.asarray(mask)
    h, w = mask.shape
    rows = (np.arange(target_h) * h) // target_h
    cols = (np.arange(target_w) * w) // target_w
    return (mask[np.ix_(rows, cols)] > 0).astype(np.uint8)


def _polygon_mask(polygons: list, h: int, w: int) -> np.ndarray:
    img = Image.new("L", (w, h), 0)
    draw = ImageDraw.Draw(img)
    for poly in polygons:
        if len(poly) < 6:
            raise AnnotationParseError(f"polygon needs >= 3 points, got {len(poly)} coordinates")
        draw.polygon([float(v) for v in poly], outline=1, fill=1)
    return np.asarray(img, dtype=np.uint8)


def _rle_mask(rle: dict, h: int, w: int) -> np.ndarray:
    counts = rle.get("counts")
    if isinstance(counts, (str, bytes)):
        raise AnnotationParseError("compressed RLE counts are not supported; use uncompressed lists")
    size = rle.get("size")
    if size is not None and tuple(size) != (h, w):
        raise AnnotationParseError(f"RLE size {size} disagrees with image size {(h, w)}")
    counts = [int(c) for c in counts]
    if sum(counts) != h * w:
        raise AnnotationParseError(f"RLE counts sum to {sum(counts)}, expected {h * w}")
    flat = np.zeros(h * w, dtype=np.uint8)
    pos, value = 0, 0
    for run in counts:
        if value:
            flat[pos : pos + run] = 1
        pos += run
        value ^= 1
    # Instance-annotation RLE is column-major.
    return flat.reshape((h, w), order="F")


def _annotation_mask(ann: dict, h: int, w: int) -> np.ndarray:
    seg = ann.get("segmentation")
    if isinstance(seg, dict):
        return _rle_mask(seg, h, w)
    if isinstance(seg, list) and seg and isinstance(seg[0], (list, tuple)):
        return _polygon_mask(seg, h, w)
    raise AnnotationParseError(f"unsupported segmentation payload for annotation {ann.get('id')!r}")


def prepare_layouts(
    annotation_source: str | Path | dict,
    min_area_fraction: float = 0.05,
    target_size: int = 512,
    limit: int | None = None,
) -> list[Layout]:
    """Turn instance annotations into benchmark layouts.

    Per image: decode instance masks at native resolution, drop any with
    area fraction strictly below min_area_fraction (the boundary case is
    retained), nearest-neighbor-resize the survivors to a square canvas,
    and template each category name into an object prompt. Images with no
    surviving masks are skipped.
    """
    if isinstance(annotation_source, (str, Path)):
        try:
            data = json.loads(Path(annotation_source).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise AnnotationParseError(f"cannot read annotations: {exc}") from exc
    else:
        data = annotation_source
    try:
        images = {img["id"]: img for img in data["images"]}
        categories = {cat["id"]: cat["name"] for cat in data["categories"]}
        annotations = data["annotations"]
    except (KeyError, TypeError) as exc:
        raise AnnotationParseError(f"missing annotation section: {exc}") from exc

    by_image: dict = {}
    for ann in annotations:
        by_image.setdefault(ann["image_id"], []).append(ann)

    layouts: list[Layout] = []
    for image_id in sorted(by_image):
        if limit is not None and len(layouts) >= limit:
            break
        info = images.get(image_id)
        if info is None:
            raise AnnotationParseError(f"annotation references unknown image id {image_id}")
        h, w = int(info["height"]), int(info["width"])
        objects = []
        names = []
        for ann in by_image[image_id]:
            mask = _annotation_mask(ann, h, w)
            if mask_area_fraction(mask) < min_area_fraction:
                continue
            if ann["category_id"] not in categories:
                raise AnnotationParseError(f"unknown category id {ann['category_id']}")
            name = categories[ann["category_id"]]
            names.append(name)
            objects.append(
                ObjectSpec(
                    id=str(ann["id"]),
                    prompt=PROMPT_TEMPLATE.format(category=name),
                    seed=int(ann["id"]),
                    mask=resize_mask_nn(mask, target_size, target_size),
                )
            )
        if not objects:
            continue
        layouts.append(
            Layout(
                canvas_height=target_size,
                canvas_width=target_size,
                global_prompt=", ".join(names),
                objects=tuple(objects),
            )
        )
    return layouts
