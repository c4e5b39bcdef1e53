"""Layout input model, binary-mask algebra, and the layout file format.

A binary mask is an (H, W) uint8 numpy array whose elements are exactly
0 or 1. Layouts bundle a global prompt with an ordered list of
(mask, prompt, seed) object specs; object order is significant, later
objects win pixel-assignment ties downstream.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptyMask, ParseError, ShapeMismatch, ValidationError
from .images import load_mask, save_mask

_TOP_KEYS = {"canvas", "global_prompt", "objects"}
_CANVAS_KEYS = {"h", "w"}
_OBJECT_KEYS = {"id", "prompt", "seed", "mask"}


def as_binary_mask(data) -> np.ndarray:
    """Validate and normalize mask input to a read-only {0,1} uint8 array."""
    arr = np.asarray(data)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValidationError(f"mask must be a non-empty 2-D grid, got shape {arr.shape}")
    if not np.isin(arr, (0, 1)).all():
        raise ValidationError("mask elements must be exactly 0 or 1")
    out = arr.astype(np.uint8, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box in [x, y, w, h] pixel format (x right, y down)."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.w < 1 or self.h < 1:
            raise ValidationError(f"bbox extents must be >= 1, got w={self.w} h={self.h}")
        if self.x < 0 or self.y < 0:
            raise ValidationError(f"bbox origin must be non-negative, got x={self.x} y={self.y}")

    @property
    def slices(self) -> tuple[slice, slice]:
        """(row, col) slices selecting the box region of an (H, W, ...) array."""
        return slice(self.y, self.y + self.h), slice(self.x, self.x + self.w)

    def within(self, height: int, width: int) -> bool:
        return self.x + self.w <= width and self.y + self.h <= height

    def as_list(self) -> list[int]:
        return [self.x, self.y, self.w, self.h]


@dataclass(frozen=True, eq=False)
class ObjectSpec:
    """One object of a layout: mask shape, text prompt, generation seed."""

    id: str
    prompt: str
    seed: int
    mask: np.ndarray = field(repr=False)

    def __post_init__(self):
        problems = []
        if not self.id:
            problems.append("object id must be non-empty")
        elif not re.fullmatch(r"[A-Za-z0-9][A-Za-z0-9._-]*", self.id):
            # Ids name artifact directories and URL path segments.
            problems.append(
                f"object id {self.id!r} may use only letters, digits, '.', '_', '-'"
            )
        if not self.prompt.strip():
            problems.append(f"object {self.id!r}: prompt is empty after trimming")
        if not isinstance(self.seed, (int, np.integer)) or isinstance(self.seed, bool) or self.seed < 0:
            problems.append(f"object {self.id!r}: seed must be a non-negative integer")
        try:
            object.__setattr__(self, "mask", as_binary_mask(self.mask))
        except ValidationError as e:
            problems.extend(f"object {self.id!r}: {v}" for v in e.violations)
        if problems:
            raise ValidationError(problems)


@dataclass(frozen=True, eq=False)
class Layout:
    """Canvas dimensions, a global prompt, and an ordered list of objects."""

    canvas_height: int
    canvas_width: int
    global_prompt: str
    objects: tuple[ObjectSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(self.objects))
        problems = []
        if self.canvas_height < 1 or self.canvas_width < 1:
            problems.append("canvas dimensions must be positive")
        if not self.objects:
            problems.append("objects list must be non-empty")
        seen = set()
        for obj in self.objects:
            if obj.id in seen:
                problems.append(f"duplicate object id {obj.id!r}")
            seen.add(obj.id)
            if obj.mask.shape != (self.canvas_height, self.canvas_width):
                problems.append(
                    f"object {obj.id!r}: mask shape {obj.mask.shape} does not match "
                    f"canvas ({self.canvas_height}, {self.canvas_width})"
                )
        if problems:
            raise ValidationError(problems)

    @property
    def masks(self) -> list[np.ndarray]:
        return [obj.mask for obj in self.objects]

    def object_by_id(self, object_id: str) -> ObjectSpec:
        for obj in self.objects:
            if obj.id == object_id:
                return obj
        raise KeyError(object_id)


def layouts_equal(a: Layout, b: Layout) -> bool:
    """Field-for-field equality, with bitwise mask comparison."""
    if (a.canvas_height, a.canvas_width, a.global_prompt) != (
        b.canvas_height,
        b.canvas_width,
        b.global_prompt,
    ):
        return False
    if len(a.objects) != len(b.objects):
        return False
    return all(
        x.id == y.id and x.prompt == y.prompt and x.seed == y.seed and np.array_equal(x.mask, y.mask)
        for x, y in zip(a.objects, b.objects)
    )


# ---------------------------------------------------------------------------
# Mask algebra
# ---------------------------------------------------------------------------


def bbox(mask: np.ndarray) -> BBox:
    """Tightest axis-aligned box containing every 1-pixel of the mask."""
    mask = np.asarray(mask)
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    if rows.size == 0:
        raise EmptyMask("cannot take the bounding box of an all-zero mask")
    y0, y1 = int(rows[0]), int(rows[-1])
    x0, x1 = int(cols[0]), int(cols[-1])
    return BBox(x=x0, y=y0, w=x1 - x0 + 1, h=y1 - y0 + 1)


def mask_area_fraction(mask: np.ndarray) -> float:
    """Fraction of canvas pixels covered by the mask, in [0, 1]."""
    mask = np.asarray(mask)
    return float(np.count_nonzero(mask)) / mask.size


def _check_same_shape(masks: Sequence[np.ndarray]) -> tuple[int, int]:
    shapes = {np.asarray(m).shape for m in masks}
    if len(shapes) > 1:
        raise ShapeMismatch(f"masks must share one shape, got {sorted(shapes)}")
    return next(iter(shapes))


def union_mask(masks: Sequence[np.ndarray]) -> np.ndarray:
    """Pixelwise OR of the masks."""
    _check_same_shape(masks)
    out = np.zeros_like(np.asarray(masks[0]), dtype=np.uint8)
    for m in masks:
        out |= np.asarray(m, dtype=np.uint8)
    return out


def background_mask(masks: Sequence[np.ndarray]) -> np.ndarray:
    """Elementwise product of mask complements: 1 iff a pixel is in no mask."""
    if not masks:
        raise ValueError("background_mask requires at least one mask")
    return (1 - union_mask(masks)).astype(np.uint8)


def overlap_pairs(masks: Sequence[np.ndarray]) -> list[tuple[int, int]]:
    """Index pairs (i < j) whose masks share at least one pixel.

    Used to warn about overlapping layouts; overlaps are handled
    deterministically downstream, never rejected.
    """
    _check_same_shape(masks)
    pairs = []
    arrs = [np.asarray(m, dtype=bool) for m in masks]
    for i in range(len(arrs)):
        for j in range(i + 1, len(arrs)):
            if np.any(arrs[i] & arrs[j]):
                pairs.append((i, j))
    return pairs


def downsample_cells(size: int, target: int) -> np.ndarray:
    """Cell boundaries partitioning `size` source pixels into `target` cells."""
    return np.floor(np.arange(target + 1) * size / target).astype(int)


def downsample_mask(mask: np.ndarray, target_h: int, target_w: int) -> np.ndarray:
    """Area-average the mask into a target grid, then threshold at strictly > 0.5.

    Each output cell covers a contiguous block of source pixels; the cell is 1
    iff the mean coverage of its block exceeds 0.5 (ties resolve to 0).
    Deterministic, and the identity when target dims equal source dims.
    """
    mask = np.asarray(mask, dtype=np.float64)
    if target_h < 1 or target_w < 1:
        raise ValidationError("downsample target dims must be >= 1")
    h, w = mask.shape
    if (h, w) == (target_h, target_w):
        return mask.astype(np.uint8)
    row_edges = downsample_cells(h, target_h)
    col_edges = downsample_cells(w, target_w)
    # cumulative-sum integral image gives exact block means
    integral = np.zeros((h + 1, w + 1), dtype=np.float64)
    integral[1:, 1:] = mask.cumsum(axis=0).cumsum(axis=1)
    r0, r1 = row_edges[:-1], row_edges[1:]
    c0, c1 = col_edges[:-1], col_edges[1:]
    sums = (
        integral[np.ix_(r1, c1)]
        - integral[np.ix_(r0, c1)]
        - integral[np.ix_(r1, c0)]
        + integral[np.ix_(r0, c0)]
    )
    areas = np.outer(r1 - r0, c1 - c0).astype(np.float64)
    return (sums / areas > 0.5).astype(np.uint8)


# ---------------------------------------------------------------------------
# Run-length mask encoding (row-major, alternating zero/one run counts,
# starting with the count of leading zeros)
# ---------------------------------------------------------------------------


def rle_encode(mask: np.ndarray) -> list[int]:
    flat = np.asarray(mask, dtype=np.uint8).ravel()
    counts = []
    value = 0
    run = 0
    for px in flat:
        if px == value:
            run += 1
        else:
            counts.append(run)
            value = int(px)
            run = 1
    counts.append(run)
    return counts


def rle_decode(counts: Iterable[int], height: int, width: int) -> np.ndarray:
    counts = list(counts)
    total = sum(counts)
    if total != height * width:
        raise ValidationError(
            f"run-length counts sum to {total}, expected {height * width} for {height}x{width}"
        )
    if any(c < 0 for c in counts):
        raise ValidationError("run-length counts must be non-negative")
    flat = np.zeros(total, dtype=np.uint8)
    pos = 0
    value = 0
    for c in counts:
        if value:
            flat[pos : pos + c] = 1
        pos += c
        value ^= 1
    return flat.reshape(height, width)


# ---------------------------------------------------------------------------
# Layout file format: UTF-8 JSON; masks as relative PNG paths or inline RLE.
# ---------------------------------------------------------------------------


def _require_keys(obj: dict, allowed: set[str], required: set[str], where: str):
    unknown = set(obj) - allowed
    if unknown:
        raise ParseError(f"unknown keys {sorted(unknown)}", location=where)
    missing = required - set(obj)
    if missing:
        raise ParseError(f"missing keys {sorted(missing)}", location=where)


def _decode_mask_field(value, height: int, width: int, base_dir: Path | None, where: str) -> np.ndarray:
    if isinstance(value, str):
        if base_dir is None:
            raise ParseError("mask path given but no base directory to resolve it", location=where)
        path = base_dir / value
        if not path.is_file():
            raise ParseError(f"mask file not found: {path}", location=where)
        return load_mask(path)
    if isinstance(value, dict):
        _require_keys(value, {"rle"}, {"rle"}, where)
        return rle_decode(value["rle"], height, width)
    raise ParseError("mask must be a relative PNG path or an inline {'rle': [...]} object", location=where)


def load_layout(data: bytes | str, base_dir: str | Path | None = None) -> Layout:
    """Parse a layout document; see `save_layout` for the inverse.

    Raises ParseError for malformed documents (with a location) and
    ValidationError listing every violated invariant.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as e:
        raise ParseError(e.msg, location=f"line {e.lineno}, column {e.colno}") from e
    if not isinstance(doc, dict):
        raise ParseError("top level must be a JSON object")
    _require_keys(doc, _TOP_KEYS, _TOP_KEYS, "top level")
    canvas = doc["canvas"]
    if not isinstance(canvas, dict):
        raise ParseError("canvas must be an object", location="canvas")
    _require_keys(canvas, _CANVAS_KEYS, _CANVAS_KEYS, "canvas")
    if not isinstance(doc["objects"], list):
        raise ParseError("objects must be an array", location="objects")

    base = Path(base_dir) if base_dir is not None else None
    height, width = int(canvas["h"]), int(canvas["w"])
    violations = []
    objects = []
    for i, entry in enumerate(doc["objects"]):
        where = f"objects[{i}]"
        if not isinstance(entry, dict):
            raise ParseError("object entry must be an object", location=where)
        _require_keys(entry, _OBJECT_KEYS, _OBJECT_KEYS, where)
        mask = _decode_mask_field(entry["mask"], height, width, base, f"{where}.mask")
        try:
            objects.append(
                ObjectSpec(id=str(entry["id"]), prompt=str(entry["prompt"]), seed=entry["seed"], mask=mask)
            )
        except ValidationError as e:
            violations.extend(e.violations)
    if violations:
        raise ValidationError(violations)
    return Layout(
        canvas_height=height,
        canvas_width=width,
        global_prompt=str(doc["global_prompt"]),
        objects=tuple(objects),
    )


def save_layout(layout: Layout) -> bytes:
    """Serialize a layout to self-contained UTF-8 JSON with inline RLE masks."""
    doc = {
        "canvas": {"h": layout.canvas_height, "w": layout.canvas_width},
        "global_prompt": layout.global_prompt,
        "objects": [
            {"id": o.id, "prompt": o.prompt, "seed": int(o.seed), "mask": {"rle": rle_encode(o.mask)}}
            for o in layout.objects
        ],
    }
    return json.dumps(doc, indent=2).encode("utf-8")


def load_layout_file(path: str | Path) -> Layout:
    path = Path(path)
    return load_layout(path.read_bytes(), base_dir=path.parent)


def save_layout_file(layout: Layout, path: str | Path, mask_dir: str = "masks") -> None:
    """Write the layout JSON next to per-object mask PNGs under `mask_dir`."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    masks = path.parent / mask_dir
    masks.mkdir(parents=True, exist_ok=True)
    entries = []
    for o in layout.objects:
        rel = f"{mask_dir}/{o.id}.png"
        save_mask(path.parent / rel, o.mask)
        entries.append({"id": o.id, "prompt": o.prompt, "seed": int(o.seed), "mask": rel})
    doc = {
        "canvas": {"h": layout.canvas_height, "w": layout.canvas_width},
        "global_prompt": layout.global_prompt,
        "objects": entries,
    }
    path.write_text(json.dumps(doc, indent=2), encoding="utf-8")
