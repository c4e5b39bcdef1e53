"""PNG helpers for float images, binary masks, and debug heatmaps.

Pixel convention used across the engine: an image is an (H, W, 3) float
array in [-1, 1], matching the latent codec's normalized input range.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image


def to_uint8(image: np.ndarray) -> np.ndarray:
    """Map a [-1, 1] float image to uint8 [0, 255], clipping out-of-range values."""
    arr = np.clip((np.asarray(image, dtype=np.float64) + 1.0) * 127.5, 0.0, 255.0)
    return np.round(arr).astype(np.uint8)


def from_uint8(arr: np.ndarray) -> np.ndarray:
    """Map uint8 [0, 255] to a [-1, 1] float image."""
    return np.asarray(arr, dtype=np.float64) / 127.5 - 1.0


def save_image(path: str | Path, image: np.ndarray) -> None:
    Image.fromarray(to_uint8(image), mode="RGB").save(path)


def load_image(path: str | Path) -> np.ndarray:
    with Image.open(path) as im:
        return from_uint8(np.asarray(im.convert("RGB")))


def save_mask(path: str | Path, mask: np.ndarray) -> None:
    """Write a {0,1} mask as an 8-bit grayscale PNG (0 or 255)."""
    arr = (np.asarray(mask, dtype=np.uint8) * 255).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(path)


def load_mask(path: str | Path) -> np.ndarray:
    """Read an 8-bit grayscale PNG as a {0,1} mask; values >= 128 count as 1.

    The threshold tolerates anti-aliased, hand-drawn masks.
    """
    with Image.open(path) as im:
        arr = np.asarray(im.convert("L"))
    return (arr >= 128).astype(np.uint8)


def save_heatmap(path: str | Path, values: np.ndarray) -> None:
    """Write a 2-D float array as a min-max normalized grayscale PNG."""
    v = np.asarray(values, dtype=np.float64)
    lo, hi = float(v.min()), float(v.max())
    if hi - lo < 1e-12:
        norm = np.zeros_like(v)
    else:
        norm = (v - lo) / (hi - lo)
    Image.fromarray(np.round(norm * 255.0).astype(np.uint8), mode="L").save(path)


def save_indexed(path: str | Path, labels: np.ndarray) -> None:
    """Write an integer label map as an indexed-color PNG (distinct hues per label)."""
    lab = np.asarray(labels)
    n = int(lab.max()) + 1 if lab.size else 1
    rng = np.random.default_rng(0)
    palette = rng.integers(40, 255, size=(max(n, 1), 3), dtype=np.uint8)
    palette[0] = (30, 30, 30)
    Image.fromarray(palette[lab], mode="RGB").save(path)
