"""Prompt-adjusted cross-attention: pre-softmax similarity surgery.

Masked pixels get an additive boost toward every prompt token except the
start-of-text token; unmasked pixels get the same boost toward the
start-of-text token only, which steers them to generic background content.
The boost magnitude w_t scales with the noise-to-signal ratio, so the
surgery fades to a no-op as the latent becomes clean.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .diffusion import Schedule
from .errors import InvalidRange, LengthMismatch
from .images import save_heatmap
from .layout import downsample_mask


@dataclass(frozen=True)
class PacaConfig:
    """Surgery parameters.

    eot_index depends on the tokenized prompt and is filled in per
    generation; max_attention_resolution selects which cross-attention
    layers are touched (sites whose map is larger on either side are
    left alone, coarse layers dominate layout).
    """

    w_prime: float = 0.3
    sot_index: int = 0
    eot_index: int | None = None
    max_attention_resolution: int = 32

    def __post_init__(self):
        if self.w_prime <= 0:
            raise InvalidRange(f"w_prime must be > 0, got {self.w_prime}")
        if self.sot_index < 0:
            raise InvalidRange(f"sot_index must be >= 0, got {self.sot_index}")
        if self.eot_index is not None and not self.sot_index < self.eot_index:
            raise InvalidRange(
                f"need sot_index < eot_index, got {self.sot_index} >= {self.eot_index}"
            )


def noise_signal_ratio(t: int, s: Schedule) -> float:
    """sqrt(1 - a_t) / sqrt(a_t) at timestep t."""
    a = s.alpha_bar_at(t)
    return float(np.sqrt(1.0 - a) / np.sqrt(a))


def paca_weight(w_prime: float, sigma_t: float, scores: np.ndarray) -> float:
    """Boost magnitude: w' * log(1 + sigma_t) * max over the raw scores.

    The max is taken over the unmodified matrix of one attention head,
    before any surgery, keeping the boost commensurate with that head's
    score range.
    """
    scores = np.asarray(scores)
    if scores.size == 0:
        raise InvalidRange("scores matrix must be non-empty")
    return float(w_prime * np.log1p(sigma_t) * scores.max())


def apply_paca(scores: np.ndarray, mask_flat: np.ndarray, cfg: PacaConfig, w_t: float) -> np.ndarray:
    """Return a boosted copy of a (pixels, tokens) pre-softmax score matrix.

    Rows of masked pixels gain w_t on every token column from just after
    start-of-text through end-of-text inclusive; rows of unmasked pixels
    gain w_t on the start-of-text column only. Padding columns after
    end-of-text are never touched. The input matrix is not mutated.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 2:
        raise LengthMismatch(f"scores must be 2-D (pixels, tokens), got shape {scores.shape}")
    pixels, tokens = scores.shape
    mask_flat = np.asarray(mask_flat).ravel()
    if mask_flat.size != pixels:
        raise LengthMismatch(f"mask length {mask_flat.size} vs {pixels} pixels")
    if cfg.eot_index is None:
        raise InvalidRange("PacaConfig.eot_index must be set before applying the surgery")
    if not cfg.eot_index < tokens:
        raise InvalidRange(f"eot_index {cfg.eot_index} out of range for {tokens} tokens")
    if not np.isfinite(w_t):
        raise InvalidRange(f"w_t must be finite, got {w_t}")

    out = scores.copy()
    masked = mask_flat.astype(bool)
    prompt_cols = np.array(
        [k for k in range(cfg.eot_index + 1) if k != cfg.sot_index], dtype=int
    )
    out[np.ix_(masked, prompt_cols)] += w_t
    out[~masked, cfg.sot_index] += w_t
    return out


class PacaController:
    """Applies the surgery at cross-attention sites during one generation.

    Holds the object's full-resolution mask, caches its downsample at each
    attention resolution, and recomputes w_t per call from that call's raw
    scores. Confined to a single generation context; not shared across
    concurrent generations.
    """

    def __init__(self, mask: np.ndarray, cfg: PacaConfig, schedule: Schedule, dump_dir: str | Path | None = None):
        self.mask = np.asarray(mask, dtype=np.uint8)
        self.cfg = cfg
        self.schedule = schedule
        self.dump_dir = Path(dump_dir) if dump_dir is not None else None
        self._mask_cache: dict[tuple[int, int], np.ndarray] = {}
        self.calls = 0

    def mask_at(self, h: int, w: int) -> np.ndarray:
        key = (h, w)
        if key not in self._mask_cache:
            self._mask_cache[key] = downsample_mask(self.mask, h, w).ravel()
        return self._mask_cache[key]

    def bind_eot(self, eot_index: int) -> None:
        """Fix the end-of-text column once the prompt has been tokenized."""
        self.cfg = replace(self.cfg, eot_index=eot_index)

    def selects(self, h: int, w: int) -> bool:
        return max(h, w) <= self.cfg.max_attention_resolution

    def __call__(self, scores: np.ndarray, site) -> np.ndarray:
        """Site hook; `site` carries (t, h, w, conditional, layer).

        Only the prompt-conditional branch is touched; the unconditional
        branch of classifier-free guidance passes through bit-identical.
        """
        if not site.conditional or not self.selects(site.h, site.w):
            return scores
        scores = np.asarray(scores)
        sigma = noise_signal_ratio(site.t, self.schedule)
        if sigma == 0.0:
            return scores
        mask_flat = self.mask_at(site.h, site.w)
        if scores.ndim == 2:
            heads = scores[None, ...]
        else:
            heads = scores
        boosted = np.stack(
            [
                apply_paca(head, mask_flat, self.cfg, paca_weight(self.cfg.w_prime, sigma, head))
                for head in heads
            ]
        )
        self.calls += 1
        out = boosted[0] if scores.ndim == 2 else boosted
        if self.dump_dir is not None:
            self._dump(out, site)
        return out

    def _dump(self, scores: np.ndarray, site) -> None:
        """Write start-token vs other-token attention maps as grayscale PNGs."""
        self.dump_dir.mkdir(parents=True, exist_ok=True)
        mat = scores if scores.ndim == 2 else scores.mean(axis=0)
        stable = mat - mat.max(axis=1, keepdims=True)
        probs = np.exp(stable)
        probs /= probs.sum(axis=1, keepdims=True)
        sot = probs[:, self.cfg.sot_index].reshape(site.h, site.w)
        rest_cols = [k for k in range(self.cfg.eot_index + 1) if k != self.cfg.sot_index]
        rest = probs[:, rest_cols].sum(axis=1).reshape(site.h, site.w)
        tag = f"{site.layer or 'layer'}_t{site.t:04d}_{site.h}x{site.w}"
        save_heatmap(self.dump_dir / f"{tag}_sot.png", sot)
        save_heatmap(self.dump_dir / f"{tag}_rest.png", rest)
