"""Pluggable model interfaces and their deterministic toy implementations.

Everything that would normally require pretrained weights sits behind a
small protocol: noise prediction, inpainting noise prediction, text
encoding, the pixel<->latent codec, box-prompted segmentation, and the
image/text embedder used by the metrics. The toy implementations are
closed-form and fully deterministic, so every pipeline property can be
tested exactly, with no weights and no accelerator.

Conventions: images are (H, W, 3) float arrays in [-1, 1]; latents are
(C, H, W) float64; binary masks are (H, W) uint8 in {0, 1}.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Callable, Mapping, Protocol, Sequence, runtime_checkable

import numpy as np

from .diffusion import Schedule
from .errors import BackendFailure, ShapeMismatch, UnknownPrompt
from .layout import BBox


@dataclass(frozen=True)
class TextEmbedding:
    """Token embeddings plus the indices the attention surgeries need.

    tokens is (length, dim); position 0 is the start-of-text token and
    eot_index the end-of-text token. Positions after eot_index are padding
    and are reported by index rather than stripped, mirroring fixed-length
    real encoders.
    """

    tokens: np.ndarray
    eot_index: int
    prompt: str
    sot_index: int = 0
    padding_positions: tuple[int, ...] = ()

    def __post_init__(self):
        if not 0 <= self.sot_index < self.eot_index < self.tokens.shape[0]:
            raise BackendFailure(
                f"token indices out of order: sot={self.sot_index} eot={self.eot_index} "
                f"length={self.tokens.shape[0]}"
            )


@dataclass(frozen=True)
class AttentionSite:
    """Identity of one cross-attention call inside a denoiser forward pass."""

    t: int
    h: int
    w: int
    conditional: bool
    layer: str = ""


AttentionHook = Callable[[np.ndarray, AttentionSite], np.ndarray]


@runtime_checkable
class TextEncoder(Protocol):
    concurrent_safe: bool

    def encode(self, text: str) -> TextEmbedding: ...


@runtime_checkable
class Denoiser(Protocol):
    concurrent_safe: bool

    def predict(
        self,
        x_t: np.ndarray,
        t: int,
        text: TextEmbedding,
        *,
        conditional: bool,
        attention_hook: AttentionHook | None = None,
    ) -> np.ndarray: ...


@runtime_checkable
class InpaintDenoiser(Protocol):
    concurrent_safe: bool

    def predict(
        self,
        x_t: np.ndarray,
        t: int,
        text: TextEmbedding,
        *,
        known_code: np.ndarray,
        inpaint_mask: np.ndarray,
        conditional: bool,
        attention_hook: AttentionHook | None = None,
    ) -> np.ndarray: ...


@runtime_checkable
class LatentCodec(Protocol):
    concurrent_safe: bool
    factor: int

    def encode(self, image: np.ndarray) -> np.ndarray: ...

    def decode(self, latent: np.ndarray) -> np.ndarray: ...


@runtime_checkable
class Segmenter(Protocol):
    concurrent_safe: bool

    def segment(self, image: np.ndarray, box: BBox) -> list[tuple[np.ndarray, float]]: ...


@runtime_checkable
class ImageTextEmbedder(Protocol):
    concurrent_safe: bool

    def embed_image(self, image: np.ndarray) -> np.ndarray: ...

    def embed_text(self, text: str) -> np.ndarray: ...


@dataclass(frozen=True)
class BackendSet:
    """One of everything the pipelines consume."""

    denoiser: Denoiser
    inpaint_denoiser: InpaintDenoiser
    text_encoder: TextEncoder
    latent_codec: LatentCodec
    segmenter: Segmenter
    image_text_embedder: ImageTextEmbedder

    @property
    def concurrent_safe(self) -> bool:
        """True only if every component declares concurrent-inference safety."""
        parts = (
            self.denoiser,
            self.inpaint_denoiser,
            self.text_encoder,
            self.latent_codec,
            self.segmenter,
            self.image_text_embedder,
        )
        return all(getattr(p, "concurrent_safe", False) for p in parts)


def _seed_from(*parts) -> int:
    digest = hashlib.sha256("\x1f".join(str(p) for p in parts).encode()).digest()
    return int.from_bytes(digest[:8], "big")


# ---------------------------------------------------------------------------
# Toy world: analytic denoising toward registered per-prompt target latents.
# ---------------------------------------------------------------------------


class ToyWorld:
    """Registry mapping prompt text to the latent each prompt 'means'.

    The toy denoisers predict exactly the noise under which the clean-latent
    estimate equals the registered target, so sampling trajectories land on
    the target in closed form and tests can assert against it directly.
    """

    def __init__(
        self,
        prompt_table: Mapping[str, np.ndarray | float] | None = None,
        default_target: np.ndarray | float | Callable[[str, tuple], np.ndarray] | None = None,
    ):
        self.prompt_table: dict[str, np.ndarray | float] = dict(prompt_table or {})
        self.default_target = default_target

    def register(self, prompt: str, target: np.ndarray | float) -> None:
        self.prompt_table[prompt] = target

    def target(self, prompt: str, shape: tuple[int, ...]) -> np.ndarray:
        if prompt in self.prompt_table:
            raw = self.prompt_table[prompt]
        elif self.default_target is not None:
            raw = (
                self.default_target(prompt, shape)
                if callable(self.default_target)
                else self.default_target
            )
        else:
            raise UnknownPrompt(f"prompt not registered in toy world: {prompt!r}")
        target = np.asarray(raw, dtype=np.float64)
        try:
            return np.broadcast_to(target, shape).copy()
        except ValueError:
            raise ShapeMismatch(
                f"target for {prompt!r} has shape {target.shape}, not broadcastable to {shape}"
            ) from None


def hash_pattern_target(prompt: str, shape: tuple[int, ...]) -> np.ndarray:
    """Smooth deterministic latent derived from the prompt text.

    Default target for ad-hoc prompts on the toy backend (CLI demo runs),
    so unregistered prompts still produce a stable, prompt-dependent image.
    """
    rng = np.random.default_rng(_seed_from("pattern", prompt))
    c, h, w = shape[0], shape[-2], shape[-1]
    yy = np.linspace(0.0, 2.0 * np.pi, h)[:, None]
    xx = np.linspace(0.0, 2.0 * np.pi, w)[None, :]
    out = np.empty(shape, dtype=np.float64)
    for ch in range(c):
        fy, fx = rng.integers(1, 4, size=2)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        out[ch] = 0.6 * np.sin(fy * yy + phase) * np.cos(fx * xx)
    return out


def toy_denoiser_predict(
    x_t: np.ndarray, t: int, prompt: str, world: ToyWorld, s: Schedule
) -> np.ndarray:
    """eps = (x_t - sqrt(a_t) * target) / sqrt(1 - a_t).

    Algebraic inverse of the closed-form noising: plugging this eps into
    the clean-latent estimate returns target exactly, for any x_t.
    """
    x_t = np.asarray(x_t, dtype=np.float64)
    target = world.target(prompt, x_t.shape)
    a = s.alpha_bar_at(t)
    if a >= 1.0:
        raise BackendFailure(f"analytic noise prediction undefined at t={t} (no noise present)")
    return (x_t - np.sqrt(a) * target) / np.sqrt(1.0 - a)


@dataclass
class DenoiserCall:
    """One recorded toy-denoiser invocation, for call-pattern assertions."""

    t: int
    prompt: str
    conditional: bool
    inpaint_mask: np.ndarray | None = None

    @property
    def mask_all_ones(self) -> bool | None:
        if self.inpaint_mask is None:
            return None
        return bool((self.inpaint_mask == 1).all())


class _SyntheticAttention:
    """Emits deterministic pre-softmax score tensors at three resolutions.

    The toy denoisers have no learned attention, but the surgery hooks
    still need realistic call sites: per-timestep scores at the latent
    resolution and two coarser levels, two heads each, on both guidance
    branches. Scores depend only on (t, resolution, branch, layer), so
    reruns see identical inputs. Hook return values are accepted and
    discarded; the analytic noise prediction stays exact.
    """

    def __init__(self, heads: int = 2):
        self.heads = heads

    def run(self, shape, t, text, conditional, hook) -> None:
        if hook is None:
            return
        h, w = shape[-2], shape[-1]
        n_tokens = text.tokens.shape[0]
        for level, name in enumerate(("in", "mid", "deep")):
            lh, lw = max(1, h >> level), max(1, w >> level)
            site = AttentionSite(t=t, h=lh, w=lw, conditional=conditional, layer=name)
            rng = np.random.default_rng(_seed_from("attn", t, lh, lw, conditional, name))
            scores = rng.standard_normal((self.heads, lh * lw, n_tokens))
            hook(scores, site)


class ToyDenoiser:
    """Analytic noise prediction toward the prompt's registered target."""

    concurrent_safe = True

    def __init__(self, world: ToyWorld, schedule: Schedule, heads: int = 2, record_calls: bool = False):
        self.world = world
        self.schedule = schedule
        self.attention = _SyntheticAttention(heads)
        self.calls: list[DenoiserCall] | None = [] if record_calls else None

    def predict(self, x_t, t, text, *, conditional, attention_hook=None):
        if self.calls is not None:
            self.calls.append(DenoiserCall(t=t, prompt=text.prompt, conditional=conditional))
        self.attention.run(x_t.shape, t, text, conditional, attention_hook)
        return toy_denoiser_predict(x_t, t, text.prompt, self.world, self.schedule)


class ToyInpaintDenoiser:
    """Analytic inpainting variant; conditioning channels are recorded, not used.

    The closed-form target already encodes what the scene should converge
    to, so the masked-image conditioning adds no information here. Calls
    capture the conditioning mask so tests can verify when the pipeline
    switches it to all-ones.
    """

    concurrent_safe = True

    def __init__(self, world: ToyWorld, schedule: Schedule, heads: int = 2, record_calls: bool = False):
        self.world = world
        self.schedule = schedule
        self.attention = _SyntheticAttention(heads)
        self.calls: list[DenoiserCall] | None = [] if record_calls else None

    def predict(self, x_t, t, text, *, known_code, inpaint_mask, conditional, attention_hook=None):
        if known_code.shape != x_t.shape:
            raise ShapeMismatch(f"known_code {known_code.shape} vs latent {x_t.shape}")
        if inpaint_mask.shape != x_t.shape[-2:]:
            raise ShapeMismatch(f"inpaint_mask {inpaint_mask.shape} vs latent spatial {x_t.shape[-2:]}")
        if self.calls is not None:
            self.calls.append(
                DenoiserCall(
                    t=t,
                    prompt=text.prompt,
                    conditional=conditional,
                    inpaint_mask=np.array(inpaint_mask, dtype=np.uint8),
                )
            )
        self.attention.run(x_t.shape, t, text, conditional, attention_hook)
        return toy_denoiser_predict(x_t, t, text.prompt, self.world, self.schedule)


class ToyTextEncoder:
    """Whitespace tokenizer with hash-derived per-token vectors.

    Layout: [start-of-text, word..., end-of-text]; no padding. Identical
    words map to identical vectors, so embeddings are deterministic and
    prompt equality is embedding equality.
    """

    concurrent_safe = True

    def __init__(self, dim: int = 16):
        self.dim = dim

    def _vector(self, token: str) -> np.ndarray:
        rng = np.random.default_rng(_seed_from("token", token))
        return rng.standard_normal(self.dim)

    def encode(self, text: str) -> TextEmbedding:
        words = text.split()
        names = ["<sot>"] + words + ["<eot>"]
        tokens = np.stack([self._vector(n) for n in names])
        return TextEmbedding(tokens=tokens, eot_index=len(names) - 1, prompt=text)


class IdentityCodec:
    """Latent space == pixel space, channels moved first. Round-trip exact."""

    concurrent_safe = True
    factor = 1

    def encode(self, image: np.ndarray) -> np.ndarray:
        image = np.asarray(image, dtype=np.float64)
        if image.ndim != 3:
            raise ShapeMismatch(f"expected (H, W, C) image, got {image.shape}")
        return np.ascontiguousarray(image.transpose(2, 0, 1))

    def decode(self, latent: np.ndarray) -> np.ndarray:
        latent = np.asarray(latent, dtype=np.float64)
        if latent.ndim != 3:
            raise ShapeMismatch(f"expected (C, H, W) latent, got {latent.shape}")
        return np.ascontiguousarray(latent.transpose(1, 2, 0))


class PoolingCodec:
    """Block-average downscale codec exercising image-res != latent-res paths.

    encode averages factor x factor pixel blocks per channel; decode
    repeats latent cells back up. Round-trip is exact only on images that
    are constant within each block; measured, never assumed, elsewhere.
    """

    concurrent_safe = True

    def __init__(self, factor: int = 8):
        if factor < 1:
            raise ShapeMismatch(f"factor must be >= 1, got {factor}")
        self.factor = factor

    def encode(self, image: np.ndarray) -> np.ndarray:
        image = np.asarray(image, dtype=np.float64)
        h, w, c = image.shape
        f = self.factor
        if h % f or w % f:
            raise ShapeMismatch(f"image dims {h}x{w} not divisible by factor {f}")
        blocks = image.reshape(h // f, f, w // f, f, c).mean(axis=(1, 3))
        return np.ascontiguousarray(blocks.transpose(2, 0, 1))

    def decode(self, latent: np.ndarray) -> np.ndarray:
        latent = np.asarray(latent, dtype=np.float64)
        up = np.kron(latent, np.ones((1, self.factor, self.factor)))
        return np.ascontiguousarray(up.transpose(1, 2, 0))


class BrightnessSegmenter:
    """Box-prompted mock segmenter: pixels brighter than a threshold, inside the box."""

    concurrent_safe = True

    def __init__(self, threshold: float = 0.0):
        self.threshold = threshold

    def segment(self, image: np.ndarray, box: BBox) -> list[tuple[np.ndarray, float]]:
        image = np.asarray(image, dtype=np.float64)
        bright = image.mean(axis=2) > self.threshold
        mask = np.zeros(image.shape[:2], dtype=np.uint8)
        rows, cols = box.slices
        mask[rows, cols] = bright[rows, cols]
        return [(mask, 1.0)]


class HashEmbedder:
    """Deterministic unit-norm embeddings from content hashes.

    Unrelated inputs land on effectively random directions; identical
    inputs collide exactly. Good enough to test the metric formulas with
    constructed cosines, useless for semantics, which is the point.
    """

    concurrent_safe = True

    def __init__(self, dim: int = 32):
        self.dim = dim

    def _unit(self, *parts) -> np.ndarray:
        rng = np.random.default_rng(_seed_from(*parts))
        v = rng.standard_normal(self.dim)
        return v / np.linalg.norm(v)

    def embed_image(self, image: np.ndarray) -> np.ndarray:
        data = np.ascontiguousarray(np.asarray(image, dtype=np.float64))
        return self._unit("image", data.shape, hashlib.sha256(data.tobytes()).hexdigest())

    def embed_text(self, text: str) -> np.ndarray:
        return self._unit("text", text)


def toy_backend_set(
    world: ToyWorld,
    schedule: Schedule,
    codec: LatentCodec | None = None,
    record_calls: bool = False,
    segmenter: Segmenter | None = None,
) -> BackendSet:
    """Fully deterministic backend set over one toy world."""
    return BackendSet(
        denoiser=ToyDenoiser(world, schedule, record_calls=record_calls),
        inpaint_denoiser=ToyInpaintDenoiser(world, schedule, record_calls=record_calls),
        text_encoder=ToyTextEncoder(),
        latent_codec=codec if codec is not None else IdentityCodec(),
        segmenter=segmenter if segmenter is not None else BrightnessSegmenter(),
        image_text_embedder=HashEmbedder(),
    )


def resolve_backend_set(
    names: Mapping[str, str], world: ToyWorld, schedule: Schedule
) -> BackendSet:
    """Build a backend set from config-file component names.

    Only the bundled toy components resolve here. Checkpoint references
    are opaque strings for an adapter layer that is not bundled; naming
    one raises immediately rather than producing silent toy output.
    """
    toy = toy_backend_set(world, schedule)
    chosen = {}
    for key, default in (
        ("denoiser", toy.denoiser),
        ("inpaint_denoiser", toy.inpaint_denoiser),
        ("text_encoder", toy.text_encoder),
        ("latent_codec", toy.latent_codec),
        ("segmenter", toy.segmenter),
        ("image_text_embedder", toy.image_text_embedder),
    ):
        name = names.get(key, "toy")
        if name != "toy":
            raise BackendFailure(
                f"no adapter available for {key}={name!r}; only 'toy' is bundled",
                stage="backends",
            )
        chosen[key] = default
    return BackendSet(**chosen)
