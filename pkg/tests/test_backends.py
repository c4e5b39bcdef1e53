"""Toy/mock backends: analytic denoiser, codecs, encoders, hook plumbing.

The analytic denoiser is checked algebraically: feeding it a latent on
the closed-form noising path of its registered target must return the
exact noise used to build that latent, and a sampler chain driven by it
must keep the clean-latent prediction pinned to the target.
"""

from __future__ import annotations

import numpy as np
import pytest

from layoutgen.backends import (
    AttentionSite,
    BrightnessSegmenter,
    HashEmbedder,
    IdentityCodec,
    PoolingCodec,
    TextEmbedding,
    ToyDenoiser,
    ToyInpaintDenoiser,
    ToyTextEncoder,
    ToyWorld,
    hash_pattern_target,
    resolve_backend_set,
    toy_backend_set,
    toy_denoiser_predict,
)
from layoutgen.diffusion import forward_noise, predict_x0
from layoutgen.errors import BackendFailure, ShapeMismatch, UnknownPrompt
from layoutgen.layout import BBox

from .conftest import rect_mask


class TestToyWorld:
    def test_registered_target_broadcasts(self):
        world = ToyWorld()
        world.register("sky", 0.25)
        t = world.target("sky", (3, 4, 4))
        assert t.shape == (3, 4, 4)
        assert (t == 0.25).all()

    def test_full_array_target_returned_as_is(self):
        world = ToyWorld()
        grad = np.linspace(-1, 1, 8).reshape(2, 2, 2)
        world.register("grad", grad)
        t = world.target("grad", (2, 2, 2))
        assert np.array_equal(t, grad)

    def test_callable_default_receives_prompt_and_shape(self):
        calls = []

        def default(prompt, shape):
            calls.append((prompt, shape))
            return np.zeros(shape)

        world = ToyWorld(default_target=default)
        world.target("unseen", (1, 2, 2))
        assert calls == [("unseen", (1, 2, 2))]

    def test_unknown_prompt_raises(self):
        with pytest.raises(UnknownPrompt):
            ToyWorld().target("nope", (1, 2, 2))

    def test_default_target_fallback(self):
        world = ToyWorld(default_target=hash_pattern_target)
        t = world.target("anything", (3, 8, 8))
        assert t.shape == (3, 8, 8)
        assert np.abs(t).max() <= 1.0

    def test_hash_pattern_deterministic_and_prompt_sensitive(self):
        a = hash_pattern_target("a cat", (3, 8, 8))
        b = hash_pattern_target("a cat", (3, 8, 8))
        c = hash_pattern_target("a dog", (3, 8, 8))
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_bad_broadcast_rejected(self):
        world = ToyWorld()
        world.register("row", np.zeros(5))
        with pytest.raises(ShapeMismatch):
            world.target("row", (3, 4, 4))


class TestAnalyticDenoiser:
    def test_recovers_exact_noise_on_forward_path(self, schedule):
        world = ToyWorld()
        rng = np.random.default_rng(1)
        target = rng.uniform(-1, 1, size=(3, 6, 6))
        world.register("obj", target)
        eps = rng.standard_normal((3, 6, 6))
        for t in (1000, 800, 333, 1):
            x_t = forward_noise(target, t, eps, schedule)
            got = toy_denoiser_predict(x_t, t, "obj", world, schedule)
            assert np.abs(got - eps).max() < 1e-9

    def test_x0_prediction_is_pinned_to_target(self, schedule):
        world = ToyWorld()
        rng = np.random.default_rng(2)
        target = rng.uniform(-1, 1, size=(2, 4, 4))
        world.register("obj", target)
        x = rng.standard_normal((2, 4, 4))  # arbitrary latent, not on the path
        eps = toy_denoiser_predict(x, 700, "obj", world, schedule)
        assert np.abs(predict_x0(x, eps, 700, schedule) - target).max() < 1e-9

    def test_clean_timestep_rejected(self, schedule):
        world = ToyWorld()
        world.register("obj", 0.0)
        with pytest.raises(BackendFailure):
            toy_denoiser_predict(np.zeros((1, 2, 2)), 0, "obj", world, schedule)


class TestToyDenoiserHooks:
    def _embedding(self):
        return ToyTextEncoder().encode("a small cat")

    def test_hook_called_once_per_level(self, schedule):
        world = ToyWorld()
        world.register("a small cat", 0.5)
        den = ToyDenoiser(world, schedule)
        sites = []

        def hook(scores, site):
            sites.append(site)
            return scores

        den.predict(np.zeros((3, 16, 16)), 500, self._embedding(), conditional=True, attention_hook=hook)
        assert [(s.h, s.w) for s in sites] == [(16, 16), (8, 8), (4, 4)]
        assert all(s.t == 500 and s.conditional for s in sites)
        assert [s.layer for s in sites] == ["in", "mid", "deep"]

    def test_scores_deterministic_per_site(self, schedule):
        world = ToyWorld()
        world.register("a small cat", 0.5)
        den = ToyDenoiser(world, schedule)
        seen = {}

        def grab(scores, site):
            seen.setdefault((site.layer, site.conditional), []).append(scores.copy())
            return scores

        emb = self._embedding()
        for _ in range(2):
            den.predict(np.zeros((3, 8, 8)), 440, emb, conditional=True, attention_hook=grab)
        for copies in seen.values():
            assert np.array_equal(copies[0], copies[1])

    def test_hook_output_does_not_change_eps(self, schedule):
        world = ToyWorld()
        world.register("a small cat", 0.5)
        den = ToyDenoiser(world, schedule)
        emb = self._embedding()
        x = np.random.default_rng(3).standard_normal((3, 8, 8))
        plain = den.predict(x, 440, emb, conditional=True)
        hooked = den.predict(
            x, 440, emb, conditional=True, attention_hook=lambda s, site: s * 100.0
        )
        assert np.array_equal(plain, hooked)

    def test_recorded_calls(self, schedule):
        world = ToyWorld()
        world.register("a small cat", 0.5)
        den = ToyDenoiser(world, schedule, record_calls=True)
        emb = self._embedding()
        den.predict(np.zeros((3, 4, 4)), 600, emb, conditional=True)
        den.predict(np.zeros((3, 4, 4)), 580, emb, conditional=False)
        assert [(c.t, c.conditional) for c in den.calls] == [(600, True), (580, False)]

    def test_inpaint_denoiser_records_mask_state(self, schedule):
        world = ToyWorld()
        world.register("a small cat", 0.5)
        den = ToyInpaintDenoiser(world, schedule, record_calls=True)
        emb = self._embedding()
        known = np.zeros((3, 4, 4))
        partial = rect_mask(4, 4, 0, 2, 0, 4)
        den.predict(np.zeros((3, 4, 4)), 600, emb, known_code=known, inpaint_mask=partial, conditional=True)
        den.predict(
            np.zeros((3, 4, 4)), 90, emb,
            known_code=known, inpaint_mask=np.ones((4, 4), dtype=np.uint8), conditional=True,
        )
        assert [c.mask_all_ones for c in den.calls] == [False, True]

    def test_inpaint_denoiser_validates_shapes(self, schedule):
        world = ToyWorld()
        world.register("a small cat", 0.5)
        den = ToyInpaintDenoiser(world, schedule)
        emb = self._embedding()
        with pytest.raises(ShapeMismatch):
            den.predict(
                np.zeros((3, 4, 4)), 600, emb,
                known_code=np.zeros((3, 5, 5)),
                inpaint_mask=np.ones((4, 4), dtype=np.uint8),
                conditional=True,
            )


class TestTextEncoder:
    def test_token_layout(self):
        emb = ToyTextEncoder().encode("a red fox")
        assert emb.sot_index == 0
        assert emb.eot_index == 4  # <sot>, a, red, fox, <eot>
        assert emb.tokens.shape[0] == 5
        assert emb.prompt == "a red fox"

    def test_empty_prompt_has_two_tokens(self):
        emb = ToyTextEncoder().encode("")
        assert emb.eot_index == 1
        assert emb.tokens.shape[0] == 2

    def test_deterministic(self):
        a = ToyTextEncoder().encode("same words")
        b = ToyTextEncoder().encode("same words")
        assert np.array_equal(a.tokens, b.tokens)

    def test_embedding_orders_validated(self):
        with pytest.raises(BackendFailure):
            TextEmbedding(tokens=np.zeros((3, 4)), eot_index=0, prompt="x")


class TestCodecs:
    def test_identity_round_trip_exact(self):
        rng = np.random.default_rng(4)
        image = rng.uniform(-1, 1, size=(6, 8, 3))
        codec = IdentityCodec()
        latent = codec.encode(image)
        assert latent.shape == (3, 6, 8)
        assert codec.factor == 1
        assert np.array_equal(codec.decode(latent), image)

    def test_pooling_round_trip_exact_on_block_constant(self):
        codec = PoolingCodec(factor=4)
        coarse = np.random.default_rng(5).uniform(-1, 1, size=(2, 3, 3))  # (h, w, C)
        image = np.kron(coarse, np.ones((4, 4, 1)))  # upsample each 4x4 block
        assert image.shape == (8, 12, 3)
        latent = codec.encode(image)
        assert latent.shape == (3, 2, 3)
        assert np.allclose(codec.decode(latent), image, atol=1e-12)

    def test_pooling_requires_divisible_dims(self):
        with pytest.raises(ShapeMismatch):
            PoolingCodec(factor=8).encode(np.zeros((12, 16, 3)))


class TestSegmenterAndEmbedder:
    def test_brightness_segmenter_thresholds_inside_box(self):
        image = np.full((8, 8, 3), -1.0)
        image[2:5, 2:5] = 0.8
        image[6, 6] = 0.9  # bright but outside the box
        box = BBox(x=1, y=1, w=5, h=5)
        candidates = BrightnessSegmenter().segment(image, box)
        assert len(candidates) == 1
        mask, conf = candidates[0]
        assert conf == 1.0
        assert np.array_equal(mask, rect_mask(8, 8, 2, 5, 2, 5))

    def test_hash_embedder_unit_norm_and_deterministic(self):
        emb = HashEmbedder()
        v1 = emb.embed_text("hello")
        v2 = emb.embed_text("hello")
        v3 = emb.embed_text("other")
        assert np.array_equal(v1, v2)
        assert not np.array_equal(v1, v3)
        assert np.linalg.norm(v1) == pytest.approx(1.0, abs=1e-9)
        image = np.random.default_rng(6).uniform(-1, 1, size=(4, 4, 3))
        iv = emb.embed_image(image)
        assert np.linalg.norm(iv) == pytest.approx(1.0, abs=1e-9)


class TestBackendSet:
    def test_toy_set_is_concurrent_safe(self, schedule):
        backends = toy_backend_set(ToyWorld(default_target=0.0), schedule)
        assert backends.concurrent_safe

    def test_resolver_accepts_only_known_names(self, schedule):
        world = ToyWorld(default_target=0.0)
        names = {k: "toy" for k in (
            "denoiser", "inpaint_denoiser", "text_encoder", "latent_codec", "segmenter",
            "image_text_embedder",
        )}
        backends = resolve_backend_set(names, world, schedule)
        assert backends.denoiser is not None
        with pytest.raises(BackendFailure) as exc:
            resolve_backend_set({**names, "denoiser": "sd15-checkpoint"}, world, schedule)
        assert exc.value.stage == "backends"
