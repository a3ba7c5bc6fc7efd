import numpy as np
import pytest

from freqshort import (
    ClassifierEndpoint,
    ConfigurationError,
    FrequencyMask,
    NormalizationRecipe,
    SpectralLinearClassifier,
    class_losses,
    class_tpr,
    filter_batch,
    predict_logits,
    reference_pixel_classifier,
)
from freqshort.models import load_endpoint, save_endpoint

from .conftest import brute_spectrum, cosine_grating


def single_bin_model(size, k, klass, row, col, weight=1.0, bias=None):
    weights = np.zeros((k, size, size))
    weights[klass, row, col] = weight
    bias_vec = np.zeros(k) if bias is None else np.asarray(bias, dtype=float)
    return SpectralLinearClassifier(weights, bias_vec)


def make_endpoint(model, channels=1, size=16, **kw):
    return ClassifierEndpoint.from_model(model, (channels, size, size), **kw)


class TestPredictLogits:
    def test_single_bin_linearity(self):
        # weight 1 on one bin for class 0; a grating exciting that bin
        # drives logit_0 positive while every other logit stays at its bias
        size, k = 16, 3
        bias = np.array([0.0, 0.25, -0.5])
        model = single_bin_model(size, k, 0, 8, 8 + 3, bias=bias)
        endpoint = make_endpoint(model, size=size)
        img = cosine_grating(size, size, 0, 3)
        logits = predict_logits(endpoint, img[None])[0]
        assert logits[0] > 0
        assert logits[1] == pytest.approx(0.25)
        assert logits[2] == pytest.approx(-0.5)

    def test_empty_batch(self):
        endpoint = make_endpoint(single_bin_model(16, 3, 0, 8, 9))
        logits = predict_logits(endpoint, np.zeros((0, 1, 16, 16)))
        assert logits.shape == (0, 3)

    def test_shape_mismatch_is_config_error(self, rng):
        endpoint = make_endpoint(single_bin_model(16, 3, 0, 8, 9))
        with pytest.raises(ConfigurationError):
            predict_logits(endpoint, rng.random((2, 1, 8, 8)))

    def test_counter_tracks_images(self, rng):
        endpoint = make_endpoint(single_bin_model(16, 3, 0, 8, 9))
        predict_logits(endpoint, rng.random((5, 1, 16, 16)))
        predict_logits(endpoint, rng.random((3, 1, 16, 16)))
        assert endpoint.images_processed == 8

    def test_normalization_applied(self, rng):
        size = 16
        model = single_bin_model(size, 2, 0, 8, 9)
        recipe = NormalizationRecipe(mean=(0.5,), std=(0.25,))
        plain = make_endpoint(model, size=size)
        normed = make_endpoint(model, size=size, normalization=recipe)
        img = rng.random((1, 1, size, size))
        manual = (img - 0.5) / 0.25
        assert np.allclose(
            normed.predict_logits(img), plain.predict_logits(manual)
        )


class TestClassLosses:
    def test_uniform_logits_give_log_k(self, rng):
        k, size = 10, 16
        model = SpectralLinearClassifier(np.zeros((k, size, size)), np.zeros(k))
        endpoint = make_endpoint(model, size=size)
        images = rng.random((20, 1, size, size))
        labels = rng.integers(0, k, size=20)
        losses = class_losses(endpoint, images, labels)
        present = ~np.isnan(losses)
        assert np.allclose(losses[present], np.log(10))

    def test_perfect_classifier_loss_tends_to_zero(self):
        size = 16
        model = single_bin_model(size, 2, 0, 8, 11, weight=1e4)
        endpoint = make_endpoint(model, size=size)
        img = cosine_grating(size, size, 0, 3)
        losses = class_losses(endpoint, img[None], np.array([0]))
        assert losses[0] < 1e-6

    def test_absent_class_is_nan_not_zero(self, rng):
        endpoint = make_endpoint(single_bin_model(16, 3, 0, 8, 9))
        losses = class_losses(endpoint, rng.random((4, 1, 16, 16)), np.array([0, 0, 2, 2]))
        assert np.isnan(losses[1])
        assert not np.isnan(losses[0]) and not np.isnan(losses[2])

    def test_all_zero_mask_is_legal(self, rng):
        endpoint = make_endpoint(single_bin_model(16, 2, 0, 8, 9))
        losses = class_losses(
            endpoint, rng.random((4, 1, 16, 16)), np.array([0, 0, 1, 1]),
            mask=FrequencyMask.empty(16, 16),
        )
        assert np.isfinite(losses).all()

    def test_masked_equals_prefiltered(self, rng):
        size = 16
        endpoint = make_endpoint(single_bin_model(size, 2, 0, 8, 10))
        images = rng.random((6, 1, size, size))
        labels = rng.integers(0, 2, size=6)
        bits = rng.random((size, size)) < 0.4
        mask = FrequencyMask(bits)
        via_mask = class_losses(endpoint, images, labels, mask=mask)
        prefiltered = class_losses(endpoint, filter_batch(images, mask), labels)
        assert np.abs(via_mask - prefiltered).max() < 1e-6

    def test_matches_brute_force_recompute(self, rng):
        # independent path: explicit DFT magnitudes + dot products + log-softmax
        size, k = 16, 3
        weights = rng.random((k, size, size))
        bias = rng.random(k)
        model = SpectralLinearClassifier(weights, bias)
        endpoint = make_endpoint(model, size=size)
        images = rng.random((9, 1, size, size))
        labels = rng.integers(0, k, size=9)
        bits = rng.random((size, size)) < 0.5
        mask = FrequencyMask(bits)

        got = class_losses(endpoint, images, labels, mask=mask)

        per_image = []
        for img in images:
            filtered = np.stack([
                np.fft.ifft2(np.fft.ifftshift(brute_spectrum(ch) * bits)).real
                for ch in img
            ])
            feats = np.abs(brute_spectrum(filtered[0]))
            logits = np.array([(weights[c] * feats).sum() + bias[c] for c in range(k)])
            shifted = logits - logits.max()
            per_image.append(shifted - np.log(np.exp(shifted).sum()))
        per_image = np.stack(per_image)
        expected = np.full(k, np.nan)
        for c in range(k):
            sel = labels == c
            if sel.any():
                expected[c] = (-per_image[sel, c]).mean()
        assert np.allclose(got, expected, equal_nan=True, atol=1e-9)


class TestClassTpr:
    def test_constant_class_zero_predictor(self, rng):
        size, k = 16, 4
        model = SpectralLinearClassifier(
            np.zeros((k, size, size)), np.array([1.0, 0.0, 0.0, 0.0])
        )
        endpoint = make_endpoint(model, size=size)
        images = rng.random((8, 1, size, size))
        labels = np.array([0, 1, 2, 3] * 2)
        tpr = class_tpr(endpoint, images, labels)
        assert tpr[0] == 1.0
        assert (tpr[1:] == 0.0).all()

    def test_absent_class_is_nan(self, rng):
        endpoint = make_endpoint(single_bin_model(16, 3, 0, 8, 9))
        tpr = class_tpr(endpoint, rng.random((2, 1, 16, 16)), np.array([0, 0]))
        assert np.isnan(tpr[1]) and np.isnan(tpr[2])

    def test_argmax_invariant_to_constant_logit_shift(self, rng):
        size, k = 16, 3
        weights = rng.random((k, size, size))
        bias = rng.random(k)
        images = rng.random((10, 1, size, size))
        labels = rng.integers(0, k, size=10)
        base = class_tpr(
            make_endpoint(SpectralLinearClassifier(weights, bias), size=size),
            images, labels,
        )
        shifted = class_tpr(
            make_endpoint(SpectralLinearClassifier(weights, bias + 17.0), size=size),
            images, labels,
        )
        assert np.allclose(base, shifted, equal_nan=True)


@pytest.fixture(scope="module")
def planted():
    from freqshort import build_planted_oracle, generate_planted, make_band_spec

    spec = make_band_spec(num_classes=3, train_per_class=40, test_per_class=40, seed=11)
    train, test, truth = generate_planted(spec)
    endpoint = build_planted_oracle(spec, train)
    return spec, test, truth, endpoint


class TestPlantedOracleBehavior:
    def test_band_mask_gives_high_filtered_tpr(self, planted):
        spec, test, truth, endpoint = planted
        for c, name in enumerate(test.class_names):
            sel = test.class_indices(c)
            tpr = class_tpr(endpoint, test.images[sel], test.labels[sel], mask=truth[name])
            assert tpr[c] >= 0.99

    def test_monotone_evidence_under_half_ablation(self, planted, rng):
        spec, test, truth, endpoint = planted
        name = test.class_names[0]
        sel = test.class_indices(0)
        images, labels = test.images[sel], test.labels[sel]
        full_band = class_tpr(endpoint, images, labels, mask=truth[name])[0]
        band_bins = np.argwhere(truth[name].bits)
        for _ in range(50):
            keep = rng.random(len(band_bins)) < 0.5
            if keep.all():  # need a mask that actually misses half the band
                keep[: len(keep) // 2] = False
            bits = truth[name].bits.copy()
            for r, c in band_bins[~keep]:
                bits[r, c] = False
            ablated = class_tpr(endpoint, images, labels, mask=FrequencyMask(bits))[0]
            assert full_band >= ablated - 1e-12


class TestEndpointSerialization:
    def test_spectral_round_trip(self, tmp_path, rng):
        model = SpectralLinearClassifier(rng.random((3, 16, 16)), rng.random(3))
        endpoint = make_endpoint(model, size=16)
        save_endpoint(endpoint, tmp_path / "m.npz")
        loaded = load_endpoint(tmp_path / "m.npz")
        batch = rng.random((4, 1, 16, 16))
        assert np.allclose(loaded.predict_logits(batch), endpoint.predict_logits(batch))

    def test_pixel_reference_round_trip(self, tmp_path, rng):
        model = reference_pixel_classifier((1, 8, 8), 5)
        endpoint = ClassifierEndpoint.from_model(model, (1, 8, 8))
        save_endpoint(endpoint, tmp_path / "ref.npz")
        loaded = load_endpoint(tmp_path / "ref.npz")
        batch = rng.random((3, 1, 8, 8)).astype(np.float32)
        assert np.array_equal(
            loaded.predict_logits(batch), endpoint.predict_logits(batch)
        )

    def test_reference_weights_are_deterministic(self):
        a = reference_pixel_classifier((3, 8, 8), 4, seed=7)
        b = reference_pixel_classifier((3, 8, 8), 4, seed=7)
        assert np.array_equal(a.weights, b.weights)
        assert np.array_equal(a.bias, b.bias)
