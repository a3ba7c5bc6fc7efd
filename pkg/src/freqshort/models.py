"""Classifier endpoints: built-in analytic models and a remote client.

An endpoint bundles a backend with its class count, expected input shape and
optional per-channel normalization recipe, and counts every image it scores
so evaluation budgets can be audited. Built-in backends are pure functions
of their weights; the remote backend speaks the binary inference protocol
(see :mod:`freqshort.protocol`), in which case normalization is applied on
the serving side and the endpoint recipe stays empty.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DataError
from .spectral import FrequencyMask, filter_batch, forward_spectrum

__all__ = [
    "NormalizationRecipe",
    "SpectralLinearClassifier",
    "PixelLinearClassifier",
    "ClassifierEndpoint",
    "predict_logits",
    "class_losses",
    "class_tpr",
    "reference_pixel_classifier",
    "save_endpoint",
    "load_endpoint",
]


@dataclass(frozen=True)
class NormalizationRecipe:
    """Per-channel (x - mean) / std applied after any frequency filtering."""

    mean: tuple[float, ...]
    std: tuple[float, ...]

    def apply(self, batch: np.ndarray) -> np.ndarray:
        mean = np.asarray(self.mean, dtype=batch.dtype).reshape(1, -1, 1, 1)
        std = np.asarray(self.std, dtype=batch.dtype).reshape(1, -1, 1, 1)
        return (batch - mean) / std


class SpectralLinearClassifier:
    """Linear classifier over center-shifted spectrum magnitudes.

    Features are the per-bin magnitudes averaged over channels, so logits
    are linear in each bin's magnitude and zeroing a bin removes its
    contribution exactly. Used as the analytic oracle in tests: its
    frequency reliance is known by construction.
    """

    kind = "spectral-linear"

    def __init__(self, weights: np.ndarray, bias: np.ndarray):
        weights = np.asarray(weights, dtype=np.float64)
        bias = np.asarray(bias, dtype=np.float64)
        if weights.ndim != 3 or bias.ndim != 1 or weights.shape[0] != bias.shape[0]:
            raise ConfigurationError(
                f"weights must be (K, H, W) with bias (K,), got {weights.shape}, {bias.shape}"
            )
        self.weights = weights
        self.bias = bias

    @property
    def class_count(self) -> int:
        return self.weights.shape[0]

    @property
    def spectrum_shape(self) -> tuple[int, int]:
        return self.weights.shape[1:]

    def predict(self, batch: np.ndarray) -> np.ndarray:
        if batch.shape[-2:] != self.spectrum_shape:
            raise ConfigurationError(
                f"input spatial shape {batch.shape[-2:]} does not match weights {self.spectrum_shape}"
            )
        spectra = np.fft.fftshift(np.fft.fft2(batch, axes=(-2, -1)), axes=(-2, -1))
        feats = np.abs(spectra).mean(axis=1)  # (N, H, W)
        return np.einsum("nhw,khw->nk", feats, self.weights) + self.bias


class PixelLinearClassifier:
    """Linear map from flattened pixels to logits, computed in float32.

    Serves as the fixed reference model for remote-protocol cross-checks:
    both this class and a protocol server running from the same weights file
    must produce bit-identical float32 logits.
    """

    kind = "pixel-linear"

    def __init__(self, weights: np.ndarray, bias: np.ndarray,
                 input_shape: tuple[int, int, int],
                 normalization: NormalizationRecipe | None = None):
        self.weights = np.asarray(weights, dtype=np.float32)
        self.bias = np.asarray(bias, dtype=np.float32)
        self.input_shape = tuple(input_shape)
        self.normalization = normalization
        expected = int(np.prod(self.input_shape))
        if self.weights.shape != (expected, self.bias.shape[0]):
            raise ConfigurationError(
                f"weights must be ({expected}, K), got {self.weights.shape}"
            )

    @property
    def class_count(self) -> int:
        return self.bias.shape[0]

    def predict(self, batch: np.ndarray) -> np.ndarray:
        x = np.asarray(batch, dtype=np.float32)
        if self.normalization is not None:
            x = self.normalization.apply(x)
        flat = x.reshape(x.shape[0], -1)
        return flat @ self.weights + self.bias


def reference_pixel_classifier(
    input_shape: tuple[int, int, int], class_count: int, seed: int = 7,
    normalization: NormalizationRecipe | None = None,
) -> PixelLinearClassifier:
    """Deterministic reference weights for protocol conformance checks."""
    dim = int(np.prod(input_shape))
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    weights = (rng.standard_normal((dim, class_count)) / np.sqrt(dim)).astype(np.float32)
    bias = rng.standard_normal(class_count).astype(np.float32)
    return PixelLinearClassifier(weights, bias, input_shape, normalization)


@dataclass
class ClassifierEndpoint:
    """A classifier under analysis, with fixed input shape and eval counter."""

    model: object
    class_count: int
    input_shape: tuple[int, int, int]
    normalization: NormalizationRecipe | None = None
    name: str = "builtin"
    images_processed: int = field(default=0, compare=False)
    _counter_lock: threading.Lock = field(
        default_factory=threading.Lock, repr=False, compare=False
    )

    @classmethod
    def from_model(cls, model, input_shape, normalization=None, name="builtin"):
        return cls(
            model=model,
            class_count=model.class_count,
            input_shape=tuple(input_shape),
            normalization=normalization,
            name=name,
        )

    def predict_logits(self, batch: np.ndarray) -> np.ndarray:
        batch = np.asarray(batch, dtype=np.float64)
        if batch.ndim != 4:
            raise ConfigurationError(f"expected (N, C, H, W), got shape {batch.shape}")
        if batch.shape[0] == 0:
            return np.zeros((0, self.class_count))
        if tuple(batch.shape[1:]) != self.input_shape:
            raise ConfigurationError(
                f"batch shape {tuple(batch.shape[1:])} does not match endpoint "
                f"input shape {self.input_shape}"
            )
        if self.normalization is not None:
            batch = self.normalization.apply(batch)
        logits = np.asarray(self.model.predict(batch), dtype=np.float64)
        with self._counter_lock:  # predict_logits may run on many workers
            self.images_processed += batch.shape[0]
        return logits


def predict_logits(endpoint: ClassifierEndpoint, batch: np.ndarray) -> np.ndarray:
    """Batched logits; deterministic for built-in backends."""
    return endpoint.predict_logits(batch)


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def class_losses(
    endpoint: ClassifierEndpoint,
    images: np.ndarray,
    labels: np.ndarray,
    mask: FrequencyMask | None = None,
) -> np.ndarray:
    """Mean cross-entropy per class; NaN marks classes with no images.

    With a mask, images are frequency-filtered first, then scored through
    the endpoint (which applies its own normalization recipe).
    """
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.shape[0] != images.shape[0]:
        raise DataError("labels must be one class index per image")
    if labels.size and labels.max() >= endpoint.class_count:
        raise DataError(f"label {labels.max()} out of range for K={endpoint.class_count}")
    batch = filter_batch(images, mask) if mask is not None else np.asarray(images, dtype=np.float64)
    logits = endpoint.predict_logits(batch)
    log_probs = _log_softmax(logits)
    per_image = -log_probs[np.arange(labels.size), labels]
    out = np.full(endpoint.class_count, np.nan)
    for c in range(endpoint.class_count):
        sel = labels == c
        if sel.any():
            out[c] = per_image[sel].mean()
    return out


def class_tpr(
    endpoint: ClassifierEndpoint,
    images: np.ndarray,
    labels: np.ndarray,
    mask: FrequencyMask | None = None,
) -> np.ndarray:
    """Per-class true positive rate of argmax predictions; NaN when a class is absent.

    With a mask this is the TPR on frequency-filtered images (filtered with
    the given mask before scoring).
    """
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.shape[0] != images.shape[0]:
        raise DataError("labels must be one class index per image")
    batch = filter_batch(images, mask) if mask is not None else np.asarray(images, dtype=np.float64)
    logits = endpoint.predict_logits(batch)
    preds = logits.argmax(axis=1)
    out = np.full(endpoint.class_count, np.nan)
    for c in range(endpoint.class_count):
        sel = labels == c
        if sel.any():
            out[c] = float((preds[sel] == c).mean())
    return out


def save_endpoint(endpoint: ClassifierEndpoint, path) -> None:
    """Serialize a built-in endpoint (weights + recipe) to an .npz file."""
    model = endpoint.model
    extra = {}
    if endpoint.normalization is not None:
        extra["norm_mean"] = np.asarray(endpoint.normalization.mean)
        extra["norm_std"] = np.asarray(endpoint.normalization.std)
    if isinstance(model, SpectralLinearClassifier):
        np.savez(
            path, kind="spectral-linear", weights=model.weights, bias=model.bias,
            input_shape=np.asarray(endpoint.input_shape), **extra,
        )
    elif isinstance(model, PixelLinearClassifier):
        np.savez(
            path, kind="pixel-linear", weights=model.weights, bias=model.bias,
            input_shape=np.asarray(endpoint.input_shape), **extra,
        )
    else:
        raise ConfigurationError(f"cannot serialize backend {type(model).__name__}")


def load_endpoint(path) -> ClassifierEndpoint:
    """Load a built-in endpoint saved by :func:`save_endpoint`."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"endpoint file not found: {path}")
    data = np.load(path, allow_pickle=False)
    kind = str(data["kind"])
    input_shape = tuple(int(v) for v in data["input_shape"])
    norm = None
    if "norm_mean" in data:
        norm = NormalizationRecipe(
            mean=tuple(float(v) for v in data["norm_mean"]),
            std=tuple(float(v) for v in data["norm_std"]),
        )
    if kind == "spectral-linear":
        model = SpectralLinearClassifier(data["weights"], data["bias"])
    elif kind == "pixel-linear":
        model = PixelLinearClassifier(data["weights"], data["bias"], input_shape)
    else:
        raise DataError(f"unknown endpoint kind {kind!r} in {path}")
    return ClassifierEndpoint.from_model(model, input_shape, norm, name=f"builtin:{path.name}")
