"""Model wrappers behind the serving protocol.

A model spec is a small JSON file naming the architecture kind, the weights
path and the normalization recipe:

    {"kind": "linear-npz", "weights": "reference.npz",
     "normalization": {"mean": [0.5], "std": [0.25]}}

    {"kind": "torchscript", "path": "model.pt", "input_shape": [3, 224, 224],
     "normalization": null}

Wrappers receive raw [0, 1] float32 tensors from the wire and apply their
own normalization before the network. The linear-npz wrapper computes in
float32 with a fixed operation order ((x - mean) / std, flatten, matmul,
add bias), so a client recomputing the same weights locally gets
bit-identical logits.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np


class ModelSpecError(ValueError):
    pass


class LinearNpzModel:
    """Pixel-linear classifier loaded from an .npz weights file.

    Expects arrays ``weights`` (flat_dim x classes, float32), ``bias``
    (classes, float32) and ``input_shape`` (3 ints). Gradients are analytic,
    so adversarial generation needs no autograd.
    """

    def __init__(self, weights, bias, input_shape, normalization=None):
        self.weights = np.asarray(weights, dtype=np.float32)
        self.bias = np.asarray(bias, dtype=np.float32)
        self.input_shape = tuple(int(v) for v in input_shape)
        self.normalization = normalization
        flat = int(np.prod(self.input_shape))
        if self.weights.shape != (flat, self.bias.shape[0]):
            raise ModelSpecError(
                f"weights shape {self.weights.shape} does not match input "
                f"shape {self.input_shape} and bias {self.bias.shape}"
            )

    @classmethod
    def from_npz(cls, path, normalization=None) -> "LinearNpzModel":
        data = np.load(path, allow_pickle=False)
        try:
            return cls(data["weights"], data["bias"], data["input_shape"], normalization)
        except KeyError as exc:
            raise ModelSpecError(f"weights file {path} misses array {exc}") from exc

    @property
    def class_count(self) -> int:
        return self.bias.shape[0]

    def _normalize(self, x: np.ndarray) -> np.ndarray:
        if self.normalization is None:
            return x
        mean, std = self.normalization
        mean = np.asarray(mean, dtype=np.float32).reshape(1, -1, 1, 1)
        std = np.asarray(std, dtype=np.float32).reshape(1, -1, 1, 1)
        return (x - mean) / std

    def predict(self, batch: np.ndarray) -> np.ndarray:
        x = np.asarray(batch, dtype=np.float32)
        if tuple(x.shape[1:]) != self.input_shape:
            raise ValueError(
                f"batch shape {tuple(x.shape[1:])} does not match model input "
                f"shape {self.input_shape}"
            )
        x = self._normalize(x)
        return x.reshape(x.shape[0], -1) @ self.weights + self.bias

    def loss_gradient(self, batch: np.ndarray, labels: np.ndarray) -> np.ndarray:
        """d(mean cross-entropy)/d(input pixels), per image, closed form."""
        x = np.asarray(batch, dtype=np.float32)
        logits = self.predict(x)
        shifted = logits - logits.max(axis=1, keepdims=True)
        probs = np.exp(shifted)
        probs /= probs.sum(axis=1, keepdims=True)
        probs[np.arange(len(labels)), labels] -= 1.0
        flat_grad = probs @ self.weights.T
        grad = flat_grad.reshape(x.shape)
        if self.normalization is not None:
            _, std = self.normalization
            grad = grad / np.asarray(std, dtype=np.float32).reshape(1, -1, 1, 1)
        return grad


class TorchscriptModel:
    """Wrapper around a TorchScript module (lazy torch import)."""

    def __init__(self, path, input_shape, normalization=None):
        try:
            import torch
        except ImportError as exc:  # pragma: no cover - torch is optional
            raise ModelSpecError("torchscript models need the torch extra") from exc
        self._torch = torch
        self.module = torch.jit.load(str(path), map_location="cpu")
        self.module.eval()
        self.input_shape = tuple(int(v) for v in input_shape)
        self.normalization = normalization
        with torch.no_grad():
            probe = torch.zeros((1, *self.input_shape))
            out = self.module(self._norm(probe))
        self.class_count = int(out.shape[1])

    def _norm(self, x):
        if self.normalization is None:
            return x
        mean, std = self.normalization
        torch = self._torch
        mean = torch.tensor(mean, dtype=x.dtype).reshape(1, -1, 1, 1)
        std = torch.tensor(std, dtype=x.dtype).reshape(1, -1, 1, 1)
        return (x - mean) / std

    def predict(self, batch: np.ndarray) -> np.ndarray:
        torch = self._torch
        with torch.no_grad():
            x = torch.from_numpy(np.ascontiguousarray(batch, dtype=np.float32))
            return self.module(self._norm(x)).numpy()

    def loss_gradient(self, batch: np.ndarray, labels: np.ndarray) -> np.ndarray:
        torch = self._torch
        x = torch.from_numpy(np.ascontiguousarray(batch, dtype=np.float32))
        x.requires_grad_(True)
        logits = self.module(self._norm(x))
        loss = torch.nn.functional.cross_entropy(
            logits, torch.from_numpy(np.asarray(labels, dtype=np.int64)), reduction="sum"
        )
        loss.backward()
        return x.grad.numpy()


def _parse_normalization(entry):
    if not entry:
        return None
    return (tuple(float(v) for v in entry["mean"]), tuple(float(v) for v in entry["std"]))


def load_model_spec(path):
    """Instantiate the wrapper a spec file describes; paths are relative to it."""
    path = Path(path)
    try:
        spec = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ModelSpecError(f"cannot read model spec {path}: {exc}") from exc

    def resolve(p):
        candidate = Path(p)
        return candidate if candidate.is_absolute() else path.parent / candidate

    kind = spec.get("kind")
    norm = _parse_normalization(spec.get("normalization"))
    if kind == "linear-npz":
        return LinearNpzModel.from_npz(resolve(spec["weights"]), norm)
    if kind == "torchscript":
        return TorchscriptModel(resolve(spec["path"]), spec["input_shape"], norm)
    raise ModelSpecError(f"unknown model kind {kind!r} in {path}")
