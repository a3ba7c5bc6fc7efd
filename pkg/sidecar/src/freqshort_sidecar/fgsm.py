"""Offline sign-gradient adversarial set generation.

Reads a folder-per-class image tree, perturbs every image by
``epsilon * sign(d loss / d x)`` in raw [0, 1] pixel space, clips, and
writes a mirrored tree. The output is an ordinary dataset consumable by any
folder loader; nothing adversarial is ever served live.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

_IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg"}


def _load_image(path: Path, channels: int) -> np.ndarray:
    try:
        with Image.open(path) as img:
            img = img.convert("L" if channels == 1 else "RGB")
            arr = np.asarray(img, dtype=np.float32) / 255.0
    except (UnidentifiedImageError, OSError) as exc:
        raise ValueError(f"cannot decode image file {path}: {exc}") from exc
    return arr[np.newaxis] if arr.ndim == 2 else arr.transpose(2, 0, 1)


def _save_image(path: Path, array: np.ndarray) -> None:
    quantized = np.round(np.clip(array, 0.0, 1.0) * 255.0).astype(np.uint8)
    if quantized.shape[0] == 1:
        Image.fromarray(quantized[0], mode="L").save(path)
    else:
        Image.fromarray(quantized.transpose(1, 2, 0), mode="RGB").save(path)


def generate_fgsm(model, dataset_dir, out_dir, epsilon: float = 4 / 255,
                  batch_size: int = 64) -> int:
    """Write the adversarial tree; returns the number of images written.

    Class indices follow the lexicographic order of the class directories,
    mirroring how folder datasets are loaded everywhere else.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    if not hasattr(model, "loss_gradient"):
        raise ValueError(f"{type(model).__name__} exposes no gradients")
    root = Path(dataset_dir)
    out = Path(out_dir)
    class_dirs = sorted(d for d in root.iterdir() if d.is_dir())
    if not class_dirs:
        raise ValueError(f"no class subdirectories under {root}")
    channels = model.input_shape[0]

    written = 0
    for label, class_dir in enumerate(class_dirs):
        files = sorted(
            f for f in class_dir.iterdir()
            if f.is_file() and f.suffix.lower() in _IMAGE_SUFFIXES
        )
        (out / class_dir.name).mkdir(parents=True, exist_ok=True)
        for start in range(0, len(files), batch_size):
            chunk = files[start:start + batch_size]
            batch = np.stack([_load_image(f, channels) for f in chunk])
            labels = np.full(len(chunk), label, dtype=np.int64)
            grad = model.loss_gradient(batch, labels)
            adversarial = np.clip(batch + epsilon * np.sign(grad), 0.0, 1.0)
            for f, image in zip(chunk, adversarial):
                _save_image(out / class_dir.name / f.name, image)
                written += 1
    return written
