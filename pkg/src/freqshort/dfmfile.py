"""Dominant-frequency-map file format.

One file per search run: a text header (magic line + one JSON manifest
line + blank line) followed by each class's mask as bit-packed rows in
class-name order. No timestamps anywhere, so identical runs produce
byte-identical files.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import DataError
from .search import DFMSet
from .spectral import FrequencyMask

__all__ = ["write_dfms", "read_dfms"]

_MAGIC = b"DFMSET 1\n"


def write_dfms(dfms: DFMSet, path) -> None:
    manifest = {
        "classes": list(dfms.class_names),
        "config_hash": dfms.config_hash,
        "coverage": {k: dfms.masks[k].coverage for k in dfms.class_names},
        "final_loss": {k: dfms.final_loss[k] for k in dfms.class_names},
        "height": dfms.height,
        "lineage": {k: dfms.lineage[k] for k in dfms.class_names},
        "seed": dfms.seed,
        "width": dfms.width,
    }
    header = json.dumps(manifest, sort_keys=True, separators=(",", ":"))
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(header.encode())
        fh.write(b"\n\n")
        for name in dfms.class_names:
            bits = dfms.masks[name].bits
            if bits.shape != (dfms.height, dfms.width):
                raise DataError(f"mask for {name!r} has shape {bits.shape}")
            fh.write(np.packbits(bits.flatten()).tobytes())


def read_dfms(path) -> DFMSet:
    path = Path(path)
    if not path.exists():
        raise DataError(f"DFM file not found: {path}")
    raw = path.read_bytes()
    if not raw.startswith(_MAGIC):
        raise DataError(f"{path} is not a DFM set file")
    body = raw[len(_MAGIC):]
    sep = body.find(b"\n\n")
    if sep < 0:
        raise DataError(f"{path}: missing header terminator")
    try:
        manifest = json.loads(body[:sep].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataError(f"{path}: bad manifest: {exc}") from exc

    height, width = int(manifest["height"]), int(manifest["width"])
    classes = tuple(manifest["classes"])
    packed = body[sep + 2:]
    bytes_per_mask = (height * width + 7) // 8
    if len(packed) != bytes_per_mask * len(classes):
        raise DataError(
            f"{path}: expected {bytes_per_mask * len(classes)} mask bytes, "
            f"found {len(packed)}"
        )
    masks = {}
    for i, name in enumerate(classes):
        chunk = packed[i * bytes_per_mask:(i + 1) * bytes_per_mask]
        bits = np.unpackbits(np.frombuffer(chunk, dtype=np.uint8))[: height * width]
        masks[name] = FrequencyMask(bits.astype(bool).reshape(height, width))
    return DFMSet(
        class_names=classes,
        height=height,
        width=width,
        masks=masks,
        final_loss={k: float(v) for k, v in manifest["final_loss"].items()},
        lineage={k: list(v) for k, v in manifest["lineage"].items()},
        config_hash=str(manifest["config_hash"]),
        seed=int(manifest["seed"]),
    )
