"""Dataset ingestion and the synthetic planted-shortcut generator.

Folder datasets follow the usual one-subdirectory-per-class layout. The
planted generator builds images whose class evidence sits in known,
disjoint, point-symmetric frequency bands, so search results can be scored
against ground truth. Two kinds of planted class exist:

* band classes: all evidence in a small set of spectrum bins (random-phase
  sinusoids on every band bin) — classifiable from a tiny frequency subset;
* level classes: a hi/lo pair sharing one wide region, told apart by total
  energy in that region — the hi class cannot be classified from any small
  frequency subset, which makes it a genuine non-shortcut control.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import ConfigurationError, DataError
from .models import ClassifierEndpoint, SpectralLinearClassifier
from .spectral import FrequencyMask, ImageTensor

logger = logging.getLogger(__name__)

__all__ = [
    "LabeledDataset",
    "PlantedClass",
    "PlantedSpec",
    "load_folder_dataset",
    "save_dataset_tree",
    "generate_planted",
    "texture_variant",
    "rendition_variant",
    "recovery_score",
    "build_planted_oracle",
    "point_mirror",
    "blob_band",
    "annulus_region",
    "make_band_spec",
    "add_level_pair",
    "planted_spec_from_dict",
    "planted_spec_to_dict",
]


# --------------------------------------------------------------------------
# labeled datasets


@dataclass
class LabeledDataset:
    """Uniformly-sized labeled images stacked into one array."""

    class_names: tuple[str, ...]
    images: np.ndarray  # (N, C, H, W), values in [0, 1]
    labels: np.ndarray  # (N,) class indices
    split: str = ""
    source: str = ""

    def __post_init__(self):
        self.class_names = tuple(self.class_names)
        self.images = np.asarray(self.images, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.images.ndim != 4:
            raise DataError(f"images must be (N, C, H, W), got {self.images.shape}")
        if self.labels.shape != (self.images.shape[0],):
            raise DataError("labels must align with images")
        if self.labels.size and self.labels.max() >= len(self.class_names):
            raise DataError("label index out of range of class names")

    @property
    def class_count(self) -> int:
        return len(self.class_names)

    @property
    def image_shape(self) -> tuple[int, int, int]:
        return tuple(self.images.shape[1:])

    def __len__(self) -> int:
        return self.images.shape[0]

    def per_class_counts(self) -> dict[str, int]:
        return {
            name: int((self.labels == i).sum())
            for i, name in enumerate(self.class_names)
        }

    def class_indices(self, class_index: int) -> np.ndarray:
        return np.flatnonzero(self.labels == class_index)

    def subset(self, indices) -> "LabeledDataset":
        idx = np.asarray(indices)
        return LabeledDataset(
            self.class_names, self.images[idx], self.labels[idx],
            split=self.split, source=self.source,
        )

    def image(self, i: int) -> ImageTensor:
        return ImageTensor(self.images[i], label=int(self.labels[i]))


# --------------------------------------------------------------------------
# folder ingestion

_IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg"}


def _decode_image(path: Path, size: tuple[int, int], channel_policy: str) -> np.ndarray:
    try:
        with Image.open(path) as img:
            img = img.convert("L") if channel_policy == "grayscale" else img.convert(
                img.mode if img.mode in ("L", "RGB") else "RGB"
            )
            h, w = size
            if img.size != (w, h):
                # resize the short side to cover, then center-crop
                scale = max(w / img.width, h / img.height)
                new = (max(w, round(img.width * scale)), max(h, round(img.height * scale)))
                img = img.resize(new, Image.BILINEAR)
                left = (img.width - w) // 2
                top = (img.height - h) // 2
                img = img.crop((left, top, left + w, top + h))
            arr = np.asarray(img, dtype=np.float64) / 255.0
    except (UnidentifiedImageError, OSError) as exc:
        raise DataError(f"cannot decode image file {path}: {exc}") from exc
    if arr.ndim == 2:
        arr = arr[np.newaxis]
    else:
        arr = arr.transpose(2, 0, 1)
    if channel_policy == "replicate-to-3" and arr.shape[0] == 1:
        arr = np.repeat(arr, 3, axis=0)
    return arr


def load_folder_dataset(
    path,
    image_size: tuple[int, int],
    channel_policy: str = "replicate-to-3",
    split: str = "",
    write_manifest: bool = True,
) -> LabeledDataset:
    """Load a folder-per-class image tree (PNG/JPEG).

    Class order is the lexicographic subdirectory order. Images are decoded,
    resized/center-cropped to ``image_size`` and scaled to [0, 1]. Empty
    class directories are excluded with a warning; an undecodable file is an
    error naming the file. A manifest (class list, counts, checksum) is
    written beside the tree for cache validation unless disabled.
    """
    if channel_policy not in ("replicate-to-3", "grayscale", "keep"):
        raise ConfigurationError(f"unknown channel policy {channel_policy!r}")
    root = Path(path)
    if not root.is_dir():
        raise DataError(f"dataset directory not found: {root}")
    class_dirs = sorted(d for d in root.iterdir() if d.is_dir())
    if not class_dirs:
        raise DataError(f"no class subdirectories under {root}")

    names, arrays, labels, listing = [], [], [], []
    for class_dir in class_dirs:
        files = sorted(
            f for f in class_dir.iterdir()
            if f.is_file() and f.suffix.lower() in _IMAGE_SUFFIXES
        )
        if not files:
            logger.warning("class directory %s has no images; excluded", class_dir)
            continue
        label = len(names)
        names.append(class_dir.name)
        for f in files:
            arrays.append(_decode_image(f, image_size, channel_policy))
            labels.append(label)
            listing.append(f"{class_dir.name}/{f.name}:{f.stat().st_size}")
    if not names:
        raise DataError(f"no non-empty class directories under {root}")

    channel_counts = {a.shape[0] for a in arrays}
    if len(channel_counts) > 1:
        raise DataError(
            f"mixed channel counts {sorted(channel_counts)} under {root}; "
            "use channel_policy='replicate-to-3' or 'grayscale'"
        )
    ds = LabeledDataset(tuple(names), np.stack(arrays), np.asarray(labels),
                        split=split, source=str(root))
    if write_manifest:
        manifest = {
            "classes": list(ds.class_names),
            "counts": ds.per_class_counts(),
            "checksum": hashlib.sha256("\n".join(listing).encode()).hexdigest(),
            "image_shape": list(ds.image_shape),
        }
        try:
            manifest_path = root.parent / f"{root.name}.manifest.json"
            manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True))
        except OSError as exc:
            logger.warning("could not write dataset manifest: %s", exc)
    return ds


def save_dataset_tree(dataset: LabeledDataset, path) -> None:
    """Write a dataset as a folder-per-class PNG tree (clipped to [0, 1])."""
    root = Path(path)
    for i, name in enumerate(dataset.class_names):
        (root / name).mkdir(parents=True, exist_ok=True)
    counters = [0] * dataset.class_count
    for img, label in zip(dataset.images, dataset.labels):
        pixels = np.clip(img, 0.0, 1.0)
        quantized = np.round(pixels * 255.0).astype(np.uint8)
        if quantized.shape[0] == 1:
            pil = Image.fromarray(quantized[0], mode="L")
        else:
            pil = Image.fromarray(quantized.transpose(1, 2, 0), mode="RGB")
        name = dataset.class_names[label]
        pil.save(root / name / f"{counters[label]:05d}.png")
        counters[label] += 1


# --------------------------------------------------------------------------
# symmetric band helpers


def point_mirror(bits: np.ndarray) -> np.ndarray:
    """Reflect a mask through the center bin: (r, c) -> ((H-r)%H, (W-c)%W)."""
    return np.roll(bits[::-1, ::-1], (1, 1), axis=(0, 1))


def is_point_symmetric(bits: np.ndarray) -> bool:
    return bool(np.array_equal(bits, point_mirror(bits)))


def blob_band(size: int, top: int, left: int, blob: int | tuple[int, int] = 2) -> np.ndarray:
    """A small rectangular block at (top, left) plus its point mirror."""
    blob_h, blob_w = (blob, blob) if isinstance(blob, int) else blob
    bits = np.zeros((size, size), dtype=bool)
    bits[top:top + blob_h, left:left + blob_w] = True
    return bits | point_mirror(bits)


def annulus_region(size: int, inner: float, outer: float,
                   exclude: np.ndarray | None = None) -> np.ndarray:
    """Symmetric annulus inner <= radius <= outer around the center bin."""
    center = size // 2
    yy, xx = np.mgrid[0:size, 0:size]
    radius = np.hypot(yy - center, xx - center)
    bits = (radius >= inner) & (radius <= outer)
    bits[0, :] = False
    bits[:, 0] = False
    if exclude is not None:
        bits &= ~exclude
    return bits & point_mirror(bits)


def _symmetric_pairs(bits: np.ndarray) -> list[tuple[tuple[int, int], tuple[int, int]]]:
    """Conjugate bin pairs of a symmetric mask (self-mirrored bins excluded)."""
    h, w = bits.shape
    pairs = []
    for r, c in zip(*np.nonzero(bits)):
        mr, mc = (h - r) % h, (w - c) % w
        if (r, c) < (mr, mc):
            pairs.append(((int(r), int(c)), (int(mr), int(mc))))
    return pairs


# --------------------------------------------------------------------------
# planted specification


@dataclass(frozen=True)
class PlantedClass:
    """One synthetic class: either a band of bins or a level over a region.

    Level classes also carry a shared carrier: a few fixed bins of constant
    strong amplitude present in every image of the pair. The carrier pins
    the pixel range, so the per-image rescaling to [0, 1] divides hi and lo
    images by the same factor and the level difference survives it. Being
    identical across the pair, the carrier itself separates nothing.
    """

    name: str
    band: np.ndarray | None = None
    level: float | None = None
    region: np.ndarray | None = None
    carrier: np.ndarray | None = None

    @property
    def is_band(self) -> bool:
        return self.band is not None


@dataclass(frozen=True)
class PlantedSpec:
    """Recipe for a planted-shortcut dataset with known ground truth."""

    image_size: int
    classes: tuple[PlantedClass, ...]
    channels: int = 1
    noise_sigma: float = 0.05
    amplitude: tuple[float, float] = (0.5, 1.0)
    train_per_class: int = 200
    test_per_class: int = 200
    seed: int = 7

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(self.classes))
        self.validate()

    def validate(self) -> None:
        size = self.image_size
        if size < 8 or size % 2:
            raise ConfigurationError("image_size must be even and >= 8")
        if self.channels not in (1, 3):
            raise ConfigurationError("channels must be 1 or 3")
        occupied = np.zeros((size, size), dtype=bool)
        owners: list[str] = []
        overlapping: set[str] = set()
        for cls in self.classes:
            if cls.is_band:
                bits = cls.band
            elif cls.level is not None and cls.region is not None:
                bits = cls.region
            else:
                raise ConfigurationError(f"class {cls.name!r}: needs a band or a level+region")
            bits = np.asarray(bits, dtype=bool)
            if bits.shape != (size, size):
                raise ConfigurationError(f"class {cls.name!r}: mask shape {bits.shape}")
            if not bits.any():
                raise ConfigurationError(f"class {cls.name!r}: empty mask")
            if not is_point_symmetric(bits):
                raise ConfigurationError(f"class {cls.name!r}: mask is not point-symmetric")
            if cls.is_band:
                if bits.sum() > 0.10 * size * size:
                    raise ConfigurationError(f"class {cls.name!r}: band exceeds 10% of spectrum")
                if (bits & occupied).any():
                    overlapping.add(cls.name)
                    overlapping.update(
                        owners[i] for i in range(len(owners))
                        if (bits & self._mask_of(owners[i])).any()
                    )
                occupied |= bits
                owners.append(cls.name)
        # level classes share a region by design, but regions may not touch bands
        for cls in self.classes:
            if not cls.is_band and (np.asarray(cls.region, dtype=bool) & occupied).any():
                overlapping.add(cls.name)
        if overlapping:
            raise ConfigurationError(
                f"overlapping bands for classes: {', '.join(sorted(overlapping))}"
            )

    def _mask_of(self, name: str) -> np.ndarray:
        for cls in self.classes:
            if cls.name == name and cls.is_band:
                return np.asarray(cls.band, dtype=bool)
        return np.zeros((self.image_size, self.image_size), dtype=bool)

    @property
    def class_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.classes)

    def truth_masks(self) -> dict[str, FrequencyMask]:
        out = {}
        for cls in self.classes:
            bits = cls.band if cls.is_band else cls.region
            out[cls.name] = FrequencyMask(np.asarray(bits, dtype=bool).copy())
        return out


def make_band_spec(
    num_classes: int = 4,
    image_size: int = 32,
    channels: int = 1,
    blob: int | tuple[int, int] = (1, 2),
    noise_sigma: float = 0.05,
    train_per_class: int = 200,
    test_per_class: int = 200,
    seed: int = 7,
) -> PlantedSpec:
    """Default planted spec: compact symmetric blob bands on a ring.

    Primary blobs sit in the upper half-plane at evenly spread angles, so
    their point mirrors (lower half-plane) stay disjoint from every other
    class. Positions snap to a coarse lattice, which keeps each blob inside
    a single patch at most tiling scales; a coarse-to-fine search with a
    small candidate budget can then retain the whole band instead of losing
    bins to patch-boundary splits.
    """
    blob_h, blob_w = (blob, blob) if isinstance(blob, int) else blob
    center = image_size // 2
    radius = image_size / 4
    classes = []
    for c in range(num_classes):
        theta = np.pi * (c + 0.5) / num_classes
        top = center - radius * np.sin(theta)
        left = center + radius * np.cos(theta)
        top = int(2 * round(top / 2))
        left = int(4 * round((left - 2) / 4)) + 2  # cols = 2 (mod 4)
        top = min(max(top, 2), image_size - blob_h - 1)
        left = min(max(left, 2), image_size - blob_w - 1)
        classes.append(PlantedClass(name=f"class{c}", band=blob_band(image_size, top, left, (blob_h, blob_w))))
    return PlantedSpec(
        image_size=image_size, classes=tuple(classes), channels=channels,
        noise_sigma=noise_sigma, train_per_class=train_per_class,
        test_per_class=test_per_class, seed=seed,
    )


def add_level_pair(
    spec: PlantedSpec,
    hi_name: str = "broad-hi",
    lo_name: str = "broad-lo",
    hi_level: float = 1.0,
    lo_level: float = 0.4,
    inner: float = 3.0,
    outer: float = 10.0,
) -> PlantedSpec:
    """Append a hi/lo level pair sharing an annulus clear of all bands."""
    occupied = np.zeros((spec.image_size, spec.image_size), dtype=bool)
    for cls in spec.classes:
        if cls.is_band:
            occupied |= cls.band
        else:
            occupied |= cls.region
            if cls.carrier is not None:
                occupied |= cls.carrier
    carrier = annulus_region(spec.image_size, 1.2, 2.2, exclude=occupied)
    region = annulus_region(spec.image_size, inner, outer, exclude=occupied | carrier)
    if not region.any() or not carrier.any():
        raise ConfigurationError("no free bins left for a level region")
    extra = (
        PlantedClass(name=hi_name, level=hi_level, region=region, carrier=carrier),
        PlantedClass(name=lo_name, level=lo_level, region=region, carrier=carrier),
    )
    return replace(spec, classes=spec.classes + extra)


# --------------------------------------------------------------------------
# JSON round trip for spec files


def planted_spec_to_dict(spec: PlantedSpec) -> dict:
    """Resolve a spec into explicit bin lists (exact JSON round trip)."""
    classes = []
    for cls in spec.classes:
        if cls.is_band:
            bins = [[int(r), int(c)] for r, c in zip(*np.nonzero(cls.band))]
            classes.append({"name": cls.name, "bins": bins})
        else:
            bins = [[int(r), int(c)] for r, c in zip(*np.nonzero(cls.region))]
            entry = {"name": cls.name, "level": cls.level, "region_bins": bins}
            if cls.carrier is not None:
                entry["carrier_bins"] = [
                    [int(r), int(c)] for r, c in zip(*np.nonzero(cls.carrier))
                ]
            classes.append(entry)
    return {
        "image_size": spec.image_size,
        "channels": spec.channels,
        "noise_sigma": spec.noise_sigma,
        "amplitude": list(spec.amplitude),
        "train_per_class": spec.train_per_class,
        "test_per_class": spec.test_per_class,
        "seed": spec.seed,
        "classes": classes,
    }


def planted_spec_from_dict(data: dict) -> PlantedSpec:
    """Parse a spec file. Band classes give a ``blob`` ({top, left, size})
    or explicit ``bins``; level classes give ``level`` plus a ``region``
    annulus ({inner, outer}, bands excluded automatically) or
    ``region_bins``. Explicit bins are mirrored to keep masks symmetric."""
    try:
        size = int(data["image_size"])
        entries = data["classes"]
    except (KeyError, TypeError) as exc:
        raise ConfigurationError(f"bad planted spec: {exc}") from exc

    def bits_from_bins(bins) -> np.ndarray:
        bits = np.zeros((size, size), dtype=bool)
        for r, c in bins:
            bits[int(r), int(c)] = True
        return bits | point_mirror(bits)

    band_classes: list[PlantedClass] = []
    level_entries: list[dict] = []
    occupied = np.zeros((size, size), dtype=bool)
    for entry in entries:
        name = str(entry["name"])
        if "level" in entry:
            level_entries.append(entry)
            continue
        if "blob" in entry:
            blob = entry["blob"]
            bsize = blob.get("size", 2)
            bsize = tuple(bsize) if isinstance(bsize, (list, tuple)) else int(bsize)
            bits = blob_band(size, int(blob["top"]), int(blob["left"]), bsize)
        elif "bins" in entry:
            bits = bits_from_bins(entry["bins"])
        else:
            raise ConfigurationError(f"class {name!r}: needs 'blob', 'bins' or 'level'")
        band_classes.append(PlantedClass(name=name, band=bits))
        occupied |= bits

    level_classes: list[PlantedClass] = []
    for entry in level_entries:
        name = str(entry["name"])
        carrier = None
        if "carrier_bins" in entry:
            carrier = bits_from_bins(entry["carrier_bins"])
        if "region_bins" in entry:
            bits = bits_from_bins(entry["region_bins"])
        elif "region" in entry:
            region = entry["region"]
            if carrier is None:
                carrier = annulus_region(size, 1.2, 2.2, exclude=occupied)
            bits = annulus_region(
                size, float(region["inner"]), float(region["outer"]),
                exclude=occupied | carrier,
            )
        else:
            raise ConfigurationError(f"class {name!r}: level classes need a region")
        level_classes.append(
            PlantedClass(name=name, level=float(entry["level"]), region=bits, carrier=carrier)
        )

    return PlantedSpec(
        image_size=size,
        classes=tuple(band_classes + level_classes),
        channels=int(data.get("channels", 1)),
        noise_sigma=float(data.get("noise_sigma", 0.05)),
        amplitude=tuple(data.get("amplitude", (0.5, 1.0))),
        train_per_class=int(data.get("train_per_class", 200)),
        test_per_class=int(data.get("test_per_class", 200)),
        seed=int(data.get("seed", 7)),
    )


# --------------------------------------------------------------------------
# generation


def _synthesize_class(
    cls: PlantedClass, spec: PlantedSpec, count: int, rng: np.random.Generator
) -> np.ndarray:
    size = spec.image_size
    lo_amp, hi_amp = spec.amplitude
    bits = np.asarray(cls.band if cls.is_band else cls.region, dtype=bool)
    pairs = _symmetric_pairs(bits)
    if not pairs:
        raise ConfigurationError(f"class {cls.name!r}: mask has no conjugate bin pairs")
    # per-pair pixel-space amplitude; level classes spread energy over many
    # bins, so scale down to keep the pixel range sane
    if cls.is_band:
        amp_scale = 1.0
    else:
        amp_scale = cls.level * 0.8 / np.sqrt(len(pairs))
    coeff = size * size / 2.0

    carrier_pairs = _symmetric_pairs(cls.carrier) if cls.carrier is not None else []

    images = np.empty((count, spec.channels, size, size))
    for i in range(count):
        for ch in range(spec.channels):
            spectrum = np.zeros((size, size), dtype=complex)
            amps = rng.uniform(lo_amp, hi_amp, size=len(pairs)) * amp_scale
            phases = rng.uniform(0.0, 2.0 * np.pi, size=len(pairs))
            for (pos, mirror), amp, phase in zip(pairs, amps, phases):
                z = amp * coeff * np.exp(1j * phase)
                spectrum[pos] = z
                spectrum[mirror] = np.conj(z)
            if carrier_pairs:
                # constant-amplitude carrier: identical strength for both
                # pair members, so it pins the image range without carrying
                # class information
                carrier_phases = rng.uniform(0.0, 2.0 * np.pi, size=len(carrier_pairs))
                for (pos, mirror), phase in zip(carrier_pairs, carrier_phases):
                    z = hi_amp * coeff * np.exp(1j * phase)
                    spectrum[pos] = z
                    spectrum[mirror] = np.conj(z)
            plane = np.fft.ifft2(np.fft.ifftshift(spectrum)).real
            plane += rng.normal(0.0, spec.noise_sigma, size=plane.shape)
            images[i, ch] = plane
    # affine rescale to [0, 1] per image
    flat = images.reshape(count, -1)
    lo = flat.min(axis=1).reshape(-1, 1, 1, 1)
    hi = flat.max(axis=1).reshape(-1, 1, 1, 1)
    return (images - lo) / np.maximum(hi - lo, 1e-9)


def _generate_split(spec: PlantedSpec, per_class: int, split: str, stream: int) -> LabeledDataset:
    arrays, labels = [], []
    for idx, cls in enumerate(spec.classes):
        rng = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence((spec.seed, stream, idx)))
        )
        arrays.append(_synthesize_class(cls, spec, per_class, rng))
        labels.extend([idx] * per_class)
    return LabeledDataset(
        spec.class_names, np.concatenate(arrays), np.asarray(labels),
        split=split, source="planted",
    )


def generate_planted(spec: PlantedSpec) -> tuple[LabeledDataset, LabeledDataset, dict[str, FrequencyMask]]:
    """Synthesize (train, test, ground-truth masks) from a planted spec."""
    spec.validate()
    train = _generate_split(spec, spec.train_per_class, "train", stream=0)
    test = _generate_split(spec, spec.test_per_class, "test", stream=1)
    return train, test, spec.truth_masks()


def texture_variant(spec: PlantedSpec, seed: int) -> PlantedSpec:
    """Same bands and levels, fresh phases/amplitudes/noise.

    The evidence the model relies on is preserved, so this plays the role of
    a texture-preserving OOD set.
    """
    return replace(spec, seed=seed)


def rendition_variant(spec: PlantedSpec, seed: int) -> PlantedSpec:
    """Move every band to fresh bins; level classes keep their regions.

    Band evidence is absent at its original location, mimicking an OOD set
    whose renditions drop the texture-like cues while wide-band (semantic)
    structure survives.
    """
    size = spec.image_size
    occupied = np.zeros((size, size), dtype=bool)
    for cls in spec.classes:
        occupied |= np.asarray(cls.band if cls.is_band else cls.region, dtype=bool)
        if cls.carrier is not None:
            occupied |= cls.carrier

    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, 0xB1205))))
    new_classes = []
    for cls in spec.classes:
        if not cls.is_band:
            new_classes.append(cls)
            continue
        blob = int(np.sqrt(cls.band.sum() / 2))
        blob = max(blob, 1)
        placed = None
        for _ in range(200):
            top = int(rng.integers(1, size // 2 - blob))
            left = int(rng.integers(1, size - blob))
            candidate = blob_band(size, top, left, blob)
            if not (candidate & occupied).any():
                placed = candidate
                break
        if placed is None:
            raise ConfigurationError(f"no free bins to relocate band of {cls.name!r}")
        occupied |= placed
        new_classes.append(PlantedClass(name=cls.name, band=placed))
    return replace(spec, classes=tuple(new_classes), seed=seed)


def recovery_score(dfm: FrequencyMask, truth: FrequencyMask) -> float:
    """Fraction of ground-truth band bins retained by a searched mask."""
    if dfm.bits.shape != truth.bits.shape:
        raise ConfigurationError(
            f"mask shapes differ: {dfm.bits.shape} vs {truth.bits.shape}"
        )
    total = truth.count
    if total == 0:
        raise ConfigurationError("ground-truth mask is empty")
    return int((dfm.bits & truth.bits).sum()) / total


# --------------------------------------------------------------------------
# analytic oracle matched to a planted spec


def build_planted_oracle(
    spec: PlantedSpec,
    calibration: LabeledDataset,
    target_logit: float = 4.0,
    level_sharpness: float = 8.0,
    calibration_per_class: int = 50,
) -> ClassifierEndpoint:
    """Spectral-linear endpoint whose reliance matches the planted evidence.

    Band classes get unit weights over their band, scaled so clean images
    score ~``target_logit``. A hi/lo level pair is thresholded at the
    midpoint of the two classes' calibrated region energies; the lo class
    doubles as the low-evidence default.
    """
    size = spec.image_size
    k = len(spec.classes)
    weights = np.zeros((k, size, size))
    bias = np.zeros(k)

    def region_energy(images: np.ndarray, bits: np.ndarray) -> float:
        spectra = np.fft.fftshift(np.fft.fft2(images, axes=(-2, -1)), axes=(-2, -1))
        feats = np.abs(spectra).mean(axis=1)
        return float(feats[:, bits].sum(axis=1).mean())

    def class_images(idx: int) -> np.ndarray:
        sel = calibration.class_indices(idx)[:calibration_per_class]
        if sel.size == 0:
            raise ConfigurationError(
                f"calibration set has no images for class {spec.classes[idx].name!r}"
            )
        return calibration.images[sel]

    level_members: list[int] = []
    for idx, cls in enumerate(spec.classes):
        if cls.is_band:
            bits = np.asarray(cls.band, dtype=bool)
            energy = region_energy(class_images(idx), bits)
            weights[idx][bits] = target_logit / energy
        else:
            level_members.append(idx)

    if level_members:
        if len(level_members) != 2:
            raise ConfigurationError("level classes must come as one hi/lo pair")
        a, b = level_members
        hi, lo = (a, b) if spec.classes[a].level >= spec.classes[b].level else (b, a)
        bits = np.asarray(spec.classes[hi].region, dtype=bool)
        e_hi = region_energy(class_images(hi), bits)
        e_lo = region_energy(class_images(lo), bits)
        theta = 0.5 * (e_hi + e_lo)
        gain = level_sharpness / (e_hi - theta)
        weights[hi][bits] = gain
        bias[hi] = -gain * theta
        bias[lo] = 0.5  # low-evidence default; beats residual-noise logits

    model = SpectralLinearClassifier(weights, bias)
    return ClassifierEndpoint.from_model(
        model, (spec.channels, size, size), name="planted-oracle",
    )
