"""Fourier-domain primitives.

Images are real arrays of shape (channels, height, width) with values
nominally in [0, 1]. Spectra are complex arrays of the same height/width in
center-shifted layout: the zero-frequency bin sits at (height//2, width//2),
which is why even dimensions are required. Binary masks over that layout
select frequency subsets; filtering an image means zeroing every spectrum
bin outside the mask and transforming back.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigurationError, DataError

__all__ = [
    "ImageTensor",
    "FrequencyMask",
    "validate_image",
    "forward_spectrum",
    "inverse_spectrum",
    "filter_image",
    "filter_batch",
    "mask_union",
]


def validate_image(values: np.ndarray) -> np.ndarray:
    """Check image invariants and return the array as float64 (C, H, W).

    Requirements: 1 or 3 channels, even height/width >= 8, all values finite.
    """
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[np.newaxis]
    if arr.ndim != 3:
        raise DataError(f"expected (channels, height, width), got shape {arr.shape}")
    channels, height, width = arr.shape
    if channels not in (1, 3):
        raise DataError(f"expected 1 or 3 channels, got {channels}")
    if height < 8 or width < 8:
        raise DataError(f"image too small: {height}x{width}, minimum is 8x8")
    if height % 2 or width % 2:
        raise DataError(f"image dimensions must be even, got {height}x{width}")
    if not np.all(np.isfinite(arr)):
        raise DataError("image contains non-finite values")
    return arr


@dataclass(frozen=True)
class ImageTensor:
    """One image: (channels, height, width) real values, optional class label."""

    values: np.ndarray
    label: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "values", validate_image(self.values))

    @property
    def channels(self) -> int:
        return self.values.shape[0]

    @property
    def height(self) -> int:
        return self.values.shape[1]

    @property
    def width(self) -> int:
        return self.values.shape[2]


@dataclass(eq=False)
class FrequencyMask:
    """Binary map over the center-shifted spectrum.

    ``stage`` and ``parent_id`` record where a mask came from during a
    hierarchical search; both are optional.
    """

    bits: np.ndarray
    stage: int | None = None
    parent_id: int | None = None

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=bool)
        if bits.ndim != 2:
            raise ConfigurationError(f"mask must be 2-D, got shape {bits.shape}")
        self.bits = bits

    @classmethod
    def full(cls, height: int, width: int) -> "FrequencyMask":
        return cls(np.ones((height, width), dtype=bool))

    @classmethod
    def empty(cls, height: int, width: int) -> "FrequencyMask":
        return cls(np.zeros((height, width), dtype=bool))

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def count(self) -> int:
        """Number of set bins."""
        return int(self.bits.sum())

    @property
    def coverage(self) -> float:
        """Fraction of set bins, recomputed from the bits on every access."""
        return self.count / self.bits.size

    def coverage_of(self, other: "FrequencyMask") -> float:
        """Fraction of ``other``'s set bins that this mask also sets."""
        denom = other.count
        if denom == 0:
            raise ConfigurationError("reference mask is empty")
        return int((self.bits & other.bits).sum()) / denom

    def is_subset_of(self, other: "FrequencyMask") -> bool:
        return bool(np.all(~self.bits | other.bits))

    def __eq__(self, other) -> bool:
        return isinstance(other, FrequencyMask) and np.array_equal(self.bits, other.bits)


def _as_image_array(image) -> np.ndarray:
    if isinstance(image, ImageTensor):
        return image.values
    return validate_image(image)


def forward_spectrum(image) -> np.ndarray:
    """Per-channel 2-D DFT in center-shifted layout.

    Returns a complex array (channels, height, width); one spectrum per
    channel. Inverse of :func:`inverse_spectrum`.
    """
    arr = _as_image_array(image)
    return np.fft.fftshift(np.fft.fft2(arr, axes=(-2, -1)), axes=(-2, -1))


def inverse_spectrum(spectra: np.ndarray) -> np.ndarray:
    """Invert center-shifted per-channel spectra; keeps the real part.

    The real-part projection applies regardless of mask symmetry, so the
    result is always a valid model input.
    """
    spectra = np.asarray(spectra)
    out = np.fft.ifft2(np.fft.ifftshift(spectra, axes=(-2, -1)), axes=(-2, -1))
    return out.real


def _check_mask_dims(mask: FrequencyMask, height: int, width: int) -> None:
    if (mask.height, mask.width) != (height, width):
        raise ConfigurationError(
            f"mask is {mask.height}x{mask.width} but image is {height}x{width}"
        )


def filter_image(image, mask: FrequencyMask) -> np.ndarray:
    """Keep only the spectrum bins selected by ``mask``; same mask for every channel.

    Output is not re-normalized or clipped; any model-side input
    normalization is the endpoint's concern.
    """
    arr = _as_image_array(image)
    _check_mask_dims(mask, arr.shape[-2], arr.shape[-1])
    spectra = forward_spectrum(arr)
    return inverse_spectrum(spectra * mask.bits)


def filter_batch(batch: np.ndarray, mask: FrequencyMask) -> np.ndarray:
    """Vectorized :func:`filter_image` over a (N, C, H, W) batch."""
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 4:
        raise DataError(f"expected (N, C, H, W) batch, got shape {batch.shape}")
    _check_mask_dims(mask, batch.shape[-2], batch.shape[-1])
    if not np.all(np.isfinite(batch)):
        raise DataError("batch contains non-finite values")
    spectra = np.fft.fftshift(np.fft.fft2(batch, axes=(-2, -1)), axes=(-2, -1))
    spectra *= mask.bits
    out = np.fft.ifft2(np.fft.ifftshift(spectra, axes=(-2, -1)), axes=(-2, -1))
    return out.real


def mask_union(masks: Sequence[FrequencyMask] | Iterable[FrequencyMask]) -> FrequencyMask:
    """Bitwise OR of masks sharing one shape."""
    masks = list(masks)
    if not masks:
        raise ConfigurationError("mask_union of an empty list")
    shape = masks[0].bits.shape
    acc = np.zeros(shape, dtype=bool)
    for m in masks:
        if m.bits.shape != shape:
            raise ConfigurationError(
                f"mask shapes differ: {m.bits.shape} vs {shape}"
            )
        acc |= m.bits
    return FrequencyMask(acc)
