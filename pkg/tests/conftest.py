"""Shared fixtures and independent oracles.

The DFT oracle here is built from explicit exponential matrices (not
numpy.fft) and handles the center shift by indexing frequencies directly,
so it can vouch for the library's transform and filter paths.
"""

import numpy as np
import pytest


def brute_spectrum(channel: np.ndarray) -> np.ndarray:
    """Direct center-shifted 2-D DFT of one channel, no FFT involved."""
    h, w = channel.shape
    fy = np.arange(h) - h // 2
    fx = np.arange(w) - w // 2
    y = np.arange(h)
    x = np.arange(w)
    row_basis = np.exp(-2j * np.pi * np.outer(fy, y) / h)
    col_basis = np.exp(-2j * np.pi * np.outer(fx, x) / w)
    return row_basis @ channel @ col_basis.T


def brute_filter(channel: np.ndarray, mask_bits: np.ndarray) -> np.ndarray:
    """Direct mask-then-invert reference for one channel (real part)."""
    h, w = channel.shape
    spectrum = brute_spectrum(channel) * mask_bits
    fy = np.arange(h) - h // 2
    fx = np.arange(w) - w // 2
    y = np.arange(h)
    x = np.arange(w)
    row_basis = np.exp(2j * np.pi * np.outer(y, fy) / h)
    col_basis = np.exp(2j * np.pi * np.outer(x, fx) / w)
    return (row_basis @ spectrum @ col_basis.T).real / (h * w)


def cosine_grating(height: int, width: int, ky: int, kx: int,
                   amplitude: float = 1.0, phase: float = 0.0) -> np.ndarray:
    """Single-channel grating exciting the (center+ky, center+kx) bin pair."""
    y, x = np.mgrid[0:height, 0:width]
    return amplitude * np.cos(2 * np.pi * (ky * y / height + kx * x / width) + phase)[None]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
