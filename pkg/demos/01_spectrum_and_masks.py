"""Spectra, binary masks, and frequency filtering.

Walks through the basic objects: build a grating, look at where its energy
sits in the center-shifted spectrum, and reconstruct it through masks of
varying coverage.
"""

import numpy as np

from freqshort import FrequencyMask, filter_image, forward_spectrum, mask_union

size = 32
y, x = np.mgrid[0:size, 0:size]

# a horizontal grating with 4 periods plus a constant offset
image = (0.5 + 0.4 * np.cos(2 * np.pi * 4 * x / size))[None]

spectrum = forward_spectrum(image)[0]
magnitude = np.abs(spectrum)
center = size // 2
print("strongest spectrum bins (row, col, |S|):")
for idx in np.argsort(magnitude.ravel())[::-1][:3]:
    r, c = divmod(int(idx), size)
    print(f"  ({r:2d}, {c:2d})  {magnitude[r, c]:10.1f}")
print(f"expected: DC at ({center},{center}) and the pair at columns {center - 4}, {center + 4}")

# pass only the grating pair plus DC: reconstruction is exact
bits = np.zeros((size, size), dtype=bool)
bits[center, center] = bits[center, center - 4] = bits[center, center + 4] = True
reconstructed = filter_image(image, FrequencyMask(bits))
print(f"\n3-bin mask reconstruction error: {np.abs(reconstructed - image).max():.2e}")

# an empty mask wipes the image; the full mask is the identity
print(f"all-ones mask error:  {np.abs(filter_image(image, FrequencyMask.full(size, size)) - image).max():.2e}")
print(f"all-zeros mask energy: {np.abs(filter_image(image, FrequencyMask.empty(size, size))).max():.2e}")

# masks combine by union; coverage tracks set bins
quad_a = np.zeros((size, size), dtype=bool)
quad_a[:16, :16] = True
quad_b = np.zeros((size, size), dtype=bool)
quad_b[8:24, 8:24] = True
union = mask_union([FrequencyMask(quad_a), FrequencyMask(quad_b)])
print(f"\nquadrant coverage: {FrequencyMask(quad_a).coverage:.3f}"
      f" + overlapping block {FrequencyMask(quad_b).coverage:.3f}"
      f" -> union {union.coverage:.3f}")
