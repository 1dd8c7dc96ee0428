"""Single-level 2-D Haar transform and the low-band-guided high-band filter."""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .imagecore import as_image, gradient_magnitude


class WaveletFamily(str, Enum):
    HAAR = "haar"


@dataclass(frozen=True)
class WmfConfig:
    epsilon: float = 1e-6
    wavelet_family: WaveletFamily = WaveletFamily.HAAR

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        object.__setattr__(self, "wavelet_family", WaveletFamily(self.wavelet_family))


@dataclass(frozen=True)
class WaveletPyramid:
    """One decomposition level.

    ``high`` holds the three detail bands in the order (LH, HL, HH): top-minus-
    bottom (horizontal edges), left-minus-right (vertical edges), diagonal.
    ``parent_dims`` is ``(width, height)`` of the image before padding.
    """

    low: np.ndarray
    high: tuple[np.ndarray, np.ndarray, np.ndarray]
    parent_dims: tuple[int, int]

    def __post_init__(self):
        if len(self.high) != 3:
            raise ValueError("a pyramid needs exactly three detail bands")
        shape = self.low.shape
        if any(band.shape != shape for band in self.high):
            raise ValueError("all subbands must share one shape")
        width, height = self.parent_dims
        if shape != ((height + 1) // 2, (width + 1) // 2):
            raise ValueError(f"subband shape {shape} inconsistent with parent dims {self.parent_dims}")


def decompose(img, cfg: WmfConfig = WmfConfig()) -> WaveletPyramid:
    """Orthonormal Haar analysis; odd dimensions are edge-padded to even."""
    img = as_image(img, clamp=False)
    height, width = img.shape
    if height < 2 or width < 2:
        raise ValueError(f"wavelet decomposition needs at least 2x2, got {width}x{height}")
    padded = np.pad(img, ((0, height % 2), (0, width % 2)), mode="edge")
    a = padded[0::2, 0::2]
    b = padded[0::2, 1::2]
    c = padded[1::2, 0::2]
    d = padded[1::2, 1::2]
    low = (a + b + c + d) / 2.0
    lh = (a + b - c - d) / 2.0
    hl = (a - b + c - d) / 2.0
    hh = (a - b - c + d) / 2.0
    return WaveletPyramid(low, (lh, hl, hh), (width, height))


def edge_aware_filter(pyr: WaveletPyramid, cfg: WmfConfig = WmfConfig()) -> WaveletPyramid:
    """Scale every detail band by the normalised gradient magnitude of the low band.

    The scale field ``|grad L| / (max|grad L| + eps)`` lies in [0, 1), so detail
    coefficients only shrink, and vanish wherever the low band is flat.
    """
    mag = gradient_magnitude(pyr.low)
    scale = mag / (mag.max() + cfg.epsilon)
    return replace(pyr, high=tuple(band * scale for band in pyr.high))


def reconstruct(pyr: WaveletPyramid) -> np.ndarray:
    lh, hl, hh = pyr.high
    low = pyr.low
    h2, w2 = low.shape
    out = np.empty((2 * h2, 2 * w2), dtype=np.float64)
    out[0::2, 0::2] = (low + lh + hl + hh) / 2.0
    out[0::2, 1::2] = (low + lh - hl - hh) / 2.0
    out[1::2, 0::2] = (low - lh + hl - hh) / 2.0
    out[1::2, 1::2] = (low - lh - hl + hh) / 2.0
    width, height = pyr.parent_dims
    return np.clip(out[:height, :width], 0.0, 1.0)


def wmf(img, cfg: WmfConfig = WmfConfig()) -> np.ndarray:
    """Full multi-frequency filter: decompose, filter the detail bands, reconstruct."""
    return reconstruct(edge_aware_filter(decompose(img, cfg), cfg))
