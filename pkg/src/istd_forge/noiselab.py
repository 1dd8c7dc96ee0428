"""Real-domain noise library: flat-region harvesting and convex noise mixing."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .imagecore import Rect, as_image, load_image, resize_bilinear, save_image


class EmptyLibraryError(ValueError):
    pass


@dataclass(frozen=True)
class NoiseRegionConfig:
    """Window screening thresholds.

    ``window_w``/``window_h`` default to ``width // 12`` and ``height // 15`` of
    each image; ``stride`` defaults to the window size (non-overlapping).
    """

    window_w: int | None = None
    window_h: int | None = None
    sigma_max: float = 0.05
    mu_min: float = 0.05
    stride: int | None = None

    def window(self, width: int, height: int) -> tuple[int, int]:
        ww = self.window_w if self.window_w is not None else width // 12
        wh = self.window_h if self.window_h is not None else height // 15
        if ww < 1 or wh < 1 or ww > width or wh > height:
            raise ValueError(f"window {ww}x{wh} does not fit a {width}x{height} image")
        return ww, wh

    def strides(self, ww: int, wh: int) -> tuple[int, int]:
        if self.stride is None:
            return ww, wh
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        return self.stride, self.stride


@dataclass(frozen=True)
class NoiseRecord:
    source: str
    origin: Rect
    sigma: float
    mu: float

    def to_dict(self) -> dict:
        return {"source": self.source, "origin": self.origin.to_dict(), "sigma": self.sigma, "mu": self.mu}


@dataclass
class NoiseLibrary:
    patches: list = field(default_factory=list)
    records: list = field(default_factory=list)

    @property
    def k(self) -> int:
        return len(self.patches)

    @property
    def sources(self) -> list[str]:
        return [r.source for r in self.records]


@dataclass(frozen=True)
class MixConfig:
    """``lambda_mode`` is ``"fixed"`` (use ``value``) or ``"uniform"`` (draw U(0, 1))."""

    lambda_mode: str = "fixed"
    value: float = 0.5

    def __post_init__(self):
        if self.lambda_mode not in ("fixed", "uniform"):
            raise ValueError(f"unknown lambda mode {self.lambda_mode!r}")
        if not 0.0 <= self.value <= 1.0:
            raise ValueError("lambda must lie in [0, 1]")


def flattest_window(img, cfg: NoiseRegionConfig = NoiseRegionConfig()):
    """Qualifying window with the lowest standard deviation, or ``None``.

    Ties go to the smallest ``(y, x)``.
    """
    img = as_image(img)
    height, width = img.shape
    ww, wh = cfg.window(width, height)
    sx, sy = cfg.strides(ww, wh)
    views = sliding_window_view(img, (wh, ww))[::sy, ::sx]
    mu = views.mean(axis=(2, 3))
    sigma = views.std(axis=(2, 3))
    ok = (sigma <= cfg.sigma_max) & (mu >= cfg.mu_min)
    if not ok.any():
        return None
    masked = np.where(ok, sigma, np.inf)
    i, j = np.unravel_index(int(np.argmin(masked)), masked.shape)
    return Rect(int(j * sx), int(i * sy), ww, wh), float(sigma[i, j]), float(mu[i, j])


def harvest_noise(target_images, cfg: NoiseRegionConfig = NoiseRegionConfig(), ids=None) -> NoiseLibrary:
    """Build a library from the flattest qualifying window of every image.

    Each kept window is bilinearly upsampled to its source resolution.
    """
    images = [as_image(im) for im in target_images]
    if not images:
        raise ValueError("harvest_noise needs at least one image")
    ids = list(ids) if ids is not None else [str(k) for k in range(len(images))]
    lib = NoiseLibrary()
    for name, img in zip(ids, images):
        found = flattest_window(img, cfg)
        if found is None:
            continue
        rect, sigma, mu = found
        height, width = img.shape
        lib.patches.append(resize_bilinear(img[rect.slices()], width, height))
        lib.records.append(NoiseRecord(name, rect, sigma, mu))
    if not lib.k:
        raise EmptyLibraryError("no window passed the sigma/mean screening in any image")
    return lib


def mix(source, lib: NoiseLibrary, cfg: MixConfig, rng: np.random.Generator) -> tuple[np.ndarray, int, float]:
    """Convex blend ``lam * noise + (1 - lam) * source`` with a random library patch.

    The patch index is drawn before lambda. Returns ``(mixed, index, lam)``.
    """
    if not lib.patches:
        raise ValueError("noise library is empty")
    source = as_image(source)
    index = int(rng.integers(lib.k))
    lam = float(rng.random()) if cfg.lambda_mode == "uniform" else float(cfg.value)
    patch = lib.patches[index]
    if patch.shape != source.shape:
        patch = resize_bilinear(patch, source.shape[1], source.shape[0])
    mixed = lam * patch + (1.0 - lam) * source
    # exact convex envelope despite rounding
    mixed = np.clip(mixed, np.minimum(source, patch), np.maximum(source, patch))
    return mixed, index, lam


def save_library(lib: NoiseLibrary, directory) -> None:
    """Write ``patch_XXXX.png`` files plus ``library.json`` with window provenance."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for k, (patch, rec) in enumerate(zip(lib.patches, lib.records)):
        name = f"patch_{k:04d}.png"
        save_image(patch, directory / name)
        entries.append({"file": name, **rec.to_dict()})
    (directory / "library.json").write_text(json.dumps({"patches": entries}, indent=2, sort_keys=True) + "\n")


def load_library(directory) -> NoiseLibrary:
    directory = Path(directory)
    meta = json.loads((directory / "library.json").read_text())
    lib = NoiseLibrary()
    for e in meta["patches"]:
        lib.patches.append(load_image(directory / e["file"]))
        lib.records.append(NoiseRecord(e["source"], Rect(**e["origin"]), e["sigma"], e["mu"]))
    if not lib.k:
        raise EmptyLibraryError(f"{directory}: library has no patches")
    return lib
