"""Unsupervised background region detection.

Each image is tiled into ``S x S`` blocks. A block's background tendency is the
equal-weight sum of its min-max normalised edge density (mean Sobel magnitude)
and Laplacian response (summed absolute 4-neighbour Laplacian). Low scores mark
flat, low-texture background.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imagecore import Rect, _laplacian, _sobel, as_image, resize_bilinear
from .wavelet import WmfConfig, wmf

SELECTION_MODES = ("argmin", "threshold", "random")


@dataclass(frozen=True)
class GridSpec:
    block_size: int = 64

    def __post_init__(self):
        if self.block_size < 1:
            raise ValueError("block_size must be positive")

    def dims(self, width: int, height: int) -> tuple[int, int]:
        """Grid shape ``(g_h, g_w)``; partial blocks on the right/bottom are dropped."""
        return height // self.block_size, width // self.block_size


@dataclass(frozen=True)
class ProbabilityMap:
    scores: np.ndarray
    grid: GridSpec
    raw_edge: np.ndarray
    raw_lap: np.ndarray
    edge_weight: float = 0.5
    lap_weight: float = 0.5

    def argmin(self) -> tuple[int, int]:
        # np.argmin returns the first minimum in row-major order
        i, j = np.unravel_index(int(np.argmin(self.scores)), self.scores.shape)
        return int(i), int(j)

    def heatmap(self) -> np.ndarray:
        """Scores upscaled nearest-neighbour to pixel resolution."""
        s = self.grid.block_size
        return np.kron(self.scores, np.ones((s, s)))


@dataclass(frozen=True)
class BrdConfig:
    """``mode`` picks the crop: ``argmin`` (lowest block), ``threshold`` (every
    block with score < ``tau_b``; the lowest is returned by ``detect_background``)
    or ``random`` (uniform valid origin, the ablation baseline)."""

    tau_b: float | None = None
    crop_size: int = 126
    use_wmf: bool = True
    mode: str = "argmin"
    edge_weight: float = 0.5
    lap_weight: float = 0.5

    def __post_init__(self):
        if self.mode not in SELECTION_MODES:
            raise ValueError(f"unknown selection mode {self.mode!r}")
        if self.mode == "threshold" and self.tau_b is None:
            raise ValueError("threshold mode requires tau_b")
        if self.tau_b is not None and not 0.0 <= self.tau_b <= 1.0:
            raise ValueError("tau_b must lie in [0, 1]")
        if self.crop_size < 1:
            raise ValueError("crop_size must be positive")
        if self.edge_weight < 0 or self.lap_weight < 0 or abs(self.edge_weight + self.lap_weight - 1.0) > 1e-12:
            raise ValueError("feature weights must be non-negative and sum to 1")


def _minmax(values: np.ndarray) -> np.ndarray:
    lo, hi = values.min(), values.max()
    if hi == lo:
        return np.zeros_like(values)
    return (values - lo) / (hi - lo)


def block_scores(img, grid: GridSpec = GridSpec(), *, edge_weight: float = 0.5, lap_weight: float = 0.5) -> ProbabilityMap:
    img = as_image(img, clamp=False)
    height, width = img.shape
    g_h, g_w = grid.dims(width, height)
    if g_h < 1 or g_w < 1:
        raise ValueError(f"image {width}x{height} is smaller than one {grid.block_size}px block")
    s = grid.block_size

    gx, gy = _sobel(img)
    mag = np.sqrt(gx * gx + gy * gy)
    lap = np.abs(_laplacian(img))

    def block_sum(field):
        return field[: g_h * s, : g_w * s].reshape(g_h, s, g_w, s).sum(axis=(1, 3))

    raw_edge = block_sum(mag) / (s * s)
    raw_lap = block_sum(lap)
    scores = edge_weight * _minmax(raw_edge) + lap_weight * _minmax(raw_lap)
    return ProbabilityMap(scores, grid, raw_edge, raw_lap, edge_weight, lap_weight)


def crop_origin(block: tuple[int, int], grid: GridSpec, crop_size: int, width: int, height: int) -> Rect:
    """Crop window centred on a block's centre, clamped inside the image."""
    i, j = block
    s = grid.block_size
    x = j * s + s // 2 - crop_size // 2
    y = i * s + s // 2 - crop_size // 2
    x = min(max(x, 0), width - crop_size)
    y = min(max(y, 0), height - crop_size)
    return Rect(x, y, crop_size, crop_size)


def score_image(img, cfg: BrdConfig = BrdConfig(), wmf_cfg: WmfConfig = WmfConfig(), grid: GridSpec = GridSpec()) -> ProbabilityMap:
    img = as_image(img)
    guide = wmf(img, wmf_cfg) if cfg.use_wmf else img
    return block_scores(guide, grid, edge_weight=cfg.edge_weight, lap_weight=cfg.lap_weight)


def _check_crop(img, cfg):
    height, width = img.shape
    if cfg.crop_size > min(width, height):
        raise ValueError(f"crop_size {cfg.crop_size} does not fit a {width}x{height} image")


def detect_background(
    img,
    cfg: BrdConfig = BrdConfig(),
    wmf_cfg: WmfConfig = WmfConfig(),
    grid: GridSpec = GridSpec(),
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, Rect, ProbabilityMap]:
    """Pick the lowest-scoring block and crop the original image around it.

    Scoring runs on the filtered image when ``cfg.use_wmf``; the crop itself is
    always taken from the unfiltered pixels. In ``random`` mode the origin is
    drawn uniformly from ``rng`` instead (the map is still returned).
    """
    img = as_image(img)
    _check_crop(img, cfg)
    height, width = img.shape
    pmap = score_image(img, cfg, wmf_cfg, grid)
    if cfg.mode == "random":
        if rng is None:
            raise ValueError("random crop mode needs an rng")
        x = int(rng.integers(0, width - cfg.crop_size + 1))
        y = int(rng.integers(0, height - cfg.crop_size + 1))
        rect = Rect(x, y, cfg.crop_size, cfg.crop_size)
    else:
        block = pmap.argmin()
        if cfg.mode == "threshold" and not pmap.scores[block] < cfg.tau_b:
            raise ValueError(f"no block scores below tau_b={cfg.tau_b}")
        rect = crop_origin(block, grid, cfg.crop_size, width, height)
    return img[rect.slices()].copy(), rect, pmap


def select_blocks(pmap: ProbabilityMap, tau_b: float) -> list[tuple[int, int]]:
    """Blocks with score strictly below ``tau_b``, lowest score first (ties row-major)."""
    flat = pmap.scores.ravel()
    order = np.argsort(flat, kind="stable")
    shape = pmap.scores.shape
    return [tuple(int(v) for v in np.unravel_index(k, shape)) for k in order if flat[k] < tau_b]


def background_crops(img, cfg: BrdConfig, wmf_cfg: WmfConfig = WmfConfig(), grid: GridSpec = GridSpec()) -> list[tuple[np.ndarray, Rect]]:
    """Threshold mode: one crop per block below ``cfg.tau_b``."""
    if cfg.tau_b is None:
        raise ValueError("background_crops needs tau_b")
    img = as_image(img)
    _check_crop(img, cfg)
    height, width = img.shape
    pmap = score_image(img, cfg, wmf_cfg, grid)
    out = []
    for block in select_blocks(pmap, cfg.tau_b):
        rect = crop_origin(block, grid, cfg.crop_size, width, height)
        out.append((img[rect.slices()].copy(), rect))
    return out


def upsample_background(crop, target_w: int, target_h: int) -> np.ndarray:
    return resize_bilinear(crop, target_w, target_h)
