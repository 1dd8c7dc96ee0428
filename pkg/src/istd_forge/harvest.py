"""Hard-target selection and target patch extraction from ground-truth masks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .imagecore import Rect, as_image, as_mask
from .metrics import confusion


@dataclass
class PredictionPair:
    pred: np.ndarray
    truth: np.ndarray
    image: np.ndarray
    id: str = ""

    def __post_init__(self):
        self.pred = as_mask(self.pred)
        self.truth = as_mask(self.truth)
        self.image = as_image(self.image)
        if not self.pred.shape == self.truth.shape == self.image.shape:
            raise ValueError(
                f"pair {self.id!r}: shapes differ (pred {self.pred.shape}, truth {self.truth.shape}, image {self.image.shape})"
            )


@dataclass(frozen=True)
class DisConfig:
    tau_p: float = 0.5
    tau_i: float = 0.5
    patch_pad: int = 8

    def __post_init__(self):
        if not (0.0 <= self.tau_p <= 1.0 and 0.0 <= self.tau_i <= 1.0):
            raise ValueError("thresholds must lie in [0, 1]")
        if self.patch_pad < 0:
            raise ValueError("patch_pad must be non-negative")


@dataclass
class TargetPatch:
    """One connected target with its surrounding context.

    ``mask`` holds only this component's pixels, even if the padded window
    overlaps a neighbouring target. ``origin`` locates the window in the source
    frame. ``usage_count`` is mutated by ``regen.assign``.
    """

    pixels: np.ndarray
    mask: np.ndarray
    source_id: str = ""
    origin: Rect | None = None
    usage_count: int = 0

    def __post_init__(self):
        self.pixels = as_image(self.pixels)
        self.mask = as_mask(self.mask)
        if self.pixels.shape != self.mask.shape:
            raise ValueError("patch pixels and mask differ in shape")
        if not self.mask.any():
            raise ValueError("a target patch needs at least one positive pixel")

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape


def scores(pair: PredictionPair) -> tuple[float, float]:
    """Per-image ``(pixacc, iou)`` of the prediction."""
    c = confusion(pair.pred, pair.truth)
    return c.recall(), c.iou()


def select_hard(pairs, cfg: DisConfig = DisConfig()) -> list[PredictionPair]:
    """Keep pairs whose PixAcc and IoU are both below their thresholds."""
    pairs = list(pairs)
    if not pairs:
        raise ValueError("select_hard needs at least one pair")
    out = []
    for pair in pairs:
        pa, iou = scores(pair)
        if pa < cfg.tau_p and iou < cfg.tau_i:
            out.append(pair)
    return out


def extract_targets(pair: PredictionPair, cfg: DisConfig = DisConfig()) -> list[TargetPatch]:
    """One padded patch per 8-connected component of the truth mask."""
    labels, n = kernels.label8(pair.truth)
    height, width = pair.truth.shape
    patches = []
    for k in range(1, n + 1):
        ys, xs = np.nonzero(labels == k)
        y0 = max(int(ys.min()) - cfg.patch_pad, 0)
        x0 = max(int(xs.min()) - cfg.patch_pad, 0)
        y1 = min(int(ys.max()) + cfg.patch_pad + 1, height)
        x1 = min(int(xs.max()) + cfg.patch_pad + 1, width)
        rect = Rect(x0, y0, x1 - x0, y1 - y0)
        sl = rect.slices()
        patches.append(
            TargetPatch(pair.image[sl].copy(), labels[sl] == k, source_id=pair.id, origin=rect)
        )
    return patches
