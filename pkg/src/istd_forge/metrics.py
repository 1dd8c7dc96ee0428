"""Pixel-level and target-level evaluation metrics.

Conventions (the usual ones in infrared small target work):

* PixAcc -- pooled target-pixel recall ``sum(tp) / sum(tp + fn)``.
* mIoU   -- pooled IoU ``sum(tp) / sum(tp + fp + fn)``.
* nIoU   -- per-image IoU averaged over images; an image with empty truth and
  empty prediction counts as 1.
* F1     -- pooled ``2 tp / (2 tp + fp + fn)``.
* Pd     -- matched ground-truth components over all ground-truth components,
  matching 8-connected components greedily by centroid distance.
* Fa     -- pixels of unmatched predicted components over all pixels.

A ratio whose denominator is zero is reported as 1.0 (nothing to miss), except
Fa which is 0.0 for an empty dataset.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from . import kernels
from .imagecore import as_mask


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn, self.tn + other.tn)

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def iou(self) -> float:
        return _ratio(self.tp, self.tp + self.fp + self.fn)

    def recall(self) -> float:
        return _ratio(self.tp, self.tp + self.fn)

    def f1(self) -> float:
        return _ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn)


def _ratio(num, den) -> float:
    return 1.0 if den == 0 else num / den


@dataclass(frozen=True)
class DetectionParams:
    match_radius: float = 3.0
    connectivity: int = 8

    def __post_init__(self):
        if not self.match_radius > 0:
            raise ValueError("match_radius must be positive")
        if self.connectivity != 8:
            raise ValueError("only 8-connectivity is supported")


def _pair(pred, truth):
    pred, truth = as_mask(pred), as_mask(truth)
    if pred.shape != truth.shape:
        raise ValueError(f"prediction shape {pred.shape} != truth shape {truth.shape}")
    return pred, truth


def confusion(pred, truth) -> ConfusionCounts:
    pred, truth = _pair(pred, truth)
    tp = int(np.count_nonzero(pred & truth))
    fp = int(np.count_nonzero(pred & ~truth))
    fn = int(np.count_nonzero(~pred & truth))
    return ConfusionCounts(tp, fp, fn, truth.size - tp - fp - fn)


def pixacc(pred, truth) -> float:
    """Per-image target-pixel recall."""
    return confusion(pred, truth).recall()


def iou(pred, truth) -> float:
    return confusion(pred, truth).iou()


def pixel_metrics(pairs) -> tuple[float, float, float, float]:
    """``(pixacc, miou, niou, f1)`` over a list of ``(pred, truth)`` masks."""
    counts = [confusion(p, t) for p, t in pairs]
    if not counts:
        raise ValueError("no mask pairs to evaluate")
    pooled = sum(counts, ConfusionCounts())
    niou = float(np.mean([c.iou() for c in counts]))
    return pooled.recall(), pooled.iou(), niou, pooled.f1()


def _components(mask):
    labels, n = kernels.label8(mask)
    if n == 0:
        return np.zeros((0, 2)), np.zeros(0, dtype=np.int64)
    ys, xs = np.nonzero(labels)
    ids = labels[ys, xs] - 1
    sizes = np.bincount(ids, minlength=n)
    cy = np.bincount(ids, weights=ys, minlength=n) / sizes
    cx = np.bincount(ids, weights=xs, minlength=n) / sizes
    return np.stack([cy, cx], axis=1), sizes


def match_components(pred, truth, params: DetectionParams = DetectionParams()):
    """Greedy centroid matching; returns ``(n_truth, n_matched, false_alarm_pixels)``."""
    pred, truth = _pair(pred, truth)
    t_cent, _ = _components(truth)
    p_cent, p_sizes = _components(pred)
    nt, npred = len(t_cent), len(p_cent)
    matched_pred = np.zeros(npred, dtype=bool)
    n_matched = 0
    if nt and npred:
        dist = np.sqrt(((t_cent[:, None, :] - p_cent[None, :, :]) ** 2).sum(axis=2))
        ti, pi = np.unravel_index(np.argsort(dist, axis=None, kind="stable"), dist.shape)
        matched_truth = np.zeros(nt, dtype=bool)
        for a, b in zip(ti, pi):
            if dist[a, b] > params.match_radius:
                break
            if matched_truth[a] or matched_pred[b]:
                continue
            matched_truth[a] = matched_pred[b] = True
            n_matched += 1
    fa_pixels = int(p_sizes[~matched_pred].sum()) if npred else 0
    return nt, n_matched, fa_pixels


def detection_metrics(pairs, params: DetectionParams = DetectionParams()) -> tuple[float, float]:
    """Dataset-pooled ``(pd, fa)``."""
    total_truth = total_matched = fa_pixels = total_pixels = 0
    for pred, truth in pairs:
        nt, nm, fa = match_components(pred, truth, params)
        total_truth += nt
        total_matched += nm
        fa_pixels += fa
        total_pixels += np.asarray(truth).size
    if total_pixels == 0:
        raise ValueError("no mask pairs to evaluate")
    return _ratio(total_matched, total_truth), fa_pixels / total_pixels


@dataclass
class EvalReport:
    pixacc: float
    miou: float
    niou: float
    pd: float
    fa: float
    f1: float
    per_image: list = field(default_factory=list)
    conventions: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    def to_table(self) -> str:
        """Plain-text row: rates in units of 1e-2, Fa in units of 1e-6."""
        head = ("PixAcc", "mIoU", "nIoU", "Pd", "Fa(e-6)", "F1")
        vals = (
            self.pixacc * 100,
            self.miou * 100,
            self.niou * 100,
            self.pd * 100,
            self.fa * 1e6,
            self.f1 * 100,
        )
        return "  ".join(f"{h:>8}" for h in head) + "\n" + "  ".join(f"{v:8.2f}" for v in vals)


def evaluate(pairs, params: DetectionParams = DetectionParams(), ids=None) -> EvalReport:
    pairs = [_pair(p, t) for p, t in pairs]
    ids = list(ids) if ids is not None else [str(k) for k in range(len(pairs))]
    pa, miou, niou, f1 = pixel_metrics(pairs)
    pd, fa = detection_metrics(pairs, params)
    per_image = []
    for name, (p, t) in zip(ids, pairs):
        c = confusion(p, t)
        nt, nm, fap = match_components(p, t, params)
        per_image.append(
            {"id": name, "tp": c.tp, "fp": c.fp, "fn": c.fn, "tn": c.tn, "iou": c.iou(),
             "targets": nt, "matched": nm, "false_alarm_pixels": fap}
        )
    conventions = {
        "pixacc": "pooled target-pixel recall",
        "miou": "pooled IoU",
        "niou": "mean per-image IoU",
        "pd_fa": f"greedy centroid matching, radius {params.match_radius}px, 8-connected",
    }
    return EvalReport(pa, miou, niou, pd, fa, f1, per_image, conventions)
