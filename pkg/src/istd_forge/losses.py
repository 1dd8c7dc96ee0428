"""Loss formulas as plain functions over prediction/label grids.

Reductions are means over elements, so values do not depend on resolution.
"""

from __future__ import annotations

import numpy as np

EPS = 1e-8


def _grids(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def bce(pred, truth, eps: float = EPS) -> float:
    """Mean binary cross-entropy; ``pred`` is clipped to ``[eps, 1 - eps]``."""
    p, y = _grids(pred, truth)
    p = np.clip(p, eps, 1.0 - eps)
    return float(np.mean(-(y * np.log(p) + (1.0 - y) * np.log1p(-p))))


def multiscale_bce(scales) -> float:
    """Weighted sum of per-scale BCE over ``(pred, truth, weight)`` triples."""
    scales = list(scales)
    if not scales:
        raise ValueError("need at least one scale")
    total = 0.0
    for pred, truth, weight in scales:
        if not np.isfinite(weight) or weight < 0:
            raise ValueError(f"invalid scale weight {weight}")
        total += weight * bce(pred, truth)
    return total


def sup_loss(clean, noisy) -> float:
    """Mean squared difference between clean-branch and noisy-branch features."""
    a, b = _grids(clean, noisy)
    d = a - b
    return float(np.mean(d * d))


def total_loss(bce_val: float, sup_val: float) -> float:
    return bce_val + sup_val
