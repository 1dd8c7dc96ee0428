"""Reference Python/numpy implementations of the hot kernels.

Same signatures and semantics as the compiled ``_ckernels`` module; used when
the extension is unavailable or ``ISTD_FORGE_PURE_PYTHON`` is set.
"""

from collections import deque

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def ssim_scan(patch, background, ys, xs, c1, c2):
    """Whole-window SSIM of ``patch`` against every window at ``ys x xs`` origins."""
    patch = np.ascontiguousarray(patch, dtype=np.float64)
    background = np.ascontiguousarray(background, dtype=np.float64)
    h, w = patch.shape
    ys = np.asarray(ys, dtype=np.intp)
    xs = np.asarray(xs, dtype=np.intp)

    mu_p = patch.mean()
    pc = patch - mu_p
    var_p = np.mean(pc * pc)

    windows = sliding_window_view(background, (h, w))[ys][:, xs]
    mu_w = windows.mean(axis=(2, 3))
    wc = windows - mu_w[:, :, None, None]
    var_w = np.mean(wc * wc, axis=(2, 3))
    cov = np.mean(wc * pc, axis=(2, 3))

    num = (2.0 * mu_p * mu_w + c1) * (2.0 * cov + c2)
    den = (mu_p * mu_p + mu_w * mu_w + c1) * (var_p + var_w + c2)
    return num / den


_OFFSETS8 = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]


def label8(mask):
    """8-connected labelling; labels 1..n numbered by raster order of first pixel."""
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    labels = np.zeros((h, w), dtype=np.int32)
    n = 0
    for y0, x0 in zip(*np.nonzero(mask)):
        if labels[y0, x0]:
            continue
        n += 1
        labels[y0, x0] = n
        queue = deque([(y0, x0)])
        while queue:
            y, x = queue.popleft()
            for dy, dx in _OFFSETS8:
                yy, xx = y + dy, x + dx
                if 0 <= yy < h and 0 <= xx < w and mask[yy, xx] and not labels[yy, xx]:
                    labels[yy, xx] = n
                    queue.append((yy, xx))
    return labels, n


def _apply_poisson(x):
    # 4x - sum of 4-neighbours, zero outside the grid
    out = 4.0 * x
    out[1:, :] -= x[:-1, :]
    out[:-1, :] -= x[1:, :]
    out[:, 1:] -= x[:, :-1]
    out[:, :-1] -= x[:, 1:]
    return out


def cg_poisson(x0, b, tol, max_iter):
    """Conjugate gradient on the 5-point system ``(4I - adjacency) x = b``.

    Returns ``(x, relative_residual, iterations, converged)``.
    """
    x = np.array(x0, dtype=np.float64, copy=True)
    b = np.asarray(b, dtype=np.float64)
    b_norm = float(np.sqrt(np.sum(b * b)))
    if b_norm == 0.0:
        return np.zeros_like(x), 0.0, 0, True

    r = b - _apply_poisson(x)
    rs = float(np.sum(r * r))
    rel = np.sqrt(rs) / b_norm
    if rel <= tol:
        return x, rel, 0, True
    p = r.copy()
    it = 0
    while it < max_iter:
        it += 1
        ap = _apply_poisson(p)
        alpha = rs / float(np.sum(p * ap))
        x += alpha * p
        r -= alpha * ap
        rs_new = float(np.sum(r * r))
        rel = np.sqrt(rs_new) / b_norm
        if rel <= tol:
            # confirm against the true residual before stopping
            r = b - _apply_poisson(x)
            rs_new = float(np.sum(r * r))
            rel = np.sqrt(rs_new) / b_norm
            if rel <= tol:
                return x, rel, it, True
            p = r.copy()
            rs = rs_new
            continue
        p = r + (rs_new / rs) * p
        rs = rs_new
    return x, rel, it, False
