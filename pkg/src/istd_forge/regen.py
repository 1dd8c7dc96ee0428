"""Re-generation of training composites.

Hard target patches are matched against background images by whole-window
SSIM, assigned under a per-target usage cap, and pasted in with gradient-domain
(Poisson) blending so that the seam follows the background.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import kernels
from .harvest import TargetPatch
from .imagecore import Rect, as_image


class ConvergenceError(RuntimeError):
    def __init__(self, residual: float, iterations: int):
        super().__init__(f"Poisson solve did not converge: relative residual {residual:.3e} after {iterations} iterations")
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class SsimParams:
    c1: float = 0.01**2
    c2: float = 0.03**2
    stride: int = 8

    def __post_init__(self):
        if not (self.c1 > 0 and self.c2 > 0):
            raise ValueError("SSIM constants must be positive")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")


@dataclass(frozen=True)
class MatchResult:
    target_index: int
    background_index: int
    pos: Rect
    score: float

    def to_dict(self) -> dict:
        return {"target": self.target_index, "background": self.background_index, "pos": self.pos.to_dict(), "score": self.score}


@dataclass(frozen=True)
class RegenConfig:
    ssim_threshold: float = 0.5
    top_k: int = 10
    max_usage: int = 3
    solver_tol: float = 1e-5
    solver_max_iter: int = 10000
    solver: str = "cg"

    def __post_init__(self):
        if self.top_k < 1 or self.max_usage < 1:
            raise ValueError("top_k and max_usage must be >= 1")
        if not self.solver_tol > 0 or self.solver_max_iter < 1:
            raise ValueError("invalid solver settings")
        if self.solver not in ("cg", "jacobi"):
            raise ValueError(f"unknown solver {self.solver!r}")


def ssim(a, b, p: SsimParams = SsimParams()) -> float:
    """Single-window SSIM over the whole patch with population statistics."""
    a = as_image(a, clamp=False)
    b = as_image(b, clamp=False)
    if a.shape != b.shape:
        raise ValueError(f"ssim needs equal shapes, got {a.shape} and {b.shape}")
    mu_a, mu_b = a.mean(), b.mean()
    da, db = a - mu_a, b - mu_b
    var_a, var_b = np.mean(da * da), np.mean(db * db)
    cov = np.mean(da * db)
    num = (2.0 * mu_a * mu_b + p.c1) * (2.0 * cov + p.c2)
    den = (mu_a * mu_a + mu_b * mu_b + p.c1) * (var_a + var_b + p.c2)
    return float(num / den)


def _origins(extent: int, size: int, stride: int) -> np.ndarray:
    last = extent - size
    out = list(range(0, last + 1, stride))
    if out[-1] != last:
        out.append(last)
    return np.asarray(out, dtype=np.intp)


def _patch_pixels(patch) -> np.ndarray:
    return patch.pixels if isinstance(patch, TargetPatch) else as_image(patch)


def best_window(target_patch, background, p: SsimParams = SsimParams(), *, target_index: int = 0, background_index: int = 0) -> MatchResult:
    """Highest-SSIM window of ``background`` for the patch; ties go to smallest ``(y, x)``.

    Origins are every ``stride``-aligned position plus the right- and
    bottom-aligned ones.
    """
    pix = _patch_pixels(target_patch)
    background = as_image(background)
    h, w = pix.shape
    bh, bw = background.shape
    if h > bh or w > bw:
        raise ValueError(f"patch {w}x{h} larger than background {bw}x{bh}")
    ys = _origins(bh, h, p.stride)
    xs = _origins(bw, w, p.stride)
    grid = kernels.ssim_scan(pix, background, ys, xs, p.c1, p.c2)
    i, j = np.unravel_index(int(np.argmax(grid)), grid.shape)
    pos = Rect(int(xs[j]), int(ys[i]), w, h)
    score = ssim(pix, background[pos.slices()], p)
    return MatchResult(target_index, background_index, pos, score)


def assign(targets, backgrounds, cfg: RegenConfig = RegenConfig(), p: SsimParams = SsimParams(), rng: np.random.Generator | None = None) -> list[MatchResult]:
    """Usage-capped target/background assignment.

    For every background in order: score all targets, keep scores >= threshold,
    sort descending (ties to the lower target index), keep the first ``top_k``,
    shuffle them with ``rng.permutation`` and take the first target still under
    ``max_usage``. Mutates ``usage_count`` on the chosen targets.
    """
    targets = list(targets)
    backgrounds = list(backgrounds)
    if not targets or not backgrounds:
        raise ValueError("assign needs at least one target and one background")
    if rng is None:
        raise ValueError("assign needs an rng")
    results = []
    for n, bg in enumerate(backgrounds):
        cands = [best_window(t, bg, p, target_index=m, background_index=n) for m, t in enumerate(targets)]
        cands = [c for c in cands if c.score >= cfg.ssim_threshold]
        cands.sort(key=lambda c: (-c.score, c.target_index))
        top = cands[: cfg.top_k]
        if not top:
            continue
        for k in rng.permutation(len(top)):
            cand = top[k]
            target = targets[cand.target_index]
            if target.usage_count < cfg.max_usage:
                target.usage_count += 1
                results.append(cand)
                break
    return results


def _blend_system(src: np.ndarray, window: np.ndarray):
    """Right-hand side and initial guess of the interior Dirichlet problem."""
    guidance = (
        4.0 * src[1:-1, 1:-1] - src[:-2, 1:-1] - src[2:, 1:-1] - src[1:-1, :-2] - src[1:-1, 2:]
    )
    ring = window.copy()
    ring[1:-1, 1:-1] = 0.0
    boundary = ring[:-2, 1:-1] + ring[2:, 1:-1] + ring[1:-1, :-2] + ring[1:-1, 2:]
    return guidance + boundary, window[1:-1, 1:-1].copy()


def _jacobi(x0, b, tol, max_iter):
    x = x0.copy()
    b_norm = float(np.sqrt(np.sum(b * b)))
    if b_norm == 0.0:
        return np.zeros_like(x), 0.0, 0, True

    def neighbours(v):
        s = np.zeros_like(v)
        s[1:, :] += v[:-1, :]
        s[:-1, :] += v[1:, :]
        s[:, 1:] += v[:, :-1]
        s[:, :-1] += v[:, 1:]
        return s

    for it in range(max_iter + 1):
        r = b - (4.0 * x - neighbours(x))
        rel = float(np.sqrt(np.sum(r * r))) / b_norm
        if rel <= tol:
            return x, rel, it, True
        if it == max_iter:
            break
        x = (b + neighbours(x)) / 4.0
    return x, rel, max_iter, False


def solve_blend(target_patch, background, pos: Rect, cfg: RegenConfig = RegenConfig()) -> tuple[np.ndarray, float, int]:
    """Poisson-blend the patch into ``background`` at ``pos``.

    Inside the window's 1-px boundary ring the result has the patch's discrete
    Laplacian; the ring and everything outside stay equal to the background.
    Returns ``(image, relative_residual, iterations)``.
    """
    src = _patch_pixels(target_patch)
    background = as_image(background)
    bh, bw = background.shape
    if not pos.fits(bw, bh):
        raise ValueError(f"window {pos} outside {bw}x{bh} background")
    if (pos.h, pos.w) != src.shape:
        raise ValueError(f"window {pos.w}x{pos.h} does not match patch {src.shape[1]}x{src.shape[0]}")
    if pos.h < 3 or pos.w < 3:
        raise ValueError("window has no interior pixels")

    window = background[pos.slices()]
    b, x0 = _blend_system(src, window)
    solve = kernels.cg_poisson if cfg.solver == "cg" else _jacobi
    x, residual, iters, ok = solve(x0, b, cfg.solver_tol, cfg.solver_max_iter)
    if not ok:
        raise ConvergenceError(float(residual), int(iters))
    out = background.copy()
    out[pos.y + 1 : pos.y + pos.h - 1, pos.x + 1 : pos.x + pos.w - 1] = np.clip(x, 0.0, 1.0)
    return out, float(residual), int(iters)


def poisson_blend(target_patch, background, pos: Rect, cfg: RegenConfig = RegenConfig()) -> np.ndarray:
    return solve_blend(target_patch, background, pos, cfg)[0]


@dataclass
class Composite:
    image: np.ndarray
    mask: np.ndarray
    match: MatchResult
    residual: float
    iterations: int


def _composite(targets, backgrounds, match, cfg):
    patch = targets[match.target_index]
    bg = as_image(backgrounds[match.background_index])
    img, res, iters = solve_blend(patch, bg, match.pos, cfg)
    mask = np.zeros(bg.shape, dtype=bool)
    mask[match.pos.slices()] = patch.mask
    return Composite(img, mask, match, res, iters)


def regenerate_composites(targets, backgrounds, cfg: RegenConfig = RegenConfig(), p: SsimParams = SsimParams(), rng=None, jobs: int = 1) -> list[Composite]:
    targets = list(targets)
    backgrounds = list(backgrounds)
    matches = assign(targets, backgrounds, cfg, p, rng)
    if jobs > 1 and len(matches) > 1:
        with ThreadPoolExecutor(jobs) as pool:
            return list(pool.map(lambda m: _composite(targets, backgrounds, m, cfg), matches))
    return [_composite(targets, backgrounds, m, cfg) for m in matches]


def regenerate(targets, backgrounds, cfg: RegenConfig = RegenConfig(), p: SsimParams = SsimParams(), rng=None) -> list[tuple[np.ndarray, np.ndarray]]:
    """Assign, blend, and return ``(composite, label mask)`` pairs."""
    return [(c.image, c.mask) for c in regenerate_composites(targets, backgrounds, cfg, p, rng)]
