"""Image representation, file I/O, resampling, gradients and seeded randomness.

Images are 2-D ``float64`` numpy arrays of shape ``(height, width)`` holding
luminance in ``[0, 1]``. Masks are 2-D boolean arrays. Everything here is a
pure function of its inputs.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image as PILImage


class ImageFormatError(ValueError):
    """Raised for unsupported image formats or bit depths."""


@dataclass(frozen=True)
class Rect:
    """Axis-aligned window in pixel units; ``(x, y)`` is the top-left corner."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.x < 0 or self.y < 0:
            raise ValueError(f"negative rect origin: {self}")
        if self.w < 1 or self.h < 1:
            raise ValueError(f"empty rect: {self}")

    def slices(self) -> tuple[slice, slice]:
        return slice(self.y, self.y + self.h), slice(self.x, self.x + self.w)

    def fits(self, width: int, height: int) -> bool:
        return self.x + self.w <= width and self.y + self.h <= height

    def to_dict(self) -> dict:
        return {"x": self.x, "y": self.y, "w": self.w, "h": self.h}


def as_image(data, *, clamp: bool = True) -> np.ndarray:
    """Coerce ``data`` to a float64 image, optionally clamping into [0, 1]."""
    img = np.asarray(data, dtype=np.float64)
    if img.ndim != 2 or img.size == 0:
        raise ValueError(f"expected a non-empty 2-D grid, got shape {img.shape}")
    if clamp:
        img = np.clip(img, 0.0, 1.0)
    return img


def as_mask(data) -> np.ndarray:
    mask = np.asarray(data)
    if mask.ndim != 2 or mask.size == 0:
        raise ValueError(f"expected a non-empty 2-D mask, got shape {mask.shape}")
    return mask.astype(bool)


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based (Philox) generator; same seed gives the same stream everywhere."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))


def split_rng(rng: np.random.Generator, n: int) -> list[np.random.Generator]:
    """Derive ``n`` independent child generators, one per worker."""
    return rng.spawn(n)


# --- file I/O -------------------------------------------------------------


def _read_pgm(path: Path) -> np.ndarray:
    raw = path.read_bytes()
    if raw[:2] != b"P5":
        raise ImageFormatError(f"{path}: only binary (P5) PGM is supported")
    fields: list[bytes] = []
    pos = 2
    while len(fields) < 3:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if raw[pos : pos + 1] == b"#":
            while pos < len(raw) and raw[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ImageFormatError(f"{path}: truncated PGM header")
        fields.append(raw[start:pos])
    pos += 1  # single whitespace byte after maxval
    try:
        width, height, maxval = (int(f) for f in fields)
    except ValueError as exc:
        raise ImageFormatError(f"{path}: malformed PGM header") from exc
    if not 0 < maxval < 65536:
        raise ImageFormatError(f"{path}: unsupported PGM maxval {maxval}")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    count = width * height
    if len(raw) - pos < count * dtype.itemsize:
        raise ImageFormatError(f"{path}: truncated PGM pixel data")
    data = np.frombuffer(raw, dtype=dtype, count=count, offset=pos)
    return data.reshape(height, width).astype(np.float64) / maxval


def _read_png(path: Path) -> np.ndarray:
    with PILImage.open(path) as im:
        if im.format != "PNG":
            raise ImageFormatError(f"{path}: not a PNG file")
        mode = im.mode
        if mode == "L":
            return np.asarray(im, dtype=np.float64) / 255.0
        if mode in ("I;16", "I;16B", "I;16L", "I"):
            # Pillow exposes 16-bit grayscale PNGs as I;16 or I
            arr = np.asarray(im, dtype=np.float64)
            return arr / 65535.0
        if mode == "1":
            return np.asarray(im, dtype=np.float64)
    raise ImageFormatError(f"{path}: unsupported PNG mode {mode!r} (grayscale only)")


def load_image(path) -> np.ndarray:
    """Read an 8/16-bit grayscale PNG or PGM into a [0, 1] float image."""
    path = Path(path)
    if not path.is_file():
        raise OSError(f"cannot read image: {path}")
    with path.open("rb") as fh:
        magic = fh.read(8)
    if magic[:2] == b"P5":
        return _read_pgm(path)
    if magic == b"\x89PNG\r\n\x1a\n":
        return _read_png(path)
    raise ImageFormatError(f"{path}: unsupported image format")


def load_mask(path) -> np.ndarray:
    return load_image(path) > 0.5


def save_image(img, path) -> None:
    """Write an image as 8-bit grayscale; PGM if the suffix is ``.pgm``, else PNG."""
    img = as_image(img)
    path = Path(path)
    data = np.round(img * 255.0).astype(np.uint8)
    if path.suffix.lower() == ".pgm":
        header = f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode()
        path.write_bytes(header + data.tobytes())
    else:
        PILImage.fromarray(data, mode="L").save(path, format="PNG")


def save_mask(mask, path) -> None:
    save_image(as_mask(mask).astype(np.float64), path)


IMAGE_SUFFIXES = (".png", ".pgm")


def list_images(directory) -> list[Path]:
    directory = Path(directory)
    if not directory.is_dir():
        raise OSError(f"not a directory: {directory}")
    return sorted(p for p in directory.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES and p.is_file())


# --- resampling -------------------------------------------------------------


def _axis_weights(n_in: int, n_out: int):
    # align_corners=False: output sample i sits at (i + 0.5) * n_in / n_out - 0.5
    pos = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
    pos = np.clip(pos, 0.0, n_in - 1)
    lo = np.floor(pos).astype(np.intp)
    hi = np.minimum(lo + 1, n_in - 1)
    frac = pos - lo
    return lo, hi, frac


def resize_bilinear(img, new_w: int, new_h: int) -> np.ndarray:
    """Bilinear resize with half-pixel sample centers (align_corners=False)."""
    if new_w < 1 or new_h < 1:
        raise ValueError(f"target dimensions must be >= 1, got {new_w}x{new_h}")
    img = as_image(img, clamp=False)
    h, w = img.shape
    y0, y1, fy = _axis_weights(h, new_h)
    x0, x1, fx = _axis_weights(w, new_w)
    top = img[y0][:, x0] * (1.0 - fx) + img[y0][:, x1] * fx
    bottom = img[y1][:, x0] * (1.0 - fx) + img[y1][:, x1] * fx
    out = top * (1.0 - fy)[:, None] + bottom * fy[:, None]
    # convex weights, so this only trims rounding overshoot
    return np.clip(out, img.min(), img.max())


# --- derivative filters ----------------------------------------------------


def _check_min_size(img: np.ndarray, op: str) -> None:
    if img.shape[0] < 3 or img.shape[1] < 3:
        raise ValueError(f"{op} needs an image of at least 3x3, got {img.shape[1]}x{img.shape[0]}")


def _sobel(img: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    p = np.pad(img, 1, mode="edge")
    # p[r:r+h, c:c+w] is the neighbour at offset (r-1, c-1)
    h, w = img.shape

    def nb(dr, dc):
        return p[1 + dr : 1 + dr + h, 1 + dc : 1 + dc + w]

    gx = (nb(-1, 1) + 2.0 * nb(0, 1) + nb(1, 1)) - (nb(-1, -1) + 2.0 * nb(0, -1) + nb(1, -1))
    gy = (nb(1, -1) + 2.0 * nb(1, 0) + nb(1, 1)) - (nb(-1, -1) + 2.0 * nb(-1, 0) + nb(-1, 1))
    return gx, gy


def _laplacian(img: np.ndarray) -> np.ndarray:
    p = np.pad(img, 1, mode="edge")
    return p[:-2, 1:-1] + p[2:, 1:-1] + p[1:-1, :-2] + p[1:-1, 2:] - 4.0 * img


def sobel_gradients(img) -> tuple[np.ndarray, np.ndarray]:
    """3x3 Sobel responses ``(gx, gy)`` with replicate padding.

    ``gx`` is positive where intensity increases to the right, ``gy`` where it
    increases downwards.
    """
    img = as_image(img, clamp=False)
    _check_min_size(img, "sobel_gradients")
    return _sobel(img)


def gradient_magnitude(img) -> np.ndarray:
    gx, gy = _sobel(as_image(img, clamp=False))
    return np.sqrt(gx * gx + gy * gy)


def laplacian(img) -> np.ndarray:
    """4-neighbour Laplacian with replicate padding."""
    img = as_image(img, clamp=False)
    _check_min_size(img, "laplacian")
    return _laplacian(img)


def default_jobs() -> int:
    try:
        return max(1, int(os.environ.get("ISTD_FORGE_JOBS", "1")))
    except ValueError:
        return 1
