"""Dynamic degradation benchmark: motion blur, synthetic noise, split policy.

Training images get a single mild blur setting on a fraction of the split;
test images get multi-angle blur on the same fraction and composite noise on
every image. Masks are never degraded.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.ndimage import correlate

from .imagecore import as_image, as_mask, make_rng

NOISE_KINDS = ("gaussian", "salt_pepper", "speckle", "uniform", "poisson")
COMPOSITE = "composite"


@dataclass(frozen=True)
class MotionBlurSpec:
    length: int = 5
    angle: float = 45.0

    def __post_init__(self):
        if self.length < 1:
            raise ValueError("blur length must be >= 1")


@dataclass(frozen=True)
class NoiseSpec:
    kind: str = COMPOSITE
    amount: float = 0.05

    def __post_init__(self):
        if self.kind not in NOISE_KINDS + (COMPOSITE,):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        # amount 0 is accepted as an explicit no-op
        if not 0.0 <= self.amount <= 1.0:
            raise ValueError("noise amount must lie in [0, 1]")


@dataclass(frozen=True)
class DegradationSpec:
    natural_fraction: float = 0.70
    train_blur: MotionBlurSpec = MotionBlurSpec()
    test_angles: tuple = (25.0, 45.0, 90.0, 135.0, 150.0)
    test_noise: NoiseSpec = NoiseSpec()
    split_fraction: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.natural_fraction <= 1.0 and 0.0 <= self.split_fraction <= 1.0):
            raise ValueError("fractions must lie in [0, 1]")
        if not self.test_angles:
            raise ValueError("test_angles must not be empty")
        object.__setattr__(self, "test_angles", tuple(float(a) for a in self.test_angles))

    @classmethod
    def from_dict(cls, d: dict) -> "DegradationSpec":
        d = dict(d)
        if "train_blur" in d:
            d["train_blur"] = MotionBlurSpec(**d["train_blur"])
        if "test_noise" in d:
            d["test_noise"] = NoiseSpec(**d["test_noise"])
        return cls(**d)


def motion_blur_kernel(spec: MotionBlurSpec) -> np.ndarray:
    """Normalised line kernel: ``length`` unit-spaced taps along ``angle``, bilinearly splatted.

    The kernel is square with odd side ``length`` (rounded up to odd). Angles
    are taken modulo 180 degrees so opposite directions give identical kernels.
    """
    n = spec.length
    size = n if n % 2 else n + 1
    c = size // 2
    theta = math.radians(spec.angle % 180.0)
    dx, dy = math.cos(theta), -math.sin(theta)
    k = np.zeros((size, size), dtype=np.float64)
    for i in range(n):
        t = i - (n - 1) / 2.0
        px, py = c + t * dx, c + t * dy
        x0, y0 = math.floor(px), math.floor(py)
        fx, fy = px - x0, py - y0
        for yy, wy in ((y0, 1.0 - fy), (y0 + 1, fy)):
            for xx, wx in ((x0, 1.0 - fx), (x0 + 1, fx)):
                wgt = wy * wx
                if wgt > 0.0:
                    k[yy, xx] += wgt
    return k / k.sum()


def motion_blur(img, spec: MotionBlurSpec) -> np.ndarray:
    img = as_image(img)
    if spec.length == 1:
        return img.copy()
    out = correlate(img, motion_blur_kernel(spec), mode="nearest")
    return np.clip(out, 0.0, 1.0)


def add_noise(img, spec: NoiseSpec, rng: np.random.Generator) -> np.ndarray:
    """Inject one noise family at strength ``amount``; output clamped to [0, 1].

    ``amount`` is the std for gaussian/speckle, the half-width for uniform, the
    flipped-pixel fraction for salt_pepper, and ``1 / peak`` photon count for
    poisson. ``composite`` applies all five in turn at ``amount / 5`` each.
    """
    img = as_image(img)
    a = spec.amount
    kind = spec.kind
    if kind == COMPOSITE:
        out = img
        for sub in NOISE_KINDS:
            out = add_noise(out, NoiseSpec(sub, a / len(NOISE_KINDS)), rng)
        return out
    if a == 0.0:
        return img.copy()
    if kind == "gaussian":
        out = img + rng.normal(0.0, a, img.shape)
    elif kind == "salt_pepper":
        flip = rng.random(img.shape) < a
        salt = rng.random(img.shape) < 0.5
        out = img.copy()
        out[flip & salt] = 1.0
        out[flip & ~salt] = 0.0
    elif kind == "speckle":
        out = img * (1.0 + rng.normal(0.0, a, img.shape))
    elif kind == "uniform":
        out = img + rng.uniform(-a, a, img.shape)
    else:  # poisson
        peak = 1.0 / a
        out = rng.poisson(img * peak) / peak
    return np.clip(out, 0.0, 1.0)


def _count(fraction: float, n: int) -> int:
    # guard floor() against 0.3 * 10 = 2.9999999999999996
    return int(math.floor(fraction * n + 1e-9))


@dataclass
class BenchmarkManifest:
    spec: dict
    records: list = field(default_factory=list)
    # id -> (degraded image, mask); not serialised
    samples: dict = field(default_factory=dict, repr=False)

    def split(self, name: str) -> list[dict]:
        return [r for r in self.records if r["split"] == name]

    def to_dict(self) -> dict:
        return {"spec": self.spec, "records": self.records}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def apply_record(img, record: dict) -> np.ndarray:
    """Replay one manifest record's degradations on the original image."""
    out = as_image(img)
    if record.get("blur"):
        out = motion_blur(out, MotionBlurSpec(record["blur"]["l"], record["blur"]["theta"]))
    if record.get("noise"):
        n = record["noise"]
        out = add_noise(out, NoiseSpec(n["kind"], n["amount"]), make_rng(n["seed"]))
    return out


def build_benchmark(images, spec: DegradationSpec = DegradationSpec(), rng: np.random.Generator | None = None) -> BenchmarkManifest:
    """Shuffle, split and degrade ``(image, mask, id)`` triples.

    Draw order (fixed, so a seed reproduces the manifest): permutation, train
    blur subset, test blur subset, test angles, per-image test noise seeds.
    """
    images = list(images)
    if not images:
        raise ValueError("build_benchmark needs at least one image")
    if rng is None:
        rng = make_rng(spec.seed)
    n = len(images)
    if len({str(name) for _, _, name in images}) != n:
        raise ValueError("image ids must be unique")
    order = [int(k) for k in rng.permutation(n)]
    n_train = _count(spec.split_fraction, n)
    train, test = order[:n_train], order[n_train:]
    blur_frac = 1.0 - spec.natural_fraction

    train_blur = set(int(k) for k in rng.choice(len(train), _count(blur_frac, len(train)), replace=False))
    test_blur = sorted(int(k) for k in rng.choice(len(test), _count(blur_frac, len(test)), replace=False))
    angles = {k: float(rng.choice(spec.test_angles)) for k in test_blur}
    noise_seeds = [int(s) for s in rng.integers(0, 2**63, size=len(test))]

    manifest = BenchmarkManifest(spec=asdict(spec))
    length = spec.train_blur.length
    for split, members in (("train", train), ("test", test)):
        for pos, idx in enumerate(members):
            img, mask, name = images[idx]
            record = {"id": str(name), "split": split, "blur": None, "noise": None}
            if split == "train" and pos in train_blur:
                record["blur"] = {"l": length, "theta": float(spec.train_blur.angle)}
            if split == "test":
                if pos in angles:
                    record["blur"] = {"l": length, "theta": angles[pos]}
                record["noise"] = {"kind": spec.test_noise.kind, "amount": spec.test_noise.amount, "seed": noise_seeds[pos]}
            manifest.records.append(record)
            manifest.samples[str(name)] = (apply_record(img, record), as_mask(mask).copy())
    return manifest
