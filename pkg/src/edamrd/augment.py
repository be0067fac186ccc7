"""
Stochastic augmentation cascade for 224x224 grayscale diagrams.

Order: AugMix -> TrivialAugment -> probabilistic centre crop -> probabilistic
Gaussian blur -> Cutout A -> Cutout B. Every random choice is drawn from the
``numpy.random.Generator`` passed in, one call per image, so a seeded
generator reproduces the exact same output.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from PIL import Image, ImageEnhance, ImageOps
from scipy import ndimage

BACKGROUND = 255


def _pil(arr):
    return Image.fromarray(np.asarray(arr, dtype=np.uint8))


def _sign(rng):
    return 1.0 if rng.random() < 0.5 else -1.0


def _affine(img: Image.Image, matrix) -> Image.Image:
    return img.transform(img.size, Image.Transform.AFFINE, matrix, resample=Image.Resampling.BILINEAR,
                         fillcolor=BACKGROUND)


def op_identity(img, m, rng):
    return img


def op_rotate(img, m, rng):
    return img.rotate(_sign(rng) * 15.0 * m, resample=Image.Resampling.BILINEAR, fillcolor=BACKGROUND)


def op_translate_x(img, m, rng):
    return _affine(img, (1, 0, _sign(rng) * 0.1 * img.size[0] * m, 0, 1, 0))


def op_translate_y(img, m, rng):
    return _affine(img, (1, 0, 0, 0, 1, _sign(rng) * 0.1 * img.size[1] * m))


def op_shear_x(img, m, rng):
    return _affine(img, (1, _sign(rng) * np.tan(np.radians(10.0 * m)), 0, 0, 1, 0))


def op_shear_y(img, m, rng):
    return _affine(img, (1, 0, 0, _sign(rng) * np.tan(np.radians(10.0 * m)), 1, 0))


def op_translate(img, m, rng):
    return (op_translate_x if rng.random() < 0.5 else op_translate_y)(img, m, rng)


def op_shear(img, m, rng):
    return (op_shear_x if rng.random() < 0.5 else op_shear_y)(img, m, rng)


def op_contrast(img, m, rng):
    return ImageEnhance.Contrast(img).enhance(1.0 + _sign(rng) * 0.9 * m)


def op_brightness(img, m, rng):
    return ImageEnhance.Brightness(img).enhance(1.0 + _sign(rng) * 0.9 * m)


def op_sharpness(img, m, rng):
    return ImageEnhance.Sharpness(img).enhance(1.0 + _sign(rng) * 0.9 * m)


def op_posterize(img, m, rng):
    return ImageOps.posterize(img, int(8 - round(4 * m)))


def op_solarize(img, m, rng):
    return ImageOps.solarize(img, int(round(255 * (1.0 - m))))


def op_autocontrast(img, m, rng):
    return ImageOps.autocontrast(img)


def op_equalize(img, m, rng):
    return ImageOps.equalize(img)


OPS = {
    "identity": op_identity,
    "rotate": op_rotate,
    "translate": op_translate,
    "translate_x": op_translate_x,
    "translate_y": op_translate_y,
    "shear": op_shear,
    "shear_x": op_shear_x,
    "shear_y": op_shear_y,
    "contrast": op_contrast,
    "brightness": op_brightness,
    "sharpness": op_sharpness,
    "posterize": op_posterize,
    "solarize": op_solarize,
    "autocontrast": op_autocontrast,
    "equalize": op_equalize,
}

AUGMIX_OPS = ("rotate", "translate", "shear", "contrast", "brightness", "posterize")
TRIVIAL_OPS = ("identity", "rotate", "translate_x", "translate_y", "shear_x", "shear_y", "contrast",
               "brightness", "sharpness", "posterize", "solarize", "autocontrast", "equalize")


@dataclass(frozen=True)
class AugMixParams:
    ops: tuple[str, ...] = AUGMIX_OPS
    n_chains: int = 3
    depth: tuple[int, int] = (1, 3)
    dirichlet_alpha: float = 1.0
    blend_alpha: float = 1.0
    severity: float = 1.0


@dataclass(frozen=True)
class TrivialParams:
    ops: tuple[str, ...] = TRIVIAL_OPS
    magnitude_range: tuple[float, float] = (0.0, 1.0)


@dataclass(frozen=True)
class CropParams:
    prob_range: tuple[float, float] = (0.2, 0.5)
    size_range: tuple[int, int] = (160, 208)


@dataclass(frozen=True)
class BlurParams:
    prob: float = 0.3
    sigma_range: tuple[float, float] = (0.5, 1.5)


@dataclass(frozen=True)
class CutoutParams:
    counts: tuple[int, ...] = (2, 6)
    block: int = 32
    fill: int = BACKGROUND


@dataclass(frozen=True)
class AugPolicy:
    augmix: AugMixParams = field(default_factory=AugMixParams)
    trivial: TrivialParams = field(default_factory=TrivialParams)
    crop: CropParams = field(default_factory=CropParams)
    blur: BlurParams = field(default_factory=BlurParams)
    cutout: CutoutParams = field(default_factory=CutoutParams)

    def __post_init__(self):
        probs = [*self.crop.prob_range, self.blur.prob]
        if any(not 0.0 <= p <= 1.0 for p in probs):
            raise ValueError("augmentation probabilities must lie in [0, 1]")
        if self.cutout.block != 32:
            raise ValueError("cutout blocks are fixed at 32x32")
        unknown = set(self.augmix.ops) | set(self.trivial.ops)
        unknown -= set(OPS)
        if unknown:
            raise ValueError(f"unknown augmentation ops: {sorted(unknown)}")

    @classmethod
    def identity(cls) -> "AugPolicy":
        return cls(augmix=AugMixParams(ops=()), trivial=TrivialParams(ops=()),
                   crop=CropParams(prob_range=(0.0, 0.0)), blur=BlurParams(prob=0.0),
                   cutout=CutoutParams(counts=()))

    @classmethod
    def cutout_only(cls, counts=(2, 6)) -> "AugPolicy":
        base = cls.identity()
        return cls(augmix=base.augmix, trivial=base.trivial, crop=base.crop, blur=base.blur,
                   cutout=CutoutParams(counts=tuple(counts)))


def augmix(arr: np.ndarray, p: AugMixParams, rng) -> np.ndarray:
    if not p.ops or p.n_chains <= 0:
        return arr
    weights = rng.dirichlet([p.dirichlet_alpha] * p.n_chains)
    blend = rng.beta(p.blend_alpha, p.blend_alpha)
    base = _pil(arr)
    mix = np.zeros(arr.shape, dtype=float)
    for w in weights:
        img = base
        for _ in range(rng.integers(p.depth[0], p.depth[1] + 1)):
            name = p.ops[rng.integers(len(p.ops))]
            img = OPS[name](img, rng.uniform(0.0, p.severity), rng)
        mix += w * np.asarray(img, dtype=float)
    out = (1.0 - blend) * arr.astype(float) + blend * mix
    return np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)


def trivial_augment(arr: np.ndarray, p: TrivialParams, rng) -> np.ndarray:
    if not p.ops:
        return arr
    name = p.ops[rng.integers(len(p.ops))]
    m = rng.uniform(*p.magnitude_range)
    return np.asarray(OPS[name](_pil(arr), m, rng), dtype=np.uint8)


def center_crop(arr: np.ndarray, p: CropParams, rng) -> np.ndarray:
    prob = rng.uniform(*p.prob_range)
    if not rng.random() < prob:
        return arr
    H, W = arr.shape
    side = int(rng.integers(p.size_range[0], p.size_range[1] + 1))
    top, left = (H - side) // 2, (W - side) // 2
    crop = _pil(arr[top:top + side, left:left + side])
    return np.asarray(crop.resize((W, H), Image.Resampling.BILINEAR), dtype=np.uint8)


def gaussian_blur(arr: np.ndarray, p: BlurParams, rng) -> np.ndarray:
    if not rng.random() < p.prob:
        return arr
    sigma = rng.uniform(*p.sigma_range)
    out = ndimage.gaussian_filter(arr.astype(float), sigma, mode="nearest")
    return np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)


def cutout(arr: np.ndarray, p: CutoutParams, rng, trace=None) -> np.ndarray:
    out = arr
    H, W = arr.shape
    b = p.block
    for mask_id, count in enumerate(p.counts):
        for _ in range(count):
            y = int(rng.integers(0, H - b + 1))
            x = int(rng.integers(0, W - b + 1))
            if out is arr:
                out = arr.copy()
            out[y:y + b, x:x + b] = p.fill
            if trace is not None:
                trace.append(("cutout", mask_id, y, x))
    return out


def augment(image: np.ndarray, policy: AugPolicy, rng: np.random.Generator, trace=None) -> np.ndarray:
    """Apply the full cascade to one uint8 ``(H, W)`` image."""
    arr = np.asarray(image, dtype=np.uint8)
    arr = augmix(arr, policy.augmix, rng)
    arr = trivial_augment(arr, policy.trivial, rng)
    arr = center_crop(arr, policy.crop, rng)
    arr = gaussian_blur(arr, policy.blur, rng)
    arr = cutout(arr, policy.cutout, rng, trace)
    return arr
