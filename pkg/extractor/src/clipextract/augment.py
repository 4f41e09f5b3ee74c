"""Frame-level augmentation for minority-class oversampling.

Transforms: salt_pepper, translate, brightness_contrast, gaussian_blur,
hflip, elastic. Each augmented copy of a clip applies one randomly chosen
enabled transform to every frame (composition stays off by default). All
randomness flows through the generator passed in, so copies are
reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import cv2
import numpy as np
from scipy.ndimage import gaussian_filter, map_coordinates

from .errors import ConfigError

TRANSFORMS = (
    "salt_pepper",
    "translate",
    "brightness_contrast",
    "gaussian_blur",
    "hflip",
    "elastic",
)

# hard limits from the pipeline contract
MAX_SALT_PEPPER_DENSITY = 0.1
MAX_TRANSLATE_FRACTION = 0.1
MAX_BRIGHTNESS_SHIFT = 0.25
CONTRAST_LIMITS = (0.75, 1.25)
BLUR_SIGMA_RANGE = (0.5, 2.0)
MAX_ELASTIC_ALPHA = 34.0
MIN_ELASTIC_SIGMA = 4.0


@dataclass
class TransformParams:
    """Per-transform knobs, validated against the declared ranges."""

    salt_pepper_density: float = 0.02
    translate_fraction: float = 0.05
    brightness_shift: float = 0.15  # fraction of full scale, sampled in +/-
    contrast_range: tuple[float, float] = (0.85, 1.15)
    blur_sigma_range: tuple[float, float] = (0.5, 2.0)
    elastic_alpha: float = 20.0
    elastic_sigma: float = 5.0

    def validate(self) -> None:
        if not (0.0 <= self.salt_pepper_density <= MAX_SALT_PEPPER_DENSITY):
            raise ConfigError(
                f"salt_pepper density {self.salt_pepper_density} outside "
                f"[0, {MAX_SALT_PEPPER_DENSITY}]"
            )
        if not (0.0 <= self.translate_fraction <= MAX_TRANSLATE_FRACTION):
            raise ConfigError(
                f"translate fraction {self.translate_fraction} outside "
                f"[0, {MAX_TRANSLATE_FRACTION}]"
            )
        if not (0.0 <= self.brightness_shift <= MAX_BRIGHTNESS_SHIFT):
            raise ConfigError(
                f"brightness shift {self.brightness_shift} outside "
                f"[0, {MAX_BRIGHTNESS_SHIFT}]"
            )
        lo, hi = self.contrast_range
        if not (CONTRAST_LIMITS[0] <= lo <= hi <= CONTRAST_LIMITS[1]):
            raise ConfigError(f"contrast range {self.contrast_range} outside {CONTRAST_LIMITS}")
        lo, hi = self.blur_sigma_range
        if not (BLUR_SIGMA_RANGE[0] <= lo <= hi <= BLUR_SIGMA_RANGE[1]):
            raise ConfigError(f"blur sigma range {self.blur_sigma_range} outside {BLUR_SIGMA_RANGE}")
        if not (0.0 < self.elastic_alpha <= MAX_ELASTIC_ALPHA):
            raise ConfigError(f"elastic alpha {self.elastic_alpha} outside (0, {MAX_ELASTIC_ALPHA}]")
        if self.elastic_sigma < MIN_ELASTIC_SIGMA:
            raise ConfigError(f"elastic sigma {self.elastic_sigma} below {MIN_ELASTIC_SIGMA}")


@dataclass
class AugmentPlan:
    """Which train-split classes get extra copies, and how the copies differ."""

    multipliers: dict[int, int] = field(default_factory=lambda: {0: 3, 1: 3})
    transforms: tuple[str, ...] = TRANSFORMS
    params: TransformParams = field(default_factory=TransformParams)
    seed: int = 0

    def __post_init__(self):
        for label, multiplier in self.multipliers.items():
            if not (0 <= label <= 3):
                raise ConfigError(f"target class {label} outside 0-3")
            if multiplier < 1:
                raise ConfigError(f"multiplier for class {label} must be >= 1")
        unknown = set(self.transforms) - set(TRANSFORMS)
        if unknown:
            raise ConfigError(f"unknown transforms: {sorted(unknown)}")
        if not self.transforms:
            raise ConfigError("at least one transform must be enabled")
        self.params.validate()

    def copies_for(self, label: int, split: str) -> int:
        if split != "train":
            return 0
        return self.multipliers.get(label, 1) - 1


def _salt_pepper(frame, density, rng):
    if density == 0.0:
        return frame.copy()
    out = frame.copy()
    mask = rng.random(frame.shape[:2]) < density
    salt = rng.random(frame.shape[:2]) < 0.5
    out[mask & salt] = 255
    out[mask & ~salt] = 0
    return out


def _translate(frame, fraction, rng):
    height, width = frame.shape[:2]
    dx = int(rng.integers(-int(width * fraction), int(width * fraction) + 1))
    dy = int(rng.integers(-int(height * fraction), int(height * fraction) + 1))
    matrix = np.array([[1.0, 0.0, dx], [0.0, 1.0, dy]])
    return cv2.warpAffine(
        frame, matrix, (width, height), borderMode=cv2.BORDER_REPLICATE
    )


def _brightness_contrast(frame, shift, contrast_range, rng):
    alpha = rng.uniform(*contrast_range)
    beta = rng.uniform(-shift, shift) * 255.0
    return np.clip(frame.astype(np.float64) * alpha + beta, 0, 255).astype(np.uint8)


def _gaussian_blur(frame, sigma_range, rng):
    sigma = rng.uniform(*sigma_range)
    return cv2.GaussianBlur(frame, (0, 0), sigmaX=sigma, sigmaY=sigma)


def _elastic(frame, alpha, sigma, rng):
    height, width = frame.shape[:2]
    dx = gaussian_filter(rng.uniform(-1, 1, (height, width)), sigma) * alpha
    dy = gaussian_filter(rng.uniform(-1, 1, (height, width)), sigma) * alpha
    ys, xs = np.meshgrid(np.arange(height), np.arange(width), indexing="ij")
    coords = [ys + dy, xs + dx]
    if frame.ndim == 2:
        return map_coordinates(frame, coords, order=1, mode="reflect").astype(frame.dtype)
    channels = [
        map_coordinates(frame[..., c], coords, order=1, mode="reflect")
        for c in range(frame.shape[2])
    ]
    return np.stack(channels, axis=-1).astype(frame.dtype)


def augment_frame(
    frame: np.ndarray,
    transform: str,
    params: TransformParams,
    rng: np.random.Generator,
) -> np.ndarray:
    """Apply one named transform; output has the input's shape and dtype."""
    params.validate()
    if transform == "salt_pepper":
        out = _salt_pepper(frame, params.salt_pepper_density, rng)
    elif transform == "translate":
        out = _translate(frame, params.translate_fraction, rng)
    elif transform == "brightness_contrast":
        out = _brightness_contrast(frame, params.brightness_shift, params.contrast_range, rng)
    elif transform == "gaussian_blur":
        out = _gaussian_blur(frame, params.blur_sigma_range, rng)
    elif transform == "hflip":
        out = frame[:, ::-1].copy()
    elif transform == "elastic":
        out = _elastic(frame, params.elastic_alpha, params.elastic_sigma, rng)
    else:
        raise ConfigError(f"unknown transform {transform!r}")
    assert out.shape == frame.shape
    return out
