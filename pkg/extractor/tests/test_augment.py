"""Augmentation transform semantics and parameter-range enforcement."""

import numpy as np
import pytest

from clipextract.augment import (
    TRANSFORMS,
    AugmentPlan,
    TransformParams,
    augment_frame,
)
from clipextract.errors import ConfigError


def checker_frame(height=48, width=64):
    frame = np.zeros((height, width, 3), np.uint8)
    frame[::2, ::3] = (200, 60, 130)
    frame[10:20, 30:50] = (10, 240, 90)
    return frame


class TestHflip:
    def test_involution_is_exact(self):
        frame = checker_frame()
        params = TransformParams()
        rng = np.random.default_rng(0)
        once = augment_frame(frame, "hflip", params, rng)
        twice = augment_frame(once, "hflip", params, rng)
        assert np.array_equal(twice, frame)

    def test_flip_actually_flips(self):
        frame = checker_frame()
        flipped = augment_frame(frame, "hflip", TransformParams(), np.random.default_rng(0))
        assert np.array_equal(flipped, frame[:, ::-1])


class TestSaltPepper:
    def test_zero_density_is_identity(self):
        frame = checker_frame()
        params = TransformParams(salt_pepper_density=0.0)
        out = augment_frame(frame, "salt_pepper", params, np.random.default_rng(1))
        assert np.array_equal(out, frame)

    def test_flip_fraction_matches_density(self):
        density = 0.02
        frame = np.full((1000, 1000, 3), 127, np.uint8)  # 10^6 pixels
        params = TransformParams(salt_pepper_density=density)
        out = augment_frame(frame, "salt_pepper", params, np.random.default_rng(2))
        changed = (out != frame).any(axis=2).mean()
        assert abs(changed - density) < 0.002

    def test_density_out_of_range(self):
        with pytest.raises(ConfigError):
            TransformParams(salt_pepper_density=0.2).validate()


class TestGeometric:
    def test_translate_preserves_shape(self):
        frame = checker_frame()
        out = augment_frame(frame, "translate", TransformParams(), np.random.default_rng(3))
        assert out.shape == frame.shape

    def test_translate_fraction_bound(self):
        with pytest.raises(ConfigError):
            TransformParams(translate_fraction=0.5).validate()

    def test_elastic_same_shape_and_differs(self):
        frame = checker_frame()
        out = augment_frame(frame, "elastic", TransformParams(), np.random.default_rng(4))
        assert out.shape == frame.shape
        assert not np.array_equal(out, frame)

    def test_elastic_parameter_limits(self):
        with pytest.raises(ConfigError):
            TransformParams(elastic_alpha=50.0).validate()
        with pytest.raises(ConfigError):
            TransformParams(elastic_sigma=1.0).validate()


class TestPhotometric:
    def test_brightness_contrast_changes_pixels(self):
        frame = checker_frame()
        out = augment_frame(
            frame, "brightness_contrast", TransformParams(), np.random.default_rng(5)
        )
        assert out.shape == frame.shape
        assert out.dtype == np.uint8
        assert not np.array_equal(out, frame)

    def test_brightness_limit(self):
        with pytest.raises(ConfigError):
            TransformParams(brightness_shift=0.3).validate()

    def test_contrast_limits(self):
        with pytest.raises(ConfigError):
            TransformParams(contrast_range=(0.5, 1.0)).validate()

    def test_blur_smooths(self):
        frame = checker_frame()
        out = augment_frame(frame, "gaussian_blur", TransformParams(), np.random.default_rng(6))
        assert out.shape == frame.shape
        assert out.astype(int).std() < frame.astype(int).std()

    def test_blur_sigma_limits(self):
        with pytest.raises(ConfigError):
            TransformParams(blur_sigma_range=(0.1, 1.0)).validate()


class TestDeterminism:
    @pytest.mark.parametrize("transform", TRANSFORMS)
    def test_same_rng_state_same_output(self, transform):
        frame = checker_frame()
        params = TransformParams()
        a = augment_frame(frame, transform, params, np.random.default_rng(7))
        b = augment_frame(frame, transform, params, np.random.default_rng(7))
        assert np.array_equal(a, b)


class TestPlan:
    def test_default_targets_minority_classes(self):
        plan = AugmentPlan()
        assert plan.copies_for(0, "train") == 2
        assert plan.copies_for(1, "train") == 2
        assert plan.copies_for(2, "train") == 0

    def test_never_augments_outside_train(self):
        plan = AugmentPlan()
        assert plan.copies_for(0, "val") == 0
        assert plan.copies_for(0, "test") == 0

    def test_validation(self):
        with pytest.raises(ConfigError):
            AugmentPlan(multipliers={0: 0})
        with pytest.raises(ConfigError):
            AugmentPlan(multipliers={7: 2})
        with pytest.raises(ConfigError):
            AugmentPlan(transforms=("warp",))
        with pytest.raises(ConfigError):
            AugmentPlan(transforms=())

    def test_unknown_transform_rejected_at_apply(self):
        with pytest.raises(ConfigError):
            augment_frame(checker_frame(), "warp", TransformParams(), np.random.default_rng(8))
