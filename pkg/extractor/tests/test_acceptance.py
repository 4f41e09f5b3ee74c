"""Extractor acceptance: one test per release criterion, PASS/FAIL lines.

Run with `pytest tests/test_acceptance.py -s`.
"""

from contextlib import contextmanager

import numpy as np
from dualstream.data import load_dataset, validate_dataset

from clipextract.augment import AugmentPlan, TransformParams, augment_frame
from clipextract.clips import sample_indices
from clipextract.pipeline import run_extraction

from conftest import write_video
from clipextract.clips import ClipSpec


@contextmanager
def criterion(name):
    try:
        yield
    except BaseException:
        print(f"[FAIL] {name}")
        raise
    print(f"[PASS] {name}")


def build_clips(tmp_path):
    specs = [
        ("vl", 30, 0, "train"),
        ("lo", 24, 1, "train"),
        ("hi", 20, 2, "train"),
        ("vh", 20, 3, "train"),
        ("va", 18, 0, "val"),
        ("te", 18, 1, "test"),
    ]
    clips = []
    for clip_id, frame_count, label, split in specs:
        video = write_video(tmp_path / f"{clip_id}.avi", frame_count)
        clips.append(ClipSpec(video_path=video, clip_id=clip_id, label=label, split=split))
    return clips


def test_emitted_dataset_has_zero_findings(tmp_path):
    with criterion("extractor output passes dataset validation with zero findings"):
        clips = build_clips(tmp_path)
        plan = AugmentPlan(multipliers={0: 3, 1: 2}, seed=1)
        result = run_extraction(clips, plan, tmp_path / "out", frames_per_clip=8)
        assert result.ok
        report = validate_dataset(result.manifest_path)
        assert report.findings == []


def test_hflip_involution_exact():
    with criterion("horizontal flip is an exact involution"):
        rng = np.random.default_rng(2)
        frame = rng.integers(0, 256, (80, 100, 3), dtype=np.uint8)
        params = TransformParams()
        once = augment_frame(frame, "hflip", params, rng)
        twice = augment_frame(once, "hflip", params, rng)
        assert np.array_equal(twice, frame)


def test_salt_pepper_flip_fraction():
    with criterion("salt-and-pepper flip fraction within +/-0.002 at 1e6 pixels"):
        density = 0.02
        frame = np.full((1000, 1000, 3), 127, np.uint8)
        out = augment_frame(
            frame,
            "salt_pepper",
            TransformParams(salt_pepper_density=density),
            np.random.default_rng(3),
        )
        changed = (out != frame).any(axis=2).mean()
        assert abs(changed - density) < 0.002


def test_uniform_sampling_indices_match_floor_formula():
    with criterion("uniform sampling indices match the floor formula (30/60/300)"):
        for frame_count in (30, 60, 300):
            expected = [k * frame_count // 60 for k in range(60)]
            assert sample_indices(frame_count, 60) == expected
        assert sample_indices(300, 60) == list(range(0, 300, 5))
        assert sample_indices(60, 60) == list(range(60))
        indices_30 = sample_indices(30, 60)
        assert all(indices_30.count(i) == 2 for i in range(30))


def test_augmented_copies_only_in_train(tmp_path):
    with criterion("augmented copies appear only in the train split"):
        clips = build_clips(tmp_path)
        plan = AugmentPlan(multipliers={0: 3, 1: 3}, seed=4)
        result = run_extraction(clips, plan, tmp_path / "out", frames_per_clip=8)
        ds = load_dataset(result.manifest_path)
        augmented = [r for r in ds.records if r.augmented]
        assert augmented, "expected augmented copies for the targeted train clips"
        assert all(r.split == "train" for r in augmented)
        # count contract: originals == clips, augmented == sum(multiplier - 1)
        assert result.originals == len(clips)
        targeted_train = [c for c in clips if c.split == "train" and c.label in (0, 1)]
        assert result.augmented == sum(3 - 1 for _ in targeted_train)
