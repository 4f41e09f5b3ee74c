"""End-to-end extraction: frames -> two feature streams -> sample files.

Per clip: sample T frames, build the full-frame stream and the face-crop
stream, run the backbone on both, and write one sample file. Train-split
clips of the augmentation targets additionally get multiplier-1 augmented
copies (one randomly chosen transform per copy, applied to the frames before
feature extraction, clip id suffixed, augmented flag set). Augmentation never
touches val or test. Failures are logged and skipped; the manifest is
assembled in clip order at the end.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import cv2
import numpy as np
from dualstream.data import (
    FeatureSequence,
    ManifestEntry,
    Sample,
    file_checksum,
    write_manifest,
    write_sample,
)

from .augment import AugmentPlan, augment_frame
from .backbone import build_backbone
from .clips import ClipSpec, sample_frames
from .errors import ConfigError, ExtractorError
from .faces import FaceDetector, crop_face

log = logging.getLogger("clipextract")

REGIONS = ("full", "face")


def extract_features(
    frames: list[np.ndarray],
    region: str,
    backbone,
    detector: FaceDetector | None = None,
) -> np.ndarray:
    """T x D features for one region; face region crops before resizing."""
    if region not in REGIONS:
        raise ConfigError(f"region must be one of {REGIONS}, got {region!r}")
    if region == "face":
        frames = [crop_face(frame, detector)[0] for frame in frames]
    width, height = backbone.input_size[1], backbone.input_size[0]
    resized = [cv2.resize(frame, (width, height), interpolation=cv2.INTER_AREA)
               for frame in frames]
    return backbone.features(resized)


def _clip_samples(
    clip: ClipSpec,
    clip_index: int,
    frames_per_clip: int,
    plan: AugmentPlan | None,
    backbone,
    detector: FaceDetector,
) -> list[Sample]:
    frames = sample_frames(clip, frames_per_clip)

    def to_sample(frame_list, clip_id, augmented):
        scene = extract_features(frame_list, "full", backbone)
        face = extract_features(frame_list, "face", backbone, detector)
        return Sample(
            clip_id=clip_id,
            label=clip.label,
            split=clip.split,
            scene=FeatureSequence(scene.astype(np.float32)),
            face=FeatureSequence(face.astype(np.float32)),
            augmented=augmented,
        )

    samples = [to_sample(frames, clip.clip_id, False)]
    copies = plan.copies_for(clip.label, clip.split) if plan else 0
    for copy in range(copies):
        rng = np.random.default_rng([plan.seed, clip_index, copy])
        transform = plan.transforms[int(rng.integers(len(plan.transforms)))]
        augmented_frames = [augment_frame(f, transform, plan.params, rng) for f in frames]
        samples.append(to_sample(augmented_frames, f"{clip.clip_id}-aug{copy + 1}", True))
    return samples


# worker-process state, set once per process by _init_worker
_CTX: dict = {}


def _init_worker(backbone_spec, frames_per_clip, plan):
    _CTX["backbone"] = build_backbone(*backbone_spec)
    _CTX["detector"] = FaceDetector()
    _CTX["frames_per_clip"] = frames_per_clip
    _CTX["plan"] = plan


def _worker(task):
    clip, clip_index, out_dir = task
    try:
        samples = _clip_samples(
            clip,
            clip_index,
            _CTX["frames_per_clip"],
            _CTX["plan"],
            _CTX["backbone"],
            _CTX["detector"],
        )
        entries = []
        for sample in samples:
            path = write_sample(sample, out_dir)
            entries.append(
                ManifestEntry(
                    clip_id=sample.clip_id,
                    path=path.name,
                    label=sample.label,
                    split=sample.split,
                    augmented=sample.augmented,
                    checksum=file_checksum(path),
                )
            )
        return entries, None
    except (ExtractorError, OSError, ValueError) as e:
        return [], f"{clip.clip_id}: {e}"


@dataclass
class ExtractionResult:
    manifest_path: Path
    originals: int = 0
    augmented: int = 0
    failures: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def run_extraction(
    clips: list[ClipSpec],
    plan: AugmentPlan | None,
    out_dir: str | Path,
    backbone_spec: tuple = ("tiny", 64, None),
    frames_per_clip: int = 60,
    workers: int = 1,
) -> ExtractionResult:
    """Extract every clip, write samples plus the manifest, report failures."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tasks = [(clip, i, out_dir) for i, clip in enumerate(clips)]

    if workers <= 1:
        _init_worker(backbone_spec, frames_per_clip, plan)
        outcomes = [_worker(task) for task in tasks]
    else:
        with ProcessPoolExecutor(
            max_workers=workers,
            initializer=_init_worker,
            initargs=(backbone_spec, frames_per_clip, plan),
        ) as pool:
            outcomes = list(pool.map(_worker, tasks))

    entries: list[ManifestEntry] = []
    result = ExtractionResult(manifest_path=out_dir / "manifest.jsonl")
    for (clip_entries, failure) in outcomes:
        if failure is not None:
            log.warning("skipping clip: %s", failure)
            result.failures.append(failure)
            continue
        for entry in clip_entries:
            if entry.augmented:
                result.augmented += 1
            else:
                result.originals += 1
        entries.extend(clip_entries)
    write_manifest(entries, result.manifest_path)
    return result
