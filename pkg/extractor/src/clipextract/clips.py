"""Clip listings and uniform frame sampling.

The listing file is JSON-lines: clip_id, path (relative to the video root),
label 0-3, split. Frame sampling picks indices floor(k * frame_count / T)
for k = 0..T-1, so clips shorter than T repeat frames instead of padding.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np

from .errors import ExtractionError, ListingError

SPLITS = ("train", "val", "test")


@dataclass
class ClipSpec:
    """One video clip plus its label/split metadata."""

    video_path: Path
    clip_id: str
    label: int
    split: str
    frame_count: int = 0  # probed lazily when 0
    fps: float = 0.0


def parse_listing(listing_path: str | Path, video_root: str | Path) -> list[ClipSpec]:
    listing_path = Path(listing_path)
    video_root = Path(video_root)
    clips = []
    seen = set()
    for lineno, line in enumerate(
        listing_path.read_text(encoding="utf-8").splitlines(), start=1
    ):
        if not line.strip():
            continue
        try:
            d = json.loads(line)
            clip_id = str(d["clip_id"])
            rel = str(d["path"])
            label = int(d["label"])
            split = str(d["split"])
        except (KeyError, ValueError) as e:
            raise ListingError(f"{listing_path}:{lineno}: bad record: {e}") from e
        if not (0 <= label <= 3):
            raise ListingError(f"{listing_path}:{lineno}: label {label} outside 0-3")
        if split not in SPLITS:
            raise ListingError(f"{listing_path}:{lineno}: unknown split {split!r}")
        if clip_id in seen:
            raise ListingError(f"{listing_path}:{lineno}: duplicate clip_id {clip_id!r}")
        seen.add(clip_id)
        clips.append(ClipSpec(video_root / rel, clip_id, label, split))
    return clips


def sample_indices(frame_count: int, t: int) -> list[int]:
    """floor(k * frame_count / t) for k = 0..t-1."""
    if frame_count < 1:
        raise ExtractionError(f"frame count must be >= 1, got {frame_count}")
    if t < 1:
        raise ExtractionError(f"sample count must be >= 1, got {t}")
    return [(k * frame_count) // t for k in range(t)]


def probe_clip(clip: ClipSpec) -> ClipSpec:
    """Fill in frame_count and fps from the container."""
    cap = cv2.VideoCapture(str(clip.video_path))
    try:
        if not cap.isOpened():
            raise ExtractionError(f"{clip.clip_id}: cannot open {clip.video_path}")
        clip.frame_count = int(cap.get(cv2.CAP_PROP_FRAME_COUNT))
        clip.fps = float(cap.get(cv2.CAP_PROP_FPS))
    finally:
        cap.release()
    if clip.frame_count < 1:
        raise ExtractionError(
            f"{clip.clip_id}: container reports no frames in {clip.video_path}"
        )
    return clip


def sample_frames(clip: ClipSpec, t: int = 60) -> list[np.ndarray]:
    """Decode exactly t BGR frames at the uniform floor indices."""
    if clip.frame_count < 1:
        probe_clip(clip)
    indices = sample_indices(clip.frame_count, t)
    multiplicity: dict[int, int] = {}
    for idx in indices:
        multiplicity[idx] = multiplicity.get(idx, 0) + 1

    frames: dict[int, np.ndarray] = {}
    cap = cv2.VideoCapture(str(clip.video_path))
    try:
        if not cap.isOpened():
            raise ExtractionError(f"{clip.clip_id}: cannot open {clip.video_path}")
        position = 0
        last = max(multiplicity)
        while position <= last:
            ok, frame = cap.read()
            if not ok:
                break
            if position in multiplicity:
                frames[position] = frame
            position += 1
    finally:
        cap.release()

    missing = [idx for idx in multiplicity if idx not in frames]
    if missing:
        # container metadata promised more frames than it could decode
        available = max(frames) + 1 if frames else 0
        if not frames:
            raise ExtractionError(f"{clip.clip_id}: decoded no frames")
        substitute = frames[max(frames)]
        for idx in missing:
            frames[idx] = substitute
        clip.frame_count = min(clip.frame_count, available)
    return [frames[idx] for idx in indices]
