"""Frontal-face detection and cropping for the face stream.

Uses scikit-image's bundled LBP frontal-face cascade, so detection works
without any model download. The largest detected box wins, expanded by a 20%
margin on each side and clamped to the frame. When nothing is detected the
crop falls back to a centered box in the upper half of the frame at 40% of
the frame size, so the face stream is defined for every frame.
"""

from __future__ import annotations

import numpy as np
from skimage import data as skimage_data
from skimage.feature import Cascade

_MARGIN = 0.2
_FALLBACK_FRACTION = 0.4


class FaceDetector:
    """Deterministic cascade detector; construct once, reuse per frame."""

    def __init__(self, min_size: int = 24):
        self.min_size = min_size
        self._cascade = Cascade(skimage_data.lbp_frontal_face_cascade_filename())

    def detect(self, frame: np.ndarray) -> tuple[int, int, int, int] | None:
        """Largest face box as (x, y, w, h), or None."""
        height, width = frame.shape[:2]
        limit = min(height, width)
        if limit < self.min_size:
            return None
        found = self._cascade.detect_multi_scale(
            img=frame,
            scale_factor=1.2,
            step_ratio=1,
            min_size=(self.min_size, self.min_size),
            max_size=(limit, limit),
        )
        if not found:
            return None
        best = max(found, key=lambda d: d["width"] * d["height"])
        return int(best["c"]), int(best["r"]), int(best["width"]), int(best["height"])


def _clamp_box(x0, y0, x1, y1, width, height):
    return (
        max(0, min(x0, width - 1)),
        max(0, min(y0, height - 1)),
        max(1, min(x1, width)),
        max(1, min(y1, height)),
    )


def fallback_box(frame: np.ndarray) -> tuple[int, int, int, int]:
    """Centered box in the upper half, 40% of the frame size; (x, y, w, h)."""
    height, width = frame.shape[:2]
    w = max(1, int(width * _FALLBACK_FRACTION))
    h = max(1, int(height * _FALLBACK_FRACTION))
    x0 = max(0, (width - w) // 2)
    y0 = max(0, min(height - h, height // 4 - h // 2))
    return x0, y0, w, h


def crop_face(
    frame: np.ndarray, detector: FaceDetector | None = None
) -> tuple[np.ndarray, bool]:
    """Face crop plus a found flag; falls back to the upper-center region."""
    if detector is None:
        detector = FaceDetector()
    height, width = frame.shape[:2]
    box = detector.detect(frame)
    found = box is not None
    if box is None:
        box = fallback_box(frame)
    x, y, w, h = box
    mx = int(w * _MARGIN)
    my = int(h * _MARGIN)
    x0, y0, x1, y1 = _clamp_box(x - mx, y - my, x + w + mx, y + h + my, width, height)
    return frame[y0:y1, x0:x1], found
