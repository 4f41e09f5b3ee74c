import json

import cv2
import numpy as np
import pytest

from clipextract.clips import ClipSpec


def write_video(path, frame_count, size=(64, 48), fps=10.0):
    """MJPG clip whose frames carry structured, frame-dependent content."""
    writer = cv2.VideoWriter(
        str(path), cv2.VideoWriter_fourcc(*"MJPG"), fps, size
    )
    assert writer.isOpened()
    width, height = size
    xs = np.linspace(0, 255, width, dtype=np.uint8)
    for i in range(frame_count):
        frame = np.zeros((height, width, 3), np.uint8)
        frame[:, :, 0] = xs[None, :]
        frame[:, :, 1] = (i * 7) % 256
        frame[(i * 3) % height, :, 2] = 255
        frame[:, (i * 5) % width, 2] = 255
        writer.write(frame)
    writer.release()
    return path


def write_listing(path, rows):
    path.write_text(
        "".join(
            json.dumps(
                {"clip_id": cid, "path": rel, "label": label, "split": split}
            )
            + "\n"
            for cid, rel, label, split in rows
        )
    )
    return path


@pytest.fixture()
def clip_factory(tmp_path):
    def make(clip_id="clip", frame_count=30, label=0, split="train"):
        video = write_video(tmp_path / f"{clip_id}.avi", frame_count)
        return ClipSpec(video_path=video, clip_id=clip_id, label=label, split=split)

    return make
