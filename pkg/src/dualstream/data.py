"""Feature-archive format, manifests, dataset loading, synthetic data.

One sample per file ("VBFS" container), little-endian throughout:

    magic     "VBFS" (4 bytes)
    version   u16
    T         u16   frames
    D         u32   feature dim
    label     u8    engagement level 0..3
    split     u8    0=train 1=val 2=test
    augmented u8    0/1
    id_len    u16, then id_len bytes UTF-8 clip id
    scene     T*D float32, row-major
    face      T*D float32, row-major
    crc       u32 CRC-32 of everything before it

The manifest is JSON-lines, one record per sample: clip_id, path (relative
to the manifest), label, split, augmented, checksum (CRC-32 of the whole
file, 8 hex digits). Storage stays 32-bit; tensors fed to the model are
widened to 64-bit.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    BadMagicError,
    ChecksumError,
    ConfigError,
    ContractError,
    FormatError,
    ManifestError,
    TruncatedFileError,
    UnsupportedVersionError,
    ValidationError,
)

__all__ = [
    "SAMPLE_MAGIC",
    "SAMPLE_VERSION",
    "SPLITS",
    "N_CLASSES",
    "FeatureSequence",
    "Sample",
    "ManifestEntry",
    "DatasetRecord",
    "Dataset",
    "write_sample",
    "read_sample",
    "write_manifest",
    "parse_manifest",
    "load_dataset",
    "write_dataset",
    "gen_synthetic",
    "validate_dataset",
    "ValidationReport",
]

SAMPLE_MAGIC = b"VBFS"
SAMPLE_VERSION = 1
SPLITS = ("train", "val", "test")
N_CLASSES = 4


@dataclass
class FeatureSequence:
    """One stream's [T, D] matrix of per-frame features, stored as float32."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float32)
        if self.values.ndim != 2 or 0 in self.values.shape:
            raise ValidationError(
                f"feature sequence must be a non-empty [T, D] matrix, "
                f"got shape {list(self.values.shape)}"
            )

    @property
    def frames(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.values).all())


@dataclass
class Sample:
    """One clip: id, label, split, the two feature streams."""

    clip_id: str
    label: int
    split: str
    scene: FeatureSequence
    face: FeatureSequence
    augmented: bool = False

    def __post_init__(self):
        if not (0 <= self.label < N_CLASSES):
            raise ValidationError(
                f"{self.clip_id}: label {self.label} outside [0, {N_CLASSES})"
            )
        if self.split not in SPLITS:
            raise ValidationError(f"{self.clip_id}: unknown split {self.split!r}")
        if self.scene.values.shape != self.face.values.shape:
            raise ValidationError(
                f"{self.clip_id}: scene shape {list(self.scene.values.shape)} "
                f"!= face shape {list(self.face.values.shape)}"
            )

    @property
    def frames(self) -> int:
        return self.scene.frames

    @property
    def dim(self) -> int:
        return self.scene.dim


def _safe_filename(clip_id: str) -> str:
    return "".join(c if c.isalnum() or c in "._-" else "_" for c in clip_id) + ".vbfs"


def sample_bytes(sample: Sample) -> bytes:
    """Serialize one sample to the VBFS byte layout."""
    if not sample.scene.is_finite() or not sample.face.is_finite():
        raise ValidationError(f"{sample.clip_id}: non-finite feature values")
    if sample.frames > 0xFFFF:
        raise ValidationError(f"{sample.clip_id}: frame count {sample.frames} exceeds u16")
    id_bytes = sample.clip_id.encode("utf-8")
    header = struct.pack(
        "<4sHHIBBBH",
        SAMPLE_MAGIC,
        SAMPLE_VERSION,
        sample.frames,
        sample.dim,
        sample.label,
        SPLITS.index(sample.split),
        1 if sample.augmented else 0,
        len(id_bytes),
    )
    body = (
        header
        + id_bytes
        + sample.scene.values.astype("<f4", copy=False).tobytes()
        + sample.face.values.astype("<f4", copy=False).tobytes()
    )
    return body + struct.pack("<I", zlib.crc32(body))


def write_sample(sample: Sample, directory: str | Path) -> Path:
    """Write one VBFS file; the filename is derived from the clip id."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / _safe_filename(sample.clip_id)
    try:
        path.write_bytes(sample_bytes(sample))
    except OSError as e:
        raise OSError(f"writing {path}: {e}") from e
    return path


_HEADER = struct.Struct("<4sHHIBBBH")


def read_sample(path: str | Path) -> Sample:
    """Parse and checksum-verify one VBFS file."""
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < _HEADER.size:
        raise TruncatedFileError(f"{path}: {len(blob)} bytes is too short for a header")
    magic, version, frames, dim, label, split_idx, augmented, id_len = _HEADER.unpack(
        blob[: _HEADER.size]
    )
    if magic != SAMPLE_MAGIC:
        raise BadMagicError(f"{path}: expected magic {SAMPLE_MAGIC!r}, found {magic!r}")
    if version != SAMPLE_VERSION:
        raise UnsupportedVersionError(
            f"{path}: file version {version}, this build reads version {SAMPLE_VERSION}"
        )
    payload = 2 * frames * dim * 4
    expected = _HEADER.size + id_len + payload + 4
    if len(blob) < expected:
        raise TruncatedFileError(
            f"{path}: expected {expected} bytes, file has {len(blob)}"
        )
    if len(blob) > expected:
        raise FormatError(f"{path}: {len(blob) - expected} trailing bytes")
    stored_crc = struct.unpack("<I", blob[-4:])[0]
    if zlib.crc32(blob[:-4]) != stored_crc:
        raise ChecksumError(f"{path}: payload CRC mismatch")
    pos = _HEADER.size
    clip_id = blob[pos : pos + id_len].decode("utf-8")
    pos += id_len
    count = frames * dim
    scene = np.frombuffer(blob, dtype="<f4", count=count, offset=pos).reshape(frames, dim)
    pos += count * 4
    face = np.frombuffer(blob, dtype="<f4", count=count, offset=pos).reshape(frames, dim)
    if split_idx >= len(SPLITS):
        raise FormatError(f"{path}: split byte {split_idx} out of range")
    return Sample(
        clip_id=clip_id,
        label=label,
        split=SPLITS[split_idx],
        scene=FeatureSequence(scene.copy()),
        face=FeatureSequence(face.copy()),
        augmented=bool(augmented),
    )


@dataclass
class ManifestEntry:
    clip_id: str
    path: str
    label: int
    split: str
    augmented: bool
    checksum: str

    def to_json(self) -> str:
        return json.dumps(
            {
                "clip_id": self.clip_id,
                "path": self.path,
                "label": self.label,
                "split": self.split,
                "augmented": self.augmented,
                "checksum": self.checksum,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, line: str) -> "ManifestEntry":
        d = json.loads(line)
        return cls(
            clip_id=str(d["clip_id"]),
            path=str(d["path"]),
            label=int(d["label"]),
            split=str(d["split"]),
            augmented=bool(d["augmented"]),
            checksum=str(d["checksum"]),
        )


def file_checksum(path: Path) -> str:
    return f"{zlib.crc32(path.read_bytes()):08x}"


def write_manifest(entries: list[ManifestEntry], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(e.to_json() + "\n" for e in entries), encoding="utf-8")
    return path


def parse_manifest(path: str | Path) -> list[ManifestEntry]:
    path = Path(path)
    entries = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            entries.append(ManifestEntry.from_json(line))
        except (KeyError, ValueError) as e:
            raise ManifestError(f"{path}:{lineno}: bad manifest record: {e}") from e
    return entries


class DatasetRecord:
    """Lazily loadable handle on one sample; caches the sample after first load."""

    def __init__(self, clip_id, label, split, augmented, path=None, sample=None):
        self.clip_id = clip_id
        self.label = label
        self.split = split
        self.augmented = augmented
        self.path = path
        self._sample = sample

    def load(self) -> Sample:
        if self._sample is None:
            self._sample = read_sample(self.path)
        return self._sample


class Dataset:
    """Manifest-ordered sample handles with split views."""

    def __init__(self, records: list[DatasetRecord]):
        self.records = records

    def split(self, name: str) -> list[DatasetRecord]:
        if name not in SPLITS:
            raise ConfigError(f"unknown split {name!r}")
        return [r for r in self.records if r.split == name]

    def label_histogram(self, split: str | None = None) -> dict[int, int]:
        records = self.records if split is None else self.split(split)
        hist = {c: 0 for c in range(N_CLASSES)}
        for r in records:
            hist[r.label] = hist.get(r.label, 0) + 1
        return hist

    def __len__(self) -> int:
        return len(self.records)


def load_dataset(manifest_path: str | Path) -> Dataset:
    """Build lazy split views over a manifest; hard errors on broken references."""
    manifest_path = Path(manifest_path)
    base = manifest_path.parent
    entries = parse_manifest(manifest_path)
    seen: set[str] = set()
    records = []
    for e in entries:
        if e.clip_id in seen:
            raise ManifestError(f"duplicate clip_id {e.clip_id!r}")
        seen.add(e.clip_id)
        if not (0 <= e.label < N_CLASSES):
            raise ManifestError(f"{e.clip_id}: label {e.label} outside [0, {N_CLASSES})")
        if e.split not in SPLITS:
            raise ManifestError(f"{e.clip_id}: unknown split {e.split!r}")
        path = base / e.path
        if not path.is_file():
            raise ManifestError(f"{e.clip_id}: missing file {path}")
        records.append(DatasetRecord(e.clip_id, e.label, e.split, e.augmented, path=path))
    return Dataset(records)


def write_dataset(dataset: Dataset, directory: str | Path) -> Path:
    """Write every sample as VBFS plus a manifest.jsonl; returns the manifest path."""
    directory = Path(directory)
    entries = []
    for record in dataset.records:
        sample = record.load()
        path = write_sample(sample, directory)
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
    return write_manifest(entries, directory / "manifest.jsonl")


def _split_sizes(n: int) -> tuple[int, int, int]:
    # 70/15/15 per class, remainder to test
    n_train = int(0.7 * n + 0.5)
    n_val = int(0.15 * n + 0.5)
    return n_train, n_val, n - n_train - n_val


def gen_synthetic(
    n_per_class: int,
    frames: int,
    dim: int,
    separation: float,
    seed: int,
) -> Dataset:
    """Class-conditional Gaussian sequences for desk-scale experiments.

    Class c's mean is the unit basis vector e_c scaled by `separation` and a
    temporal drift ramp in [0.5, 1.5]; both streams share the mean and get
    independent unit noise. Byte-identical for identical seeds.
    """
    if n_per_class < 1:
        raise ContractError(f"n_per_class must be >= 1, got {n_per_class}")
    if separation < 0:
        raise ContractError(f"separation must be >= 0, got {separation}")
    if frames < 1:
        raise ContractError(f"frames must be >= 1, got {frames}")
    if dim < N_CLASSES:
        raise ConfigError(
            f"dim {dim} < {N_CLASSES} classes: orthogonal class means are impossible"
        )
    rng = np.random.default_rng(seed)
    drift = 0.5 + np.arange(frames) / max(frames - 1, 1)  # [0.5, 1.5]
    n_train, n_val, _ = _split_sizes(n_per_class)
    records = []
    for label in range(N_CLASSES):
        mean = np.zeros(dim)
        mean[label] = separation
        signal = drift[:, None] * mean[None, :]
        for j in range(n_per_class):
            if j < n_train:
                split = "train"
            elif j < n_train + n_val:
                split = "val"
            else:
                split = "test"
            sample = Sample(
                clip_id=f"syn-{label}-{j:04d}",
                label=label,
                split=split,
                scene=FeatureSequence(signal + rng.standard_normal((frames, dim))),
                face=FeatureSequence(signal + rng.standard_normal((frames, dim))),
            )
            records.append(
                DatasetRecord(
                    sample.clip_id, label, split, False, sample=sample
                )
            )
    return Dataset(records)


@dataclass
class ValidationReport:
    """Findings plus the per-split class histogram used for imbalance reporting."""

    findings: list[str] = field(default_factory=list)
    split_histograms: dict[str, dict[int, int]] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.findings


def validate_dataset(manifest_path: str | Path) -> ValidationReport:
    """Check every dataset invariant; findings are reported, never raised."""
    manifest_path = Path(manifest_path)
    report = ValidationReport(split_histograms={s: {} for s in SPLITS})
    try:
        entries = parse_manifest(manifest_path)
    except (OSError, ManifestError) as e:
        report.findings.append(str(e))
        return report

    base = manifest_path.parent
    seen: set[str] = set()
    shape_seen: tuple[int, int] | None = None
    for e in entries:
        if e.clip_id in seen:
            report.findings.append(f"{e.clip_id}: duplicate clip_id")
            continue
        seen.add(e.clip_id)
        if not (0 <= e.label < N_CLASSES):
            report.findings.append(f"{e.clip_id}: label {e.label} outside [0, {N_CLASSES})")
        if e.split not in SPLITS:
            report.findings.append(f"{e.clip_id}: unknown split {e.split!r}")
        else:
            hist = report.split_histograms[e.split]
            hist[e.label] = hist.get(e.label, 0) + 1
        if e.augmented and e.split != "train":
            report.findings.append(
                f"{e.clip_id}: augmented sample outside the train split ({e.split})"
            )
        path = base / e.path
        if not path.is_file():
            report.findings.append(f"{e.clip_id}: missing file {path}")
            continue
        if file_checksum(path) != e.checksum:
            report.findings.append(f"{e.clip_id}: manifest checksum mismatch for {path.name}")
            continue
        try:
            sample = read_sample(path)
        except FormatError as e2:
            report.findings.append(f"{e.clip_id}: unreadable file: {e2}")
            continue
        if sample.clip_id != e.clip_id:
            report.findings.append(
                f"{e.clip_id}: file holds clip_id {sample.clip_id!r}"
            )
        if sample.label != e.label or sample.split != e.split or sample.augmented != e.augmented:
            report.findings.append(f"{e.clip_id}: manifest metadata disagrees with file header")
        if not sample.scene.is_finite() or not sample.face.is_finite():
            report.findings.append(f"{e.clip_id}: non-finite feature values")
        shape = (sample.frames, sample.dim)
        if shape_seen is None:
            shape_seen = shape
        elif shape != shape_seen:
            report.findings.append(
                f"{e.clip_id}: shape {shape} differs from dataset shape {shape_seen}"
            )
    return report
