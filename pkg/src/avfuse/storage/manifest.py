"""
Dataset manifests: one JSON object per line, one line per sample.
Feature and PCM paths are relative to the manifest's directory.
"""

import logging
from pathlib import Path
from typing import Iterable

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from avfuse.audio.schemas import OnsetSet
from avfuse.config import SynthConfig
from avfuse.exceptions import DatasetIOError, FormatError, InvalidArgumentError
from avfuse.fusion.enums import LayerKind, Modality
from avfuse.fusion.schemas import FeatureSequence
from avfuse.storage.files import atomic_write_text, read_bytes
from avfuse.storage.matrix_io import read_matrix
from avfuse.training.schemas import Sample

logger = logging.getLogger(__name__)

DATASET_INFO_FILE = "dataset.json"


class ManifestRecord(BaseModel):
    model_config = ConfigDict(extra="forbid")

    id: str
    category: int = Field(ge=0)
    label: int = Field(ge=0)
    multi_labels: list[int] | None = None
    video_path: str
    audio_path: str
    pcm_path: str | None = None
    onsets: list[int] | None = None
    event_kind: LayerKind | None = None
    planted_steps: list[int] | None = None


class DatasetInfo(BaseModel):
    """Sidecar written next to the manifests: declared C and per-category ground truth."""

    classes: int = Field(ge=1)
    T: int = Field(ge=1)
    video_dim: int = Field(ge=1)
    audio_dim: int = Field(ge=1)
    category_kinds: list[LayerKind] = Field(default_factory=list)
    splits: dict[str, int] = Field(default_factory=dict)
    synth: SynthConfig | None = None


def write_manifest(path: str | Path, records: Iterable[ManifestRecord]) -> None:
    atomic_write_text(path, "".join(r.model_dump_json(exclude_none=True) + "\n" for r in records))


def read_manifest(path: str | Path, classes: int | None = None) -> list[ManifestRecord]:
    try:
        text = read_bytes(path).decode("utf-8", errors="strict")
    except UnicodeDecodeError as e:
        raise FormatError(f"{path}: manifest is not valid UTF-8 (byte {e.start})") from e
    records = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = ManifestRecord.model_validate_json(line)
        except ValidationError as e:
            raise FormatError(f"{path}:{lineno}: invalid manifest record: {e}") from e
        if classes is not None:
            labels = [record.label, *(record.multi_labels or [])]
            if max(labels) >= classes:
                raise InvalidArgumentError(f"{path}:{lineno}: label {max(labels)} outside [0, C={classes})")
        records.append(record)
    logger.debug(f"Read {len(records)} records from {path}")
    return records


def write_dataset_info(directory: str | Path, info: DatasetInfo) -> None:
    atomic_write_text(Path(directory) / DATASET_INFO_FILE, info.model_dump_json(indent=2) + "\n")


def read_dataset_info(directory: str | Path) -> DatasetInfo | None:
    """The sidecar of a dataset directory, or None when the directory has none."""
    path = Path(directory) / DATASET_INFO_FILE
    if not path.exists():
        return None
    try:
        return DatasetInfo.model_validate_json(read_bytes(path))
    except ValidationError as e:
        raise FormatError(f"{path}: invalid dataset info: {e}") from e


def record_to_sample(record: ManifestRecord, base: Path) -> Sample:
    try:
        video = FeatureSequence(Modality.VIDEO, read_matrix(base / record.video_path))
        audio = FeatureSequence(Modality.AUDIO, read_matrix(base / record.audio_path))
    except DatasetIOError as e:
        raise DatasetIOError(f"sample {record.id}: {e}") from e
    return Sample(
        id=record.id,
        video_raw=video,
        audio_raw=audio,
        y=record.label,
        multi_labels=frozenset(record.multi_labels) if record.multi_labels is not None else None,
        onsets=OnsetSet.from_steps(record.onsets) if record.onsets is not None else None,
        pcm_path=str(base / record.pcm_path) if record.pcm_path else None,
        category=record.category,
        event_kind=record.event_kind,
        planted_steps=tuple(record.planted_steps) if record.planted_steps is not None else None,
    )


def load_samples(path: str | Path, classes: int | None = None) -> list[Sample]:
    """Read a manifest and every feature file it names."""
    path = Path(path)
    if classes is None:
        info = read_dataset_info(path.parent)
        classes = info.classes if info else None
    samples = [record_to_sample(r, path.parent) for r in read_manifest(path, classes)]
    logger.info(f"📂 Loaded {len(samples)} samples from {path}")
    return samples
