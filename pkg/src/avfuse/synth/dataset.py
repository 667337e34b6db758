import logging
from pathlib import Path

from avfuse.audio.features import write_wav
from avfuse.config import SynthConfig
from avfuse.exceptions import InvalidArgumentError
from avfuse.storage.manifest import DatasetInfo, ManifestRecord, write_dataset_info, write_manifest
from avfuse.storage.matrix_io import write_matrix
from avfuse.synth.generator import category_kinds, gen_click_pcm, gen_event_pair, make_event_spec
from avfuse.utils.hashing import derive_seed

logger = logging.getLogger(__name__)

SPLITS = ("train", "val", "test")
FEATURE_DIR = "features"


def split_sizes(n: int, ratio: tuple[int, int, int]) -> tuple[int, int, int]:
    """Per-class counts for train/val/test; rounding leftovers go to test."""
    total = sum(ratio)
    train = n * ratio[0] // total
    val = n * ratio[1] // total
    return train, val, n - train - val


def manifest_path(directory: str | Path, split: str) -> Path:
    return Path(directory) / f"{split}.manifest"


def gen_dataset(cfg: SynthConfig, out_dir: str | Path, allocation: tuple[int, ...] | None = None) -> DatasetInfo:
    """
    Write <split>.manifest files, feature matrices under features/ and a dataset.json
    sidecar. Every sample is a pure function of (cfg, sample id), so regeneration
    with the same seed is byte-identical.
    """
    if allocation is not None:
        if len(allocation) != 5 or sum(allocation) != cfg.C:
            raise InvalidArgumentError(f"allocation {allocation} must give 5 counts summing to C={cfg.C}")
        cfg = cfg.model_copy(update={"allocation": tuple(allocation)})
    out_dir = Path(out_dir)
    kinds = category_kinds(cfg)
    sizes = split_sizes(cfg.samples_per_class, cfg.split)
    records: dict[str, list[ManifestRecord]] = {split: [] for split in SPLITS}

    logger.info(f"🧪 Generating {cfg.C} classes x {cfg.samples_per_class} samples into {out_dir}")
    for cls, kind in enumerate(kinds):
        index = 0
        for split, count in zip(SPLITS, sizes):
            for _ in range(count):
                sample_id = f"c{cls:03d}-{index:04d}"
                index += 1
                spec = make_event_spec(kind, cls, cfg, derive_seed(cfg.seed, sample_id, "spec"))
                sample = gen_event_pair(spec, cfg, derive_seed(cfg.seed, sample_id), sample_id)

                video_rel = f"{FEATURE_DIR}/{sample_id}.video.avf"
                audio_rel = f"{FEATURE_DIR}/{sample_id}.audio.avf"
                write_matrix(out_dir / video_rel, sample.video_raw.values)
                write_matrix(out_dir / audio_rel, sample.audio_raw.values)
                pcm_rel = None
                if cfg.write_pcm:
                    pcm_rel = f"{FEATURE_DIR}/{sample_id}.wav"
                    write_wav(out_dir / pcm_rel, gen_click_pcm(sample.onset_set.steps, cfg.T))

                records[split].append(
                    ManifestRecord(
                        id=sample_id,
                        category=cls,
                        label=sample.y,
                        video_path=video_rel,
                        audio_path=audio_rel,
                        pcm_path=pcm_rel,
                        onsets=list(sample.onset_set.steps),
                        event_kind=kind,
                        planted_steps=list(spec.planted_steps),
                    )
                )

    for split in SPLITS:
        write_manifest(manifest_path(out_dir, split), records[split])
    info = DatasetInfo(
        classes=cfg.C,
        T=cfg.T,
        video_dim=cfg.video_dim,
        audio_dim=cfg.audio_dim,
        category_kinds=kinds,
        splits={split: len(records[split]) for split in SPLITS},
        synth=cfg,
    )
    write_dataset_info(out_dir, info)
    logger.info(f"✅ Dataset written: {info.splits}")
    return info
