"""
One handler per subcommand. Each takes the parsed argparse namespace,
writes machine-readable results as JSON lines to stdout or --out, and
raises AvFuseError subclasses for anything the user has to fix.
"""

import logging
import os
from argparse import Namespace
from pathlib import Path

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from avfuse.analysis.bias import dataset_bias, sample_bias, top_activated
from avfuse.analysis.layer_stats import VOTED, av_correctness, layer_accuracies, layer_uniqueness
from avfuse.analysis.localization import Box, SpatialFeatureMap, localization_eval, localization_map, write_pgm
from avfuse.analysis.schemas import EvalSummary, PredictionRow
from avfuse.analysis.voting import layer_confidences, majority_vote, mean_f1, mean_set_size, multilabel_set, top_n_set
from avfuse.audio.features import load_wav
from avfuse.audio.onsets import detect_onsets
from avfuse.audio.schemas import OnsetSet
from avfuse.config import DEFAULT_WINDOW, SynthConfig, TrainConfig, load_config
from avfuse.core.rng import make_rng
from avfuse.exceptions import DatasetIOError, FormatError, InvalidArgumentError, NumericFailureError
from avfuse.fusion.encoders import encode_values
from avfuse.fusion.enums import LAYER_ORDER, Modality
from avfuse.fusion.model import forward_cached, init_params
from avfuse.fusion.schemas import FeatureSequence, LayerOutputs, ModelDims, ModelParams
from avfuse.storage.checkpoint import load_checkpoint, save_checkpoint
from avfuse.storage.files import atomic_write_text, read_bytes
from avfuse.storage.manifest import load_samples, read_dataset_info, read_manifest, write_manifest
from avfuse.storage.matrix_io import read_matrix, write_matrix
from avfuse.storage.reports import emit_jsonl, write_json
from avfuse.synth.dataset import gen_dataset, manifest_path
from avfuse.training.gradcheck import GRADCHECK_TOLERANCE, gradient_check
from avfuse.training.schemas import Sample
from avfuse.training.trainer import predict_outputs, train
from avfuse.utils.hashing import derive_seed, file_digest

logger = logging.getLogger(__name__)

CHECKPOINT_FILE = "model.avck"
TRAIN_LOG_FILE = "train_log.jsonl"
VMAP_SUFFIX = ".vmap"


class VmapSidecar(BaseModel):
    """<id>.vmap.json: grid size, the paired audio feature file and an optional ground-truth box."""

    model_config = ConfigDict(extra="forbid")

    height: int = Field(ge=1)
    width: int = Field(ge=1)
    audio_path: str
    box: tuple[int, int, int, int] | None = Field(None, description="top, left, bottom, right (half-open)")


def _require(value, flag: str):
    if value is None:
        raise InvalidArgumentError(f"{flag} is required for this subcommand")
    return value


def _train_config(args: Namespace) -> TrainConfig:
    cfg = load_config(args.config, TrainConfig) if args.config else TrainConfig()
    update = {}
    if args.seed is not None:
        update["seed"] = args.seed
    if getattr(args, "k", None) is not None:
        update["k"] = args.k
    try:
        return TrainConfig.model_validate({**cfg.model_dump(), **update})
    except ValidationError as e:
        raise InvalidArgumentError(f"invalid override: {e}") from e


def _load_model(args: Namespace) -> ModelParams:
    params, header = load_checkpoint(_require(args.ckpt, "--ckpt"))
    if getattr(args, "k", None) is not None:
        params = ModelParams(header.dims.model_copy(update={"k": args.k}), params.arrays)
    return params


def _predict(samples: list[Sample], params: ModelParams) -> list[tuple[LayerOutputs, bool]]:
    results = []
    for s in samples:
        outputs, cache = forward_cached(s.video_raw, s.audio_raw, params, s.onset_set)
        results.append((outputs, cache.onset_fallback))
    return results


def cmd_synth(args: Namespace) -> None:
    cfg = load_config(args.config, SynthConfig) if args.config else SynthConfig()
    if args.seed is not None:
        cfg = SynthConfig.model_validate({**cfg.model_dump(), "seed": args.seed})
    info = gen_dataset(cfg, _require(args.out, "--out"))
    emit_jsonl([{"out": str(args.out), "classes": info.classes, "splits": info.splits}])


def cmd_onset(args: Namespace) -> None:
    source = Path(_require(args.data, "--data"))
    target = Path(_require(args.out, "--out"))
    records = read_manifest(source)
    updated = []
    detected = 0
    for record in records:
        fields = record.model_dump()
        for key in ("video_path", "audio_path", "pcm_path"):
            if fields[key] is not None:
                fields[key] = os.path.relpath(source.parent / fields[key], target.parent)
        if record.pcm_path is not None:
            T = read_matrix(source.parent / record.video_path).shape[0]
            onsets = detect_onsets(load_wav(source.parent / record.pcm_path), T)
            fields["onsets"] = list(onsets.steps)
            detected += 1
        updated.append(type(record).model_validate(fields))
    write_manifest(target, updated)
    logger.info(f"🎵 Onsets re-detected for {detected} of {len(records)} records")
    emit_jsonl([{"out": str(target), "records": len(records), "detected": detected}])


def cmd_train(args: Namespace) -> None:
    data = Path(_require(args.data, "--data"))
    out = Path(_require(args.out, "--out"))
    cfg = _train_config(args)
    if data.is_dir():
        info = read_dataset_info(data)
        classes = info.classes if info else None
        train_set = load_samples(manifest_path(data, "train"), classes)
        val_path = manifest_path(data, "val")
        val_set = load_samples(val_path, classes) if val_path.exists() else []
    else:
        info = read_dataset_info(data.parent)
        classes = info.classes if info else None
        train_set, val_set = load_samples(data, classes), []

    params, log = train(train_set, val_set, cfg, classes)
    ckpt = out / CHECKPOINT_FILE
    save_checkpoint(ckpt, params, cfg.seed, len(log.records))
    atomic_write_text(out / TRAIN_LOG_FILE, log.to_jsonl())
    row = {"checkpoint": str(ckpt), "sha256": file_digest(ckpt), "epochs": len(log.records)}
    emit_jsonl([{**row, "best_voted": max(log.voted_history())}])


def cmd_predict(args: Namespace) -> None:
    params = _load_model(args)
    samples = load_samples(_require(args.data, "--data"), params.dims.classes)
    rows = []
    for sample, (outputs, fallback) in zip(samples, _predict(samples, params)):
        voted = majority_vote(outputs)
        rows.append(
            PredictionRow(
                id=sample.id,
                voted=voted,
                labels=multilabel_set(outputs).labels if args.multilabel else [voted],
                confidences=[float(c) for c in layer_confidences(outputs)],
                flags=["onset_fallback"] if fallback else [],
            )
        )
    emit_jsonl(rows, args.out)


def cmd_eval(args: Namespace) -> None:
    params = _load_model(args)
    samples = load_samples(_require(args.data, "--data"), params.dims.classes)
    outputs, fallbacks = predict_outputs(samples, params)
    acc = layer_accuracies(outputs, [s.y for s in samples])
    sets = [multilabel_set(o) for o in outputs]
    truths = [s.truth for s in samples]
    top_n = {
        n: mean_f1((top_n_set(o, n).labels, t) for o, t in zip(outputs, truths))
        for n in range(1, min(5, params.dims.classes) + 1)
    }
    summary = EvalSummary(
        samples=len(samples),
        layer_accuracy={kind.value: acc[kind.value] for kind in LAYER_ORDER},
        voted_accuracy=acc[VOTED],
        adaptive_f1=mean_f1((p.labels, t) for p, t in zip(sets, truths)),
        top_n_f1=top_n,
        mean_set_size=mean_set_size(sets),
        onset_fallbacks=fallbacks,
    )
    emit_jsonl([summary])
    if args.out:
        write_json(args.out, summary)


def cmd_bias(args: Namespace) -> None:
    params = _load_model(args)
    samples = load_samples(_require(args.data, "--data"), params.dims.classes)
    outputs, _ = predict_outputs(samples, params)
    results = [sample_bias(s.id, s.category_id, o, s.y) for s, o in zip(samples, outputs)]
    report = dataset_bias(results, categories=sorted({s.category_id for s in samples}))
    summary = {
        "categories": {str(c): kind.value for c, kind in report.categories.items()},
        "counts": {kind.value: n for kind, n in report.counts.items()},
        "skipped_categories": report.skipped_categories,
        "top_activated": {kind.value: ids for kind, ids in top_activated(results).items()},
    }
    if args.out:
        out = Path(args.out)
        emit_jsonl(report.samples, out / "bias_samples.jsonl")
        write_json(out / "bias_summary.json", summary)
    emit_jsonl([summary])


def cmd_layerdiff(args: Namespace) -> None:
    params = _load_model(args)
    samples = load_samples(_require(args.data, "--data"), params.dims.classes)
    outputs, _ = predict_outputs(samples, params)
    bits = [av_correctness(o, s.y) for s, o in zip(samples, outputs)]
    counts = layer_uniqueness(bits)
    if args.out:
        rows = [{"id": s.id, "continuous": b[0], "instant": b[1], "onset": b[2]} for s, b in zip(samples, bits)]
        emit_jsonl(rows, args.out)
    emit_jsonl([counts])


def _read_sidecar(path: Path) -> VmapSidecar:
    try:
        return VmapSidecar.model_validate_json(read_bytes(path))
    except ValidationError as e:
        raise FormatError(f"{path}: invalid sidecar: {e}") from e


def cmd_localize(args: Namespace) -> None:
    data = Path(_require(args.data, "--data"))
    out = Path(args.out) if args.out else data
    window = args.window if args.window is not None else DEFAULT_WINDOW
    encoder = _load_model(args).encoder(Modality.AUDIO) if args.ckpt else None
    vmaps = sorted(data.glob(f"*{VMAP_SUFFIX}"))
    if not vmaps:
        raise DatasetIOError(f"no {VMAP_SUFFIX} files in {data}")

    rows = []
    for path in vmaps:
        sample_id = path.name[: -len(VMAP_SUFFIX)]
        sidecar = _read_sidecar(path.with_name(path.name + ".json"))
        audio = read_matrix(data / sidecar.audio_path)
        if encoder is not None:
            audio, _ = encode_values(audio, encoder)
        vmap = SpatialFeatureMap.from_rows(read_matrix(path), sidecar.height, sidecar.width)
        loc = localization_map(vmap, FeatureSequence(Modality.AUDIO, audio), window)
        write_matrix(out / f"{sample_id}.alpha", loc.averaged)
        write_pgm(loc.averaged, out / f"{sample_id}.pgm")

        peak = np.unravel_index(int(np.argmax(loc.averaged)), loc.averaged.shape)
        row = {"id": sample_id, "peak": [int(peak[0]), int(peak[1])]}
        if sidecar.box is not None:
            row["iou"], row["auc"] = localization_eval(loc.averaged, Box(*sidecar.box))
        rows.append(row)
    logger.info(f"🔊 Localized {len(rows)} maps into {out}")
    emit_jsonl(rows)


def _random_batch(dims: ModelDims, T: int, seed: int, size: int = 2) -> list[Sample]:
    rng = make_rng(seed)
    batch = []
    for i in range(size):
        onsets = OnsetSet.from_steps(rng.choice(T, size=max(1, T // 3), replace=False).tolist())
        batch.append(
            Sample(
                id=f"gradcheck-{i}",
                video_raw=FeatureSequence(Modality.VIDEO, rng.standard_normal((T, dims.video_in))),
                audio_raw=FeatureSequence(Modality.AUDIO, rng.standard_normal((T, dims.audio_in))),
                y=int(rng.integers(dims.classes)),
                onsets=onsets,
            )
        )
    return batch


def cmd_gradcheck(args: Namespace) -> None:
    cfg = _train_config(args)
    T = 6
    dims = ModelDims(video_in=3, audio_in=5, embed=4, classes=3, k=min(cfg.k, T), hidden=min(cfg.hidden, 5))
    params = init_params(dims, derive_seed(cfg.seed, "gradcheck", "init"))
    batch = _random_batch(dims, T, derive_seed(cfg.seed, "gradcheck", "batch"))
    errors = gradient_check(params, batch, cfg)
    worst = max(errors.values())
    emit_jsonl([{"max_relative_error": worst, "groups": errors, "passed": worst < GRADCHECK_TOLERANCE}])
    if worst >= GRADCHECK_TOLERANCE:
        raise NumericFailureError(f"analytic gradients disagree with finite differences ({worst:.2e})")


COMMANDS = {
    "synth": cmd_synth,
    "onset": cmd_onset,
    "train": cmd_train,
    "predict": cmd_predict,
    "eval": cmd_eval,
    "bias": cmd_bias,
    "layerdiff": cmd_layerdiff,
    "localize": cmd_localize,
    "gradcheck": cmd_gradcheck,
}
