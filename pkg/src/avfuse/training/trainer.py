import logging
from typing import Sequence

import numpy as np

from avfuse.analysis.layer_stats import VOTED, layer_accuracies
from avfuse.config import TrainConfig
from avfuse.core.rng import make_rng
from avfuse.exceptions import InvalidArgumentError, NumericFailureError
from avfuse.fusion.enums import LAYER_ORDER
from avfuse.fusion.model import forward_cached, init_params
from avfuse.fusion.schemas import LayerOutputs, ModelDims, ModelParams
from avfuse.training.backward import backward
from avfuse.training.optim import lr_schedule_step, sgd_update
from avfuse.training.schemas import EpochRecord, Sample, TrainLog
from avfuse.utils.hashing import derive_seed

logger = logging.getLogger(__name__)


def predict_outputs(samples: Sequence[Sample], params: ModelParams) -> tuple[list[LayerOutputs], int]:
    """Forward every sample; also returns how many fell back to all steps for lack of onsets."""
    outputs, fallbacks = [], 0
    for sample in samples:
        out, cache = forward_cached(sample.video_raw, sample.audio_raw, params, sample.onset_set)
        outputs.append(out)
        fallbacks += cache.onset_fallback
    return outputs, fallbacks


def evaluate(samples: Sequence[Sample], params: ModelParams) -> dict[str, float]:
    """Per-layer and majority-vote accuracy against each sample's primary label."""
    outputs, _ = predict_outputs(samples, params)
    return layer_accuracies(outputs, [s.y for s in samples])


def infer_dims(samples: Sequence[Sample], cfg: TrainConfig, classes: int | None = None) -> ModelDims:
    if not samples:
        raise InvalidArgumentError("training set is empty")
    first = samples[0]
    for s in samples:
        if s.video_raw.D != first.video_raw.D or s.audio_raw.D != first.audio_raw.D or s.T != first.T:
            raise InvalidArgumentError(f"sample {s.id} has a different shape from sample {first.id}")
    highest = max(max(s.truth) for s in samples)
    if classes is None:
        classes = highest + 1
    elif highest >= classes:
        raise InvalidArgumentError(f"label {highest} outside [0, C={classes})")
    if cfg.k > first.T:
        raise InvalidArgumentError(f"k={cfg.k} exceeds T={first.T}")
    return ModelDims(
        video_in=first.video_raw.D,
        audio_in=first.audio_raw.D,
        embed=cfg.embed,
        classes=classes,
        k=cfg.k,
        hidden=cfg.hidden,
    )


class Trainer:
    """
    Mini-batch momentum SGD over the five layers jointly.

    All randomness (init, shuffling, per-epoch multi-label draws) is derived
    from cfg.seed, so the same inputs give bitwise-identical parameters.
    """

    def __init__(self, cfg: TrainConfig, classes: int | None = None):
        self.cfg = cfg
        self.classes = classes

    def _epoch_labels(self, samples: Sequence[Sample], rng: np.random.Generator) -> list[int]:
        # Multi-label samples train on one uniformly drawn label per epoch.
        labels = []
        for s in samples:
            if s.multi_labels is not None and len(s.multi_labels) > 1:
                labels.append(int(rng.choice(sorted(s.multi_labels))))
            else:
                labels.append(s.y)
        return labels

    def train(self, dataset: Sequence[Sample], val: Sequence[Sample] = ()) -> tuple[ModelParams, TrainLog]:
        cfg = self.cfg
        dims = infer_dims(list(dataset) + list(val), cfg, self.classes)
        params = init_params(dims, derive_seed(cfg.seed, "init"), cfg.encoder_init)
        velocity = params.zeros_like()
        rng = make_rng(derive_seed(cfg.seed, "shuffle"))
        lr = cfg.lr0
        log = TrainLog()
        monitor = val if val else dataset
        if not val:
            logger.warning("⚠️ No validation split: scheduling lr on training accuracy")

        logger.info(f"🚀 Training on {len(dataset)} samples, dims={dims.model_dump()}, epochs={cfg.epochs}")
        for epoch in range(cfg.epochs):
            labels = self._epoch_labels(dataset, rng)
            order = rng.permutation(len(dataset))
            loss_sum = np.zeros(len(LAYER_ORDER))
            n_batches = 0
            for start in range(0, len(order), cfg.batch_size):
                idx = order[start : start + cfg.batch_size]
                grads, losses = backward([dataset[i] for i in idx], params, cfg, [labels[i] for i in idx])
                params, velocity = sgd_update(params, grads, lr, cfg.momentum, velocity)
                if not params.is_finite():
                    raise NumericFailureError(f"non-finite parameters after epoch {epoch} batch {n_batches}")
                loss_sum += losses
                n_batches += 1

            acc = evaluate(monitor, params)
            record = EpochRecord(
                epoch=epoch,
                lr=lr,
                train_loss={kind.value: float(v) for kind, v in zip(LAYER_ORDER, loss_sum / n_batches)},
                val_accuracy={kind.value: acc[kind.value] for kind in LAYER_ORDER},
                val_voted=acc[VOTED],
            )
            log.records.append(record)
            logger.info(
                f"Epoch {epoch}: lr={lr:.3g} loss={float(loss_sum.sum() / n_batches):.4f} voted={acc[VOTED]:.3f}"
            )
            lr = lr_schedule_step(log.voted_history(), lr, cfg)

        logger.info(f"✅ Training done, best voted accuracy {max(log.voted_history()):.3f}")
        return params, log


def train(
    dataset: Sequence[Sample], val: Sequence[Sample], cfg: TrainConfig, classes: int | None = None
) -> tuple[ModelParams, TrainLog]:
    return Trainer(cfg, classes).train(dataset, val)
