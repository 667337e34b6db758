"""
Analytic gradients of the batch-mean multi-task loss.

Per sample and layer i: dL/dO_i = w_i * (softmax(O_i) - onehot(y)) / B.
Heads get outer(fused_i, dO_i). The fused gradient W_i @ dO_i is spread
evenly over the layer's pooled steps into the shared encoder outputs;
the pooled step sets themselves are treated as constants.
"""

from typing import Sequence

import numpy as np

from avfuse.config import TrainConfig
from avfuse.core.numeric import softmax
from avfuse.exceptions import InvalidArgumentError
from avfuse.fusion.enums import Modality
from avfuse.fusion.layers import EVENT_LAYERS
from avfuse.fusion.model import ForwardCache, forward_cached
from avfuse.fusion.schemas import ModelParams
from avfuse.training.losses import layer_losses
from avfuse.training.schemas import Sample


def _resolve_labels(batch: Sequence[Sample], labels: Sequence[int] | None) -> list[int]:
    if labels is None:
        return [s.y for s in batch]
    if len(labels) != len(batch):
        raise InvalidArgumentError(f"{len(labels)} labels for a batch of {len(batch)}")
    return list(labels)


def _encoder_backward(grads: ModelParams, params: ModelParams, modality: Modality, raw, pre, d_out) -> None:
    prefix = f"encoder.{modality.value}"
    enc = params.encoder(modality)
    if pre is None:
        grads.arrays[f"{prefix}.weight"] += raw.T @ d_out
        grads.arrays[f"{prefix}.bias"] += d_out.sum(axis=0)
        return
    hidden = np.maximum(pre, 0.0)
    grads.arrays[f"{prefix}.weight"] += hidden.T @ d_out
    grads.arrays[f"{prefix}.bias"] += d_out.sum(axis=0)
    d_pre = (d_out @ enc.weight.T) * (pre > 0)
    grads.arrays[f"{prefix}.hidden.weight"] += raw.T @ d_pre
    grads.arrays[f"{prefix}.hidden.bias"] += d_pre.sum(axis=0)


def _sample_backward(
    grads: ModelParams, params: ModelParams, cache: ForwardCache, d_logits: np.ndarray, train_encoders: bool
) -> None:
    D = params.dims.embed
    T = cache.video_raw.shape[0]
    d_zV = np.zeros((T, D))
    d_zA = np.zeros((T, D))

    for i, layer in enumerate(EVENT_LAYERS):
        head = params.head(layer.kind)
        fused = cache.fused[i]
        grads.arrays[f"head.{layer.kind.value}.weight"] += np.outer(fused, d_logits[i])
        grads.arrays[f"head.{layer.kind.value}.bias"] += d_logits[i]
        if not train_encoders:
            continue
        d_fused = head.weight @ d_logits[i]
        steps = cache.steps[i]
        share = 1.0 / steps.size
        if layer.keeps_video:
            d_zV[steps] += share * d_fused[:D]
        if layer.keeps_audio:
            d_zA[steps] += share * d_fused[D:]

    if train_encoders:
        _encoder_backward(grads, params, Modality.VIDEO, cache.video_raw, cache.video_pre, d_zV)
        _encoder_backward(grads, params, Modality.AUDIO, cache.audio_raw, cache.audio_pre, d_zA)


def backward(
    batch: Sequence[Sample], params: ModelParams, cfg: TrainConfig, labels: Sequence[int] | None = None
) -> tuple[ModelParams, np.ndarray]:
    """
    Gradient of the batch-mean weighted multi-task loss w.r.t. every parameter.

    Returns (gradients shaped like params, mean per-layer losses of the batch).
    Samples are reduced in batch order, so results are deterministic.
    """
    if not batch:
        raise InvalidArgumentError("backward needs a non-empty batch")
    labels = _resolve_labels(batch, labels)
    weights = np.asarray(cfg.loss_weights, dtype=np.float64)
    scale = 1.0 / len(batch)

    grads = params.zeros_like()
    losses = np.zeros(len(EVENT_LAYERS))
    for sample, y in zip(batch, labels):
        outputs, cache = forward_cached(sample.video_raw, sample.audio_raw, params, sample.onset_set)
        losses += layer_losses(outputs, y) * scale
        d_logits = softmax(outputs.logits)
        d_logits[:, y] -= 1.0
        d_logits *= (weights * scale)[:, None]
        _sample_backward(grads, params, cache, d_logits, cfg.train_encoders)
    return grads, losses


def batch_loss(
    batch: Sequence[Sample],
    params: ModelParams,
    weights: Sequence[float],
    labels: Sequence[int] | None = None,
    frozen_steps: Sequence[tuple[np.ndarray, ...]] | None = None,
) -> float:
    """
    Batch-mean weighted multi-task loss; the scalar that backward differentiates.

    frozen_steps holds one ForwardCache.steps tuple per sample; with it every layer
    pools those steps instead of re-selecting them under `params`.
    """
    labels = _resolve_labels(batch, labels)
    if frozen_steps is not None and len(frozen_steps) != len(batch):
        raise InvalidArgumentError(f"{len(frozen_steps)} step tuples for a batch of {len(batch)}")
    w = np.asarray(weights, dtype=np.float64)
    total = 0.0
    for i, (sample, y) in enumerate(zip(batch, labels)):
        steps = None if frozen_steps is None else frozen_steps[i]
        outputs, _ = forward_cached(sample.video_raw, sample.audio_raw, params, sample.onset_set, steps)
        total += float(w @ layer_losses(outputs, y))
    return total / len(batch)
