import logging
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from avfuse.audio.schemas import OnsetSet
from avfuse.core.rng import make_rng, uniform_init
from avfuse.exceptions import InvalidArgumentError, NumericFailureError
from avfuse.fusion.encoders import encode_values
from avfuse.fusion.enums import LayerKind, Modality
from avfuse.fusion.layers import EVENT_LAYERS
from avfuse.fusion.schemas import FeatureSequence, LayerOutputs, ModelDims, ModelParams, param_shapes

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ForwardCache:
    """Everything backward needs from one sample's forward pass."""

    video_raw: np.ndarray
    audio_raw: np.ndarray
    video_pre: np.ndarray | None
    audio_pre: np.ndarray | None
    fused: np.ndarray  # (5, 2D)
    steps: tuple[np.ndarray, ...]  # pooled steps per layer
    onset_fallback: bool


def init_params(dims: ModelDims, seed: int, encoder_init: Literal["uniform", "identity"] = "uniform") -> ModelParams:
    """
    Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero.
    encoder_init="identity" sets each (single affine) encoder to W = I.
    """
    if encoder_init == "identity":
        if dims.hidden or dims.video_in != dims.embed or dims.audio_in != dims.embed:
            raise InvalidArgumentError("identity encoders need hidden=0 and input widths equal to embed")
    rng = make_rng(seed)
    arrays: dict[str, np.ndarray] = {}
    for name, shape in param_shapes(dims):
        if name.endswith(".bias"):
            arrays[name] = np.zeros(shape)
        elif encoder_init == "identity" and name.startswith("encoder."):
            arrays[name] = np.eye(shape[0], shape[1])
        else:
            arrays[name] = uniform_init(rng, shape[0], shape)
    logger.debug(f"Initialized {len(arrays)} parameter arrays (encoder_init={encoder_init}, seed={seed})")
    return ModelParams(dims, arrays)


def _check_inputs(video: FeatureSequence, audio: FeatureSequence, dims: ModelDims) -> None:
    if video.modality is not Modality.VIDEO or audio.modality is not Modality.AUDIO:
        raise InvalidArgumentError("forward expects a (video, audio) pair")
    if video.D != dims.video_in:
        raise InvalidArgumentError(f"video width {video.D} does not match configured {dims.video_in}")
    if audio.D != dims.audio_in:
        raise InvalidArgumentError(f"audio width {audio.D} does not match configured {dims.audio_in}")
    if video.T != audio.T:
        raise InvalidArgumentError(f"video has T={video.T} but audio has T={audio.T}")
    if not 1 <= dims.k <= video.T:
        raise InvalidArgumentError(f"k={dims.k} outside [1, T={video.T}]")


def forward_cached(
    video: FeatureSequence,
    audio: FeatureSequence,
    params: ModelParams,
    onsets: OnsetSet,
    steps: Sequence[np.ndarray] | None = None,
) -> tuple[LayerOutputs, ForwardCache]:
    """
    Encode both modalities once, pool with all five layers, apply the five heads.

    `steps` pins the pooled steps of every layer (as returned in ForwardCache.steps)
    instead of selecting them from this pass's embeddings. Non-finite embeddings or
    logits raise NumericFailureError.
    """
    dims = params.dims
    _check_inputs(video, audio, dims)
    onsets.check_within(video.T)
    if steps is not None and len(steps) != len(EVENT_LAYERS):
        raise InvalidArgumentError(f"expected {len(EVENT_LAYERS)} pinned step sets, got {len(steps)}")

    zV_values, video_pre = encode_values(video.values, params.encoder(Modality.VIDEO))
    zA_values, audio_pre = encode_values(audio.values, params.encoder(Modality.AUDIO))
    zV = FeatureSequence(Modality.VIDEO, zV_values)
    zA = FeatureSequence(Modality.AUDIO, zA_values)

    fused_rows, selected_steps, logits = [], [], []
    with np.errstate(over="ignore", invalid="ignore"):
        for i, layer in enumerate(EVENT_LAYERS):
            fused, selected = layer.pool(zV, zA, dims.k, onsets, None if steps is None else steps[i])
            head = params.head(layer.kind)
            fused_rows.append(fused)
            selected_steps.append(selected)
            logits.append(fused @ head.weight + head.bias)
    stacked = np.vstack(logits)
    if not np.all(np.isfinite(stacked)):
        raise NumericFailureError("forward pass produced non-finite logits")

    cache = ForwardCache(
        video_raw=video.values,
        audio_raw=audio.values,
        video_pre=video_pre,
        audio_pre=audio_pre,
        fused=np.vstack(fused_rows),
        steps=tuple(selected_steps),
        onset_fallback=len(onsets) == 0,
    )
    return LayerOutputs(stacked), cache


def forward(video: FeatureSequence, audio: FeatureSequence, params: ModelParams, onsets: OnsetSet) -> LayerOutputs:
    outputs, cache = forward_cached(video, audio, params, onsets)
    if cache.onset_fallback:
        logger.debug(f"No onsets: {LayerKind.ONSET.value} layer pooled all {video.T} steps")
    return outputs
