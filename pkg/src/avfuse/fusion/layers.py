"""
The five event-specific layers.

- continuous: mean of concat(zV_t, zA_t) over all steps
- instant: mean over the k steps with the largest zV_t . zA_t
- onset: mean over the audio onset steps (all steps when there are none)
- visual / audio: mean over all steps with the other half zeroed
"""

import logging

import numpy as np

from avfuse.audio.schemas import OnsetSet
from avfuse.exceptions import InvalidArgumentError
from avfuse.fusion.enums import LAYER_ORDER, LayerKind, Modality
from avfuse.fusion.interfaces import EventLayer
from avfuse.fusion.schemas import FeatureSequence, check_pair

logger = logging.getLogger(__name__)


def correlation_scores(zV: FeatureSequence, zA: FeatureSequence) -> np.ndarray:
    """S[t] = zV_t . zA_t"""
    check_pair(zV, zA)
    return np.einsum("td,td->t", zV.values, zA.values)


def top_k_steps(scores: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k largest scores, ties to the lower index, returned sorted."""
    T = scores.shape[0]
    if not 1 <= k <= T:
        raise InvalidArgumentError(f"k={k} outside [1, T={T}]")
    # Stable sort on -S keeps lower indices first among equal scores
    order = np.argsort(-scores, kind="stable")
    return np.sort(order[:k])


class ContinuousLayer(EventLayer):
    @property
    def kind(self) -> LayerKind:
        return LayerKind.CONTINUOUS

    def select_steps(self, zV, zA, k, onsets):
        return np.arange(zV.T)


class InstantLayer(EventLayer):
    @property
    def kind(self) -> LayerKind:
        return LayerKind.INSTANT

    def select_steps(self, zV, zA, k, onsets):
        return top_k_steps(correlation_scores(zV, zA), k)


class OnsetLayer(EventLayer):
    @property
    def kind(self) -> LayerKind:
        return LayerKind.ONSET

    def select_steps(self, zV, zA, k, onsets):
        onsets.check_within(zV.T)
        if not len(onsets):
            # Undefined on an empty onset set: fall back to continuous pooling
            return np.arange(zV.T)
        return onsets.as_array()


class VisualLayer(EventLayer):
    keeps_audio = False

    @property
    def kind(self) -> LayerKind:
        return LayerKind.VISUAL

    def select_steps(self, zV, zA, k, onsets):
        return np.arange(zV.T)


class AudioLayer(EventLayer):
    keeps_video = False

    @property
    def kind(self) -> LayerKind:
        return LayerKind.AUDIO

    def select_steps(self, zV, zA, k, onsets):
        return np.arange(zV.T)


EVENT_LAYERS: tuple[EventLayer, ...] = (ContinuousLayer(), InstantLayer(), OnsetLayer(), VisualLayer(), AudioLayer())

_NO_ONSETS = OnsetSet()


def fuse_continuous(zV: FeatureSequence, zA: FeatureSequence) -> np.ndarray:
    fused, _ = EVENT_LAYERS[0].pool(zV, zA, 1, _NO_ONSETS)
    return fused


def fuse_instant(zV: FeatureSequence, zA: FeatureSequence, k: int) -> np.ndarray:
    fused, _ = EVENT_LAYERS[1].pool(zV, zA, k, _NO_ONSETS)
    return fused


def fuse_onset(zV: FeatureSequence, zA: FeatureSequence, onsets: OnsetSet) -> np.ndarray:
    fused, _ = EVENT_LAYERS[2].pool(zV, zA, 1, onsets)
    return fused


def fuse_unimodal(z: FeatureSequence, keep: Modality) -> np.ndarray:
    """Pool one modality; the absent half of the fused vector is zero."""
    if z.modality is not keep:
        raise InvalidArgumentError(f"sequence is {z.modality.value}, asked to keep {keep.value}")
    silent = FeatureSequence(Modality.AUDIO if keep is Modality.VIDEO else Modality.VIDEO, np.zeros_like(z.values))
    if keep is Modality.VIDEO:
        fused, _ = EVENT_LAYERS[3].pool(z, silent, 1, _NO_ONSETS)
    else:
        fused, _ = EVENT_LAYERS[4].pool(silent, z, 1, _NO_ONSETS)
    return fused
