"""
Abstract interface for event-specific layers.

Every layer pools the paired embedding sequences over a subset of time
steps into one fused vector concat(video_half, audio_half) of width 2D.
Layers differ only in which steps they pool and which halves they keep.
"""

from abc import ABC, abstractmethod

import numpy as np

from avfuse.audio.schemas import OnsetSet
from avfuse.fusion.enums import LayerKind
from avfuse.fusion.schemas import FeatureSequence, check_pair


class EventLayer(ABC):
    """Contract shared by the continuous, instant, onset, visual and audio layers."""

    keeps_video: bool = True
    keeps_audio: bool = True

    @property
    @abstractmethod
    def kind(self) -> LayerKind:
        """Which LayerKind row this layer produces."""
        pass

    @abstractmethod
    def select_steps(self, zV: FeatureSequence, zA: FeatureSequence, k: int, onsets: OnsetSet) -> np.ndarray:
        """
        Time steps to pool, sorted ascending.

        The selection is a constant of the forward pass: no gradient flows through it.
        """
        pass

    def pool(
        self, zV: FeatureSequence, zA: FeatureSequence, k: int, onsets: OnsetSet, steps: np.ndarray | None = None
    ) -> tuple[np.ndarray, np.ndarray]:
        """
        Return (fused vector of width 2D, pooled steps).

        Passing `steps` skips the selection and pools exactly those steps.
        """
        check_pair(zV, zA)
        if steps is None:
            steps = self.select_steps(zV, zA, k, onsets)
        video = zV.values if self.keeps_video else np.zeros_like(zV.values)
        audio = zA.values if self.keeps_audio else np.zeros_like(zA.values)
        concat = np.hstack([video, audio])
        return concat[steps].mean(axis=0), steps
