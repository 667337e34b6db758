import numpy as np
import pytest

from avfuse.audio.schemas import OnsetSet
from avfuse.config import SynthConfig, TrainConfig
from avfuse.core.rng import make_rng
from avfuse.fusion.enums import Modality
from avfuse.fusion.schemas import FeatureSequence, ModelDims
from avfuse.training.schemas import Sample


@pytest.fixture
def rng():
    return make_rng(1234)


@pytest.fixture
def small_dims():
    return ModelDims(video_in=3, audio_in=5, embed=4, classes=3, k=2)


@pytest.fixture
def small_synth():
    """Two classes per kind, tiny feature widths; fast enough for unit tests."""
    return SynthConfig(T=20, video_dim=10, audio_dim=10, C=10, samples_per_class=10, onset_period=5, planted_instants=3)


@pytest.fixture
def heads_only():
    return TrainConfig(encoder_init="identity", train_encoders=False, embed=4)


def random_sample(rng, dims: ModelDims, T: int = 6, sample_id: str = "s", y: int | None = None) -> Sample:
    onsets = OnsetSet.from_steps(rng.choice(T, size=max(1, T // 3), replace=False).tolist())
    return Sample(
        id=sample_id,
        video_raw=FeatureSequence(Modality.VIDEO, rng.standard_normal((T, dims.video_in))),
        audio_raw=FeatureSequence(Modality.AUDIO, rng.standard_normal((T, dims.audio_in))),
        y=int(rng.integers(dims.classes)) if y is None else y,
        onsets=onsets,
    )


def pair(values_v, values_a) -> tuple[FeatureSequence, FeatureSequence]:
    return (
        FeatureSequence(Modality.VIDEO, np.asarray(values_v, dtype=np.float64)),
        FeatureSequence(Modality.AUDIO, np.asarray(values_a, dtype=np.float64)),
    )
