import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, TypeVar

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from avfuse.exceptions import ConfigError, DatasetIOError

logger = logging.getLogger(__name__)

M = TypeVar("M", bound=BaseModel)

DEFAULT_T = 100  # video time steps per 10 s clip
DEFAULT_K = 10  # top-k steps pooled by the instant layer
DEFAULT_WINDOW = 30  # localization time-average window (3 s of 100 steps)


@dataclass(frozen=True)
class DspConfig:
    sample_rate: int = 16000
    clip_seconds: int = 10
    n_fft: int = 512
    hop_length: int = 160
    win_length: int = 320
    n_mels: int = 80
    log_floor: float = 1e-10
    frames_per_step: int = 10
    # Peak picking, in 10 ms frames
    pre_max: int = 30
    post_max: int = 30
    pre_avg: int = 100
    post_avg: int = 100
    wait: int = 30
    delta: float = 0.07

    @property
    def clip_samples(self) -> int:
        return self.sample_rate * self.clip_seconds

    @property
    def n_frames(self) -> int:
        return self.clip_samples // self.hop_length

    @property
    def samples_per_step(self) -> int:
        return self.hop_length * self.frames_per_step


DSP_CONFIG = DspConfig()


class TrainConfig(BaseModel):
    """Optimization settings. Field names are the JSON config keys."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    lr0: float = Field(1e-2, gt=0)
    lr_decay: float = Field(0.1, gt=0, lt=1)
    patience: int = Field(3, ge=1)
    momentum: float = Field(0.9, ge=0, lt=1)
    epochs: int = Field(100, ge=1)
    batch_size: int = Field(16, ge=1)
    seed: int = Field(0, ge=0, lt=2**64)
    k: int = Field(DEFAULT_K, ge=1)
    loss_weights: tuple[float, float, float, float, float] = (1.0, 1.0, 1.0, 1.0, 1.0)

    embed: int = Field(16, ge=1, description="Shared embedding width D.")
    hidden: int = Field(0, ge=0, description="Hidden ReLU width H; 0 means a single affine map.")
    encoder_init: Literal["uniform", "identity"] = "uniform"
    train_encoders: bool = True

    @field_validator("loss_weights")
    @classmethod
    def _finite_weights(cls, value: tuple[float, ...]) -> tuple[float, ...]:
        if not all(math.isfinite(w) for w in value):
            raise ValueError("loss_weights must be finite")
        return value


class SynthConfig(BaseModel):
    """Synthetic dataset settings. Field names are the JSON config keys."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    T: int = Field(DEFAULT_T, ge=1)
    video_dim: int = Field(16, ge=1)
    audio_dim: int = Field(16, ge=1)
    C: int = Field(10, ge=1)
    samples_per_class: int = Field(20, ge=1)
    noise_std: float = Field(0.3, ge=0)
    correlation_strength: float = Field(3.0, gt=0)
    planted_instants: int = Field(10, ge=1)
    onset_period: int = Field(10, ge=2)
    seed: int = Field(0, ge=0, lt=2**64)

    # Class count per event kind, in LayerKind order; None spreads C evenly.
    allocation: tuple[int, int, int, int, int] | None = None
    split: tuple[int, int, int] = (8, 1, 1)
    distractor_strength: float = Field(0.0, ge=0)
    distractor_onsets: int = Field(4, ge=0)
    write_pcm: bool = False

    @model_validator(mode="after")
    def _check_consistency(self) -> "SynthConfig":
        if self.planted_instants > self.T:
            raise ValueError(f"planted_instants={self.planted_instants} exceeds T={self.T}")
        if self.distractor_onsets > self.T:
            raise ValueError(f"distractor_onsets={self.distractor_onsets} exceeds T={self.T}")
        if min(self.video_dim, self.audio_dim) < self.C:
            raise ValueError("orthonormal class prototypes need video_dim and audio_dim >= C")
        if self.allocation is not None and sum(self.allocation) != self.C:
            raise ValueError(f"allocation {self.allocation} does not sum to C={self.C}")
        if sum(self.split) <= 0 or any(part < 0 for part in self.split):
            raise ValueError(f"invalid split {self.split}")
        return self

    def class_allocation(self) -> tuple[int, ...]:
        """Per-kind class counts; an even spread (remainder to the first kinds) when unset."""
        if self.allocation is not None:
            return self.allocation
        base, extra = divmod(self.C, 5)
        return tuple(base + (1 if i < extra else 0) for i in range(5))


def load_config(path: str | Path, model_cls: type[M]) -> M:
    """Read a JSON file and validate it against a config model."""
    try:
        raw = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise DatasetIOError(f"Cannot read config {path}: {e}") from e
    try:
        config = model_cls.model_validate(json.loads(raw))
    except (json.JSONDecodeError, ValidationError) as e:
        raise ConfigError(f"Invalid {model_cls.__name__} in {path}: {e}") from e
    logger.debug(f"Loaded {model_cls.__name__} from {path}")
    return config
