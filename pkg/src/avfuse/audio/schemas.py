from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from avfuse.config import DSP_CONFIG
from avfuse.exceptions import InvalidArgumentError


@dataclass(frozen=True)
class PcmClip:
    """Mono PCM, 16 kHz, exactly 10 s after normalization."""

    samples: np.ndarray
    sample_rate: int = DSP_CONFIG.sample_rate


@dataclass(frozen=True)
class LogMelSpectrogram:
    """frames x mel_bands matrix of ln(power + floor)."""

    values: np.ndarray

    @property
    def frames(self) -> int:
        return self.values.shape[0]

    @property
    def mel_bands(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class OnsetEnvelope:
    values: np.ndarray


@dataclass(frozen=True)
class OnsetSet:
    """Sorted, unique video time-step indices with a detected audio onset."""

    steps: tuple[int, ...] = ()

    def __post_init__(self):
        if any(s < 0 for s in self.steps):
            raise InvalidArgumentError(f"negative onset step in {self.steps}")
        if any(b <= a for a, b in zip(self.steps, self.steps[1:])):
            raise InvalidArgumentError(f"onset steps must be strictly increasing: {self.steps}")

    @classmethod
    def from_steps(cls, steps: Iterable[int]) -> "OnsetSet":
        return cls(tuple(sorted({int(s) for s in steps})))

    def check_within(self, T: int) -> None:
        if self.steps and self.steps[-1] >= T:
            raise InvalidArgumentError(f"onset step {self.steps[-1]} outside [0, {T})")

    def as_array(self) -> np.ndarray:
        return np.asarray(self.steps, dtype=np.int64)

    def __len__(self) -> int:
        return len(self.steps)

    def __iter__(self) -> Iterator[int]:
        return iter(self.steps)
