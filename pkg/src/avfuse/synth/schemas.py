from dataclasses import dataclass

from avfuse.exceptions import InvalidArgumentError
from avfuse.fusion.enums import LayerKind


@dataclass(frozen=True)
class EventSpec:
    """One planted event: its temporal kind, class, and the steps carrying the signal."""

    kind: LayerKind
    cls: int
    planted_steps: tuple[int, ...] = ()

    def __post_init__(self):
        if self.cls < 0:
            raise InvalidArgumentError(f"negative class {self.cls}")
        if list(self.planted_steps) != sorted(set(self.planted_steps)):
            raise InvalidArgumentError(f"planted steps must be sorted and unique: {self.planted_steps}")

    @property
    def uses_video(self) -> bool:
        return self.kind is not LayerKind.AUDIO

    @property
    def uses_audio(self) -> bool:
        return self.kind is not LayerKind.VISUAL
