from dataclasses import dataclass

from pydantic import BaseModel, ConfigDict, Field

from avfuse.audio.schemas import OnsetSet
from avfuse.exceptions import InvalidArgumentError
from avfuse.fusion.enums import LayerKind
from avfuse.fusion.schemas import FeatureSequence


@dataclass(frozen=True)
class Sample:
    """One labeled audio-visual pair plus optional ground truth from the generator."""

    id: str
    video_raw: FeatureSequence
    audio_raw: FeatureSequence
    y: int
    multi_labels: frozenset[int] | None = None
    onsets: OnsetSet | None = None
    pcm_path: str | None = None
    category: int | None = None
    event_kind: LayerKind | None = None
    planted_steps: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.y < 0:
            raise InvalidArgumentError(f"sample {self.id}: negative label {self.y}")
        if self.multi_labels is not None and self.y not in self.multi_labels:
            raise InvalidArgumentError(f"sample {self.id}: label {self.y} missing from multi_labels")
        if self.video_raw.T != self.audio_raw.T:
            raise InvalidArgumentError(f"sample {self.id}: video T={self.video_raw.T} vs audio T={self.audio_raw.T}")
        if self.onsets is not None:
            self.onsets.check_within(self.video_raw.T)

    @property
    def T(self) -> int:
        return self.video_raw.T

    @property
    def category_id(self) -> int:
        return self.y if self.category is None else self.category

    @property
    def onset_set(self) -> OnsetSet:
        return self.onsets if self.onsets is not None else OnsetSet()

    @property
    def truth(self) -> frozenset[int]:
        return self.multi_labels if self.multi_labels is not None else frozenset({self.y})


class EpochRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    epoch: int
    lr: float
    train_loss: dict[str, float] = Field(description="Mean per-layer cross entropy over the epoch")
    val_accuracy: dict[str, float] = Field(description="Per-layer accuracy on the validation split")
    val_voted: float = Field(description="Majority-vote accuracy on the validation split")


class TrainLog(BaseModel):
    records: list[EpochRecord] = Field(default_factory=list)

    def voted_history(self) -> list[float]:
        return [r.val_voted for r in self.records]

    def to_jsonl(self) -> str:
        return "".join(r.model_dump_json() + "\n" for r in self.records)
