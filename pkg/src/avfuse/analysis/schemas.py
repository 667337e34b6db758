from pydantic import BaseModel, ConfigDict, Field

from avfuse.fusion.enums import LayerKind


class PredictionSet(BaseModel):
    """Adaptive multi-label prediction: accepted labels with the layer that accepted each."""

    model_config = ConfigDict(frozen=True)

    labels: list[int] = Field(default_factory=list, description="Sorted, distinct class indices")
    sources: list[LayerKind] = Field(default_factory=list, description="First accepting layer per label")
    confidences: list[float] = Field(default_factory=list, description="That layer's softmax confidence")

    def __len__(self) -> int:
        return len(self.labels)

    def as_set(self) -> frozenset[int]:
        return frozenset(self.labels)


class LayerUniqueness(BaseModel):
    """Samples only one audio-visual layer gets right, per layer, plus the event-layers-beat-continuous count."""

    continuous: int = 0
    instant: int = 0
    onset: int = 0
    event_not_continuous: int = Field(0, description="(instant or onset correct) and continuous wrong")
    total: int = 0


class SampleBias(BaseModel):
    id: str
    category: int
    winner: LayerKind
    confidences: list[float] = Field(description="Per-layer softmax confidence on the ground-truth class")


class BiasReport(BaseModel):
    """Per-sample winners, per-category winning layer, and per-dataset LayerKind counts."""

    samples: list[SampleBias] = Field(default_factory=list)
    categories: dict[int, LayerKind] = Field(default_factory=dict)
    counts: dict[LayerKind, int] = Field(default_factory=dict)
    skipped_categories: list[int] = Field(default_factory=list)


class EvalSummary(BaseModel):
    samples: int
    layer_accuracy: dict[str, float]
    voted_accuracy: float
    adaptive_f1: float | None = None
    top_n_f1: dict[int, float] | None = None
    mean_set_size: float | None = None
    onset_fallbacks: int = 0


class PredictionRow(BaseModel):
    """One line of `predict` output."""

    id: str
    voted: int
    labels: list[int]
    confidences: list[float] = Field(description="Per-layer softmax confidence of its own prediction, LayerKind order")
    flags: list[str] = Field(default_factory=list)
