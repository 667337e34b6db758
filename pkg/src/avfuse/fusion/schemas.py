from dataclasses import dataclass, field

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from avfuse.config import DEFAULT_K
from avfuse.exceptions import InvalidArgumentError
from avfuse.fusion.enums import LAYER_ORDER, LayerKind, Modality


@dataclass(frozen=True)
class FeatureSequence:
    """One modality's per-time-step embeddings, T rows x D columns."""

    modality: Modality
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise InvalidArgumentError(f"{self.modality.value} sequence must be T x D, T, D >= 1, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise InvalidArgumentError(f"{self.modality.value} sequence contains non-finite values")
        object.__setattr__(self, "values", values)

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def D(self) -> int:
        return self.values.shape[1]


def check_pair(zV: FeatureSequence, zA: FeatureSequence) -> None:
    """Paired sequences must be (video, audio) with identical T and D."""
    if zV.modality is not Modality.VIDEO or zA.modality is not Modality.AUDIO:
        raise InvalidArgumentError(f"expected (video, audio) pair, got ({zV.modality.value}, {zA.modality.value})")
    if zV.values.shape != zA.values.shape:
        raise InvalidArgumentError(f"paired shapes differ: video {zV.values.shape} vs audio {zA.values.shape}")


class ModelDims(BaseModel):
    """Widths of the model: raw inputs, shared embedding D, classes C, top-k, hidden H (0 = none)."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    video_in: int = Field(ge=1)
    audio_in: int = Field(ge=1)
    embed: int = Field(ge=1)
    classes: int = Field(ge=1)
    k: int = Field(DEFAULT_K, ge=1)
    hidden: int = Field(0, ge=0)

    def input_width(self, modality: Modality) -> int:
        return self.video_in if modality is Modality.VIDEO else self.audio_in


def param_shapes(dims: ModelDims) -> list[tuple[str, tuple[int, ...]]]:
    """Declared parameter order: video encoder, audio encoder, then one head per layer."""
    shapes: list[tuple[str, tuple[int, ...]]] = []
    for modality in Modality:
        prefix = f"encoder.{modality.value}"
        width = dims.input_width(modality)
        if dims.hidden:
            shapes.append((f"{prefix}.hidden.weight", (width, dims.hidden)))
            shapes.append((f"{prefix}.hidden.bias", (dims.hidden,)))
            width = dims.hidden
        shapes.append((f"{prefix}.weight", (width, dims.embed)))
        shapes.append((f"{prefix}.bias", (dims.embed,)))
    for kind in LAYER_ORDER:
        shapes.append((f"head.{kind.value}.weight", (2 * dims.embed, dims.classes)))
        shapes.append((f"head.{kind.value}.bias", (dims.classes,)))
    return shapes


@dataclass(frozen=True)
class EncoderParams:
    weight: np.ndarray
    bias: np.ndarray
    hidden_weight: np.ndarray | None = None
    hidden_bias: np.ndarray | None = None

    @property
    def input_width(self) -> int:
        return (self.hidden_weight if self.hidden_weight is not None else self.weight).shape[0]


@dataclass(frozen=True)
class HeadParams:
    weight: np.ndarray  # (2D, C)
    bias: np.ndarray  # (C,)


@dataclass
class ModelParams:
    """
    Named float64 arrays in the order given by param_shapes(dims).

    The same container holds gradients and SGD velocities.
    """

    dims: ModelDims
    arrays: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        expected = param_shapes(self.dims)
        if not self.arrays:
            self.arrays = {name: np.zeros(shape) for name, shape in expected}
        names = [name for name, _ in expected]
        if list(self.arrays) != names:
            missing = set(names) ^ set(self.arrays)
            raise InvalidArgumentError(f"parameter names do not match dims (differing: {sorted(missing)})")
        for name, shape in expected:
            arr = np.asarray(self.arrays[name], dtype=np.float64)
            if arr.shape != shape:
                raise InvalidArgumentError(f"{name}: shape {arr.shape} does not match declared {shape}")
            self.arrays[name] = arr

    def encoder(self, modality: Modality) -> EncoderParams:
        prefix = f"encoder.{modality.value}"
        return EncoderParams(
            weight=self.arrays[f"{prefix}.weight"],
            bias=self.arrays[f"{prefix}.bias"],
            hidden_weight=self.arrays.get(f"{prefix}.hidden.weight"),
            hidden_bias=self.arrays.get(f"{prefix}.hidden.bias"),
        )

    def head(self, kind: LayerKind) -> HeadParams:
        return HeadParams(weight=self.arrays[f"head.{kind.value}.weight"], bias=self.arrays[f"head.{kind.value}.bias"])

    def zeros_like(self) -> "ModelParams":
        return ModelParams(self.dims, {name: np.zeros_like(arr) for name, arr in self.arrays.items()})

    def copy(self) -> "ModelParams":
        return ModelParams(self.dims, {name: arr.copy() for name, arr in self.arrays.items()})

    def flatten(self) -> np.ndarray:
        return np.concatenate([arr.reshape(-1) for arr in self.arrays.values()])

    def unflatten(self, vector: np.ndarray) -> "ModelParams":
        """A new ModelParams with values taken from a flat vector in declared order."""
        vector = np.asarray(vector, dtype=np.float64)
        if vector.size != self.size:
            raise InvalidArgumentError(f"flat vector has {vector.size} values, expected {self.size}")
        arrays, offset = {}, 0
        for name, arr in self.arrays.items():
            arrays[name] = vector[offset : offset + arr.size].reshape(arr.shape).copy()
            offset += arr.size
        return ModelParams(self.dims, arrays)

    @property
    def size(self) -> int:
        return sum(arr.size for arr in self.arrays.values())

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(arr)) for arr in self.arrays.values())


@dataclass(frozen=True)
class LayerOutputs:
    """5 x C logits, one row per LayerKind in LAYER_ORDER."""

    logits: np.ndarray

    def __post_init__(self):
        logits = np.asarray(self.logits, dtype=np.float64)
        if logits.ndim != 2 or logits.shape[0] != len(LAYER_ORDER) or logits.shape[1] < 1:
            raise InvalidArgumentError(f"layer outputs must be {len(LAYER_ORDER)} x C, got {logits.shape}")
        if not np.all(np.isfinite(logits)):
            raise InvalidArgumentError("layer outputs contain non-finite logits")
        object.__setattr__(self, "logits", logits)

    @property
    def classes(self) -> int:
        return self.logits.shape[1]

    def row(self, kind: LayerKind) -> np.ndarray:
        return self.logits[LAYER_ORDER.index(kind)]
