import enum


class Modality(enum.Enum):
    VIDEO = "video"
    AUDIO = "audio"


class LayerKind(enum.Enum):
    """Event-specific layers. Iteration order is the row order of every per-layer array."""

    CONTINUOUS = "continuous"
    INSTANT = "instant"
    ONSET = "onset"
    VISUAL = "visual"
    AUDIO = "audio"


LAYER_ORDER: tuple[LayerKind, ...] = tuple(LayerKind)
AV_LAYERS: tuple[LayerKind, ...] = (LayerKind.CONTINUOUS, LayerKind.INSTANT, LayerKind.ONSET)
