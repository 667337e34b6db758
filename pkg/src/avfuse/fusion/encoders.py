import numpy as np

from avfuse.exceptions import InvalidArgumentError, NumericFailureError
from avfuse.fusion.schemas import EncoderParams, FeatureSequence


def encode_values(raw: np.ndarray, enc: EncoderParams) -> tuple[np.ndarray, np.ndarray | None]:
    """
    Rows through the encoder: affine D_in -> D, or D_in -> H (ReLU) -> D.
    Returns (embeddings, hidden pre-activations or None).

    Finite inputs that overflow under the current weights raise NumericFailureError.
    """
    if raw.shape[1] != enc.input_width:
        raise InvalidArgumentError(f"input width {raw.shape[1]} does not match encoder width {enc.input_width}")
    with np.errstate(over="ignore", invalid="ignore"):
        if enc.hidden_weight is None:
            values, pre = raw @ enc.weight + enc.bias, None
        else:
            pre = raw @ enc.hidden_weight + enc.hidden_bias
            values = np.maximum(pre, 0.0) @ enc.weight + enc.bias
    if not np.all(np.isfinite(values)):
        raise NumericFailureError("encoder produced non-finite embeddings")
    return values, pre


def encode(raw: FeatureSequence, enc: EncoderParams) -> FeatureSequence:
    """Same T, width D; deterministic."""
    values, _ = encode_values(raw.values, enc)
    return FeatureSequence(raw.modality, values)
