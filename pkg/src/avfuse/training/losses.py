import numpy as np

from avfuse.core.numeric import as_vector, log_softmax
from avfuse.exceptions import InvalidArgumentError
from avfuse.fusion.enums import LAYER_ORDER
from avfuse.fusion.schemas import LayerOutputs


def cross_entropy_loss(logits: np.ndarray, y: int) -> float:
    """-log softmax(logits)[y] via log-sum-exp; always >= 0."""
    logits = as_vector(logits, "logits")
    if not 0 <= y < logits.size:
        raise InvalidArgumentError(f"label {y} outside [0, {logits.size})")
    return max(0.0, float(-log_softmax(logits)[y]))


def layer_losses(outputs: LayerOutputs, y: int) -> np.ndarray:
    """Cross entropy of every layer row, in LAYER_ORDER."""
    if not 0 <= y < outputs.classes:
        raise InvalidArgumentError(f"label {y} outside [0, {outputs.classes})")
    return np.maximum(0.0, -log_softmax(outputs.logits)[:, y])


def multi_task_loss(outputs: LayerOutputs, y: int, weights) -> float:
    """sum_i weights[i] * CE(O_i, y)"""
    weights = as_vector(weights, "loss_weights")
    if weights.size != len(LAYER_ORDER):
        raise InvalidArgumentError(f"need {len(LAYER_ORDER)} loss weights, got {weights.size}")
    return float(weights @ layer_losses(outputs, y))
