"""Reducing the five layer outputs to one label (majority vote) or a label set (adaptive multi-label)."""

import logging
from collections import Counter
from typing import Iterable

import numpy as np

from avfuse.analysis.schemas import PredictionSet
from avfuse.core.numeric import softmax
from avfuse.exceptions import InvalidArgumentError
from avfuse.fusion.enums import LAYER_ORDER, LayerKind
from avfuse.fusion.schemas import LayerOutputs

logger = logging.getLogger(__name__)


def layer_predictions(outputs: LayerOutputs) -> np.ndarray:
    """argmax of every row; lowest class index wins ties."""
    return np.argmax(outputs.logits, axis=1)


def layer_confidences(outputs: LayerOutputs) -> np.ndarray:
    """softmax(O_i)[p_i] for every layer i."""
    probs = softmax(outputs.logits)
    return probs[np.arange(len(LAYER_ORDER)), layer_predictions(outputs)]


def majority_vote(outputs: LayerOutputs) -> int:
    """
    The modal per-layer prediction.

    Without a unique mode the prediction of the most confident layer wins;
    equal confidences fall back to LayerKind order.
    """
    preds = layer_predictions(outputs)
    counts = Counter(int(p) for p in preds)
    top = max(counts.values())
    modes = [label for label, count in counts.items() if count == top]
    if len(modes) == 1:
        return modes[0]
    # np.argmax keeps the first (LayerKind-order) layer on equal confidence
    return int(preds[int(np.argmax(layer_confidences(outputs)))])


def multilabel_set(outputs: LayerOutputs) -> PredictionSet:
    """
    Accept layer i's prediction p_i when no other layer has a larger logit for p_i.

    Equal logits are resolved in favour of the earliest layer.
    """
    preds = layer_predictions(outputs)
    confidences = layer_confidences(outputs)
    accepted: dict[int, tuple[LayerKind, float]] = {}
    for i, kind in enumerate(LAYER_ORDER):
        label = int(preds[i])
        if int(np.argmax(outputs.logits[:, label])) != i:
            continue
        accepted.setdefault(label, (kind, float(confidences[i])))
    labels = sorted(accepted)
    return PredictionSet(
        labels=labels,
        sources=[accepted[label][0] for label in labels],
        confidences=[accepted[label][1] for label in labels],
    )


def top_n_set(outputs: LayerOutputs, n: int, kind: LayerKind = LayerKind.CONTINUOUS) -> PredictionSet:
    """Fixed-size baseline: the n highest-scoring classes of one layer."""
    if not 1 <= n <= outputs.classes:
        raise InvalidArgumentError(f"n={n} outside [1, C={outputs.classes}]")
    row = outputs.row(kind)
    probs = softmax(row)
    chosen = sorted(int(c) for c in np.argsort(-row, kind="stable")[:n])
    return PredictionSet(labels=chosen, sources=[kind] * n, confidences=[float(probs[c]) for c in chosen])


def f1_multilabel(predicted: Iterable[int], truth: Iterable[int]) -> float:
    """2|P & G| / (|P| + |G|); ground truth must be non-empty."""
    pred_set, truth_set = set(predicted), set(truth)
    if not truth_set:
        raise InvalidArgumentError("ground-truth label set is empty")
    return 2.0 * len(pred_set & truth_set) / (len(pred_set) + len(truth_set))


def mean_f1(pairs: Iterable[tuple[Iterable[int], Iterable[int]]]) -> float:
    scores = [f1_multilabel(pred, truth) for pred, truth in pairs]
    if not scores:
        raise InvalidArgumentError("mean F1 over an empty dataset")
    return float(np.mean(scores))


def mean_set_size(sets: Iterable[PredictionSet]) -> float:
    sizes = [len(s) for s in sets]
    if not sizes:
        raise InvalidArgumentError("mean set size over an empty dataset")
    return float(np.mean(sizes))
