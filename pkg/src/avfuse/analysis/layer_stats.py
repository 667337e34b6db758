from typing import Iterable, Sequence

import numpy as np

from avfuse.analysis.schemas import LayerUniqueness
from avfuse.analysis.voting import layer_predictions, majority_vote
from avfuse.exceptions import InvalidArgumentError
from avfuse.fusion.enums import AV_LAYERS, LAYER_ORDER
from avfuse.fusion.schemas import LayerOutputs

VOTED = "voted"


def layer_uniqueness(correct: Iterable[tuple[bool, bool, bool]]) -> LayerUniqueness:
    """
    Tally per-sample correctness bits of the (continuous, instant, onset) layers.

    A sample counts for a layer when that layer alone is right. It also counts as
    event_not_continuous whenever instant or onset is right but continuous is not,
    whether or not it was uniquely correct.
    """
    counts = dict.fromkeys([kind.value for kind in AV_LAYERS], 0)
    event_not_continuous = total = 0
    for bits in correct:
        bits = tuple(bool(b) for b in bits)
        if len(bits) != len(AV_LAYERS):
            raise InvalidArgumentError(f"expected {len(AV_LAYERS)} correctness bits, got {len(bits)}")
        total += 1
        if sum(bits) == 1:
            counts[AV_LAYERS[bits.index(True)].value] += 1
        continuous, instant, onset = bits
        if (instant or onset) and not continuous:
            event_not_continuous += 1
    return LayerUniqueness(**counts, event_not_continuous=event_not_continuous, total=total)


def av_correctness(outputs: LayerOutputs, y: int) -> tuple[bool, bool, bool]:
    preds = layer_predictions(outputs)
    return tuple(bool(preds[LAYER_ORDER.index(kind)] == y) for kind in AV_LAYERS)


def layer_accuracies(outputs: Sequence[LayerOutputs], labels: Sequence[int]) -> dict[str, float]:
    """Per-layer top-1 accuracy plus majority-vote accuracy under the key "voted"."""
    if len(outputs) != len(labels):
        raise InvalidArgumentError(f"{len(outputs)} outputs vs {len(labels)} labels")
    if not outputs:
        raise InvalidArgumentError("accuracy over an empty dataset")
    y = np.asarray(labels)
    preds = np.stack([layer_predictions(o) for o in outputs])  # (N, 5)
    result = {kind.value: float(np.mean(preds[:, i] == y)) for i, kind in enumerate(LAYER_ORDER)}
    result[VOTED] = float(np.mean([majority_vote(o) == label for o, label in zip(outputs, labels)]))
    return result
