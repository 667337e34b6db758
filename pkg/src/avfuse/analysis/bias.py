"""
Modality bias: which layer is most confident at the true class, per sample,
then a per-category vote and per-dataset counts of categories per layer.
"""

import logging
from collections import Counter, defaultdict
from typing import Iterable, Sequence

import numpy as np

from avfuse.analysis.schemas import BiasReport, SampleBias
from avfuse.core.numeric import softmax
from avfuse.exceptions import InvalidArgumentError
from avfuse.fusion.enums import LAYER_ORDER, LayerKind
from avfuse.fusion.schemas import LayerOutputs

logger = logging.getLogger(__name__)


def modality_confidences(outputs: LayerOutputs, y: int) -> np.ndarray:
    """softmax(O_i)[y] for each of the five layers."""
    if not 0 <= y < outputs.classes:
        raise InvalidArgumentError(f"class {y} outside [0, {outputs.classes})")
    return softmax(outputs.logits)[:, y]


def winning_layer(outputs: LayerOutputs, y: int) -> LayerKind:
    return LAYER_ORDER[int(np.argmax(modality_confidences(outputs, y)))]


def sample_bias(sample_id: str, category: int, outputs: LayerOutputs, y: int) -> SampleBias:
    confidences = modality_confidences(outputs, y)
    return SampleBias(
        id=sample_id,
        category=category,
        winner=LAYER_ORDER[int(np.argmax(confidences))],
        confidences=[float(c) for c in confidences],
    )


def _modal_layer(winners: Iterable[LayerKind]) -> LayerKind:
    counts = Counter(winners)
    top = max(counts.values())
    return next(kind for kind in LAYER_ORDER if counts.get(kind) == top)


def dataset_bias(results: Sequence[SampleBias], categories: Iterable[int] | None = None) -> BiasReport:
    """
    Assign every category the modal winning layer of its samples (ties in LayerKind order).

    Declared categories without samples are skipped with a warning.
    """
    by_category: dict[int, list[LayerKind]] = defaultdict(list)
    for r in results:
        by_category[r.category].append(r.winner)

    declared = sorted(set(categories) | set(by_category)) if categories is not None else sorted(by_category)
    assignment: dict[int, LayerKind] = {}
    skipped: list[int] = []
    for category in declared:
        winners = by_category.get(category)
        if not winners:
            logger.warning(f"⚠️ Category {category} has no samples, skipped in bias report")
            skipped.append(category)
            continue
        assignment[category] = _modal_layer(winners)

    counts = dict.fromkeys(LAYER_ORDER, 0)
    for kind in assignment.values():
        counts[kind] += 1
    return BiasReport(samples=list(results), categories=assignment, counts=counts, skipped_categories=skipped)


def top_activated(results: Sequence[SampleBias], per_layer: int = 3) -> dict[LayerKind, list[str]]:
    """For every layer, the ids of the samples it is most confident about at the true class."""
    if per_layer < 1:
        raise InvalidArgumentError(f"per_layer must be >= 1, got {per_layer}")
    top: dict[LayerKind, list[str]] = {}
    for i, kind in enumerate(LAYER_ORDER):
        ranked = sorted(results, key=lambda r: (-r.confidences[i], r.id))
        top[kind] = [r.id for r in ranked[:per_layer]]
    return top
