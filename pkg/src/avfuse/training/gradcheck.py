import logging
from typing import Sequence

import numpy as np

from avfuse.config import TrainConfig
from avfuse.core.numeric import finite_diff_grad, relative_error
from avfuse.fusion.model import forward_cached
from avfuse.fusion.schemas import ModelParams
from avfuse.training.backward import backward, batch_loss
from avfuse.training.schemas import Sample

logger = logging.getLogger(__name__)

GRADCHECK_TOLERANCE = 1e-4


def gradient_check(
    params: ModelParams,
    batch: Sequence[Sample],
    cfg: TrainConfig,
    eps: float = 1e-5,
    labels: Sequence[int] | None = None,
) -> dict[str, float]:
    """
    Relative error between backward() and central differences, per parameter array.

    Top-k and onset selections are taken from the unperturbed forward pass and held
    fixed for every perturbed evaluation, so tied or near-tied scores cannot flip
    the pooled steps between the two sides of a difference.
    """
    analytic, _ = backward(batch, params, cfg, labels)
    frozen = [forward_cached(s.video_raw, s.audio_raw, params, s.onset_set)[1].steps for s in batch]

    def loss_at(flat: np.ndarray) -> float:
        return batch_loss(batch, params.unflatten(flat), cfg.loss_weights, labels, frozen)

    numeric = params.unflatten(finite_diff_grad(loss_at, params.flatten(), eps))
    if not cfg.train_encoders:
        for name in numeric.arrays:
            if name.startswith("encoder."):
                numeric.arrays[name][...] = 0.0

    errors = {name: relative_error(analytic.arrays[name], numeric.arrays[name]) for name in params.arrays}
    worst = max(errors, key=errors.get)
    logger.info(f"Gradient check over {params.size} parameters: worst {worst} = {errors[worst]:.2e}")
    return errors
