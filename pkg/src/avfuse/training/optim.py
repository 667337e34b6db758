import logging
from typing import Sequence

import numpy as np

from avfuse.config import TrainConfig
from avfuse.exceptions import InvalidArgumentError
from avfuse.fusion.schemas import ModelParams

logger = logging.getLogger(__name__)


def _check_same_layout(*containers: ModelParams) -> None:
    first = containers[0]
    for other in containers[1:]:
        if other.dims != first.dims:
            raise InvalidArgumentError(f"parameter layouts differ: {first.dims} vs {other.dims}")


def sgd_update(
    params: ModelParams, grads: ModelParams, lr: float, momentum: float, velocity: ModelParams
) -> tuple[ModelParams, ModelParams]:
    """
    One momentum step: v <- m*v + g; p <- p - lr*v.

    Returns new (params, velocity); the inputs are left untouched.
    """
    _check_same_layout(params, grads, velocity)
    if not lr > 0:
        raise InvalidArgumentError(f"learning rate must be positive, got {lr}")
    if not 0 <= momentum < 1:
        raise InvalidArgumentError(f"momentum must be in [0, 1), got {momentum}")
    new_velocity = {name: momentum * velocity.arrays[name] + grads.arrays[name] for name in params.arrays}
    new_params = {name: params.arrays[name] - lr * new_velocity[name] for name in params.arrays}
    return ModelParams(params.dims, new_params), ModelParams(params.dims, new_velocity)


def epochs_since_improvement(history: Sequence[float]) -> int:
    """Epochs after the one that first reached the best value so far."""
    if not history:
        return 0
    best_epoch = int(np.argmax(np.asarray(history, dtype=np.float64)))
    return len(history) - 1 - best_epoch


def lr_schedule_step(history: Sequence[float], lr: float, cfg: TrainConfig) -> float:
    """
    Learning rate for the next epoch given per-epoch validation accuracies.

    The rate decays by cfg.lr_decay every time `patience` epochs pass without a new
    best; each decay restarts the count.
    """
    stale = epochs_since_improvement(history)
    if stale > 0 and stale % cfg.patience == 0:
        new_lr = lr * cfg.lr_decay
        logger.info(f"📉 No improvement for {stale} epochs, lr {lr:.3g} -> {new_lr:.3g}")
        return new_lr
    return lr
