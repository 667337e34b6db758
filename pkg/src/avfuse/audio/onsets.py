"""
Onset detection: spectral flux over the log-mel matrix, peak picking,
and mapping of 10 ms frames onto the video time-step grid.
"""

import logging
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from avfuse.audio.features import compute_logmel
from avfuse.audio.schemas import LogMelSpectrogram, OnsetEnvelope, OnsetSet, PcmClip
from avfuse.config import DEFAULT_T, DSP_CONFIG, DspConfig
from avfuse.exceptions import InvalidArgumentError

logger = logging.getLogger(__name__)


def onset_envelope(spec: LogMelSpectrogram) -> OnsetEnvelope:
    """Half-wave rectified first difference of log-mel values, summed over bands."""
    values = spec.values
    env = np.zeros(values.shape[0], dtype=np.float64)
    if values.shape[0] > 1:
        env[1:] = np.maximum(0.0, np.diff(values, axis=0)).sum(axis=1)
    return OnsetEnvelope(values=env)


def _moving_max(x: np.ndarray, pre: int, post: int) -> np.ndarray:
    padded = np.concatenate([np.full(pre, -np.inf), x, np.full(post, -np.inf)])
    return sliding_window_view(padded, pre + post + 1).max(axis=1)


def _moving_mean(x: np.ndarray, pre: int, post: int) -> np.ndarray:
    """Mean over [t - pre, t + post], window clamped to the signal."""
    n = x.size
    csum = np.concatenate([[0.0], np.cumsum(x)])
    idx = np.arange(n)
    lo = np.maximum(idx - pre, 0)
    hi = np.minimum(idx + post, n - 1) + 1
    return (csum[hi] - csum[lo]) / (hi - lo)


def pick_onsets(env: OnsetEnvelope, cfg: DspConfig = DSP_CONFIG) -> list[int]:
    """
    Frames t that are the local maximum over [t - pre_max, t + post_max], exceed the
    local mean over [t - pre_avg, t + post_avg] by at least delta, and come at least
    `wait` frames after the previously accepted onset (greedy, left to right).
    """
    x = np.asarray(env.values, dtype=np.float64)
    if x.size == 0:
        return []

    mov_max = _moving_max(x, cfg.pre_max, cfg.post_max)
    mov_avg = _moving_mean(x, cfg.pre_avg, cfg.post_avg)
    candidates = np.flatnonzero((x == mov_max) & (x >= mov_avg + cfg.delta))

    peaks: list[int] = []
    for t in candidates:
        if peaks and t - peaks[-1] < cfg.wait:
            continue
        peaks.append(int(t))
    return peaks


def map_onsets_to_steps(
    frames: Sequence[int], frames_per_step: int = DSP_CONFIG.frames_per_step, T: int = DEFAULT_T
) -> OnsetSet:
    """floor(frame / frames_per_step), clamped to [0, T - 1], deduplicated."""
    if frames_per_step < 1:
        raise InvalidArgumentError(f"frames_per_step must be >= 1, got {frames_per_step}")
    if T < 1:
        raise InvalidArgumentError(f"T must be >= 1, got {T}")
    steps = np.clip(np.asarray(frames, dtype=np.int64) // frames_per_step, 0, T - 1)
    return OnsetSet.from_steps(steps.tolist())


def detect_onsets(clip: PcmClip, T: int = DEFAULT_T, cfg: DspConfig = DSP_CONFIG) -> OnsetSet:
    """Full pipeline: log-mel -> spectral flux -> peaks -> time steps."""
    spec = compute_logmel(clip, cfg)
    frames = pick_onsets(onset_envelope(spec), cfg)
    onsets = map_onsets_to_steps(frames, spec.frames // T if spec.frames >= T else 1, T)
    logger.debug(f"Detected {len(frames)} onset frames -> {len(onsets)} steps")
    return onsets
