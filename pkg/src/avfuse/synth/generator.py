"""
Seeded generators of audio-visual feature pairs with planted event structure.

Classes are C orthonormal prototype directions per modality (shared between
modalities when both have the same width). Each event kind decides at which
steps, and in which modality, the prototype scaled by correlation_strength is
added on top of isotropic Gaussian noise.
"""

import logging
from functools import lru_cache
from typing import Sequence

import numpy as np

from avfuse.audio.schemas import OnsetSet, PcmClip
from avfuse.config import DSP_CONFIG, SynthConfig
from avfuse.core.rng import Rng, make_rng
from avfuse.exceptions import InvalidArgumentError
from avfuse.fusion.enums import AV_LAYERS, LAYER_ORDER, LayerKind, Modality
from avfuse.fusion.schemas import FeatureSequence
from avfuse.synth.schemas import EventSpec
from avfuse.training.schemas import Sample
from avfuse.utils.hashing import derive_seed

logger = logging.getLogger(__name__)

CLICK_SAMPLES = 16  # 1 ms at 16 kHz
CLICK_AMPLITUDE = 0.9


def _orthonormal_rows(rng: Rng, n: int, dim: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((dim, n)))
    # Fix column signs so the basis is a deterministic function of the draw
    q *= np.where(np.diag(r) < 0, -1.0, 1.0)
    return q.T


@lru_cache(maxsize=8)
def _prototypes(seed: int, classes: int, video_dim: int, audio_dim: int) -> tuple[np.ndarray, np.ndarray]:
    video = _orthonormal_rows(make_rng(derive_seed(seed, "prototypes", "video")), classes, video_dim)
    if audio_dim == video_dim:
        return video, video
    audio = _orthonormal_rows(make_rng(derive_seed(seed, "prototypes", "audio")), classes, audio_dim)
    return video, audio


def class_prototypes(cfg: SynthConfig) -> tuple[np.ndarray, np.ndarray]:
    """(C x video_dim, C x audio_dim) orthonormal class directions; read-only."""
    video, audio = _prototypes(cfg.seed, cfg.C, cfg.video_dim, cfg.audio_dim)
    video.flags.writeable = False
    audio.flags.writeable = False
    return video, audio


def category_kinds(cfg: SynthConfig) -> list[LayerKind]:
    """Event kind of every class: consecutive blocks following the allocation, in LayerKind order."""
    kinds: list[LayerKind] = []
    for kind, count in zip(LAYER_ORDER, cfg.class_allocation()):
        kinds.extend([kind] * count)
    return kinds


def onset_steps(cfg: SynthConfig) -> tuple[int, ...]:
    return tuple(range(0, cfg.T, cfg.onset_period))


def make_event_spec(kind: LayerKind, cls: int, cfg: SynthConfig, seed: int) -> EventSpec:
    """Draw the planted steps for an event of this kind."""
    if kind is LayerKind.INSTANT:
        rng = make_rng(seed)
        steps = np.sort(rng.choice(cfg.T, size=cfg.planted_instants, replace=False))
        return EventSpec(kind, cls, tuple(int(s) for s in steps))
    if kind is LayerKind.ONSET:
        return EventSpec(kind, cls, onset_steps(cfg))
    return EventSpec(kind, cls)


def _check_spec(spec: EventSpec, cfg: SynthConfig) -> None:
    if spec.cls >= cfg.C:
        raise InvalidArgumentError(f"class {spec.cls} outside [0, C={cfg.C})")
    if spec.planted_steps and spec.planted_steps[-1] >= cfg.T:
        raise InvalidArgumentError(f"planted step {spec.planted_steps[-1]} outside [0, T={cfg.T})")
    if spec.kind is LayerKind.INSTANT and not spec.planted_steps:
        raise InvalidArgumentError("instant event needs at least one planted step")
    if spec.kind is LayerKind.ONSET and spec.planted_steps != onset_steps(cfg):
        raise InvalidArgumentError(f"onset event must be planted at every {cfg.onset_period}th step")
    if spec.kind in (LayerKind.CONTINUOUS, LayerKind.VISUAL, LayerKind.AUDIO) and spec.planted_steps:
        raise InvalidArgumentError(f"{spec.kind.value} event carries no planted steps")


def _signal(spec: EventSpec, cfg: SynthConfig) -> tuple[np.ndarray, np.ndarray]:
    """Noise-free (video, audio) contribution of one event."""
    video_proto, audio_proto = class_prototypes(cfg)
    strength = cfg.correlation_strength
    video = np.zeros((cfg.T, cfg.video_dim))
    audio = np.zeros((cfg.T, cfg.audio_dim))
    steps = list(spec.planted_steps) if spec.kind in (LayerKind.INSTANT, LayerKind.ONSET) else slice(None)
    if spec.uses_video:
        video[steps] += strength * video_proto[spec.cls]
    if spec.uses_audio:
        audio[steps] += strength * audio_proto[spec.cls]
    return video, audio


def _distractor(spec: EventSpec, cfg: SynthConfig, rng: Rng) -> tuple[np.ndarray, np.ndarray]:
    """
    Signal independent of y in the modality a unimodal event leaves empty.

    With strength s the empty modality holds, at every step,
    s * (p_a - p_b) - (s / 2) * p_u: a and b two continuous-kind classes (any
    audio-visual classes when there are fewer than two) in random order, u a
    random class of the opposite unimodal kind. Every class of the event's kind
    draws from the same distribution.
    """
    video = np.zeros((cfg.T, cfg.video_dim))
    audio = np.zeros((cfg.T, cfg.audio_dim))
    if cfg.distractor_strength == 0 or spec.kind not in (LayerKind.VISUAL, LayerKind.AUDIO):
        return video, audio
    kinds = category_kinds(cfg)
    pair = [c for c, kind in enumerate(kinds) if kind is LayerKind.CONTINUOUS]
    if len(pair) < 2:
        pair = [c for c, kind in enumerate(kinds) if kind in AV_LAYERS]
    opposite_kind = LayerKind.AUDIO if spec.kind is LayerKind.VISUAL else LayerKind.VISUAL
    opposite = [c for c, kind in enumerate(kinds) if kind is opposite_kind]

    empty = Modality.AUDIO if spec.kind is LayerKind.VISUAL else Modality.VIDEO
    video_proto, audio_proto = class_prototypes(cfg)
    proto = audio_proto if empty is Modality.AUDIO else video_proto
    strength = cfg.distractor_strength
    row = np.zeros(proto.shape[1])
    if len(pair) >= 2:
        a, b = rng.choice(pair, size=2, replace=False)
        row += strength * (proto[a] - proto[b])
    if opposite:
        row -= 0.5 * strength * proto[int(rng.choice(opposite))]
    if empty is Modality.AUDIO:
        audio[:] = row
    else:
        video[:] = row
    return video, audio


def _observed_onsets(specs: Sequence[EventSpec], cfg: SynthConfig, rng: Rng) -> OnsetSet:
    planted = [s for spec in specs if spec.kind is LayerKind.ONSET for s in spec.planted_steps]
    if planted:
        return OnsetSet.from_steps(planted)
    if cfg.distractor_onsets == 0:
        return OnsetSet()
    return OnsetSet.from_steps(rng.choice(cfg.T, size=cfg.distractor_onsets, replace=False).tolist())


def _noise(cfg: SynthConfig, rng: Rng) -> tuple[np.ndarray, np.ndarray]:
    return (
        cfg.noise_std * rng.standard_normal((cfg.T, cfg.video_dim)),
        cfg.noise_std * rng.standard_normal((cfg.T, cfg.audio_dim)),
    )


def gen_event_pair(spec: EventSpec, cfg: SynthConfig, seed: int, sample_id: str = "sample") -> Sample:
    """A single-label sample; a pure function of (spec, cfg, seed)."""
    _check_spec(spec, cfg)
    rng = make_rng(seed)
    video_noise, audio_noise = _noise(cfg, rng)
    video_sig, audio_sig = _signal(spec, cfg)
    video_dis, audio_dis = _distractor(spec, cfg, rng)
    onsets = _observed_onsets([spec], cfg, rng)
    return Sample(
        id=sample_id,
        video_raw=FeatureSequence(Modality.VIDEO, video_sig + video_dis + video_noise),
        audio_raw=FeatureSequence(Modality.AUDIO, audio_sig + audio_dis + audio_noise),
        y=spec.cls,
        onsets=onsets,
        category=spec.cls,
        event_kind=spec.kind,
        planted_steps=spec.planted_steps,
    )


def gen_multi_event_pair(specs: Sequence[EventSpec], cfg: SynthConfig, seed: int, sample_id: str = "sample") -> Sample:
    """Two superimposed events; multi_labels holds both classes, y the first."""
    if len(specs) != 2:
        raise InvalidArgumentError(f"multi-event pairs take exactly two events, got {len(specs)}")
    first, second = specs
    if first.cls == second.cls:
        raise InvalidArgumentError(f"both events have class {first.cls}")
    overlap = set(first.planted_steps) & set(second.planted_steps)
    if overlap:
        raise InvalidArgumentError(f"planted steps overlap at {sorted(overlap)}")
    for spec in specs:
        _check_spec(spec, cfg)

    rng = make_rng(seed)
    video, audio = _noise(cfg, rng)
    for spec in specs:
        video_sig, audio_sig = _signal(spec, cfg)
        video = video + video_sig
        audio = audio + audio_sig
    onsets = _observed_onsets(specs, cfg, rng)
    return Sample(
        id=sample_id,
        video_raw=FeatureSequence(Modality.VIDEO, video),
        audio_raw=FeatureSequence(Modality.AUDIO, audio),
        y=first.cls,
        multi_labels=frozenset({first.cls, second.cls}),
        onsets=onsets,
        category=first.cls,
        event_kind=first.kind,
        planted_steps=tuple(sorted(set(first.planted_steps) | set(second.planted_steps))),
    )


def gen_click_pcm(click_steps: Sequence[int], T: int = 100) -> PcmClip:
    """10 s of silence with a 1 ms raised-cosine click of amplitude 0.9 at the start of each step."""
    samples_per_step = DSP_CONFIG.clip_samples // T
    samples = np.zeros(DSP_CONFIG.clip_samples)
    click = CLICK_AMPLITUDE * 0.5 * (1.0 - np.cos(2 * np.pi * np.arange(CLICK_SAMPLES) / CLICK_SAMPLES))
    for step in sorted(set(int(s) for s in click_steps)):
        if not 0 <= step < T:
            raise InvalidArgumentError(f"click step {step} outside [0, {T})")
        start = step * samples_per_step
        samples[start : start + CLICK_SAMPLES] = click
    return PcmClip(samples=samples)


def gen_tone_pcm(frequency: float, amplitude: float = 0.5, phase: float = np.pi / 2) -> PcmClip:
    """A steady 10 s tone; the default phase makes it a cosine."""
    if not 0 < frequency < DSP_CONFIG.sample_rate / 2:
        raise InvalidArgumentError(f"frequency {frequency} Hz outside (0, Nyquist)")
    if not 0 <= amplitude <= 1:
        raise InvalidArgumentError(f"amplitude {amplitude} outside [0, 1]")
    t = np.arange(DSP_CONFIG.clip_samples) / DSP_CONFIG.sample_rate
    return PcmClip(samples=amplitude * np.sin(2 * np.pi * frequency * t + phase))


def gen_planted_grid(audio_row: np.ndarray, shape: tuple[int, int], cell: tuple[int, int], seed: int) -> np.ndarray:
    """
    H' x W' x D grid: `cell` holds the unit-normalized audio row,
    every other cell a random vector orthogonal to it.
    """
    audio_row = np.asarray(audio_row, dtype=np.float64)
    norm = np.linalg.norm(audio_row)
    if audio_row.ndim != 1 or norm == 0:
        raise InvalidArgumentError("audio row must be a non-zero vector")
    height, width = shape
    if not (0 <= cell[0] < height and 0 <= cell[1] < width):
        raise InvalidArgumentError(f"cell {cell} outside {height}x{width} grid")
    unit = audio_row / norm
    rng = make_rng(seed)
    grid = rng.standard_normal((height, width, audio_row.size))
    grid -= np.einsum("hwd,d->hw", grid, unit)[..., None] * unit
    grid[cell] = unit
    return grid
