"""
Log-mel front end.

STFT: n_fft 512, hop 160, Hann window of 320 samples, centered frames with
reflect padding. Mel: 80 triangular unit-peak filters on the HTK scale
(mel = 2595 * log10(1 + f / 700)) spanning 0 Hz to Nyquist.
"""

import io
import logging
from functools import lru_cache
from pathlib import Path

import librosa
import numpy as np
import soundfile as sf

from avfuse.audio.schemas import LogMelSpectrogram, PcmClip
from avfuse.config import DSP_CONFIG, DspConfig
from avfuse.exceptions import DatasetIOError, InvalidArgumentError
from avfuse.storage.files import atomic_write_bytes

logger = logging.getLogger(__name__)


def normalize_clip(samples: np.ndarray, sample_rate: int, cfg: DspConfig = DSP_CONFIG) -> PcmClip:
    """Zero-pad or truncate to the fixed clip length; reject other sample rates."""
    if sample_rate != cfg.sample_rate:
        raise InvalidArgumentError(f"sample rate {sample_rate} Hz is not supported (need {cfg.sample_rate} Hz)")
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 1:
        raise InvalidArgumentError(f"expected mono audio, got shape {samples.shape}")
    if not np.all(np.isfinite(samples)):
        raise InvalidArgumentError("audio contains non-finite samples")
    n = cfg.clip_samples
    if samples.size < n:
        samples = np.pad(samples, (0, n - samples.size))
    elif samples.size > n:
        samples = samples[:n]
    return PcmClip(samples=np.clip(samples, -1.0, 1.0), sample_rate=sample_rate)


def load_wav(path: str | Path, cfg: DspConfig = DSP_CONFIG) -> PcmClip:
    """Read a single-channel 16-bit or float32 WAV into a normalized clip."""
    try:
        data, sample_rate = sf.read(str(path), dtype="float64", always_2d=True)
    except (RuntimeError, OSError) as e:
        raise DatasetIOError(f"Cannot read WAV {path}: {e}") from e
    if data.shape[1] != 1:
        raise InvalidArgumentError(f"{path}: expected a single channel, found {data.shape[1]}")
    return normalize_clip(data[:, 0], sample_rate, cfg)


def write_wav(path: str | Path, clip: PcmClip, subtype: str = "PCM_16") -> None:
    buffer = io.BytesIO()
    sf.write(buffer, clip.samples, clip.sample_rate, subtype=subtype, format="WAV")
    atomic_write_bytes(path, buffer.getvalue())


@lru_cache(maxsize=4)
def mel_basis(cfg: DspConfig = DSP_CONFIG) -> np.ndarray:
    """(n_mels, 1 + n_fft // 2) triangular filters with unit peak."""
    return librosa.filters.mel(
        sr=cfg.sample_rate,
        n_fft=cfg.n_fft,
        n_mels=cfg.n_mels,
        fmin=0.0,
        fmax=cfg.sample_rate / 2,
        htk=True,
        norm=None,
        dtype=np.float64,
    )


def mel_center_frequencies(cfg: DspConfig = DSP_CONFIG) -> np.ndarray:
    """Center frequency in Hz of each mel band."""
    edges = librosa.mel_frequencies(n_mels=cfg.n_mels + 2, fmin=0.0, fmax=cfg.sample_rate / 2, htk=True)
    return edges[1:-1]


def compute_logmel(clip: PcmClip, cfg: DspConfig = DSP_CONFIG) -> LogMelSpectrogram:
    """10 s clip -> exactly 1000 x 80 log-mel matrix."""
    if clip.sample_rate != cfg.sample_rate:
        raise InvalidArgumentError(f"sample rate {clip.sample_rate} Hz is not supported (need {cfg.sample_rate} Hz)")
    if clip.samples.size != cfg.clip_samples:
        clip = normalize_clip(clip.samples, clip.sample_rate, cfg)

    stft = librosa.stft(
        clip.samples,
        n_fft=cfg.n_fft,
        hop_length=cfg.hop_length,
        win_length=cfg.win_length,
        window="hann",
        center=True,
        pad_mode="reflect",
    )
    power = np.abs(stft) ** 2
    mel = (mel_basis(cfg) @ power).T
    # Centered framing yields one frame past the end; drop it
    mel = mel[: cfg.n_frames]
    values = np.log(mel + cfg.log_floor)
    logger.debug(f"Log-mel computed: {values.shape[0]} frames x {values.shape[1]} bands")
    return LogMelSpectrogram(values=values)
