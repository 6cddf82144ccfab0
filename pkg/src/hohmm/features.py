"""16-bit PCM WAV I/O and MFCC + delta features."""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
import wave
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy.fft import dct, rfft

from .model import FeatureSequence


class WavError(ValueError):
    """Base class for WAV input problems."""


class MalformedWavError(WavError):
    pass


class UnsupportedEncodingError(WavError):
    pass


class ChannelCountError(WavError):
    pass


class BitDepthError(WavError):
    pass


class SampleRateMismatchError(WavError):
    pass


@dataclass(frozen=True)
class FeatureConfig:
    sample_rate_hz: int = 16000
    frame_length_ms: float = 25.0
    frame_shift_ms: float = 10.0
    preemphasis: float = 0.97
    num_mel_filters: int = 26
    num_cepstra: int = 16
    delta_window: int = 2
    mel_low_hz: float = 0.0
    mel_high_hz: float = 8000.0
    include_c0: bool = False
    cepstral_mean_subtraction: bool = False

    def __post_init__(self):
        if not (self.frame_length_ms >= self.frame_shift_ms > 0):
            raise ValueError("need frame_length_ms >= frame_shift_ms > 0")
        if self.num_cepstra + (0 if self.include_c0 else 1) > self.num_mel_filters:
            raise ValueError("num_cepstra exceeds the number of mel filters")
        if not (0 <= self.mel_low_hz < self.mel_high_hz <= self.sample_rate_hz / 2):
            raise ValueError("mel band must satisfy 0 <= low < high <= sample_rate / 2")
        if self.delta_window < 1:
            raise ValueError("delta_window must be >= 1")

    @property
    def frame_length(self) -> int:
        return int(round(self.sample_rate_hz * self.frame_length_ms / 1000.0))

    @property
    def frame_shift(self) -> int:
        return int(round(self.sample_rate_hz * self.frame_shift_ms / 1000.0))

    @property
    def n_fft(self) -> int:
        return 1 << (self.frame_length - 1).bit_length()

    @property
    def feature_dim(self) -> int:
        return 2 * self.num_cepstra

    def fingerprint(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True, eq=False)
class AudioBuffer:
    samples: np.ndarray  # int16
    sample_rate_hz: int
    channels: int = 1

    def __post_init__(self):
        samples = np.asarray(self.samples)
        if samples.ndim != 1 or samples.size == 0:
            raise ValueError("audio must be a non-empty mono sample vector")
        if self.channels != 1:
            raise ChannelCountError("only mono audio is supported")
        samples = samples.astype(np.int16, copy=True)
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz


def load_wav(path) -> AudioBuffer:
    """Read a RIFF/WAVE file holding 16-bit mono linear PCM."""
    try:
        with wave.open(str(path), "rb") as w:
            channels, width, rate, nframes = w.getnchannels(), w.getsampwidth(), w.getframerate(), w.getnframes()
            raw = w.readframes(nframes)
    except wave.Error as exc:
        if "unknown format" in str(exc):
            raise UnsupportedEncodingError(f"{path}: not linear PCM ({exc})") from exc
        raise MalformedWavError(f"{path}: {exc}") from exc
    except EOFError as exc:
        raise MalformedWavError(f"{path}: truncated header") from exc
    if channels != 1:
        raise ChannelCountError(f"{path}: {channels} channels, expected mono")
    if width != 2:
        raise BitDepthError(f"{path}: {8 * width}-bit samples, expected 16-bit")
    samples = np.frombuffer(raw, dtype="<i2")
    if samples.size == 0:
        raise MalformedWavError(f"{path}: no audio data")
    return AudioBuffer(samples, rate)


def write_wav(path, audio: AudioBuffer) -> None:
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(audio.sample_rate_hz)
        w.writeframes(audio.samples.astype("<i2").tobytes())


def num_frames(num_samples: int, config: FeatureConfig) -> int:
    if num_samples < config.frame_length:
        return 0
    return 1 + (num_samples - config.frame_length) // config.frame_shift


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(config: FeatureConfig):
    """Triangular mel filters over rfft bins.

    Returns ``(weights, centers_hz)`` with weights of shape
    (num_mel_filters, n_fft // 2 + 1).
    """
    n_bins = config.n_fft // 2 + 1
    freqs = np.arange(n_bins) * config.sample_rate_hz / config.n_fft
    edges = mel_to_hz(np.linspace(hz_to_mel(config.mel_low_hz), hz_to_mel(config.mel_high_hz),
                                  config.num_mel_filters + 2))
    lo, mid, hi = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (freqs[None, :] - lo) / (mid - lo)
    falling = (hi - freqs[None, :]) / (hi - mid)
    weights = np.clip(np.minimum(rising, falling), 0.0, None)
    return weights, edges[1:-1]


def frame_signal(audio: AudioBuffer, config: FeatureConfig) -> np.ndarray:
    """Pre-emphasized, Hamming-windowed frames, shape (T, frame_length)."""
    x = audio.samples.astype(np.float64)
    # x[-1] is taken to equal x[0] so a stationary input stays stationary.
    x = x - config.preemphasis * np.concatenate([x[:1], x[:-1]])
    T = num_frames(x.size, config)
    if T == 0:
        raise ValueError(
            f"audio has {x.size} samples, shorter than one {config.frame_length}-sample frame"
        )
    idx = np.arange(config.frame_length)[None, :] + config.frame_shift * np.arange(T)[:, None]
    return x[idx] * np.hamming(config.frame_length)[None, :]


def _check_rate(audio: AudioBuffer, config: FeatureConfig) -> None:
    if audio.sample_rate_hz != config.sample_rate_hz:
        raise SampleRateMismatchError(
            f"audio is {audio.sample_rate_hz} Hz but features expect {config.sample_rate_hz} Hz"
        )


def filterbank_energies(audio: AudioBuffer, config: FeatureConfig) -> np.ndarray:
    """Mel filterbank power per frame, shape (T, num_mel_filters)."""
    _check_rate(audio, config)
    frames = frame_signal(audio, config)
    power = np.abs(rfft(frames, n=config.n_fft, axis=1)) ** 2
    weights, _ = mel_filterbank(config)
    return power @ weights.T


def extract_mfcc(audio: AudioBuffer, config: FeatureConfig) -> FeatureSequence:
    """Static cepstra ``c1 .. c_K`` (or ``c0 .. c_{K-1}`` with ``include_c0``)."""
    energies = filterbank_energies(audio, config)
    log_e = np.log(np.maximum(energies, np.finfo(np.float64).tiny))
    ceps = dct(log_e, type=2, norm="ortho", axis=1)
    start = 0 if config.include_c0 else 1
    ceps = ceps[:, start : start + config.num_cepstra]
    if config.cepstral_mean_subtraction:
        ceps = ceps - ceps.mean(axis=0, keepdims=True)
    return FeatureSequence(ceps)


def append_deltas(static: FeatureSequence, window: int = 2) -> FeatureSequence:
    """Concatenate regression deltas onto static features (edges clamped)."""
    if window < 1:
        raise ValueError("window must be >= 1")
    c = static.frames
    T = c.shape[0]
    padded = np.concatenate([np.repeat(c[:1], window, axis=0), c, np.repeat(c[-1:], window, axis=0)])
    num = np.zeros_like(c)
    for k in range(1, window + 1):
        num += k * (padded[window + k : window + k + T] - padded[window - k : window - k + T])
    delta = num / (2.0 * sum(k * k for k in range(1, window + 1)))
    return FeatureSequence(np.hstack([c, delta]))


def extract_features(audio: AudioBuffer, config: FeatureConfig = FeatureConfig()) -> FeatureSequence:
    """Full front end: static MFCCs followed by their deltas."""
    return append_deltas(extract_mfcc(audio, config), config.delta_window)


# ---------------------------------------------------------------------------
# feature dump files

DUMP_MAGIC = "# hohmm-features v1"


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def format_features(features: FeatureSequence, fingerprint: str) -> str:
    lines = [DUMP_MAGIC, f"D {features.D}", f"T {features.T}", f"config {fingerprint}"]
    lines += [" ".join(f"{v:.17g}" for v in row) for row in features.frames]
    return "\n".join(lines) + "\n"


def save_features(path, features: FeatureSequence, fingerprint: str) -> None:
    """Text dump: header (D, T, config fingerprint) then T rows of D floats."""
    atomic_write_text(path, format_features(features, fingerprint))


def load_features(path):
    """Returns ``(FeatureSequence, fingerprint)``."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].strip() != DUMP_MAGIC:
        raise ValueError(f"{path}: not a feature dump")
    try:
        header = dict(line.split(None, 1) for line in lines[1:4])
        D, T, fingerprint = int(header["D"]), int(header["T"]), header["config"].strip()
    except (KeyError, ValueError) as exc:
        raise ValueError(f"{path}: malformed feature dump header") from exc
    rows = [line for line in lines[4:] if line.strip()]
    if len(rows) != T:
        raise ValueError(f"{path}: header says T={T} but found {len(rows)} rows")
    frames = np.array([[float(v) for v in row.split()] for row in rows], dtype=np.float64)
    if frames.shape != (T, D):
        raise ValueError(f"{path}: expected {T}x{D} values, got {frames.shape}")
    return FeatureSequence(frames), fingerprint
