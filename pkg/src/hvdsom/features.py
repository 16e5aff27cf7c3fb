"""WAV decoding and 39-dimensional MFCC features (12 cepstra + log energy,
with first and second order regression dynamics).

Recipe: per-window pre-emphasis 0.97, Hamming window, magnitude spectrum,
26 triangular mel filters over 0 Hz..Nyquist, natural log with floor 1e-10,
orthonormal DCT-II keeping coefficients 1..12. Log energy is taken on the
raw window samples.
"""

from __future__ import annotations

import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.fft import dct

N_STATIC = 13
N_FEATURES = 3 * N_STATIC


class ClipTooShort(ValueError):
    pass


class WavFormatError(ValueError):
    pass


@dataclass
class AudioClip:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.sample_rate <= 0:
            raise ValueError(f"sample rate must be positive, got {self.sample_rate}")

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True)
class FrameSpec:
    window_ms: float = 25.0
    hop_ms: float = 10.0
    num_mel_filters: int = 26
    num_cepstra: int = 12
    pre_emphasis: float = 0.97
    energy_floor: float = 1e-10
    delta_window: int = 2
    cepstral_mean_norm: bool = False

    def __post_init__(self):
        if not (self.window_ms >= self.hop_ms > 0):
            raise ValueError("need window_ms >= hop_ms > 0")
        if not (0 < self.num_cepstra < self.num_mel_filters):
            raise ValueError("need 0 < num_cepstra < num_mel_filters")
        if self.delta_window < 1:
            raise ValueError("delta_window must be >= 1")

    def window_length(self, sample_rate: int) -> int:
        return int(self.window_ms * sample_rate / 1000)

    def hop_length(self, sample_rate: int) -> int:
        return int(self.hop_ms * sample_rate / 1000)


def frame_count(n_samples: int, window: int, hop: int) -> int:
    if n_samples < window:
        return 0
    return (n_samples - window) // hop + 1


def frame_signal(clip: AudioClip, spec: FrameSpec) -> np.ndarray:
    """Overlapping windows, shape (n_frames, W). Frame t starts at sample t*H."""
    W = spec.window_length(clip.sample_rate)
    H = spec.hop_length(clip.sample_rate)
    N = len(clip.samples)
    if N < W:
        raise ClipTooShort(f"clip has {N} samples, one window needs {W}")
    n = frame_count(N, W, H)
    idx = np.arange(W)[None, :] + H * np.arange(n)[:, None]
    return clip.samples[idx]


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def fft_size(window_length: int) -> int:
    return 1 << max(0, int(window_length - 1).bit_length())


def mel_filterbank(num_filters: int, nfft: int, sample_rate: int) -> np.ndarray:
    """Triangular filters, linear in mel, shape (num_filters, nfft//2 + 1)."""
    edges = np.linspace(0.0, hz_to_mel(sample_rate / 2.0), num_filters + 2)
    bins = hz_to_mel(np.arange(nfft // 2 + 1) * sample_rate / nfft)
    lo, mid, hi = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (bins - lo) / (mid - lo)
    falling = (hi - bins) / (hi - mid)
    return np.clip(np.minimum(rising, falling), 0.0, None)


def filter_centres_hz(num_filters: int, sample_rate: int) -> np.ndarray:
    edges = np.linspace(0.0, hz_to_mel(sample_rate / 2.0), num_filters + 2)
    return mel_to_hz(edges[1:-1])


def _log_filterbank(frames: np.ndarray, spec: FrameSpec, sample_rate: int) -> np.ndarray:
    n = frames.shape[1]
    emphasized = np.concatenate([frames[:, :1], frames[:, 1:] - spec.pre_emphasis * frames[:, :-1]], axis=1)
    magnitude = np.abs(np.fft.rfft(emphasized * np.hamming(n), n=fft_size(n), axis=1))
    fb = mel_filterbank(spec.num_mel_filters, fft_size(n), sample_rate)
    # row-wise reduction (not BLAS) keeps each frame's result independent of batch size
    energies = (magnitude[:, None, :] * fb[None, :, :]).sum(axis=2)
    return np.log(np.maximum(energies, spec.energy_floor))


def filterbank_log_energies(window: np.ndarray, spec: FrameSpec, sample_rate: int) -> np.ndarray:
    return _log_filterbank(np.asarray(window, dtype=np.float64)[None, :], spec, sample_rate)[0]


def _statics(frames: np.ndarray, spec: FrameSpec, sample_rate: int) -> np.ndarray:
    ceps = dct(_log_filterbank(frames, spec, sample_rate), type=2, norm="ortho", axis=1)
    energy = np.log(np.sum(frames * frames, axis=1) + spec.energy_floor)
    return np.column_stack([ceps[:, 1 : spec.num_cepstra + 1], energy])


def mfcc_statics(window: np.ndarray, spec: FrameSpec, sample_rate: int) -> np.ndarray:
    """12 cepstra followed by log energy for one window."""
    window = np.asarray(window, dtype=np.float64)
    if len(window) != spec.window_length(sample_rate):
        raise ValueError(f"window has {len(window)} samples, spec expects {spec.window_length(sample_rate)}")
    return _statics(window[None, :], spec, sample_rate)[0]


def _regression(x: np.ndarray, D: int) -> np.ndarray:
    padded = np.concatenate([np.repeat(x[:1], D, axis=0), x, np.repeat(x[-1:], D, axis=0)])
    T = len(x)
    num = np.zeros_like(x)
    for n in range(1, D + 1):
        num += n * (padded[D + n : D + n + T] - padded[D - n : D - n + T])
    return num / (2.0 * sum(n * n for n in range(1, D + 1)))


def append_dynamics(statics: np.ndarray, delta_window: int = 2) -> np.ndarray:
    """Stack statics with regression deltas and accelerations: (T, 13) -> (T, 39)."""
    c = np.asarray(statics, dtype=np.float64)
    if c.ndim != 2 or len(c) == 0:
        raise ValueError("need a non-empty (T, n) static sequence")
    deltas = _regression(c, delta_window)
    accels = _regression(deltas, delta_window)
    return np.hstack([c, deltas, accels])


def extract_features(clip: AudioClip, spec: FrameSpec = FrameSpec()) -> np.ndarray:
    """Feature matrix (n_frames, 39); frame t covers samples [t*H, t*H + W)."""
    frames = frame_signal(clip, spec)
    statics = _statics(frames, spec, clip.sample_rate)
    if spec.cepstral_mean_norm:
        statics[:, :-1] -= statics[:, :-1].mean(axis=0)
    return append_dynamics(statics, spec.delta_window)


def frame_midpoints(n_frames: int, spec: FrameSpec, sample_rate: int) -> np.ndarray:
    """Window midpoints in seconds."""
    W = spec.window_length(sample_rate)
    H = spec.hop_length(sample_rate)
    return (np.arange(n_frames) * H + W / 2.0) / sample_rate


def read_wav(path, expected_rate: int | None = None) -> AudioClip:
    """Read a RIFF PCM 16-bit mono file, samples scaled to [-1, 1)."""
    path = Path(path)
    try:
        with wave.open(str(path), "rb") as wf:
            channels, width, rate = wf.getnchannels(), wf.getsampwidth(), wf.getframerate()
            if wf.getcomptype() != "NONE":
                raise WavFormatError(f"{path}: compression type {wf.getcomptype()!r}, expected PCM")
            if channels != 1:
                raise WavFormatError(f"{path}: channels={channels}, expected mono")
            if width != 2:
                raise WavFormatError(f"{path}: sample width={8 * width} bits, expected 16")
            raw = wf.readframes(wf.getnframes())
    except wave.Error as exc:
        # the stdlib reader rejects non-PCM format tags here
        raise WavFormatError(f"{path}: format tag: {exc}") from exc
    except EOFError as exc:
        raise WavFormatError(f"{path}: truncated RIFF header") from exc
    if expected_rate is not None and rate != expected_rate:
        raise WavFormatError(f"{path}: sample rate {rate} Hz, manifest declares {expected_rate} Hz")
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    if samples.size == 0:
        raise WavFormatError(f"{path}: no samples")
    return AudioClip(samples, rate)


def write_wav(path, clip: AudioClip) -> None:
    pcm = np.clip(np.round(clip.samples * 32767.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(int(clip.sample_rate))
        wf.writeframes(pcm.tobytes())
