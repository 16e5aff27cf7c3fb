"""Deterministic synthetic /hVd/ corpus: formant-sinusoid vowels between a
noise /h/ and a closure-plus-burst /d/, with exact segment annotations."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import phonemes
from .corpus import Manifest, Segment, Utterance, write_annotation, write_manifest
from .features import AudioClip, write_wav

N_ANNOTATED_SPEAKERS = 3
SILENCE_S = (1.0, 1.6)  # lead and tail silence, seconds


@dataclass(frozen=True)
class VowelPrototype:
    label: str
    formants: tuple[float, float, float]
    duration_ms: float
    jitter: tuple[float, float, float] = (40.0, 100.0, 120.0)
    # diphthongs glide linearly from ``formants`` to ``target``
    target: tuple[float, float, float] | None = None

    def __post_init__(self):
        for f in (self.formants, self.target or self.formants):
            if not 0 < f[0] < f[1] < f[2]:
                raise ValueError(f"{self.label}: formants must increase, got {f}")
        if self.duration_ms <= 0:
            raise ValueError(f"{self.label}: duration must be positive")


# Australian English /hVd/ formant targets (mean adult values, nearest 50 Hz).
PROTOTYPES: dict[str, VowelPrototype] = {p.label: p for p in [
    VowelPrototype("iː", (300, 2450, 3100), 230),
    VowelPrototype("ɪ", (400, 2300, 3000), 140),
    VowelPrototype("e", (550, 2150, 2900), 150),
    VowelPrototype("æ", (800, 1750, 2800), 170),
    VowelPrototype("ɐː", (850, 1400, 2800), 250),
    VowelPrototype("ɐ", (800, 1450, 2750), 140),
    VowelPrototype("ɔ", (650, 1050, 2700), 150),
    VowelPrototype("oː", (450, 850, 2650), 250),
    VowelPrototype("ʊ", (450, 1100, 2600), 140),
    VowelPrototype("ʉː", (350, 1800, 2600), 230),
    VowelPrototype("ɜː", (550, 1650, 2750), 240),
    VowelPrototype("eː", (550, 2000, 2850), 250),
    VowelPrototype("æɪ", (650, 1900, 2850), 260, target=(400, 2250, 2950)),
    VowelPrototype("ɑe", (850, 1350, 2750), 270, target=(500, 2100, 2900)),
    VowelPrototype("oɪ", (500, 900, 2650), 270, target=(400, 2200, 2900)),
    VowelPrototype("əʉ", (600, 1350, 2700), 260, target=(450, 1550, 2650)),
    VowelPrototype("æɔ", (800, 1700, 2800), 270, target=(550, 1050, 2650)),
    VowelPrototype("ɪə", (400, 2250, 3000), 260, target=(550, 1700, 2800)),
]}

WORD_ORDER = list(phonemes.WORDS)


@dataclass(frozen=True)
class CorpusSpec:
    speakers: int = 11  # total; the last three are the annotated speakers
    tokens_per_word: int = 2
    sample_rate: int = 16000
    seed: int = 0
    overlap_factor: float = 1.0
    group: str = "General"

    def __post_init__(self):
        if self.speakers < N_ANNOTATED_SPEAKERS + 1:
            raise ValueError(f"need at least {N_ANNOTATED_SPEAKERS + 1} speakers, got {self.speakers}")
        if self.tokens_per_word < 1 or self.sample_rate < 1:
            raise ValueError("tokens_per_word and sample_rate must be >= 1")
        if self.overlap_factor < 0:
            raise ValueError("overlap_factor must be >= 0")
        if self.sample_rate / 2 <= max(p.formants[2] for p in PROTOTYPES.values()) * 1.3:
            raise ValueError(f"sample rate {self.sample_rate} Hz too low for the formant table")


def speaker_id(i: int) -> str:
    return f"spk{i:02d}"


def speaker_formants(label: str, speaker: int, spec: CorpusSpec) -> tuple[np.ndarray, np.ndarray]:
    """Start and end formant triples of ``label`` for one speaker."""
    proto = PROTOTYPES[label]
    start = np.array(proto.formants, dtype=np.float64)
    end = np.array(proto.target or proto.formants, dtype=np.float64)
    if spec.overlap_factor == 0:
        return start, end
    rng = np.random.default_rng([spec.seed, 1, speaker, phonemes.RANK[label]])
    scale = np.random.default_rng([spec.seed, 2, speaker]).normal(1.0, 0.04 * spec.overlap_factor)
    shift = rng.normal(0.0, 1.0, 3) * np.array(proto.jitter) * spec.overlap_factor
    return _ordered(start * scale + shift), _ordered(end * scale + shift)


def _ordered(f: np.ndarray) -> np.ndarray:
    # keep jittered formants strictly increasing and well separated
    f1, f2, f3 = np.sort(np.abs(f))
    f1 = max(f1, 150.0)
    f2 = max(f2, f1 + 100.0)
    return np.array([f1, f2, max(f3, f2 + 100.0)])


def _envelope(n: int, ramp: int) -> np.ndarray:
    env = np.ones(n)
    ramp = min(ramp, n // 2)
    if ramp > 0:
        rise = 0.5 - 0.5 * np.cos(np.pi * np.arange(ramp) / ramp)
        env[:ramp] = rise
        env[n - ramp:] = rise[::-1]
    return env


def _band_noise(rng, n: int, lo: float, hi: float, sr: int) -> np.ndarray:
    spectrum = np.fft.rfft(rng.normal(size=n))
    freqs = np.fft.rfftfreq(n, 1.0 / sr)
    spectrum[(freqs < lo) | (freqs > hi)] = 0
    x = np.fft.irfft(spectrum, n)
    return x / (np.max(np.abs(x)) + 1e-12)


def _background(rng, n: int, sr: int) -> np.ndarray:
    """Room noise at a random level (-65..-35 dB) and random spectral tilt."""
    level = 10 ** (rng.uniform(-65.0, -35.0) / 20.0)
    spectrum = np.fft.rfft(rng.normal(size=n))
    freqs = np.fft.rfftfreq(n, 1.0 / sr)
    spectrum *= (1.0 + freqs / 500.0) ** rng.uniform(-1.5, 0.5)
    x = np.fft.irfft(spectrum, n)
    return level * x / (np.std(x) + 1e-12)


def synth_utterance(word: str, speaker: int, spec: CorpusSpec, token: int = 0) -> tuple[AudioClip, list[Segment]]:
    """Render one token; returns the clip and its sil / h / vowel / d / sil
    segments, which tile the clip exactly."""
    vowel = phonemes.WORDS[word]
    sr = spec.sample_rate
    rng = np.random.default_rng([spec.seed, 3, speaker, WORD_ORDER.index(word), token])
    jitter = spec.overlap_factor

    n_h = int(sr * rng.uniform(0.060, 0.100))
    h = 0.08 * _band_noise(rng, n_h, 400.0, 5000.0, sr) * _envelope(n_h, int(0.01 * sr))

    proto = PROTOTYPES[vowel]
    n_v = int(sr * proto.duration_ms / 1000.0 * (1.0 + 0.1 * jitter * rng.uniform(-1, 1)))
    f_start, f_end = speaker_formants(vowel, speaker, spec)
    token_shift = rng.normal(0.0, 1.0, 3) * np.array(proto.jitter) * 0.1 * jitter
    traj = np.linspace(f_start + token_shift, f_end + token_shift, n_v)
    phase = 2.0 * np.pi * np.cumsum(traj, axis=0) / sr
    v = (np.sin(phase) * np.array([1.0, 0.5, 0.25])).sum(axis=1) / 1.75
    v *= 0.6 * 10 ** (rng.uniform(-3, 3) * jitter / 20.0) * _envelope(n_v, int(0.02 * sr))
    v += 0.002 * rng.normal(size=n_v)

    n_gap = int(sr * rng.uniform(0.040, 0.060))
    n_burst = int(sr * 0.015)
    burst = 0.3 * _band_noise(rng, n_burst, 1500.0, 7000.0, sr) * np.exp(-np.arange(n_burst) / (0.004 * sr))
    d = np.concatenate([0.001 * rng.normal(size=n_gap), burst])

    lead = _background(rng, int(sr * rng.uniform(*SILENCE_S)), sr)
    tail = _background(rng, int(sr * rng.uniform(*SILENCE_S)), sr)
    parts = [("sil", lead), ("h", h), (vowel, v), ("d", d), ("sil", tail)]
    samples = np.concatenate([p for _, p in parts])
    segments, start = [], 0
    for label, p in parts:
        segments.append(Segment(label, start / sr, (start + len(p)) / sr))
        start += len(p)
    return AudioClip(np.clip(samples, -1.0, 1.0), sr), segments


def generate_corpus(spec: CorpusSpec, out_dir) -> Manifest:
    """Write WAVs, annotations and ``manifest.tsv`` under ``out_dir``."""
    out = Path(out_dir)
    try:
        (out / "wav").mkdir(parents=True, exist_ok=True)
        (out / "ann").mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create corpus directory {out}: {exc.strerror}") from exc
    first_annotated = spec.speakers - N_ANNOTATED_SPEAKERS
    utterances = []
    for s in range(spec.speakers):
        role = "annotated" if s >= first_annotated else "unlabelled"
        group = "annotated" if role == "annotated" else spec.group
        for word in WORD_ORDER:
            for tok in range(spec.tokens_per_word):
                uid = f"{speaker_id(s)}_{word}_{tok}"
                clip, segments = synth_utterance(word, s, spec, tok)
                wav_path = out / "wav" / f"{uid}.wav"
                write_wav(wav_path, clip)
                ann_path = None
                if role == "annotated":
                    ann_path = out / "ann" / f"{uid}.tsv"
                    write_annotation(ann_path, uid, segments)
                utterances.append(Utterance(uid, wav_path, speaker_id(s), word, group, role, ann_path, segments))
    manifest = Manifest(spec.sample_rate, utterances, out / "manifest.tsv")
    write_manifest(out / "manifest.tsv", manifest)
    return manifest
