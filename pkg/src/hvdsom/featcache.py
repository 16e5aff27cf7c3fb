"""On-disk feature cache, one artifact per utterance.

Artifact layout (little-endian)::

    magic    8 bytes   b"HVDFEAT\\0"
    version  uint16
    key      32 bytes  sha256 of the WAV bytes and the frame spec
    dim      uint32
    frames   uint32
    data     float64[frames * dim], row-major

An artifact whose key matches the current WAV and frame spec is reused
without being rewritten.
"""

from __future__ import annotations

import hashlib
import logging
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .corpus import Manifest, Utterance
from .features import FrameSpec, WavFormatError, extract_features, read_wav

log = logging.getLogger(__name__)

CACHE_VERSION = 1
_MAGIC = b"HVDFEAT\0"
_HEADER = struct.Struct("<8sH32sII")


def cache_key(wav_bytes: bytes, spec: FrameSpec) -> bytes:
    h = hashlib.sha256(wav_bytes)
    h.update(repr(sorted(asdict(spec).items())).encode())
    return h.digest()


def artifact_path(cache_dir: Path, utt_id: str) -> Path:
    return Path(cache_dir) / f"{utt_id}.feat"


def write_artifact(path: Path, key: bytes, feats: np.ndarray) -> None:
    tmp = path.with_suffix(".tmp")
    with open(tmp, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, CACHE_VERSION, key, feats.shape[1], feats.shape[0]))
        fh.write(np.ascontiguousarray(feats, dtype="<f8").tobytes())
    tmp.replace(path)


def read_header(path: Path) -> tuple[bytes, int, int] | None:
    try:
        with open(path, "rb") as fh:
            head = fh.read(_HEADER.size)
    except FileNotFoundError:
        return None
    if len(head) != _HEADER.size:
        return None
    magic, version, key, dim, frames = _HEADER.unpack(head)
    if magic != _MAGIC or version != CACHE_VERSION:
        return None
    return key, dim, frames


def read_artifact(path: Path) -> np.ndarray:
    header = read_header(path)
    if header is None:
        raise ValueError(f"{path}: not a feature cache artifact")
    _, dim, frames = header
    data = np.fromfile(path, dtype="<f8", offset=_HEADER.size)
    if data.size != dim * frames:
        raise ValueError(f"{path}: truncated feature data")
    return data.reshape(frames, dim).astype(np.float64)


def _extract_one(utt: Utterance, spec: FrameSpec, sample_rate: int, cache_dir: Path) -> bool:
    """Returns True when features were (re)computed."""
    wav_bytes = Path(utt.audio).read_bytes()
    key = cache_key(wav_bytes, spec)
    path = artifact_path(cache_dir, utt.utt_id)
    header = read_header(path)
    if header is not None and header[0] == key:
        return False
    feats = extract_features(read_wav(utt.audio, sample_rate), spec)
    write_artifact(path, key, feats)
    return True


def extract_all(manifest: Manifest, spec: FrameSpec, cache_dir, jobs: int = 1) -> tuple[int, list[str]]:
    """Fill the cache for every manifest utterance.

    Decode failures are collected rather than raised. Returns the number of
    artifacts computed and the list of failure messages.
    """
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)

    def work(utt):
        try:
            return _extract_one(utt, spec, manifest.sample_rate, cache_dir), None
        except (OSError, WavFormatError, ValueError) as exc:
            return False, f"{utt.utt_id}: {exc}"

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        results = list(pool.map(work, manifest.utterances))
    failures = [msg for _, msg in results if msg]
    for msg in failures:
        log.error("feature extraction failed: %s", msg)
    return sum(1 for computed, _ in results if computed), failures


def load_features(manifest: Manifest, cache_dir) -> dict[str, np.ndarray]:
    cache_dir = Path(cache_dir)
    out = {}
    for utt in manifest.utterances:
        path = artifact_path(cache_dir, utt.utt_id)
        if not path.exists():
            raise FileNotFoundError(f"no cached features for {utt.utt_id} ({path}); run extract first")
        out[utt.utt_id] = read_artifact(path)
    return out
