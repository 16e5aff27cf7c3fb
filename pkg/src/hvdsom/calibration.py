"""Turning a trained map into a frame classifier by majority vote of
annotated frames, and the per-file vowel vote."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

import numpy as np

from . import phonemes
from .corpus import Segment
from .features import FrameSpec, frame_midpoints
from .som import DimensionMismatch, Som, best_matching_units

N_LABELS = len(phonemes.INVENTORY)


class OverlappingSegments(ValueError):
    pass


class UnusableClassifier(RuntimeError):
    pass


class AnnotatedFrame(NamedTuple):
    vector: np.ndarray
    label: str
    utt_id: str
    frame: int


@dataclass
class AnnotatedFrames:
    """Columnar store of annotated frames."""

    vectors: np.ndarray
    labels: list[str]
    utt_ids: list[str] = field(default_factory=list)
    frame_index: list[int] = field(default_factory=list)

    def __post_init__(self):
        vectors = np.asarray(self.vectors, dtype=np.float64)
        if vectors.ndim != 2:
            vectors = vectors.reshape(len(self.labels), -1) if self.labels else np.empty((0, 0))
        if len(vectors) != len(self.labels):
            raise ValueError(f"{len(vectors)} vectors but {len(self.labels)} labels")
        self.vectors = vectors
        if not self.utt_ids:
            self.utt_ids = [""] * len(self.labels)
            self.frame_index = list(range(len(self.labels)))

    def __len__(self) -> int:
        return len(self.labels)

    def __iter__(self):
        for i in range(len(self)):
            yield AnnotatedFrame(self.vectors[i], self.labels[i], self.utt_ids[i], self.frame_index[i])

    def subset(self, mask) -> "AnnotatedFrames":
        keep = np.flatnonzero(mask)
        return AnnotatedFrames(
            self.vectors[keep],
            [self.labels[i] for i in keep],
            [self.utt_ids[i] for i in keep],
            [self.frame_index[i] for i in keep],
        )

    @classmethod
    def concat(cls, parts: Iterable["AnnotatedFrames"], dim: int) -> "AnnotatedFrames":
        parts = list(parts)
        if not parts:
            return cls(np.empty((0, dim)), [], [], [])
        return cls(
            np.vstack([p.vectors for p in parts]),
            [lab for p in parts for lab in p.labels],
            [u for p in parts for u in p.utt_ids],
            [f for p in parts for f in p.frame_index],
        )


def frames_from_annotation(
    segments: list[Segment],
    features: np.ndarray,
    spec: FrameSpec,
    sample_rate: int,
    utt_id: str = "",
) -> AnnotatedFrames:
    """Label each frame by the segment containing its window midpoint
    (half-open [start, end)); uncovered frames are ``sil``."""
    ordered = sorted(segments, key=lambda s: (s.start, s.end))
    for prev, cur in zip(ordered, ordered[1:]):
        if cur.start < prev.end:
            raise OverlappingSegments(
                f"{utt_id or 'utterance'}: segment {prev.label} [{prev.start}, {prev.end}) "
                f"overlaps {cur.label} [{cur.start}, {cur.end})"
            )
    mids = frame_midpoints(len(features), spec, sample_rate)
    labels = [phonemes.SIL] * len(features)
    for seg in ordered:
        phonemes.check(seg.label)
        for t in np.flatnonzero((mids >= seg.start) & (mids < seg.end)):
            labels[t] = seg.label
    return AnnotatedFrames(features, labels, [utt_id] * len(labels), list(range(len(labels))))


@dataclass
class LabeledSom:
    som: Som
    histograms: np.ndarray  # (n_units, N_LABELS) counts, columns in inventory order
    majority: np.ndarray  # (n_units,) inventory index, -1 when the unit saw no frames
    _resolved: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def n_labeled(self) -> int:
        return int(np.count_nonzero(self.majority >= 0))

    def unit_label(self, linear: int) -> str | None:
        m = self.majority[linear]
        return None if m < 0 else phonemes.INVENTORY[m]

    def histogram(self, linear: int) -> dict[str, int]:
        return {phonemes.INVENTORY[j]: int(c) for j, c in enumerate(self.histograms[linear]) if c}

    def resolved_labels(self) -> np.ndarray:
        """Per-unit label index, with unlabeled units taking the label of the
        nearest labeled unit on the grid (ties: row-major)."""
        if self._resolved is None:
            labeled = np.flatnonzero(self.majority >= 0)
            if labeled.size == 0:
                raise UnusableClassifier("map has no labeled units")
            coords = self.som.grid_coords()
            d2 = ((coords[:, None, :] - coords[None, labeled, :]) ** 2).sum(axis=2)
            self._resolved = self.majority[labeled[np.argmin(d2, axis=1)]]
        return self._resolved


def majority_from_histograms(histograms: np.ndarray) -> np.ndarray:
    # argmax picks the first maximum, i.e. the canonically earliest label
    return np.where(histograms.sum(axis=1) > 0, np.argmax(histograms, axis=1), -1)


def calibrate(som: Som, frames: AnnotatedFrames) -> LabeledSom:
    if len(frames) == 0:
        raise ValueError("calibration needs at least one annotated frame")
    if frames.vectors.shape[1] != som.dim:
        raise DimensionMismatch(f"frames have dim {frames.vectors.shape[1]}, map dim is {som.dim}")
    units, _ = best_matching_units(som, frames.vectors)
    label_idx = np.array([phonemes.RANK[phonemes.check(lab)] for lab in frames.labels])
    hist = np.zeros((som.n_units, N_LABELS), dtype=np.int64)
    np.add.at(hist, (units, label_idx), 1)
    return LabeledSom(som, hist, majority_from_histograms(hist))


def classify_frames(lsom: LabeledSom, vectors: np.ndarray) -> list[str]:
    resolved = lsom.resolved_labels()
    units, _ = best_matching_units(lsom.som, vectors)
    return [phonemes.INVENTORY[i] for i in resolved[units]]


def classify_frame(lsom: LabeledSom, x: np.ndarray) -> str:
    return classify_frames(lsom, np.asarray(x, dtype=np.float64)[None, :])[0]


def vowel_vote(labels: Iterable[str]) -> str:
    """Most frequent vowel among frame labels (ties: canonical order), or
    NO_VOWEL when no frame is a vowel."""
    counts = Counter(lab for lab in labels if phonemes.is_vowel(lab))
    if not counts:
        return phonemes.NO_VOWEL
    return min(counts, key=lambda v: (-counts[v], phonemes.RANK[v]))


def classify_file(lsom: LabeledSom, features: np.ndarray) -> str:
    if len(features) == 0:
        raise ValueError("cannot classify an empty feature sequence")
    return vowel_vote(classify_frames(lsom, features))
