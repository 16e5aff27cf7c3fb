"""Vowel confusion matrices and greedy confusion grouping."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import phonemes


@dataclass
class ConfusionMatrix:
    labels: list[str]
    counts: np.ndarray  # counts[i, j]: tokens with true label i predicted j
    no_vowel: np.ndarray = field(default=None)  # per true label, predictions with no vowel

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        n = len(self.labels)
        if self.counts.shape != (n, n):
            raise ValueError(f"counts shape {self.counts.shape} does not match {n} labels")
        if np.any(self.counts < 0):
            raise ValueError("confusion counts must be non-negative")
        if self.no_vowel is None:
            self.no_vowel = np.zeros(n, dtype=np.int64)

    def symmetric_offdiag(self) -> np.ndarray:
        s = self.counts + self.counts.T
        np.fill_diagonal(s, 0)
        return s

    def to_text(self) -> str:
        header = "\t".join(["true\\pred", *map(phonemes.to_ascii, self.labels), "none"])
        rows = [header]
        for lab, row, nv in zip(self.labels, self.counts, self.no_vowel):
            rows.append("\t".join([phonemes.to_ascii(lab), *map(str, row), str(nv)]))
        return "\n".join(rows) + "\n"


def confusion_matrix(pairs, labels) -> ConfusionMatrix:
    labels = list(labels)
    pos = {lab: i for i, lab in enumerate(labels)}
    counts = np.zeros((len(labels), len(labels)), dtype=np.int64)
    no_vowel = np.zeros(len(labels), dtype=np.int64)
    for true, pred in pairs:
        if true not in pos:
            raise phonemes.UnknownLabel(f"true label {true!r} not among matrix labels")
        if pred == phonemes.NO_VOWEL:
            no_vowel[pos[true]] += 1
        elif pred in pos:
            counts[pos[true], pos[pred]] += 1
        else:
            raise phonemes.UnknownLabel(f"predicted label {pred!r} not among matrix labels")
    return ConfusionMatrix(labels, counts, no_vowel)


@dataclass
class VowelGrouping:
    groups: list[list[str]]
    merge_log: list[tuple[int, list[str], list[str]]] = field(default_factory=list, compare=False)

    def __post_init__(self):
        seen: set[str] = set()
        for g in self.groups:
            if not g:
                raise ValueError("empty vowel group")
            for v in g:
                if not phonemes.is_vowel(v):
                    raise ValueError(f"{v!r} is not a vowel")
                if v in seen:
                    raise ValueError(f"vowel {v!r} appears in two groups")
                seen.add(v)

    def group_of(self, vowel: str) -> int | None:
        for i, g in enumerate(self.groups):
            if vowel in g:
                return i
        return None

    def to_text(self) -> str:
        return "".join(" ".join(map(phonemes.to_ascii, g)) + "\n" for g in self.groups)

    @classmethod
    def from_text(cls, text: str) -> "VowelGrouping":
        return cls([[phonemes.from_ascii(t) for t in line.split()] for line in text.splitlines() if line.strip()])


def _normalise(clusters) -> list[list[str]]:
    groups = [phonemes.canonical_sorted(c) for c in clusters]
    return sorted(groups, key=lambda g: phonemes.RANK[g[0]])


def greedy_confusion_groups(cm: ConfusionMatrix, target_groups: int = 3) -> VowelGrouping:
    """Agglomerative merging on symmetrised off-diagonal confusion.

    Two clusters are linked by the largest confusion count between any of
    their members, so successive merge strengths never increase. Merging
    stops at ``target_groups`` clusters or when no positive link is left;
    surplus clusters are then folded into the kept ones.
    """
    if target_groups < 1:
        raise ValueError("target_groups must be >= 1")
    if len(cm.labels) < target_groups:
        raise ValueError(f"{len(cm.labels)} vowels cannot form {target_groups} groups")

    # work in canonical order so results do not depend on matrix label order
    order = sorted(range(len(cm.labels)), key=lambda i: phonemes.RANK[cm.labels[i]])
    names = [cm.labels[i] for i in order]
    S = cm.symmetric_offdiag()[np.ix_(order, order)]

    clusters: list[list[int]] = [[i] for i in range(len(names))]
    link = S.astype(np.int64).copy()
    np.fill_diagonal(link, -1)
    log = []
    while len(clusters) > target_groups:
        a, b = np.unravel_index(np.argmax(link), link.shape)
        mass = int(link[a, b])
        if mass <= 0:
            break
        a, b = min(a, b), max(a, b)
        log.append((mass, [names[i] for i in clusters[a]], [names[i] for i in clusters[b]]))
        clusters[a] = clusters[a] + clusters[b]
        del clusters[b]
        merged = np.maximum(link[a], link[b])
        link[a, :] = merged
        link[:, a] = merged
        link[a, a] = -1
        link = np.delete(np.delete(link, b, axis=0), b, axis=1)

    if len(clusters) > target_groups:
        # keep the largest clusters (most members, then most internal mass);
        # fold the rest in by shared mass, else into the smallest kept cluster
        def strength(c):
            return (-len(c), -int(S[np.ix_(c, c)].sum()), c[0])

        ranked = sorted(clusters, key=strength)
        kept, rest = ranked[:target_groups], sorted(ranked[target_groups:], key=lambda c: c[0])
        for c in rest:
            shares = [int(S[np.ix_(c, k)].sum()) for k in kept]
            if max(shares) > 0:
                dest = shares.index(max(shares))
            else:
                dest = min(range(len(kept)), key=lambda i: (len(kept[i]), kept[i][0]))
            kept[dest] = sorted(kept[dest] + c)
        clusters = kept

    return VowelGrouping(_normalise([[names[i] for i in c] for c in clusters]), log)
