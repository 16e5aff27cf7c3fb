"""Second-level submaps: routing through the labeled base map, submap
training and calibration, and hierarchical file classification."""

from __future__ import annotations

import enum
import json
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import phonemes
from .calibration import (
    AnnotatedFrames,
    LabeledSom,
    calibrate,
    classify_frames,
    majority_from_histograms,
    vowel_vote,
)
from .grouping import VowelGrouping
from .som import Som, default_schedule, init_som, load_som, save_som, train

log = logging.getLogger(__name__)

N_SUBMAPS = 3
HIERARCHY_FORMAT = 1


class Strategy(str, enum.Enum):
    CONFUSION_GROUPS = "confusion_groups"
    LINGUISTIC_HVD = "linguistic_hvd"


def routing_table(strategy: Strategy, grouping: VowelGrouping | None = None) -> dict[str, int | None]:
    """Base-map label -> submap index, or None for pass-through."""
    strategy = Strategy(strategy)
    table: dict[str, int | None] = {}
    for lab in phonemes.INVENTORY:
        if strategy is Strategy.LINGUISTIC_HVD:
            table[lab] = {"h": 0, "d": 2}.get(lab, 1 if phonemes.is_vowel(lab) else None)
        else:
            if grouping is None:
                raise ValueError("confusion-group routing needs a vowel grouping")
            table[lab] = grouping.group_of(lab) if phonemes.is_vowel(lab) else None
    return table


def route_frame(base: LabeledSom, x, strategy: Strategy, grouping: VowelGrouping | None = None) -> int | None:
    label = classify_frames(base, np.asarray(x, dtype=np.float64)[None, :])[0]
    return routing_table(strategy, grouping)[label]


def route_labels(labels: Sequence[str], table: dict[str, int | None]) -> np.ndarray:
    """Submap index per frame label, -1 for pass-through."""
    return np.array([-1 if table[lab] is None else table[lab] for lab in labels], dtype=np.int64)


ScheduleFn = Callable[[int, int, int, int], list]


@dataclass
class Submap:
    som: Som | None = None  # None: received no training data
    lsom: LabeledSom | None = None  # None: no annotated frames reached it

    @property
    def active(self) -> bool:
        return self.lsom is not None and self.lsom.n_labeled > 0


@dataclass
class HierarchicalClassifier:
    base: LabeledSom
    strategy: Strategy
    grouping: VowelGrouping | None
    submaps: list[Submap]
    routing: dict[str, int | None]

    def __post_init__(self):
        if len(self.submaps) != N_SUBMAPS:
            raise ValueError(f"expected {N_SUBMAPS} submaps, got {len(self.submaps)}")

    def with_inert_submaps(self) -> "HierarchicalClassifier":
        return replace(self, submaps=[Submap() for _ in range(N_SUBMAPS)])

    def refine_labels(self, features: np.ndarray) -> list[str]:
        labels = classify_frames(self.base, features)
        routes = route_labels(labels, self.routing)
        for i, sub in enumerate(self.submaps):
            hit = np.flatnonzero(routes == i)
            if hit.size and sub.active:
                for t, lab in zip(hit, classify_frames(sub.lsom, features[hit])):
                    labels[t] = lab
        return labels


def submap_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1, dtype=np.uint64)[0])


def train_submaps(
    routed: Sequence[np.ndarray],
    shape: tuple[int, int] = (20, 20),
    seed: int = 0,
    schedule: ScheduleFn = default_schedule,
) -> list[Som | None]:
    """Train one submap per block of routed unlabelled frames; empty blocks give None."""
    soms: list[Som | None] = []
    for i, X in enumerate(routed):
        if len(X) == 0:
            log.info("submap %d received no unlabelled frames; left inert", i)
            soms.append(None)
            continue
        s = submap_seed(seed, i)
        som = init_som(shape[0], shape[1], X.shape[1], s, X)
        soms.append(train(som, X, schedule(shape[0], shape[1], len(X), s)))
    return soms


def split_by_route(base: LabeledSom, vectors: np.ndarray, table) -> list[np.ndarray]:
    routes = route_labels(classify_frames(base, vectors), table)
    return [vectors[routes == i] for i in range(N_SUBMAPS)]


def assemble_hierarchy(
    base: LabeledSom,
    soms: Sequence[Som | None],
    annotated: AnnotatedFrames,
    strategy: Strategy,
    grouping: VowelGrouping | None,
) -> HierarchicalClassifier:
    """Calibrate already trained submaps on the annotated frames routed to them."""
    table = routing_table(strategy, grouping)
    routes = route_labels(classify_frames(base, annotated.vectors), table) if len(annotated) else np.empty(0, int)
    submaps = []
    for i, som in enumerate(soms):
        if som is None:
            submaps.append(Submap())
            continue
        mine = routes == i
        if not mine.any():
            log.info("submap %d received no annotated frames; falling back to base labels", i)
            submaps.append(Submap(som))
            continue
        submaps.append(Submap(som, calibrate(som, annotated.subset(mine))))
    return HierarchicalClassifier(base, Strategy(strategy), grouping, submaps, table)


def build_hierarchy(
    base: LabeledSom,
    unlabeled: Sequence[np.ndarray] | np.ndarray,
    annotated: AnnotatedFrames,
    strategy: Strategy,
    grouping: VowelGrouping | None = None,
    shape: tuple[int, int] = (20, 20),
    seed: int = 0,
    schedule: ScheduleFn = default_schedule,
) -> HierarchicalClassifier:
    X = unlabeled if isinstance(unlabeled, np.ndarray) else np.vstack(list(unlabeled))
    table = routing_table(strategy, grouping)
    soms = train_submaps(split_by_route(base, X, table), shape, seed, schedule)
    return assemble_hierarchy(base, soms, annotated, strategy, grouping)


def classify_file_hierarchical(h: HierarchicalClassifier, features: np.ndarray) -> str:
    if len(features) == 0:
        raise ValueError("cannot classify an empty feature sequence")
    return vowel_vote(h.refine_labels(features))


# --- serialization ------------------------------------------------------------

def save_labeled_som(lsom: LabeledSom, stem: Path) -> None:
    save_som(lsom.som, stem.with_suffix(".som"))
    lines = []
    for unit in np.flatnonzero(lsom.histograms.sum(axis=1)):
        for lab, count in lsom.histogram(unit).items():
            lines.append(f"{unit}\t{phonemes.to_ascii(lab)}\t{count}\n")
    stem.with_suffix(".labels").write_text("".join(lines), encoding="utf-8")


def load_labeled_som(stem: Path) -> LabeledSom:
    som = load_som(stem.with_suffix(".som"))
    hist = np.zeros((som.n_units, len(phonemes.INVENTORY)), dtype=np.int64)
    for line in stem.with_suffix(".labels").read_text(encoding="utf-8").splitlines():
        unit, lab, count = line.split("\t")
        hist[int(unit), phonemes.RANK[phonemes.from_ascii(lab)]] = int(count)
    return LabeledSom(som, hist, majority_from_histograms(hist))


def save_hierarchy(h: HierarchicalClassifier, directory) -> None:
    """Directory layout: hierarchy.json manifest, base.som/.labels, and
    sub<i>.som/.labels for each submap that exists."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_labeled_som(h.base, directory / "base")
    subs = []
    for i, sub in enumerate(h.submaps):
        entry = {"trained": sub.som is not None, "calibrated": sub.lsom is not None}
        if sub.lsom is not None:
            save_labeled_som(sub.lsom, directory / f"sub{i}")
        elif sub.som is not None:
            save_som(sub.som, directory / f"sub{i}.som")
        subs.append(entry)
    manifest = {
        "format": HIERARCHY_FORMAT,
        "strategy": h.strategy.value,
        "grouping": None if h.grouping is None else [[phonemes.to_ascii(v) for v in g] for g in h.grouping.groups],
        "routing": {phonemes.to_ascii(k): v for k, v in h.routing.items()},
        "submaps": subs,
    }
    (directory / "hierarchy.json").write_text(json.dumps(manifest, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def load_hierarchy(directory) -> HierarchicalClassifier:
    directory = Path(directory)
    manifest = json.loads((directory / "hierarchy.json").read_text(encoding="utf-8"))
    if manifest.get("format") != HIERARCHY_FORMAT:
        raise ValueError(f"{directory}: unsupported hierarchy format {manifest.get('format')}")
    grouping = None
    if manifest["grouping"] is not None:
        grouping = VowelGrouping([[phonemes.from_ascii(v) for v in g] for g in manifest["grouping"]])
    submaps = []
    for i, entry in enumerate(manifest["submaps"]):
        if entry["calibrated"]:
            lsom = load_labeled_som(directory / f"sub{i}")
            submaps.append(Submap(lsom.som, lsom))
        elif entry["trained"]:
            submaps.append(Submap(load_som(directory / f"sub{i}.som")))
        else:
            submaps.append(Submap())
    routing = {phonemes.from_ascii(k): v for k, v in manifest["routing"].items()}
    return HierarchicalClassifier(load_labeled_som(directory / "base"), Strategy(manifest["strategy"]),
                                  grouping, submaps, routing)
