"""Cross-validation over annotated word tokens and vowel error rates."""

from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass, field
from functools import partial
from typing import Mapping, Sequence

import numpy as np

from . import phonemes
from .boosting import (
    Strategy,
    assemble_hierarchy,
    classify_file_hierarchical,
    routing_table,
    split_by_route,
    train_submaps,
)
from .calibration import AnnotatedFrames, calibrate, classify_file, frames_from_annotation
from .config import ExperimentConfig
from .corpus import Manifest, Utterance
from .grouping import ConfusionMatrix, VowelGrouping, confusion_matrix, greedy_confusion_groups
from .som import Som, default_schedule, init_som, train

log = logging.getLogger(__name__)

ROW_NAMES = {"single": "Single", "confusion": "Vowels", "linguistic": "h V d"}
HIERARCHY_STRATEGY = {"confusion": Strategy.CONFUSION_GROUPS, "linguistic": Strategy.LINGUISTIC_HVD}


class TooFewTokens(ValueError):
    pass


@dataclass
class Fold:
    index: int
    held_out: list[str]
    calibration: list[str]


def kfold_split(tokens: Sequence[str], k: int, seed: int) -> list[Fold]:
    """Seeded shuffle, then k contiguous chunks whose sizes differ by at most one."""
    tokens = list(tokens)
    if k < 2:
        raise ValueError("k must be >= 2")
    if len(tokens) < k:
        raise TooFewTokens(f"{len(tokens)} annotated tokens cannot fill {k} folds")
    order = np.random.default_rng(seed).permutation(len(tokens))
    chunks = np.array_split(order, k)
    folds = []
    for i, chunk in enumerate(chunks):
        held = set(chunk.tolist())
        folds.append(Fold(i, [tokens[j] for j in chunk],
                          [tokens[j] for j in order if j not in held]))
    return folds


def vowel_error_rate(decisions) -> float:
    """Fraction of (true, predicted) pairs that disagree; NO_VOWEL is always wrong."""
    decisions = list(decisions)
    if not decisions:
        raise ValueError("vowel error rate of no decisions")
    wrong = sum(1 for true, pred in decisions if pred == phonemes.NO_VOWEL or pred != true)
    return wrong / len(decisions)


def standard_error(rates) -> float:
    """Sample standard deviation (n - 1) over sqrt(n)."""
    r = np.asarray(rates, dtype=np.float64)
    if r.size < 2:
        raise ValueError("standard error needs at least two values")
    return float(r.std(ddof=1) / math.sqrt(r.size))


@dataclass
class CvReport:
    strategy: str
    group: str
    fold_rates: list[float]

    @property
    def mean(self) -> float:
        return float(np.mean(self.fold_rates))

    @property
    def standard_error(self) -> float:
        return standard_error(self.fold_rates)

    def cell(self) -> str:
        return f"{self.mean:.3f}({self.standard_error:.3f})"


@dataclass
class FoldRecord:
    group: str
    fold: int
    strategy: str
    n_tokens: int
    n_errors: int
    decisions: list[tuple[str, str, str]]  # (utt id, true, predicted)

    @property
    def rate(self) -> float:
        return self.n_errors / self.n_tokens


@dataclass
class CvResult:
    reports: list[CvReport]
    folds: list[FoldRecord]
    confusions: dict[tuple[str, int], ConfusionMatrix] = field(default_factory=dict)
    groupings: dict[tuple[str, int], VowelGrouping] = field(default_factory=dict)

    def report(self, strategy: str, group: str) -> CvReport:
        for r in self.reports:
            if r.strategy == strategy and r.group == group:
                return r
        raise KeyError((strategy, group))


def derive_seed(seed: int, *tags) -> int:
    material = [seed] + [int.from_bytes(hashlib.sha256(str(t).encode()).digest()[:4], "little") for t in tags]
    return int(np.random.SeedSequence(material).generate_state(1, dtype=np.uint64)[0])


def split_calibration(tokens: Sequence[str], fraction: float, seed: int) -> tuple[list[str], list[str]]:
    """Token-level split into (unit labeling, confusion estimation)."""
    order = np.random.default_rng(seed).permutation(len(tokens))
    n_label = int(round(fraction * len(tokens)))
    n_label = min(max(n_label, 1), max(len(tokens) - 1, 1))
    return [tokens[i] for i in order[:n_label]], [tokens[i] for i in order[n_label:]]


def train_base_map(X: np.ndarray, config: ExperimentConfig, seed: int) -> Som:
    schedule = partial(default_schedule, steps_per_sample=config.steps_per_sample,
                       max_steps=config.max_steps, ordering_fraction=config.ordering_fraction)
    som = init_som(config.base_rows, config.base_cols, X.shape[1], seed, X)
    return train(som, X, schedule(config.base_rows, config.base_cols, len(X), seed))


class _SubmapCache:
    """Submap training depends only on the routed frames and the seed;
    identical routings across folds reuse the trained maps."""

    def __init__(self, config: ExperimentConfig, seed: int):
        self.config = config
        self.seed = seed
        self.schedule = partial(default_schedule, steps_per_sample=config.steps_per_sample,
                                max_steps=config.max_steps, ordering_fraction=config.ordering_fraction)
        self._maps: dict[bytes, list] = {}
        self.hits = 0

    def get(self, strategy: Strategy, routed: list[np.ndarray]):
        h = hashlib.sha256(strategy.value.encode())
        for block in routed:
            h.update(len(block).to_bytes(8, "little"))
            h.update(np.ascontiguousarray(block).tobytes())
        key = h.digest()
        if key in self._maps:
            self.hits += 1
        else:
            self._maps[key] = train_submaps(
                routed, (self.config.sub_rows, self.config.sub_cols),
                derive_seed(self.seed, "submaps", strategy.value), self.schedule)
        return self._maps[key]


def annotated_frames(utts: Sequence[Utterance], features: Mapping[str, np.ndarray],
                     config: ExperimentConfig, sample_rate: int) -> AnnotatedFrames:
    dim = next(iter(features.values())).shape[1]
    return AnnotatedFrames.concat(
        (frames_from_annotation(u.segments, features[u.utt_id], config.frame, sample_rate, u.utt_id)
         for u in utts), dim)


def zscore_features(features: Mapping[str, np.ndarray], reference_ids: Sequence[str]) -> dict[str, np.ndarray]:
    ref = np.vstack([features[u] for u in reference_ids])
    mu, sd = ref.mean(axis=0), ref.std(axis=0)
    sd[sd == 0] = 1.0
    return {u: (x - mu) / sd for u, x in features.items()}


def run_cv(manifest: Manifest, features: Mapping[str, np.ndarray], config: ExperimentConfig) -> CvResult:
    """Cross-validate every configured strategy for every speaker group.

    The base map is trained once per group on that group's unlabelled pool;
    per fold the calibration tokens are split into unit-labeling and
    confusion-estimation parts, a grouping is derived, and both hierarchies
    are built on the fold's labeled base map.
    """
    annotated = manifest.annotated()
    if not annotated:
        raise TooFewTokens("manifest has no annotated utterances")
    if len(annotated) < config.k:
        raise TooFewTokens(f"k={config.k} folds exceed the {len(annotated)} annotated tokens")
    by_id = {u.utt_id: u for u in annotated}
    token_ids = [u.utt_id for u in annotated]

    reports, records = [], []
    confusions, groupings = {}, {}
    for group in manifest.groups():
        pool = [u.utt_id for u in manifest.unlabelled(group)]
        feats = zscore_features(features, pool) if config.zscore else features
        X = np.vstack([feats[u] for u in pool])
        log.info("group %s: training %dx%d base map on %d frames", group, config.base_rows, config.base_cols, len(X))
        base = train_base_map(X, config, derive_seed(config.seed, "base", group))
        cache = _SubmapCache(config, derive_seed(config.seed, "sub", group))

        rates: dict[str, list[float]] = {s: [] for s in config.strategies}
        for fold in kfold_split(token_ids, config.k, derive_seed(config.seed, "folds")):
            label_ids, conf_ids = split_calibration(
                fold.calibration, config.calibration_fraction, derive_seed(config.seed, "calib", fold.index))
            frames = annotated_frames([by_id[u] for u in label_ids], feats, config, manifest.sample_rate)
            base_l = calibrate(base, frames)

            pairs = [(by_id[u].vowel, classify_file(base_l, feats[u])) for u in conf_ids]
            cm = confusion_matrix(pairs, phonemes.VOWELS)
            grouping = greedy_confusion_groups(cm, config.target_groups)
            confusions[group, fold.index] = cm
            groupings[group, fold.index] = grouping

            classifiers = {}
            for name in config.strategies:
                if name == "single":
                    continue
                strategy = HIERARCHY_STRATEGY[name]
                g = grouping if strategy is Strategy.CONFUSION_GROUPS else None
                if config.force_inert:
                    soms = [None] * 3
                else:
                    soms = cache.get(strategy, split_by_route(base_l, X, routing_table(strategy, g)))
                classifiers[name] = assemble_hierarchy(base_l, soms, frames, strategy, g)

            for name in config.strategies:
                decisions = []
                for u in fold.held_out:
                    if name == "single":
                        pred = classify_file(base_l, feats[u])
                    else:
                        pred = classify_file_hierarchical(classifiers[name], feats[u])
                    decisions.append((u, by_id[u].vowel, pred))
                n_err = sum(1 for _, t, p in decisions if p != t)
                records.append(FoldRecord(group, fold.index, name, len(decisions), n_err, decisions))
                rates[name].append(n_err / len(decisions))
            log.info("group %s fold %d: %s", group, fold.index,
                     " ".join(f"{s}={rates[s][-1]:.3f}" for s in config.strategies))
        log.info("group %s: submap cache hits %d", group, cache.hits)
        reports.extend(CvReport(s, group, rates[s]) for s in config.strategies)
    return CvResult(reports, records, confusions, groupings)
