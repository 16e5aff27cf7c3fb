import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hvdsom import phonemes
from hvdsom.calibration import (
    AnnotatedFrames,
    OverlappingSegments,
    UnusableClassifier,
    calibrate,
    classify_file,
    classify_frame,
    classify_frames,
    frames_from_annotation,
    vowel_vote,
)
from hvdsom.corpus import Segment
from hvdsom.features import FrameSpec
from hvdsom.som import DimensionMismatch, Som

SPEC = FrameSpec()
SR = 16000
I, A, E = "iː", "æ", "e"


def line_som(n):
    """1 x n map whose unit k sits at the point (k, 0)."""
    w = np.zeros((1, n, 2))
    w[0, :, 0] = np.arange(n)
    return Som(w)


def frames(points, labels):
    return AnnotatedFrames(np.array([[p, 0.0] for p in points]), list(labels))


class TestFramesFromAnnotation:
    def test_half_open_midpoint_rule(self):
        # midpoints are 0.0125 + 0.01 t seconds
        segs = [Segment("h", 0.0, 0.0325), Segment(I, 0.0325, 0.0525), Segment("d", 0.0525, 0.0625)]
        out = frames_from_annotation(segs, np.zeros((8, 3)), SPEC, SR, "u1")
        assert out.labels == ["h", "h", I, I, "d", "sil", "sil", "sil"]
        assert out.utt_ids == ["u1"] * 8
        assert out.frame_index == list(range(8))

    def test_brute_force_agreement(self):
        rng = np.random.default_rng(0)
        for _ in range(30):
            cuts = np.sort(rng.uniform(0, 0.5, size=4))
            segs = [Segment("h", cuts[0], cuts[1]), Segment(E, cuts[1], cuts[2]), Segment("d", cuts[2], cuts[3])]
            n = 50
            out = frames_from_annotation(segs, np.zeros((n, 1)), SPEC, SR)
            for t, lab in enumerate(out.labels):
                mid = (t * 160 + 200) / SR
                hits = [s.label for s in segs if s.start <= mid < s.end]
                assert lab == (hits[0] if hits else "sil")

    def test_overlap_rejected(self):
        segs = [Segment("h", 0.0, 0.1), Segment(I, 0.05, 0.2)]
        with pytest.raises(OverlappingSegments, match="overlaps"):
            frames_from_annotation(segs, np.zeros((10, 2)), SPEC, SR, "bad")

    def test_unknown_label(self):
        with pytest.raises(phonemes.UnknownLabel):
            frames_from_annotation([Segment("zz", 0.0, 0.1)], np.zeros((5, 2)), SPEC, SR)


class TestAnnotatedFrames:
    def test_subset_and_concat(self):
        f = frames([0, 1, 2, 3], ["h", I, I, "d"])
        sub = f.subset(np.array([False, True, True, False]))
        assert sub.labels == [I, I] and sub.frame_index == [1, 2]
        both = AnnotatedFrames.concat([sub, f], dim=2)
        assert len(both) == 6 and both.vectors.shape == (6, 2)
        assert len(AnnotatedFrames.concat([], dim=2)) == 0

    def test_iteration(self):
        f = frames([0, 1], ["h", "d"])
        assert [fr.label for fr in f] == ["h", "d"]


class TestCalibrate:
    def test_histograms_by_hand(self):
        lsom = calibrate(line_som(3), frames([0, 0.1, -0.2, 2, 2.2], [I, I, "h", A, A]))
        assert lsom.histogram(0) == {I: 2, "h": 1}
        assert lsom.histogram(1) == {}
        assert lsom.histogram(2) == {A: 2}
        assert [lsom.unit_label(k) for k in range(3)] == [I, None, A]
        assert lsom.n_labeled == 2

    def test_tie_follows_inventory_order(self):
        # one vote each for sil, a vowel and d at the same unit
        lsom = calibrate(line_som(1), frames([0, 0, 0], ["sil", E, "d"]))
        assert lsom.unit_label(0) == "d"
        lsom = calibrate(line_som(1), frames([0, 0], [A, E]))
        assert lsom.unit_label(0) == E

    def test_unlabelled_units_take_nearest_labelled(self):
        lsom = calibrate(line_som(6), frames([0, 4], [I, A]))
        # units 1, 2 are nearer 0; unit 3, 5 nearer 4; none tie
        assert classify_frames(lsom, np.array([[k, 0.0] for k in range(6)])) == [I, I, I, A, A, A]

    def test_grid_tie_goes_row_major(self):
        lsom = calibrate(line_som(5), frames([0, 4], [I, A]))
        # unit 2 is equidistant from units 0 and 4
        assert classify_frame(lsom, np.array([2.0, 0.0])) == I

    def test_fallback_on_2d_grid(self):
        w = np.zeros((3, 3, 2))
        for r in range(3):
            for c in range(3):
                w[r, c] = (10 * r, 10 * c)
        lsom = calibrate(Som(w), AnnotatedFrames(np.array([[20.0, 20.0]]), [E]))
        assert classify_frames(lsom, w.reshape(9, 2)) == [E] * 9

    def test_calibration_frames_classify_to_their_unit_label(self):
        rng = np.random.default_rng(5)
        som = Som(rng.normal(size=(4, 4, 3)))
        labels = [phonemes.INVENTORY[i] for i in rng.integers(len(phonemes.INVENTORY), size=200)]
        f = AnnotatedFrames(rng.normal(size=(200, 3)), labels)
        lsom = calibrate(som, f)
        pred = classify_frames(lsom, f.vectors)
        # each frame gets its own unit's majority, so hits equal the summed majorities
        correct = sum(p == t for p, t in zip(pred, labels))
        majority_total = int(lsom.histograms.max(axis=1).sum())
        assert correct == majority_total

    def test_empty_and_dimension(self):
        with pytest.raises(ValueError):
            calibrate(line_som(2), frames([], []))
        with pytest.raises(DimensionMismatch):
            calibrate(line_som(2), AnnotatedFrames(np.zeros((2, 3)), [I, I]))

    def test_no_labelled_units(self):
        lsom = calibrate(line_som(2), frames([0], [I]))
        lsom.majority[:] = -1
        lsom._resolved = None
        with pytest.raises(UnusableClassifier):
            classify_frame(lsom, np.zeros(2))


class TestVowelVote:
    def test_majority(self):
        assert vowel_vote(["h", I, I, A, "d", "sil"]) == I

    def test_consonants_do_not_vote(self):
        assert vowel_vote(["h", "h", "h", "d", "sil", A]) == A

    def test_tie_canonical(self):
        assert vowel_vote([A, I, A, I]) == I
        assert vowel_vote(["ɪə", "ɐ"]) == "ɐ"

    def test_no_vowel(self):
        assert vowel_vote(["h", "d", "sil"]) == phonemes.NO_VOWEL
        assert vowel_vote([]) == phonemes.NO_VOWEL

    @settings(max_examples=50)
    @given(st.lists(st.sampled_from(phonemes.INVENTORY), max_size=40), st.randoms())
    def test_order_invariant(self, labels, rnd):
        shuffled = list(labels)
        rnd.shuffle(shuffled)
        assert vowel_vote(labels) == vowel_vote(shuffled)

    def test_classify_file(self):
        lsom = calibrate(line_som(3), frames([0, 1, 2], ["h", E, "d"]))
        feats = np.array([[0, 0], [1, 0], [1.1, 0], [2, 0]], dtype=float)
        assert classify_file(lsom, feats) == E
        with pytest.raises(ValueError):
            classify_file(lsom, np.empty((0, 2)))
