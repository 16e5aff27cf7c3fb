import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hvdsom.som import (
    DimensionMismatch,
    EmptyData,
    Som,
    TrainSchedule,
    _update,
    best_matching_unit,
    best_matching_units,
    default_schedule,
    init_som,
    load_som,
    quantization_error,
    read_som,
    save_som,
    train,
    write_som,
)


def scan_bmu(weights, x):
    """Exhaustive linear scan in plain Python; first strict minimum wins."""
    rows, cols, dim = weights.shape
    best, best_sq = None, math.inf
    for r in range(rows):
        for c in range(cols):
            acc = 0.0
            for k in range(dim):
                d = float(weights[r, c, k]) - float(x[k])
                acc += d * d
            if acc < best_sq:
                best, best_sq = (r, c), acc
    return best, math.sqrt(best_sq)


def clustered(seed, n=300, dim=5, k=4):
    rng = np.random.default_rng(seed)
    centres = rng.uniform(-5, 5, size=(k, dim))
    return centres[rng.integers(k, size=n)] + 0.2 * rng.normal(size=(n, dim))


class TestInit:
    def test_single_unit_inside_bounds(self):
        data = np.array([[0.0, 1.0, 2.0], [1.0, 3.0, 2.5]])
        som = init_som(1, 1, 3, seed=4, data_sample=data)
        w = som.weights[0, 0]
        assert np.all(w >= data.min(0)) and np.all(w <= data.max(0))

    def test_seeded(self):
        assert np.array_equal(init_som(4, 5, 3, 9).weights, init_som(4, 5, 3, 9).weights)
        assert not np.array_equal(init_som(4, 5, 3, 9).weights, init_som(4, 5, 3, 10).weights)

    def test_default_range(self):
        w = init_som(10, 10, 2, 0).weights
        assert w.min() >= -1 and w.max() <= 1

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            init_som(2, 2, 3, 0, np.zeros((5, 4)))


class TestBmu:
    def test_exact_match(self):
        som = init_som(3, 4, 6, 1)
        (r, c), d = best_matching_unit(som, som.weights[2, 1].copy())
        assert (r, c) == (2, 1) and d == 0.0

    def test_hand_example(self):
        som = Som(np.array([[[0, 0], [0, 1]], [[1, 0], [1, 1]]], dtype=float))
        (r, c), d = best_matching_unit(som, np.array([0.1, 0.1]))
        assert (r, c) == (0, 0)
        assert d == pytest.approx(math.sqrt(0.02))

    def test_tie_goes_to_row_major_first(self):
        som = Som(np.array([[[5, 5], [0, 1]], [[1, 0], [5, 5]]], dtype=float))
        (r, c), _ = best_matching_unit(som, np.array([0.5, 0.5]))
        assert (r, c) == (0, 1)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            best_matching_unit(init_som(2, 2, 3, 0), np.zeros(4))

    def test_batch_agrees_with_scan(self):
        rng = np.random.default_rng(3)
        som = Som(rng.normal(size=(7, 6, 39)))
        X = rng.normal(size=(50, 39))
        idx, dist = best_matching_units(som, X)
        for x, i, d in zip(X, idx, dist):
            unit, dd = scan_bmu(som.weights, x)
            assert som.unit(i) == unit and d == dd

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 6), st.integers(1, 6), st.integers(1, 8), st.integers(0, 2**32 - 1))
    def test_single_query_agrees_with_scan(self, rows, cols, dim, seed):
        rng = np.random.default_rng(seed)
        # coarse integer grid values force frequent exact ties
        som = Som(rng.integers(-2, 3, size=(rows, cols, dim)).astype(float))
        x = rng.integers(-2, 3, size=dim).astype(float)
        assert best_matching_unit(som, x) == scan_bmu(som.weights, x)


class TestSchedule:
    def test_validation(self):
        with pytest.raises(ValueError):
            TrainSchedule(0, 0.5, 0.1, 2, 1)
        with pytest.raises(ValueError):
            TrainSchedule(10, 0.1, 0.5, 2, 1)
        with pytest.raises(ValueError):
            TrainSchedule(10, 0.5, 0.0, 2, 1)
        with pytest.raises(ValueError):
            TrainSchedule(10, 0.5, 0.1, 1, 2)

    def test_exponential_endpoints(self):
        s = TrainSchedule(11, 0.5, 0.005, 10.0, 0.1)
        lr = s.learning_rates()
        assert lr[0] == 0.5 and lr[-1] == pytest.approx(0.005)
        assert np.all(np.diff(lr) < 0)
        np.testing.assert_allclose(lr[5], math.sqrt(0.5 * 0.005))

    def test_zero_radius_end_is_linear(self):
        r = TrainSchedule(5, 0.5, 0.5, 4.0, 0.0).radii()
        np.testing.assert_allclose(r, [4, 3, 2, 1, 0])

    def test_default_two_phases(self):
        phases = default_schedule(25, 25, 1000, seed=1)
        assert len(phases) == 2
        assert sum(p.total_steps for p in phases) == 20_000
        assert phases[0].total_steps == 5000
        assert (phases[0].radius_start, phases[0].radius_end) == (12.5, 2.0)
        assert (phases[1].lr_start, phases[1].lr_end) == (0.1, 0.01)
        assert sum(p.total_steps for p in default_schedule(25, 25, 10**6, 1)) == 500_000


class TestTrain:
    def test_radius_zero_lr_one_moves_only_bmu_onto_x(self):
        som = init_som(3, 3, 4, 0)
        x = np.array([0.3, -0.2, 0.9, 0.1])
        (r, c), _ = best_matching_unit(som, x)
        out = train(som, x[None, :], TrainSchedule(1, 1.0, 1.0, 0.0, 0.0))
        assert np.array_equal(out.weights[r, c], x)
        mask = np.ones((3, 3), bool)
        mask[r, c] = False
        assert np.array_equal(out.weights[mask], som.weights[mask])

    def test_input_map_untouched(self):
        som = init_som(3, 3, 2, 0)
        before = som.weights.copy()
        train(som, np.ones((4, 2)), TrainSchedule(10, 0.5, 0.1, 1, 0.5))
        assert np.array_equal(som.weights, before)

    @pytest.mark.parametrize("seed", range(5))
    def test_converges_onto_repeated_vector(self, seed):
        x = np.random.default_rng(seed).normal(size=6)
        som = init_som(5, 5, 6, seed)
        out = train(som, np.tile(x, (3, 1)), TrainSchedule(3000, 0.5, 0.05, 2.5, 0.0, seed))
        assert best_matching_unit(out, x)[1] < 1e-6

    def test_deterministic(self):
        data = clustered(0)
        som = init_som(6, 6, 5, 2, data)
        sched = default_schedule(6, 6, len(data), seed=5)
        assert np.array_equal(train(som, data, sched).weights, train(som, data, sched).weights)

    def test_checked_path_matches_compiled(self):
        data = clustered(1, n=50)
        som = init_som(4, 4, 5, 3, data)
        sched = default_schedule(4, 4, len(data), seed=8, steps_per_sample=4)
        assert np.array_equal(train(som, data, sched).weights, train(som, data, sched, check=True).weights)

    def test_empty_data(self):
        with pytest.raises(EmptyData):
            train(init_som(2, 2, 3, 0), np.empty((0, 3)), TrainSchedule(5, 0.5, 0.1, 1, 0))

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            train(init_som(2, 2, 3, 0), np.zeros((5, 2)), TrainSchedule(5, 0.5, 0.1, 1, 0))

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(1e-3, 1.0), st.floats(0.0, 6.0))
    def test_update_stays_bounded(self, seed, lr, radius):
        rng = np.random.default_rng(seed)
        W = rng.normal(size=(16, 4)) * rng.uniform(0.01, 100)
        x = rng.normal(size=4) * rng.uniform(0.01, 100)
        coords = Som(W.reshape(4, 4, 4)).grid_coords()
        before = W.copy()
        _update(W, coords, x, int(rng.integers(16)), lr, radius)
        assert np.all(np.isfinite(W))
        bound = np.maximum(np.linalg.norm(before, axis=1), np.linalg.norm(x)) + np.linalg.norm(x - before, axis=1)
        assert np.all(np.linalg.norm(W, axis=1) <= bound * (1 + 1e-12))


class TestQuantizationError:
    def test_zero_when_data_on_units(self):
        som = init_som(3, 3, 4, 0)
        assert quantization_error(som, som.flat()[[0, 4, 8]]) == 0.0

    def test_single_unit_hand_computed(self):
        som = Som(np.array([[[1.0, 2.0]]]))
        data = np.array([[1.0, 2.0], [4.0, 6.0], [1.0, -1.0]])
        # distances 0, 5, 3
        assert quantization_error(som, data) == pytest.approx(8.0 / 3.0)

    def test_permutation_invariant(self):
        som = init_som(4, 4, 3, 0)
        data = np.random.default_rng(0).normal(size=(40, 3))
        perm = np.random.default_rng(1).permutation(40)
        assert quantization_error(som, data) == pytest.approx(quantization_error(som, data[perm]), rel=1e-12)

    def test_empty(self):
        with pytest.raises(EmptyData):
            quantization_error(init_som(2, 2, 3, 0), np.empty((0, 3)))

    def test_training_reduces_error(self):
        decreased = 0
        for seed in range(20):
            data = clustered(seed)
            som = init_som(8, 8, 5, seed, data)
            trained = train(som, data, default_schedule(8, 8, len(data), seed))
            decreased += quantization_error(trained, data) < quantization_error(som, data)
        assert decreased >= 19


class TestSerialization:
    def test_round_trip(self, tmp_path):
        som = init_som(3, 5, 7, 11)
        save_som(som, tmp_path / "m.som")
        assert np.array_equal(load_som(tmp_path / "m.som").weights, som.weights)

    def test_header_layout(self):
        buf = io.BytesIO()
        write_som(init_som(2, 3, 4, 0), buf)
        raw = buf.getvalue()
        assert raw[:6] == b"HVDSOM"
        assert len(raw) == 6 + 2 + 12 + 2 * 3 * 4 * 8

    def test_rejects_bad_magic(self):
        with pytest.raises(ValueError, match="not a SOM"):
            read_som(io.BytesIO(b"XXXXXX" + bytes(14)))

    def test_rejects_truncated(self):
        buf = io.BytesIO()
        write_som(init_som(2, 2, 2, 0), buf)
        with pytest.raises(ValueError, match="truncated"):
            read_som(io.BytesIO(buf.getvalue()[:-3]))
