import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mnttnn.masks import MaskSpec, ObservationMask, gen_mask
from mnttnn.metrics import mape, mape_with_counts, rmse


class TestMaskSpec:
    @pytest.mark.parametrize("rate", [0.0, 1.0, -0.1, 1.5])
    def test_rate_strictly_inside_unit_interval(self, rate):
        with pytest.raises(ValueError):
            MaskSpec("random", rate)

    def test_unknown_pattern(self):
        with pytest.raises(ValueError):
            MaskSpec("blocks", 0.5)


class TestObservationMask:
    def test_from_linear_indices_roundtrip(self):
        dims = (2, 3, 4)
        idx = np.array([0, 5, 7, 23])
        mask = ObservationMask.from_linear_indices(dims, idx)
        assert mask.n_observed == 4
        assert np.array_equal(np.sort(mask.linear_indices), np.sort(idx))

    def test_duplicate_indices_rejected(self):
        with pytest.raises(ValueError):
            ObservationMask.from_linear_indices((2, 2, 2), [1, 1])

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            ObservationMask.from_linear_indices((2, 2, 2), [8])

    def test_hidden_is_complement(self):
        mask = gen_mask((3, 3, 3), MaskSpec("random", 0.4, 1))
        assert not (mask.hidden & mask.observed).any()
        assert (mask.hidden | mask.observed).all()


class TestGenMask:
    def test_random_exact_count(self):
        mask = gen_mask((10, 10, 10), MaskSpec("random", 0.3, 0))
        assert mask.n_hidden == 300

    def test_fiber_exact_tubes(self):
        mask = gen_mask((4, 4, 8), MaskSpec("fiber", 0.5, 0))
        assert mask.n_hidden == 8 * 8  # 8 whole tubes of length 8
        tube_hidden = mask.hidden.all(axis=2)
        tube_full = mask.observed.all(axis=2)
        assert (tube_hidden | tube_full).all()
        assert tube_hidden.sum() == 8

    def test_same_seed_identical(self):
        a = gen_mask((5, 6, 7), MaskSpec("random", 0.6, 42))
        b = gen_mask((5, 6, 7), MaskSpec("random", 0.6, 42))
        assert np.array_equal(a.observed, b.observed)

    def test_different_seeds_differ(self):
        a = gen_mask((5, 6, 7), MaskSpec("random", 0.6, 1))
        b = gen_mask((5, 6, 7), MaskSpec("random", 0.6, 2))
        assert not np.array_equal(a.observed, b.observed)

    @settings(max_examples=30, deadline=None)
    @given(
        dims=st.tuples(st.integers(2, 8), st.integers(2, 8), st.integers(2, 8)),
        rate=st.floats(0.05, 0.95),
        seed=st.integers(0, 2**31 - 1),
        pattern=st.sampled_from(["random", "fiber"]),
    )
    def test_exact_count_property(self, dims, rate, seed, pattern):
        mask = gen_mask(dims, MaskSpec(pattern, rate, seed))
        if pattern == "random":
            expected = int(np.floor(rate * (dims[0] * dims[1] * dims[2])))
        else:
            expected = int(np.floor(rate * (dims[0] * dims[1]))) * dims[2]
        assert mask.n_hidden == expected
        assert mask.n_observed >= 1


class TestMape:
    def test_worked_example(self):
        truth = np.array([[[2.0, 4.0]]])
        est = np.array([[[1.0, 5.0]]])
        sel = np.ones_like(truth, dtype=bool)
        assert mape(truth, est, sel) == pytest.approx(37.5)

    def test_perfect_estimate_is_zero(self):
        truth = np.arange(1, 9, dtype=float).reshape(2, 2, 2)
        sel = np.ones_like(truth, dtype=bool)
        assert mape(truth, truth, sel) == 0.0

    def test_zero_truth_entries_excluded_and_counted(self):
        truth = np.array([[[0.0, 2.0, 4.0]]])
        est = np.array([[[9.0, 1.0, 5.0]]])
        sel = np.ones_like(truth, dtype=bool)
        value, used, excluded = mape_with_counts(truth, est, sel)
        assert value == pytest.approx(37.5)
        assert used == 2 and excluded == 1

    def test_all_zero_truth_rejected(self):
        truth = np.zeros((1, 1, 2))
        with pytest.raises(ValueError):
            mape(truth, truth + 1, np.ones_like(truth, dtype=bool))

    def test_empty_eval_set_rejected(self):
        truth = np.ones((2, 2, 2))
        with pytest.raises(ValueError):
            mape(truth, truth, np.zeros_like(truth, dtype=bool))


class TestRmse:
    def test_worked_example(self):
        truth = np.array([[[2.0, 4.0]]])
        est = np.array([[[1.0, 5.0]]])
        assert rmse(truth, est, np.ones_like(truth, dtype=bool)) == pytest.approx(1.0)

    def test_identical_is_zero(self):
        x = np.random.default_rng(0).standard_normal((3, 3, 3))
        assert rmse(x, x, np.ones_like(x, dtype=bool)) == 0.0

    def test_single_entry(self):
        truth = np.zeros((1, 1, 1))
        est = truth + 3.0
        assert rmse(truth, est, np.ones_like(truth, dtype=bool)) == pytest.approx(3.0)

    def test_empty_eval_set_rejected(self):
        x = np.ones((2, 2, 2))
        with pytest.raises(ValueError):
            rmse(x, x, np.zeros_like(x, dtype=bool))


class TestMetricsReadOnlyHiddenEntries:
    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 2**31 - 1))
    def test_observed_values_are_irrelevant(self, seed):
        rng = np.random.default_rng(seed)
        dims = (4, 5, 6)
        truth = rng.standard_normal(dims) + 5.0
        est = truth + 0.1 * rng.standard_normal(dims)
        mask = gen_mask(dims, MaskSpec("random", 0.5, seed))
        tampered = est.copy()
        tampered[mask.observed] = -1e9
        assert mape(truth, est, mask.hidden) == mape(truth, tampered, mask.hidden)
        assert rmse(truth, est, mask.hidden) == rmse(truth, tampered, mask.hidden)
