import numpy as np
import pytest

from taskatlas.stats import ForestParams, StatsError, ale_1d, fit_forest


class TestAle:
    def test_constant_model_identically_zero(self, rng):
        X = rng.normal(size=(50, 2))
        result = ale_1d(lambda rows: np.full(len(rows), 3.0), X, feature=0, n_bins=5)
        assert np.allclose(result.values, 0.0)
        assert result.direction == 0

    def test_linear_model_slope_recovered(self, rng):
        X = rng.uniform(0, 1, size=(200, 2))
        result = ale_1d(lambda rows: 2.0 * rows[:, 0], X, feature=0, n_bins=10)
        slopes = np.diff(result.values) / np.diff(result.grid)
        assert np.allclose(slopes, 2.0, atol=1e-9)
        assert result.direction == 1

    def test_negative_direction(self, rng):
        X = rng.uniform(0, 1, size=(100, 2))
        result = ale_1d(lambda rows: -1.5 * rows[:, 0], X, feature=0, n_bins=8)
        assert result.direction == -1

    def test_direction_invariant_to_constant_shift(self, rng):
        X = rng.uniform(0, 1, size=(100, 3))

        def model(rows):
            return rows[:, 1] ** 2

        base = ale_1d(model, X, feature=1, n_bins=6)
        shifted = ale_1d(lambda rows: model(rows) + 42.0, X, feature=1, n_bins=6)
        assert base.direction == shifted.direction
        assert np.allclose(base.values, shifted.values, atol=1e-9)

    def test_centering_is_count_weighted_zero(self, rng):
        X = rng.uniform(0, 1, size=(150, 2))
        result = ale_1d(lambda rows: rows[:, 0] ** 2, X, feature=0, n_bins=10)
        midpoints = (result.values[:-1] + result.values[1:]) / 2
        weighted_mean = (result.bin_counts * midpoints).sum() / result.bin_counts.sum()
        assert weighted_mean == pytest.approx(0.0, abs=1e-9)

    def test_duplicate_quantiles_merged_and_flagged(self):
        x0 = np.concatenate([np.zeros(50), np.ones(10)])
        X = np.column_stack([x0, np.arange(60.0)])
        result = ale_1d(lambda rows: rows[:, 0], X, feature=0, n_bins=10)
        assert result.merged_bins
        assert len(result.grid) == len(result.bin_counts) + 1
        assert result.bin_counts.min() > 0

    def test_needs_two_distinct_values(self):
        X = np.column_stack([np.ones(10), np.arange(10.0)])
        with pytest.raises(StatsError):
            ale_1d(lambda rows: rows[:, 1], X, feature=0)

    def test_forest_model_monotone_signal(self, rng):
        n = 150
        X = rng.uniform(-1, 1, size=(n, 2))
        y = 3.0 * X[:, 0] + 0.1 * rng.normal(size=n)
        forest = fit_forest(X, y, ForestParams(n_trees=30, min_leaf=4), seed=0)
        result = ale_1d(forest.predict, X, feature=0, n_bins=8)
        assert result.direction == 1
        assert result.values[-1] - result.values[0] > 2.0
