import numpy as np
import pytest

from oracles import brute_force_shap, coverage_expectation
from taskatlas.stats import ForestParams, StatsError, fit_forest, mean_abs_shap, tree_shap
from taskatlas.stats.forest import Tree


def leaf_tree(value: float, count: int = 10) -> Tree:
    tree = Tree()
    tree.add_node(value, count)
    return tree


def depth_one_tree(feature=0, threshold=0.5, left=(1.0, 3), right=(5.0, 7)) -> Tree:
    tree = Tree()
    root = tree.add_node((left[0] * left[1] + right[0] * right[1]) / (left[1] + right[1]), left[1] + right[1])
    l = tree.add_node(left[0], left[1])
    r = tree.add_node(right[0], right[1])
    tree.feature[root] = feature
    tree.threshold[root] = threshold
    tree.left[root] = l
    tree.right[root] = r
    return tree


def forest_of(trees, n_features):
    from taskatlas.stats.forest import Forest

    return Forest(trees=tuple(trees), n_features=n_features, params=ForestParams(n_trees=len(trees)),
                  seed=0, constant_outcome=False)


class TestTreeShapSmall:
    def test_single_leaf_all_zero(self):
        forest = forest_of([leaf_tree(4.2)], n_features=3)
        result = tree_shap(forest, np.zeros(3))
        assert np.allclose(result.values, 0.0)
        assert result.base_value == pytest.approx(4.2)

    def test_depth_one_two_subset_shapley_by_hand(self):
        tree = depth_one_tree(left=(1.0, 3), right=(5.0, 7))
        forest = forest_of([tree], n_features=2)
        x = np.asarray([0.2, 9.9])  # goes left
        result = tree_shap(forest, x)
        base = (1.0 * 3 + 5.0 * 7) / 10
        assert result.base_value == pytest.approx(base)
        assert result.values[0] == pytest.approx(1.0 - base)
        assert result.values[1] == 0.0

    def test_local_accuracy_on_hand_tree(self):
        forest = forest_of([depth_one_tree()], n_features=2)
        for x in (np.asarray([0.0, 0.0]), np.asarray([1.0, 0.0])):
            result = tree_shap(forest, x)
            assert result.total == pytest.approx(forest.predict_one(x), abs=1e-12)

    def test_dimension_mismatch(self):
        forest = forest_of([leaf_tree(1.0)], n_features=2)
        with pytest.raises(StatsError):
            tree_shap(forest, np.zeros(3))


def repeated_split_tree() -> Tree:
    """Feature 0 split twice along the same path, feature 1 once.

    Internal node values are the coverage-weighted means of their leaves, as in
    a grown tree.
    """
    tree = Tree()
    a_value = (-2.0 * 5 + 0.5 * 3) / 8
    b_value = (0.25 * 4 + 1.75 * 4) / 8
    root = tree.add_node((a_value * 8 + b_value * 8) / 16, 16)
    a = tree.add_node(a_value, 8)  # x0 <= 0.5
    b = tree.add_node(b_value, 8)  # x0 > 0.5
    tree.feature[root], tree.threshold[root] = 0, 0.5
    tree.left[root], tree.right[root] = a, b
    a1 = tree.add_node(-2.0, 5)  # x0 <= 0.2
    a2 = tree.add_node(0.5, 3)   # 0.2 < x0 <= 0.5
    tree.feature[a], tree.threshold[a] = 0, 0.2
    tree.left[a], tree.right[a] = a1, a2
    b1 = tree.add_node(0.25, 4)  # x1 <= 0.0
    b2 = tree.add_node(1.75, 4)
    tree.feature[b], tree.threshold[b] = 1, 0.0
    tree.left[b], tree.right[b] = b1, b2
    return tree


class TestTreeShapAgainstBruteForce:
    def test_repeated_feature_on_path_matches_brute_force(self):
        forest = forest_of([repeated_split_tree()], n_features=2)
        for x in (np.asarray([0.1, -1.0]), np.asarray([0.3, 2.0]), np.asarray([0.9, -0.5]), np.asarray([0.9, 0.5])):
            got = tree_shap(forest, x)
            expected = brute_force_shap(forest, x)
            assert np.allclose(got.values, expected, atol=1e-12)
            assert got.total == pytest.approx(forest.predict_one(x), abs=1e-12)

    @pytest.mark.parametrize("seed", range(8))
    def test_matches_subset_enumeration(self, seed):
        rng = np.random.default_rng(seed)
        n, p = 50, int(rng.integers(2, 5))
        X = rng.normal(size=(n, p))
        y = X @ rng.normal(size=p) + 0.5 * rng.normal(size=n)
        forest = fit_forest(X, y, ForestParams(n_trees=4, min_leaf=3, max_depth=3), seed=seed)
        for row in X[:5]:
            got = tree_shap(forest, row).values
            expected = brute_force_shap(forest, row)
            assert np.allclose(got, expected, atol=1e-9)

    def test_local_accuracy_deep_forest(self, rng):
        X = rng.normal(size=(60, 5))
        y = np.sin(X[:, 0]) + X[:, 1] * X[:, 2] + rng.normal(size=60)
        forest = fit_forest(X, y, ForestParams(n_trees=12, min_leaf=2), seed=4)
        for row in X[:10]:
            result = tree_shap(forest, row)
            assert result.total == pytest.approx(forest.predict_one(row), abs=1e-9)

    def test_dummy_feature_gets_zero(self, rng):
        n = 60
        X = np.column_stack([rng.normal(size=n), np.zeros(n), rng.normal(size=n)])
        y = X[:, 0] + X[:, 2]
        forest = fit_forest(X, y, ForestParams(n_trees=10, min_leaf=2), seed=0)
        assert all(1 not in tree.features_used() for tree in forest.trees)
        for row in X[:5]:
            assert tree_shap(forest, row).values[1] == 0.0

    def test_base_value_is_coverage_expectation_of_empty_set(self, rng):
        X = rng.normal(size=(40, 3))
        y = rng.normal(size=40)
        forest = fit_forest(X, y, ForestParams(n_trees=5, min_leaf=2, max_depth=4), seed=1)
        expected = np.mean([coverage_expectation(t, X[0], frozenset()) for t in forest.trees])
        assert tree_shap(forest, X[0]).base_value == pytest.approx(expected, abs=1e-12)


class TestMeanAbsShap:
    def test_null_model_near_zero(self, rng):
        X = rng.normal(size=(40, 3))
        y = np.full(40, 2.0)
        ranking = mean_abs_shap(X, y, ForestParams(n_trees=10), seeds=(0,))
        assert np.allclose(ranking.mean_abs, 0.0, atol=1e-9)

    def test_signal_feature_ranks_first(self, rng):
        n = 80
        X = rng.normal(size=(n, 3))
        y = 4.0 * X[:, 1] + 0.05 * rng.normal(size=n)
        ranking = mean_abs_shap(X, y, ForestParams(n_trees=20, min_leaf=4), seeds=(0, 1))
        assert ranking.order[0] == 1

    def test_single_seed_equals_that_seed(self, rng):
        X = rng.normal(size=(30, 2))
        y = X[:, 0] + rng.normal(size=30)
        params = ForestParams(n_trees=10, min_leaf=3)
        single = mean_abs_shap(X, y, params, seeds=(7,))
        forest = fit_forest(X, y, params, seed=7)
        expected = np.stack([np.abs(tree_shap(forest, row).values) for row in X]).mean(axis=0) * 100
        assert np.allclose(single.mean_abs, expected, atol=1e-12)

    def test_scale_is_times_hundred(self, rng):
        X = rng.normal(size=(30, 2))
        y = X[:, 0]
        params = ForestParams(n_trees=5, min_leaf=3)
        ranking = mean_abs_shap(X, y, params, seeds=(0,))
        forest = fit_forest(X, y, params, seed=0)
        raw = np.stack([np.abs(tree_shap(forest, row).values) for row in X]).mean(axis=0)
        assert np.allclose(ranking.mean_abs, raw * 100.0)

    def test_no_seeds_errors(self, rng):
        with pytest.raises(StatsError):
            mean_abs_shap(rng.normal(size=(10, 2)), rng.normal(size=10), ForestParams(n_trees=2), seeds=())
