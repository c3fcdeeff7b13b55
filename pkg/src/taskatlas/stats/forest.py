"""Regression forest grown from scratch: bootstrap trees, variance-reduction
splits over random feature subsets, and permutation importance.

Trees store per-node training coverage counts, which the attribution code uses
as the conditioning distribution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .series import StatsError
from .._rng import rng_for

LEAF = -1


@dataclass
class Tree:
    """Array-encoded binary regression tree; rows x with x[f] <= threshold go left."""

    feature: list[int] = field(default_factory=list)  # LEAF marks leaves
    threshold: list[float] = field(default_factory=list)
    left: list[int] = field(default_factory=list)
    right: list[int] = field(default_factory=list)
    value: list[float] = field(default_factory=list)  # training mean in node
    count: list[int] = field(default_factory=list)  # training coverage of node

    def add_node(self, value: float, count: int) -> int:
        self.feature.append(LEAF)
        self.threshold.append(0.0)
        self.left.append(LEAF)
        self.right.append(LEAF)
        self.value.append(value)
        self.count.append(count)
        return len(self.feature) - 1

    def predict_one(self, x: np.ndarray) -> float:
        node = 0
        while self.feature[node] != LEAF:
            node = self.left[node] if x[self.feature[node]] <= self.threshold[node] else self.right[node]
        return self.value[node]

    def max_depth(self) -> int:
        depths = {0: 0}
        best = 0
        for node in range(len(self.feature)):
            if self.feature[node] != LEAF:
                depths[self.left[node]] = depths[node] + 1
                depths[self.right[node]] = depths[node] + 1
                best = max(best, depths[node] + 1)
        return best

    def features_used(self) -> set[int]:
        return {f for f in self.feature if f != LEAF}


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 500
    mtry: Optional[int] = None  # default ceil(p / 3)
    min_leaf: int = 2
    max_depth: Optional[int] = None


@dataclass(frozen=True)
class Forest:
    trees: tuple[Tree, ...]
    n_features: int
    params: ForestParams
    seed: int
    constant_outcome: bool

    def predict_one(self, x: np.ndarray) -> float:
        return math.fsum(tree.predict_one(x) for tree in self.trees) / len(self.trees)

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        return np.asarray([self.predict_one(row) for row in X])


def _best_split(
    X: np.ndarray, y: np.ndarray, rows: np.ndarray, features: np.ndarray, min_leaf: int
) -> Optional[tuple[int, float]]:
    """Feature/threshold pair with the largest SSE reduction; ties keep the
    first candidate in (feature asc, threshold asc) order."""
    y_node = y[rows]
    n = len(rows)
    total = y_node.sum()
    best_gain = 0.0
    best: Optional[tuple[int, float]] = None
    for f in features:
        order = np.argsort(X[rows, f], kind="stable")
        xs = X[rows[order], f]
        ys = y_node[order]
        csum = np.cumsum(ys)
        for i in range(min_leaf - 1, n - min_leaf):
            if xs[i] == xs[i + 1]:
                continue
            left_n = i + 1
            right_n = n - left_n
            left_sum = csum[i]
            right_sum = total - left_sum
            # SSE reduction = sum_side n_side * mean_side^2 - n * mean^2
            gain = left_sum * left_sum / left_n + right_sum * right_sum / right_n - total * total / n
            if gain > best_gain + 1e-12 * max(1.0, abs(best_gain)):
                best_gain = gain
                best = (int(f), float((xs[i] + xs[i + 1]) / 2.0))
    return best


def _grow_tree(X: np.ndarray, y: np.ndarray, params: ForestParams, mtry: int, rng: np.random.Generator) -> Tree:
    tree = Tree()
    p = X.shape[1]
    stack = [(tree.add_node(float(y.mean()), len(y)), np.arange(len(y)), 0)]
    while stack:
        node, rows, depth = stack.pop()
        y_node = y[rows]
        if (
            len(rows) < 2 * params.min_leaf
            or (params.max_depth is not None and depth >= params.max_depth)
            or np.all(y_node == y_node[0])
        ):
            continue
        features = np.sort(rng.choice(p, size=mtry, replace=False))
        split = _best_split(X, y, rows, features, params.min_leaf)
        if split is None:
            continue
        f, threshold = split
        go_left = X[rows, f] <= threshold
        left_rows, right_rows = rows[go_left], rows[~go_left]
        left = tree.add_node(float(y[left_rows].mean()), len(left_rows))
        right = tree.add_node(float(y[right_rows].mean()), len(right_rows))
        tree.feature[node] = f
        tree.threshold[node] = threshold
        tree.left[node] = left
        tree.right[node] = right
        stack.append((left, left_rows, depth + 1))
        stack.append((right, right_rows, depth + 1))
    return tree


def fit_forest(X: np.ndarray, y: np.ndarray, params: ForestParams = ForestParams(), seed: int = 0) -> Forest:
    """Bootstrap trees with the best variance-reduction split among ``mtry``
    uniformly drawn features per node; deterministic under the seed (tree t
    draws from a generator keyed by (seed, t))."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or len(X) != len(y):
        raise StatsError("X must be 2-D with one row per outcome")
    if params.n_trees < 1 or params.min_leaf < 1 or (params.max_depth is not None and params.max_depth < 1):
        raise StatsError("forest parameters must be positive")
    n, p = X.shape
    if n < 2 * params.min_leaf:
        raise StatsError(f"need at least {2 * params.min_leaf} rows")
    mtry = params.mtry if params.mtry is not None else max(1, math.ceil(p / 3))
    if not (1 <= mtry <= p):
        raise StatsError(f"mtry must be in 1..{p}")
    constant = bool(np.all(y == y[0]))
    trees = []
    for t in range(params.n_trees):
        rng = rng_for(seed, t)
        idx = rng.integers(0, n, size=n)
        trees.append(_grow_tree(X[idx], y[idx], params, mtry, rng))
    return Forest(trees=tuple(trees), n_features=p, params=params, seed=seed, constant_outcome=constant)


def permutation_importance(
    forest: Forest, X: np.ndarray, y: np.ndarray, seed: int = 0, repeats: int = 5
) -> np.ndarray:
    """Mean squared-error increase when one feature column is permuted,
    averaged over seeded repeats."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    base_mse = float(((forest.predict(X) - y) ** 2).mean())
    importances = np.zeros(forest.n_features)
    for f in range(forest.n_features):
        increases = []
        for r in range(repeats):
            rng = rng_for(seed, f, r)
            shuffled = X.copy()
            shuffled[:, f] = X[rng.permutation(len(X)), f]
            mse = float(((forest.predict(shuffled) - y) ** 2).mean())
            increases.append(mse - base_mse)
        importances[f] = math.fsum(increases) / repeats
    return importances
