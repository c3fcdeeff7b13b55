"""Exact Shapley attributions for tree ensembles under path-dependent
conditioning [Lundberg et al. 2018, 2020].

Absent features are integrated out over each tree's training coverage counts:
the conditional expectation of a leaf path weights child branches by their
coverage fraction. The polynomial algorithm tracks, along each root-to-leaf
path, the proportion of feature subsets of every size that flow down the path,
extending and unwinding the fraction bookkeeping per split.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .forest import Forest, LEAF, Tree
from .series import StatsError
from . import forest as _forest_mod


@dataclass(frozen=True)
class AttributionResult:
    """Per-feature attributions in outcome units; base + sum = prediction."""

    values: np.ndarray
    base_value: float

    @property
    def total(self) -> float:
        return self.base_value + float(self.values.sum())


class _Path:
    """Subset-fraction bookkeeping along one root-to-leaf traversal.

    Entry i records a unique feature on the path: ``d`` its index, ``z`` the
    fraction of one-paths flowing through when the feature is out of the
    subset, ``o`` the indicator-ish fraction when it is in, and ``w`` the
    permutation weight mass for subsets of size i.
    """

    __slots__ = ("d", "z", "o", "w")

    def __init__(self):
        self.d: list[int] = []
        self.z: list[float] = []
        self.o: list[float] = []
        self.w: list[float] = []

    def copy(self) -> "_Path":
        other = _Path.__new__(_Path)
        other.d = self.d.copy()
        other.z = self.z.copy()
        other.o = self.o.copy()
        other.w = self.w.copy()
        return other

    def extend(self, pd: int, pz: float, po: float) -> None:
        length = len(self.w)
        self.d.append(pd)
        self.z.append(pz)
        self.o.append(po)
        self.w.append(1.0 if length == 0 else 0.0)
        for i in range(length - 1, -1, -1):
            self.w[i + 1] += po * self.w[i] * (i + 1) / (length + 1)
            self.w[i] = pz * self.w[i] * (length - i) / (length + 1)

    def unwind(self, i: int) -> None:
        length = len(self.w) - 1
        one = self.o[i]
        zero = self.z[i]
        n = self.w[length]
        if one != 0.0:
            for j in range(length - 1, -1, -1):
                t = self.w[j]
                self.w[j] = n * (length + 1) / ((j + 1) * one)
                n = t - self.w[j] * zero * (length - j) / (length + 1)
        else:
            for j in range(length - 1, -1, -1):
                self.w[j] = self.w[j] * (length + 1) / (zero * (length - j))
        for j in range(i, length):
            self.d[j] = self.d[j + 1]
            self.z[j] = self.z[j + 1]
            self.o[j] = self.o[j + 1]
        self.d.pop()
        self.z.pop()
        self.o.pop()
        self.w.pop()

    def unwound_sum(self, i: int) -> float:
        scratch = self.copy()
        scratch.unwind(i)
        return math.fsum(scratch.w)


def _tree_shap_one(tree: Tree, x: np.ndarray, phi: np.ndarray) -> None:
    def recurse(node: int, path: _Path, pz: float, po: float, pd: int) -> None:
        path = path.copy()
        path.extend(pd, pz, po)
        if tree.feature[node] == LEAF:
            value = tree.value[node]
            for i in range(1, len(path.w)):
                phi[path.d[i]] += path.unwound_sum(i) * (path.o[i] - path.z[i]) * value
            return
        f = tree.feature[node]
        if x[f] <= tree.threshold[node]:
            hot, cold = tree.left[node], tree.right[node]
        else:
            hot, cold = tree.right[node], tree.left[node]
        inherited_z, inherited_o = 1.0, 1.0
        for i in range(1, len(path.d)):
            if path.d[i] == f:
                inherited_z, inherited_o = path.z[i], path.o[i]
                path.unwind(i)
                break
        parent_count = tree.count[node]
        recurse(hot, path, inherited_z * tree.count[hot] / parent_count, inherited_o, f)
        recurse(cold, path, inherited_z * tree.count[cold] / parent_count, 0.0, f)

    recurse(0, _Path(), 1.0, 1.0, -1)


def tree_shap(forest: Forest, x: np.ndarray) -> AttributionResult:
    """Exact per-feature Shapley values for one input row.

    The base value is the coverage-weighted training mean (the root value,
    averaged over trees); local accuracy base + sum(values) = prediction holds
    by construction. Attributions are averaged over trees, matching the
    ensemble's mean prediction.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or len(x) != forest.n_features:
        raise StatsError(f"input has {x.size} features, forest expects {forest.n_features}")
    totals = np.zeros(forest.n_features)
    base = 0.0
    for tree in forest.trees:
        phi_tree = np.zeros(forest.n_features)
        _tree_shap_one(tree, x, phi_tree)
        totals += phi_tree
        base += tree.value[0]
    n_trees = len(forest.trees)
    return AttributionResult(values=totals / n_trees, base_value=base / n_trees)


@dataclass(frozen=True)
class ShapRanking:
    mean_abs: np.ndarray  # per feature, outcome units x 100
    order: tuple[int, ...]  # feature indices, descending importance
    seeds: tuple[int, ...]


def mean_abs_shap(
    X: np.ndarray,
    y: np.ndarray,
    params: _forest_mod.ForestParams = _forest_mod.ForestParams(),
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4),
) -> ShapRanking:
    """Mean absolute attribution per feature over all rows and forest seeds,
    scaled x100 so magnitudes read as percentage points of the outcome."""
    if not seeds:
        raise StatsError("need at least one seed")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    per_seed = []
    for seed in seeds:
        forest = _forest_mod.fit_forest(X, y, params, seed=seed)
        magnitudes = np.stack([np.abs(tree_shap(forest, row).values) for row in X])
        per_seed.append(magnitudes.mean(axis=0))
    mean_abs = np.stack(per_seed).mean(axis=0) * 100.0
    order = tuple(sorted(range(X.shape[1]), key=lambda f: (-mean_abs[f], f)))
    return ShapRanking(mean_abs=mean_abs, order=order, seeds=tuple(seeds))
