"""One-dimensional accumulated local effects over quantile bins [Apley & Zhu 2020]."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .series import StatsError


@dataclass(frozen=True)
class AleResult:
    grid: np.ndarray  # bin edges, len K+1
    values: np.ndarray  # centered ALE at the edges, len K+1
    direction: int  # sign of ALE(last edge) - ALE(first edge)
    bin_counts: np.ndarray
    merged_bins: bool  # duplicate-quantile or empty bins were merged


def ale_1d(
    predict: Callable[[np.ndarray], np.ndarray],
    X: np.ndarray,
    feature: int,
    n_bins: int = 10,
) -> AleResult:
    """Accumulated local effect of one feature in a fitted model.

    Per quantile bin, the local effect is the mean prediction difference when
    the feature is pinned to the bin's upper versus lower edge over the rows in
    the bin; effects accumulate across bins and are centered so the
    count-weighted mean over the data is zero.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise StatsError("X must be 2-D")
    if not (0 <= feature < X.shape[1]):
        raise StatsError(f"feature {feature} out of range")
    xf = X[:, feature]
    if len(np.unique(xf)) < 2:
        raise StatsError("feature needs at least 2 distinct values")

    quantiles = np.quantile(xf, np.linspace(0.0, 1.0, n_bins + 1))
    edges = np.unique(quantiles)
    merged = len(edges) < n_bins + 1

    def assign(edges: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(edges, xf, side="left") - 1
        return np.clip(idx, 0, len(edges) - 2)

    idx = assign(edges)
    counts = np.bincount(idx, minlength=len(edges) - 1)
    while np.any(counts == 0):
        # merge each empty bin into its lower neighbor by dropping its lower edge
        empty = int(np.argmin(counts > 0))
        drop = empty if empty > 0 else 1
        edges = np.delete(edges, drop)
        merged = True
        idx = assign(edges)
        counts = np.bincount(idx, minlength=len(edges) - 1)

    n_k = len(edges) - 1
    effects = np.zeros(n_k)
    for k in range(n_k):
        rows = X[idx == k]
        upper = rows.copy()
        upper[:, feature] = edges[k + 1]
        lower = rows.copy()
        lower[:, feature] = edges[k]
        effects[k] = float(np.mean(np.asarray(predict(upper)) - np.asarray(predict(lower))))

    accumulated = np.concatenate([[0.0], np.cumsum(effects)])
    midpoints = (accumulated[:-1] + accumulated[1:]) / 2.0
    center = float((counts * midpoints).sum() / counts.sum())
    values = accumulated - center
    gap = values[-1] - values[0]
    direction = 0 if gap == 0.0 else (1 if gap > 0 else -1)
    return AleResult(grid=edges, values=values, direction=direction, bin_counts=counts, merged_bins=merged)
