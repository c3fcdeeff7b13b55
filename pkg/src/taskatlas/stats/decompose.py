"""Two-way variance decomposition and dominance-analysis Shapley R^2."""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Optional

import numpy as np

from .series import StatsError


@dataclass(frozen=True)
class VarianceShares:
    row_share: Optional[float]
    col_share: Optional[float]
    interaction_share: Optional[float]
    total_ss: float
    complete: bool
    degenerate: bool  # zero total variation: shares undefined


def variance_decomposition(matrix: np.ndarray) -> VarianceShares:
    """Additive two-way decomposition around the grand mean.

    Shares are component sums of squares over the total and sum to 1 on
    complete matrices. Missing cells (NaN) are excluded pairwise and flagged:
    the additive identity only holds for balanced designs.
    """
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] < 2 or m.shape[1] < 2:
        raise StatsError("need a matrix with at least 2 rows and 2 columns")
    mask = np.isfinite(m)
    complete = bool(mask.all())
    if not mask.any() or mask.sum(axis=1).min() == 0 or mask.sum(axis=0).min() == 0:
        raise StatsError("a row or column has no observed cells")

    values = np.where(mask, m, 0.0)
    grand = values[mask].mean() if complete else float(values.sum() / mask.sum())
    row_means = values.sum(axis=1) / mask.sum(axis=1)
    col_means = values.sum(axis=0) / mask.sum(axis=0)

    cells = m[mask]
    total_ss = float(((cells - grand) ** 2).sum())
    if total_ss == 0.0:
        return VarianceShares(None, None, None, 0.0, complete, degenerate=True)

    row_ss = float((mask.sum(axis=1) * (row_means - grand) ** 2).sum())
    col_ss = float((mask.sum(axis=0) * (col_means - grand) ** 2).sum())
    resid = m - row_means[:, None] - col_means[None, :] + grand
    inter_ss = float((resid[mask] ** 2).sum())
    return VarianceShares(
        row_share=row_ss / total_ss,
        col_share=col_ss / total_ss,
        interaction_share=inter_ss / total_ss,
        total_ss=total_ss,
        complete=complete,
        degenerate=False,
    )


@dataclass(frozen=True)
class DominanceResult:
    contributions: np.ndarray  # per-predictor incremental R^2, averaged over orderings
    full_r2: float
    rank_deficient_subsets: int  # subsets fit via least squares despite deficiency


def _subset_r2(X: np.ndarray, y: np.ndarray, sst: float, columns: tuple[int, ...]) -> tuple[float, bool]:
    design = np.column_stack([np.ones(len(y)), X[:, columns]]) if columns else np.ones((len(y), 1))
    deficient = np.linalg.matrix_rank(design) < design.shape[1]
    beta, *_ = np.linalg.lstsq(design, y, rcond=None)
    residuals = y - design @ beta
    return 1.0 - float((residuals**2).sum()) / sst, deficient


def shapley_r2(X: np.ndarray, y: np.ndarray) -> DominanceResult:
    """Exact dominance analysis: average each predictor's incremental R^2 over
    all orderings [Budescu 1993], computed from the 2^p subset R^2 values.

    Contributions sum to the full-model R^2. Rank-deficient subsets (e.g.
    duplicated predictors) are fit by least squares without regularization,
    which leaves fitted values, hence R^2, well defined; their count is
    reported as a warning.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    n, p = X.shape
    if p > 20:
        raise StatsError("exact enumeration supports at most 20 predictors")
    sst = float(((y - y.mean()) ** 2).sum())
    if sst == 0.0:
        raise StatsError("outcome has zero variance")

    r2: dict[tuple[int, ...], float] = {}
    deficient_count = 0
    for size in range(p + 1):
        for subset in combinations(range(p), size):
            value, deficient = _subset_r2(X, y, sst, subset)
            r2[subset] = value
            deficient_count += int(deficient)

    fact = [math.factorial(k) for k in range(p + 1)]
    weights = [fact[s] * fact[p - s - 1] / fact[p] for s in range(p)]
    contributions = np.zeros(p)
    for subset, base in r2.items():
        members = set(subset)
        w = None
        for i in range(p):
            if i in members:
                continue
            if w is None:
                w = weights[len(subset)]
            with_i = tuple(sorted(subset + (i,)))
            contributions[i] += w * (r2[with_i] - base)
    return DominanceResult(
        contributions=contributions,
        full_r2=r2[tuple(range(p))],
        rank_deficient_subsets=deficient_count,
    )
