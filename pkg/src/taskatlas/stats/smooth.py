"""Locally weighted regression (Cleveland-style LOESS, degree 1, tricube
weights) and percentile bootstrap bands over unit resamples."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .series import StatsError
from .._rng import rng_for


@dataclass(frozen=True)
class LoessFit:
    grid: np.ndarray
    values: np.ndarray
    fallback_points: tuple[int, ...]  # grid indices where the local fit degenerated to a mean


def loess(
    x: Sequence[float],
    y: Sequence[float],
    span: float = 0.75,
    degree: int = 1,
    grid: Optional[Sequence[float]] = None,
) -> LoessFit:
    """Local degree-1 fits over the span-nearest neighbors with tricube weights.

    At each grid point the span-nearest fraction of the data is weighted by
    (1 - u^3)^3 on distance scaled by the window radius, then a weighted line
    is fit and evaluated there. Degenerate local designs (zero window radius or
    no weight spread in x) fall back to the local weighted mean and are flagged.
    """
    if degree != 1:
        raise StatsError("only local degree 1 is supported")
    if not (0.0 < span <= 1.0):
        raise StatsError(f"span must be in (0, 1], got {span}")
    xv = np.asarray(x, dtype=np.float64)
    yv = np.asarray(y, dtype=np.float64)
    if xv.shape != yv.shape or xv.ndim != 1:
        raise StatsError("x and y must be equal-length vectors")
    n = len(xv)
    if n < degree + 2:
        raise StatsError(f"need at least {degree + 2} points")
    q = max(degree + 2, int(math.ceil(span * n)))
    q = min(q, n)
    grid_arr = np.unique(xv) if grid is None else np.asarray(grid, dtype=np.float64)

    fitted = np.empty(len(grid_arr))
    fallbacks = []
    for gi, x0 in enumerate(grid_arr):
        dist = np.abs(xv - x0)
        radius = np.sort(dist)[q - 1]
        if radius == 0.0:
            # window collapsed onto a single x location
            weights = (dist == 0.0).astype(np.float64)
        else:
            u = np.clip(dist / radius, 0.0, 1.0)
            weights = (1.0 - u**3) ** 3
        wsum = weights.sum()
        xw = float(weights @ xv) / wsum
        yw = float(weights @ yv) / wsum
        sxx = float(weights @ (xv - xw) ** 2)
        if sxx <= 0.0:
            fitted[gi] = yw
            fallbacks.append(gi)
            continue
        slope = float(weights @ ((xv - xw) * (yv - yw))) / sxx
        fitted[gi] = yw + slope * (x0 - xw)
    return LoessFit(grid=grid_arr, values=fitted, fallback_points=tuple(fallbacks))


@dataclass(frozen=True)
class Band:
    lower: np.ndarray
    upper: np.ndarray
    level: float
    n_resamples: int
    seed: int


def bootstrap_band(
    fit: Callable[[Sequence], np.ndarray],
    units: Sequence,
    resamples: int = 200,
    level: float = 0.95,
    seed: int = 0,
) -> Band:
    """Percentile interval per grid point from unit resamples with replacement.

    ``fit`` maps a unit multiset to fitted values on a fixed grid. Replicate r
    draws its resample from a generator keyed by (seed, r), so bands are
    reproducible and independent of scheduling.
    """
    if resamples < 2:
        raise StatsError("need at least 2 resamples")
    units = list(units)
    replicates = []
    for r in range(resamples):
        rng = rng_for(seed, r)
        idx = rng.integers(0, len(units), size=len(units))
        replicates.append(np.asarray(fit([units[i] for i in idx]), dtype=np.float64))
    stacked = np.stack(replicates)
    alpha = (1.0 - level) / 2.0
    lower = np.percentile(stacked, 100.0 * alpha, axis=0)
    upper = np.percentile(stacked, 100.0 * (1.0 - alpha), axis=0)
    return Band(lower=lower, upper=upper, level=level, n_resamples=resamples, seed=seed)
