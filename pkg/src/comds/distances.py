"""Pairwise distances of embeddings and percentile neighborhoods."""

from __future__ import annotations

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .core import ConsensusError, DistanceMatrix, NeighborhoodMask, as_distance_array


def pairwise_distances(view) -> DistanceMatrix:
    """Euclidean distances between the rows of ``view``."""
    x = np.asarray(view, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] < 2:
        raise ConsensusError(f"need an n x p matrix with n >= 2, got shape {x.shape}")
    bad = np.argwhere(~np.isfinite(x))
    if bad.size:
        raise ConsensusError(f"non-finite entry in row {bad[0][0]}")
    return DistanceMatrix(squareform(pdist(x)))


def percentile_threshold(d, pi: float) -> float:
    """Linear-interpolation ``pi``-quantile of the off-diagonal upper triangle.

    For ``pi == 1`` the next float above the largest distance is returned,
    so that every pair falls strictly below it.
    """
    if not 0 < pi <= 1:
        raise ConsensusError(f"percentile must lie in (0, 1], got {pi}")
    values = as_distance_array(d)
    n = values.shape[0]
    if n < 2:
        raise ConsensusError("need at least 2 points")
    upper = values[np.triu_indices(n, k=1)]
    if pi == 1:
        return float(np.nextafter(upper.max(), np.inf))
    return float(np.quantile(upper, pi, method="linear"))


def neighborhood_mask(d, pi: float) -> NeighborhoodMask:
    """Pairs whose distance lies strictly below the ``pi`` percentile."""
    values = as_distance_array(d)
    threshold = percentile_threshold(values, pi)
    mask = values < threshold
    np.fill_diagonal(mask, False)
    return NeighborhoodMask(mask, percentile=pi, threshold=threshold)


def knn_mask(d, k: int) -> NeighborhoodMask:
    """Symmetric k-nearest-neighbor graph: (i, j) kept if either is among the other's k nearest.

    Ties are broken toward the smaller index.  ``percentile`` records the
    realized fraction of pairs kept.
    """
    values = as_distance_array(d)
    n = values.shape[0]
    if not 1 <= k <= n - 1:
        raise ConsensusError(f"k must lie in [1, {n - 1}], got {k}")
    work = values.copy()
    np.fill_diagonal(work, np.inf)
    order = np.argsort(work, axis=1, kind="stable")[:, :k]
    mask = np.zeros((n, n), dtype=bool)
    mask[np.repeat(np.arange(n), k), order.ravel()] = True
    mask |= mask.T
    frac = np.count_nonzero(mask) / (n * (n - 1))
    return NeighborhoodMask(mask, percentile=float(frac), threshold=float("nan"), kind="knn")
