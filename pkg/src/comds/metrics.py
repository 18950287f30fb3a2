"""Structure-preservation scores of an embedding against a reference space.

``original`` arguments accept either a data matrix (rows = samples) or a
``DistanceMatrix``.  Plain square arrays are read as data, not distances.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.spatial.distance import pdist, squareform
from scipy.stats import rankdata

from .core import ConsensusError, DegenerateError, DimensionError, DistanceMatrix


def reference_distances(x) -> np.ndarray:
    if isinstance(x, DistanceMatrix):
        return x.values
    a = np.asarray(x, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    return squareform(pdist(a))


def _pair(original, embedding):
    dx = reference_distances(original)
    dz = reference_distances(embedding)
    if dx.shape != dz.shape:
        raise DimensionError(f"reference has {dx.shape[0]} points, embedding has {dz.shape[0]}")
    return dx, dz


def neighbor_order(d) -> np.ndarray:
    """Row-wise neighbor ranking excluding self, ties to the smaller index."""
    work = np.array(d, dtype=float)
    np.fill_diagonal(work, np.inf)
    return np.argsort(work, axis=1, kind="stable")[:, :-1]


def _overlap_fraction(order_x, order_z, k) -> float:
    n = order_x.shape[0]
    rows = np.repeat(np.arange(n), k)
    in_x = np.zeros((n, n), dtype=bool)
    in_x[rows, order_x[:, :k].ravel()] = True
    hits = in_x[rows, order_z[:, :k].ravel()].reshape(n, k).sum(axis=1)
    return float(hits.sum()) / (k * n)


def lcmc_from_orders(order_x, order_z, k_values) -> np.ndarray:
    n = order_x.shape[0]
    for k in k_values:
        if not 1 <= k <= n - 1:
            raise ConsensusError(f"k must lie in [1, {n - 1}], got {k}")
    return np.array([_overlap_fraction(order_x, order_z, int(k)) for k in k_values])


def lcmc_curve(original, embedding, k_values=range(2, 21, 3)) -> list:
    """Unadjusted neighborhood overlap at each k, as ``[(k, score), ...]``."""
    dx, dz = _pair(original, embedding)
    ks = [int(k) for k in k_values]
    scores = lcmc_from_orders(neighbor_order(dx), neighbor_order(dz), ks)
    return list(zip(ks, scores.tolist()))


def local_lcmc(original, embedding, k_values=range(2, 21, 3)) -> float:
    """Mean of the LCMC curve over small k."""
    return float(np.mean([s for _, s in lcmc_curve(original, embedding, k_values)]))


def _sign(x):
    return np.sign(x).astype(np.int8)


def random_triplet_accuracy(original, embedding, triplets_per_anchor: int = 20, seed=0,
                            exhaustive: bool = False, full_ordering: bool = False) -> float:
    """Fraction of triplets whose distance ordering survives the embedding.

    For anchor ``i`` and partners ``j != k`` the triplet is preserved when
    ``d(i, j) - d(i, k)`` has the same sign in both spaces.  With
    ``full_ordering`` all three pairwise distances of the triplet must keep
    their ranking.  ``exhaustive`` enumerates every triplet (n <= 30).
    """
    dx, dz = _pair(original, embedding)
    n = dx.shape[0]
    if n < 3:
        raise ConsensusError("need at least 3 points")
    if exhaustive:
        if n > 30:
            raise ConsensusError(f"exhaustive mode is limited to n <= 30, got {n}")
        trip = np.array([(i, j, k) for i in range(n) for j, k in itertools.combinations(range(n), 2)
                         if i != j and i != k])
        a, b, c = trip.T
    else:
        if triplets_per_anchor < 1:
            raise ConsensusError("triplets_per_anchor must be >= 1")
        rng = np.random.default_rng(seed)
        a = np.repeat(np.arange(n), triplets_per_anchor)
        # draw an ordered pair from the n - 1 non-anchor slots, then skip over the anchor
        b = rng.integers(0, n - 1, size=a.size)
        c = rng.integers(0, n - 2, size=a.size)
        c = c + (c >= b)
        b = b + (b >= a)
        c = c + (c >= a)

    def same(dxa, dxb, dza, dzb):
        return _sign(dxa - dxb) == _sign(dza - dzb)

    ok = same(dx[a, b], dx[a, c], dz[a, b], dz[a, c])
    if full_ordering:
        ok &= same(dx[a, b], dx[b, c], dz[a, b], dz[b, c])
        ok &= same(dx[a, c], dx[b, c], dz[a, c], dz[b, c])
    return float(np.mean(ok))


def _pearson(x, y) -> float:
    xc = x - x.mean()
    yc = y - y.mean()
    sxx = float(xc @ xc)
    syy = float(yc @ yc)
    if sxx == 0 or syy == 0:
        raise DegenerateError("zero variance in one of the compared vectors")
    # sqrt(fl(a * a)) == a exactly, so identical inputs give r == 1.0
    r = float(xc @ yc) / math.sqrt(sxx * syy)
    return min(1.0, max(-1.0, r))


def spearman_distance_correlation(original, embedding) -> float:
    """Spearman correlation of the upper-triangle distances (average ranks)."""
    dx, dz = _pair(original, embedding)
    n = dx.shape[0]
    if n < 3:
        raise ConsensusError("need at least 3 points")
    iu = np.triu_indices(n, k=1)
    try:
        return _pearson(rankdata(dx[iu]), rankdata(dz[iu]))
    except DegenerateError:
        raise DegenerateError("all pairwise distances are equal in one space") from None


def mantel_statistic(d1, d2, permutations: int = 0, seed=0):
    """Pearson correlation of two distance matrices' upper triangles.

    With ``permutations > 0`` a one-sided p-value is returned: the share of
    simultaneous row/column relabelings of ``d2`` whose correlation is at
    least the observed one.  When ``permutations >= n!`` every relabeling is
    enumerated exactly once.

    Returns
    -------
    r : float
    p_value : float or None
    """
    a = d1.values if isinstance(d1, DistanceMatrix) else DistanceMatrix(d1).values
    b = d2.values if isinstance(d2, DistanceMatrix) else DistanceMatrix(d2).values
    if a.shape != b.shape:
        raise DimensionError(f"distance matrices are {a.shape[0]} and {b.shape[0]} points")
    n = a.shape[0]
    iu = np.triu_indices(n, k=1)
    x = a[iu]
    r = _pearson(x, b[iu])
    if permutations <= 0:
        return r, None
    # correlations differing only by rounding count as ties
    tol = 1e-12
    if permutations >= math.factorial(n):
        perms = itertools.permutations(range(n))
    else:
        rng = np.random.default_rng(seed)
        perms = (rng.permutation(n) for _ in range(permutations))
    hits = total = 0
    for perm in perms:
        perm = np.asarray(perm)
        rp = _pearson(x, b[np.ix_(perm, perm)][iu])
        hits += rp >= r - tol
        total += 1
    return r, hits / total
