"""Seeded generators for the Gaussian-mixture and Swiss-roll benchmarks.

Randomness comes from numpy's PCG64 bit generator.  The seed is expanded
with ``SeedSequence`` and spawned into independent child streams, so every
cluster (or every coordinate of the roll) draws from its own stream and the
output does not depend on draw order elsewhere.
"""

from __future__ import annotations

import numpy as np

CLUSTER_SIZES = (150, 200, 250)
CLUSTER_MEANS = np.array([[-3.0, -2.0, 0.0], [2.0, -4.0, 1.0], [0.0, 6.0, 6.0]])
BASE_COV = np.array([[1.0, 0.3, 0.2], [0.3, 1.0, 0.4], [0.2, 0.4, 1.0]])
COV_NOISE = 0.5


def _streams(seed, count):
    return [np.random.Generator(np.random.PCG64(s)) for s in np.random.SeedSequence(seed).spawn(count)]


def cluster_covariances(seed) -> list:
    """The per-cluster covariances ``Sigma + sigma^2 Z Z^T`` drawn for ``seed``."""
    covs = []
    for rng in _streams(seed, len(CLUSTER_SIZES)):
        zj = rng.standard_normal((3, 3))
        covs.append(BASE_COV + COV_NOISE ** 2 * zj @ zj.T)
    return covs


def gen_gaussian_mixture(seed=0):
    """600 x 3 draws from three correlated Gaussians.

    Returns
    -------
    data : (600, 3) array, clusters stacked in order
    labels : (600,) int array with values 1, 2, 3
    """
    data, labels = [], []
    # one stream per cluster: the covariance factor first, then the samples
    for j, rng in enumerate(_streams(seed, len(CLUSTER_SIZES))):
        zj = rng.standard_normal((3, 3))
        cov = BASE_COV + COV_NOISE ** 2 * zj @ zj.T
        chol = np.linalg.cholesky(cov)
        e = rng.standard_normal((CLUSTER_SIZES[j], 3))
        data.append(CLUSTER_MEANS[j] + e @ chol.T)
        labels.append(np.full(CLUSTER_SIZES[j], j + 1))
    return np.vstack(data), np.concatenate(labels)


def gen_swiss_roll(seed=0, n: int = 1000, noise: float = 0.1, standardize: bool = True):
    """Swiss roll with ``t ~ U(pi, 3.4 pi)``, ``u ~ U(-1, 1)`` and Gaussian noise.

    ``x = t cos t``, ``y = t sin t``, ``z = u``, each plus N(0, noise^2);
    columns are then standardized (population variance).  ``noise=0`` and
    ``standardize=False`` give the exact parametrization.

    Returns
    -------
    data : (n, 3) array
    intrinsic : (n, 2) array of (t, u)
    """
    rt, ru, rn = _streams(seed, 3)
    t = rt.uniform(np.pi, 3.4 * np.pi, n)
    u = ru.uniform(-1.0, 1.0, n)
    eps = noise * rn.standard_normal((n, 3)) if noise > 0 else np.zeros((n, 3))
    data = np.column_stack([t * np.cos(t), t * np.sin(t), u]) + eps
    if standardize:
        data = (data - data.mean(axis=0)) / data.std(axis=0)
    return data, np.column_stack([t, u])
