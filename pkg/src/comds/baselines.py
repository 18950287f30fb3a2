"""Input embedders that need nothing beyond numpy: PCA and classical MDS."""

from __future__ import annotations

import numpy as np

from .core import ConsensusError, DegenerateError, as_distance_array


def pca_embed(data, ndim: int = 2) -> np.ndarray:
    """Project centered data onto its top ``ndim`` right singular vectors.

    Each direction is signed so that its largest-magnitude loading is
    positive.
    """
    x = np.asarray(data, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ConsensusError(f"need an n x p matrix with n >= 2, got shape {x.shape}")
    n, p = x.shape
    if not 1 <= ndim <= min(n, p):
        raise ConsensusError(f"ndim must lie in [1, {min(n, p)}], got {ndim}")
    xc = x - x.mean(axis=0)
    _, _, vt = np.linalg.svd(xc, full_matrices=False)
    vt = vt[:ndim]
    flip = np.sign(vt[np.arange(ndim), np.argmax(np.abs(vt), axis=1)])
    flip[flip == 0] = 1.0
    return xc @ (vt * flip[:, None]).T


def double_center(d) -> np.ndarray:
    """``-1/2 J D^2 J`` with ``J`` the centering matrix."""
    d2 = np.asarray(d, dtype=float) ** 2
    b = d2 - d2.mean(axis=0) - d2.mean(axis=1)[:, None] + d2.mean()
    return -0.5 * b


def torgerson_mds(d, ndim: int = 2, return_eigenvalues: bool = False):
    """Classical (Torgerson) scaling.

    Parameters
    ----------
    d : DistanceMatrix or (n, n) array
    ndim : int
        Number of output dimensions, at most n - 1.
    return_eigenvalues : bool
        Also return the full spectrum (descending) of the double-centered
        matrix.  Negative entries flag a non-Euclidean input.

    Returns
    -------
    coords : (n, ndim) array
    eigenvalues : (n,) array, only if ``return_eigenvalues``
    """
    values = as_distance_array(d)
    n = values.shape[0]
    if not 1 <= ndim <= n - 1:
        raise ConsensusError(f"ndim must lie in [1, {n - 1}], got {ndim}")
    b = double_center(values)
    evals, evecs = np.linalg.eigh(0.5 * (b + b.T))
    order = np.argsort(evals)[::-1]
    evals, evecs = evals[order], evecs[:, order]
    top = evals[:ndim]
    if np.any(top < 0):
        raise DegenerateError(
            f"fewer than {ndim} nonnegative eigenvalues; spectrum: {np.array2string(evals, precision=4)}"
        )
    coords = evecs[:, :ndim] * np.sqrt(top)
    if return_eigenvalues:
        return coords, evals
    return coords
