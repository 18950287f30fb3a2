"""Shared value types, stress evaluation and gauge fixing.

Every consensus fit is described by a configuration ``Z`` (n x p*) and one
nonnegative diagonal scaling per view.  The fitted distance between points
``i`` and ``j`` for view ``m`` is ``||w_m * (Z_i - Z_j)||``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.spatial.distance import pdist, squareform


class ConsensusError(ValueError):
    """Base class for invalid inputs to the consensus routines."""


class DimensionError(ConsensusError):
    """Array shapes are inconsistent across views or arguments."""


class DegenerateError(ConsensusError):
    """A configuration or distance matrix carries no usable spread."""


class NumericalError(RuntimeError):
    """The optimizer produced non-finite or collapsed output."""


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class EmbeddingSet:
    """M embeddings of the same n samples, possibly of different widths."""

    views: tuple
    sample_ids: tuple = ()
    view_labels: tuple = ()

    def __post_init__(self):
        views = tuple(_frozen(np.atleast_2d(v)) for v in self.views)
        if len(views) < 1:
            raise ConsensusError("an EmbeddingSet needs at least one view")
        n = views[0].shape[0]
        for m, v in enumerate(views):
            if v.ndim != 2:
                raise DimensionError(f"view {m} is not a matrix (ndim={v.ndim})")
            if v.shape[0] != n:
                raise DimensionError(
                    f"view {m} has {v.shape[0]} rows, view 0 has {n}"
                )
            bad = np.argwhere(~np.isfinite(v))
            if bad.size:
                i, j = bad[0]
                raise ConsensusError(f"view {m} has a non-finite entry at row {i}, column {j}")
        if n < 3:
            raise ConsensusError(f"need at least 3 samples, got {n}")
        ids = tuple(self.sample_ids) or tuple(str(i) for i in range(n))
        if len(ids) != n:
            raise DimensionError(f"{len(ids)} sample ids for {n} rows")
        labels = tuple(self.view_labels) or tuple(f"view{m}" for m in range(len(views)))
        if len(labels) != len(views):
            raise DimensionError(f"{len(labels)} view labels for {len(views)} views")
        object.__setattr__(self, "views", views)
        object.__setattr__(self, "sample_ids", ids)
        object.__setattr__(self, "view_labels", labels)

    @property
    def n(self) -> int:
        return self.views[0].shape[0]

    def __len__(self):
        return len(self.views)


@dataclass(frozen=True)
class DistanceMatrix:
    """Symmetric, zero-diagonal, nonnegative n x n matrix.

    Inputs that are symmetric only up to rounding (relative 1e-12) are
    accepted and symmetrized.
    """

    values: np.ndarray

    def __post_init__(self):
        d = np.array(self.values, dtype=float, copy=True)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise DimensionError(f"distance matrix must be square, got shape {d.shape}")
        if not np.all(np.isfinite(d)):
            i, j = np.argwhere(~np.isfinite(d))[0]
            raise ConsensusError(f"non-finite distance at ({i}, {j})")
        if np.any(d < 0):
            i, j = np.argwhere(d < 0)[0]
            raise ConsensusError(f"negative distance at ({i}, {j})")
        if np.any(np.diag(d) != 0):
            i = int(np.flatnonzero(np.diag(d))[0])
            raise ConsensusError(f"nonzero diagonal at ({i}, {i})")
        scale = max(float(d.max(initial=0.0)), 1e-300)
        if np.max(np.abs(d - d.T), initial=0.0) > 1e-12 * scale:
            i, j = np.unravel_index(np.argmax(np.abs(d - d.T)), d.shape)
            raise ConsensusError(f"distance matrix is not symmetric at ({i}, {j})")
        d = 0.5 * (d + d.T)
        d.setflags(write=False)
        object.__setattr__(self, "values", d)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def upper(self) -> np.ndarray:
        """Upper-triangle entries (i < j) in row-major order."""
        return self.values[np.triu_indices(self.n, k=1)]


@dataclass(frozen=True)
class NeighborhoodMask:
    """Boolean pair selector for one view.

    For ``kind == "percentile"`` the mask holds the pairs whose distance is
    strictly below ``threshold``.  For ``kind == "knn"`` it is the symmetric
    k-nearest-neighbor graph and ``threshold`` is NaN.
    """

    mask: np.ndarray
    percentile: float
    threshold: float
    kind: str = "percentile"

    def __post_init__(self):
        mk = _frozen(self.mask, dtype=bool)
        if mk.ndim != 2 or mk.shape[0] != mk.shape[1]:
            raise DimensionError(f"mask must be square, got shape {mk.shape}")
        if np.any(mk != mk.T):
            raise ConsensusError("neighborhood mask is not symmetric")
        if np.any(np.diag(mk)):
            raise ConsensusError("neighborhood mask has a true diagonal entry")
        if not 0 < self.percentile <= 1:
            raise ConsensusError(f"percentile must lie in (0, 1], got {self.percentile}")
        object.__setattr__(self, "mask", mk)

    @property
    def n(self) -> int:
        return self.mask.shape[0]

    @property
    def n_pairs(self) -> int:
        return int(np.count_nonzero(self.mask)) // 2


@dataclass(frozen=True)
class DiagonalScaling:
    weights: np.ndarray

    def __post_init__(self):
        w = _frozen(np.ravel(self.weights))
        if not np.all(np.isfinite(w)):
            raise ConsensusError("scaling weights must be finite")
        object.__setattr__(self, "weights", w)


@dataclass(frozen=True)
class SolverSettings:
    """Knobs of the majorization solver.

    ``init`` is ``"torgerson"`` (classical MDS of the averaged, scale-normalized
    distances) or ``"random"`` (standard normal, drawn from ``seed``).
    ``ridge`` is the proximal weight added to neighborhood graphs that fall
    apart into several components.  ``order_search`` controls the pairwise
    interchange search run after one-dimensional fits; ``None`` enables it
    for consensus (unmasked) fits with n <= 16.
    """

    ndim: int = 2
    eps: float = 1e-6
    itmax: int = 300
    init: str = "torgerson"
    als_inner_iters: int = 5
    seed: int = 0
    ridge: float = 1e-8
    order_search: Optional[bool] = None

    def __post_init__(self):
        if self.ndim < 1:
            raise ConsensusError(f"ndim must be >= 1, got {self.ndim}")
        if not self.eps > 0:
            raise ConsensusError(f"eps must be > 0, got {self.eps}")
        if self.itmax < 1:
            raise ConsensusError(f"itmax must be >= 1, got {self.itmax}")
        if self.init not in ("torgerson", "random"):
            raise ConsensusError(f"unknown init {self.init!r}")
        if self.als_inner_iters < 1:
            raise ConsensusError("als_inner_iters must be >= 1")
        if self.ridge < 0:
            raise ConsensusError("ridge must be nonnegative")


@dataclass(frozen=True)
class LocalParams:
    """Hyperparameters realized by a local (neighborhood) fit."""

    tau: Optional[float]
    percentile: float
    t: tuple
    masks: tuple = field(repr=False, default=())


@dataclass(frozen=True)
class ConsensusFit:
    configuration: np.ndarray
    scalings: tuple
    stress_trace: tuple
    iterations: int
    converged: bool
    method: str
    local: Optional[LocalParams] = None
    warnings: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "configuration", _frozen(self.configuration))
        object.__setattr__(self, "scalings", tuple(
            s if isinstance(s, DiagonalScaling) else DiagonalScaling(s) for s in self.scalings
        ))
        object.__setattr__(self, "stress_trace", tuple(float(s) for s in self.stress_trace))

    @property
    def stress(self) -> float:
        return self.stress_trace[-1]

    @property
    def weights(self) -> np.ndarray:
        """Scalings stacked into an (M, p*) array."""
        return np.vstack([s.weights for s in self.scalings])

    def view_configuration(self, m: int) -> np.ndarray:
        return self.configuration * self.scalings[m].weights


# -- helpers -----------------------------------------------------------------

def as_distance_array(d, name="distance matrix") -> np.ndarray:
    if isinstance(d, DistanceMatrix):
        return d.values
    return DistanceMatrix(d).values


def _weights(s) -> np.ndarray:
    return s.weights if isinstance(s, DiagonalScaling) else np.ravel(np.asarray(s, dtype=float))


def _mask_array(mk) -> np.ndarray:
    return mk.mask if isinstance(mk, NeighborhoodMask) else np.asarray(mk, dtype=bool)


def _check_inputs(config, scalings, distances):
    z = np.asarray(config, dtype=float)
    if z.ndim != 2:
        raise DimensionError(f"configuration must be n x p*, got shape {z.shape}")
    n, p = z.shape
    ws = [_weights(s) for s in scalings]
    ds = [as_distance_array(d) for d in distances]
    if len(ws) != len(ds):
        raise DimensionError(f"{len(ws)} scalings for {len(ds)} distance matrices")
    for m, (w, d) in enumerate(zip(ws, ds)):
        if w.shape != (p,):
            raise DimensionError(f"view {m}: scaling has length {w.size}, configuration has {p} columns")
        if d.shape != (n, n):
            raise DimensionError(f"view {m}: distance matrix is {d.shape[0]} x {d.shape[1]}, configuration has {n} rows")
    return z, ws, ds


def fitted_distances(config, weights) -> np.ndarray:
    """Full n x n matrix of ``||w * (Z_i - Z_j)||``."""
    x = np.asarray(config, dtype=float) * np.asarray(weights, dtype=float)
    return squareform(pdist(x))


def _pair_terms(d, fd, mask=None, t=0.0):
    """Per-pair contributions as an n x n matrix (both triangles filled)."""
    resid = (d - fd) ** 2
    if mask is None:
        terms = resid
    else:
        terms = np.where(mask, resid, -t * fd)
    np.fill_diagonal(terms, 0.0)
    return terms


# -- objectives ---------------------------------------------------------------

def comds_stress(config, scalings, distances) -> float:
    """Consensus raw stress summed over views and unordered pairs."""
    z, ws, ds = _check_inputs(config, scalings, distances)
    iu = np.triu_indices(z.shape[0], k=1)
    total = 0.0
    for w, d in zip(ws, ds):
        fd = fitted_distances(z, w)
        total += float(np.sum((d[iu] - fd[iu]) ** 2))
    return total


def locomds_stress(config, scalings, distances, masks, t) -> float:
    """Local stress over masked pairs minus ``t_m`` times the unmasked fitted distances.

    Pairs are counted once.  The value may be negative.
    """
    z, ws, ds = _check_inputs(config, scalings, distances)
    mks = [_mask_array(mk) for mk in masks]
    t = np.ravel(np.asarray(t, dtype=float))
    if len(mks) != len(ds) or t.size != len(ds):
        raise DimensionError(f"{len(mks)} masks and {t.size} t values for {len(ds)} views")
    n = z.shape[0]
    iu = np.triu_indices(n, k=1)
    total = 0.0
    for m, (w, d, mk) in enumerate(zip(ws, ds, mks)):
        if mk.shape != (n, n):
            raise DimensionError(f"view {m}: mask is {mk.shape[0]} x {mk.shape[1]}, expected {n} x {n}")
        fd = fitted_distances(z, w)
        sel = mk[iu]
        local = np.sum((d[iu][sel] - fd[iu][sel]) ** 2)
        repulsion = np.sum(fd[iu][~sel])
        total += float(local - t[m] * repulsion)
    return total


def objective(config, scalings, distances, masks=None, t=None) -> float:
    if masks is None:
        return comds_stress(config, scalings, distances)
    return locomds_stress(config, scalings, distances, masks, t)


def _fit_terms(fit: ConsensusFit, distances):
    z = fit.configuration
    ws = [s.weights for s in fit.scalings]
    _, _, ds = _check_inputs(z, ws, distances)
    out = []
    for m, (w, d) in enumerate(zip(ws, ds)):
        fd = fitted_distances(z, w)
        if fit.local is None:
            out.append(_pair_terms(d, fd))
        else:
            out.append(_pair_terms(d, fd, _mask_array(fit.local.masks[m]), fit.local.t[m]))
    return out


def stress_per_point(fit: ConsensusFit, distances) -> np.ndarray:
    """Each point's share of the objective, summed over its partners and views.

    Every pair is charged to both endpoints, so the vector sums to twice the
    objective.  For local fits the repulsion of a point's non-neighbor pairs
    is included.
    """
    return np.sum([terms.sum(axis=1) for terms in _fit_terms(fit, distances)], axis=0)


def stress_per_view(fit: ConsensusFit, distances) -> np.ndarray:
    return np.array([0.5 * terms.sum() for terms in _fit_terms(fit, distances)])


def gauge_fix(config, scalings):
    """Center and unit-RMS scale the configuration columns.

    Each column's scale is moved into every view's weight for that column
    and weights are made nonnegative; fitted distances do not change.

    Returns
    -------
    configuration : (n, p*) array
    scalings : list of DiagonalScaling
    """
    z = np.array(config, dtype=float)
    ws = [np.abs(_weights(s)) for s in scalings]
    z -= z.mean(axis=0)
    rms = np.sqrt(np.mean(z ** 2, axis=0))
    tiny = 1e-14 * max(float(np.max(np.abs(config), initial=0.0)), 1e-300)
    for a, r in enumerate(rms):
        if not r > tiny:
            raise DegenerateError(f"configuration column {a} has zero variance")
    z /= rms
    return z, [DiagonalScaling(w * rms) for w in ws]
