"""Local consensus fits and their (tau, percentile) grid search."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import ConsensusError, ConsensusFit, SolverSettings, _mask_array, as_distance_array
from .distances import neighborhood_mask
from .metrics import lcmc_from_orders, neighbor_order, reference_distances
from .solver import fit

DEFAULT_TAUS = (10, 5, 1, 0.5, 0.1, 0.05, 0.01, 0.005, 0.001)
DEFAULT_PERCENTILES = tuple(round(0.1 * i, 1) for i in range(1, 10))


def t_from_tau(tau: float, pi: float, d, mask) -> float:
    """Repulsion weight ``pi / (1 - pi) * median(masked distances) * tau``."""
    if not tau > 0:
        raise ConsensusError(f"tau must be > 0, got {tau}")
    if not 0 < pi < 1:
        raise ConsensusError(f"percentile must lie in (0, 1) for the repulsion weight, got {pi}")
    values = as_distance_array(d)
    mk = _mask_array(mask)
    upper = np.triu(mk, k=1)
    if not upper.any():
        raise ConsensusError("neighborhood mask is empty")
    return pi / (1 - pi) * float(np.median(values[upper])) * tau


def locomds(distances, tau: float, percentile: float, settings: Optional[SolverSettings] = None,
            **kwargs) -> ConsensusFit:
    """Local consensus fit with percentile neighborhoods and normalized repulsion."""
    ds = [as_distance_array(d) for d in distances]
    masks = [neighborhood_mask(d, percentile) for d in ds]
    t = [t_from_tau(tau, percentile, d, mk) for d, mk in zip(ds, masks)]
    return fit(ds, settings, masks=masks, t=t, tau=tau, **kwargs)


def adjusted_lcmc(original, embedding, k: int) -> float:
    """Neighborhood overlap at k minus the chance level ``k / (n - 1)``."""
    dx = reference_distances(original)
    dz = reference_distances(embedding)
    n = dx.shape[0]
    if dz.shape[0] != n:
        raise ConsensusError(f"reference has {n} points, embedding has {dz.shape[0]}")
    if not 1 <= k <= n - 1:
        raise ConsensusError(f"k must lie in [1, {n - 1}], got {k}")
    return float(lcmc_from_orders(neighbor_order(dx), neighbor_order(dz), [k])[0]) - k / (n - 1)


def default_k_grid(n: int) -> list:
    """k = 1, 2, 5 plus seven log-spaced values from 10 to ``floor(0.7 n)``.

    Below n = 16 the grid is ``1 .. min(5, n - 1)``.
    """
    if n < 16:
        return list(range(1, min(5, n - 1) + 1))
    top = math.floor(0.7 * n)
    logs = np.rint(np.geomspace(10, top, 7)).astype(int)
    return sorted({1, 2, 5, *logs.tolist()})


@dataclass(frozen=True)
class TuningGrid:
    taus: tuple = DEFAULT_TAUS
    percentiles: tuple = DEFAULT_PERCENTILES
    k_values: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "taus", tuple(float(x) for x in self.taus))
        object.__setattr__(self, "percentiles", tuple(float(x) for x in self.percentiles))
        object.__setattr__(self, "k_values", tuple(int(k) for k in self.k_values))
        if not self.taus or not self.percentiles:
            raise ConsensusError("tau and percentile lists must be non-empty")
        if any(not x > 0 for x in self.taus):
            raise ConsensusError("taus must be positive")
        if any(not 0 < x < 1 for x in self.percentiles):
            raise ConsensusError("percentiles must lie in (0, 1)")
        ks = self.k_values
        if ks and any(b <= a for a, b in zip(ks, ks[1:])):
            raise ConsensusError("k_values must be strictly increasing")

    def with_k(self, n: int) -> "TuningGrid":
        ks = self.k_values or tuple(default_k_grid(n))
        if ks[0] < 1 or ks[-1] > n - 1:
            raise ConsensusError(f"k_values must lie in [1, {n - 1}]")
        return TuningGrid(self.taus, self.percentiles, ks)


@dataclass(frozen=True)
class TuningResult:
    """Grid-search outcome.

    ``scores[i, j, l]`` is the adjusted LCMC of the fit at ``taus[i]``,
    ``percentiles[j]`` evaluated at ``k_values[l]``; ``votes[i, j]`` counts
    the k at which that cell scored highest.
    """

    grid: TuningGrid
    scores: np.ndarray
    votes: np.ndarray
    selected: tuple
    k_used: tuple
    failures: dict = field(default_factory=dict)

    @property
    def selected_index(self) -> tuple:
        return self.grid.taus.index(self.selected[0]), self.grid.percentiles.index(self.selected[1])


def _cell_rank(grid):
    # tie-break order: smaller percentile first, then smaller tau
    cells = [(i, j) for i in range(len(grid.taus)) for j in range(len(grid.percentiles))]
    return sorted(cells, key=lambda c: (grid.percentiles[c[1]], grid.taus[c[0]]))


def _truncate(scores, ks):
    best = scores.reshape(-1, len(ks)).max(axis=0)
    for l in range(1, len(ks)):
        if best[l] < best[l - 1]:
            return l
    return len(ks)


def select(scores, grid: TuningGrid, truncate: bool = False):
    """Plurality vote over k of the per-k best cell.

    Returns ``(votes, (tau, percentile), k_used)``.
    """
    ks = grid.k_values
    n_k = _truncate(scores, ks) if truncate else len(ks)
    order = _cell_rank(grid)
    votes = np.zeros(scores.shape[:2], dtype=int)
    for l in range(n_k):
        col = scores[:, :, l]
        best = max(col[c] for c in order)
        winner = next(c for c in order if col[c] == best)
        votes[winner] += 1
    top = votes.max()
    i, j = next(c for c in order if votes[c] == top)
    return votes, (grid.taus[i], grid.percentiles[j]), ks[:n_k]


def _num_threads():
    try:
        return max(1, int(os.environ.get("COMDS_NUM_THREADS", "1")))
    except ValueError:
        return 1


def tune(distances, original, grid: Optional[TuningGrid] = None, settings: Optional[SolverSettings] = None,
         truncate: bool = False, n_jobs: Optional[int] = None, return_fits: bool = False):
    """Grid search of (tau, percentile) by adjusted LCMC against ``original``.

    Every cell is fit independently; a cell whose fit raises is scored
    ``-inf`` and its error recorded in ``failures``.  ``n_jobs`` defaults to
    the ``COMDS_NUM_THREADS`` environment variable.

    Returns
    -------
    TuningResult, or ``(TuningResult, fits)`` with ``return_fits`` where
    ``fits[(tau, percentile)]`` is the ConsensusFit of each cell.
    """
    ds = [as_distance_array(d) for d in distances]
    n = ds[0].shape[0]
    grid = (grid or TuningGrid()).with_k(n)
    settings = settings or SolverSettings()
    order_x = neighbor_order(reference_distances(original))
    if order_x.shape[0] != n:
        raise ConsensusError(f"reference has {order_x.shape[0]} points, distances have {n}")
    cells = [(i, j) for i in range(len(grid.taus)) for j in range(len(grid.percentiles))]

    def run(cell):
        i, j = cell
        try:
            f = locomds(ds, grid.taus[i], grid.percentiles[j], settings)
            oz = neighbor_order(reference_distances(f.configuration))
            return cell, f, lcmc_from_orders(order_x, oz, grid.k_values), None
        except (ConsensusError, RuntimeError, np.linalg.LinAlgError) as exc:
            return cell, None, None, f"{type(exc).__name__}: {exc}"

    workers = n_jobs or _num_threads()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, cells))
    else:
        results = [run(c) for c in cells]

    ks = np.asarray(grid.k_values, dtype=float)
    scores = np.full((len(grid.taus), len(grid.percentiles), len(ks)), -np.inf)
    failures, fits = {}, {}
    for (i, j), f, lcmc, err in results:
        key = (grid.taus[i], grid.percentiles[j])
        if err is not None:
            failures[key] = err
            continue
        scores[i, j] = lcmc - ks / (n - 1)
        fits[key] = f
    votes, selected, k_used = select(scores, grid, truncate)
    result = TuningResult(grid=grid, scores=scores, votes=votes, selected=selected,
                          k_used=tuple(k_used), failures=failures)
    if return_fits:
        return result, fits
    return result
