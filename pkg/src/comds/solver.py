"""Majorization-minimization solver for consensus (and local consensus) MDS.

Each outer iteration stacks the view configurations ``Z W_m``, applies a
Guttman transform per view and then projects the M unconstrained targets
back onto the constraint set ``{Z W_m : W_m diagonal}`` by alternating
least squares in the metric of each view's ``V`` block.

Only the pairs inside a view carry weight, so ``V`` and ``B`` are block
diagonal with one n x n block per view.
"""

from __future__ import annotations

import warnings
from typing import Optional, Sequence

import numpy as np
from scipy.sparse.csgraph import connected_components
from scipy.spatial.distance import pdist, squareform

from .baselines import torgerson_mds
from .core import (
    ConsensusError,
    ConsensusFit,
    DegenerateError,
    DimensionError,
    DistanceMatrix,
    EmbeddingSet,
    LocalParams,
    NeighborhoodMask,
    NumericalError,
    SolverSettings,
    _mask_array,
    as_distance_array,
    gauge_fix,
)
from .distances import pairwise_distances


class DegeneracyWarning(RuntimeWarning):
    """A column or view dropped out of the alternating least-squares update."""


# -- majorizer matrices ------------------------------------------------------

def laplacian(weights) -> np.ndarray:
    """Graph Laplacian ``diag(W 1) - W`` of a symmetric weight matrix."""
    a = np.asarray(weights, dtype=float).copy()
    np.fill_diagonal(a, 0.0)
    v = -a
    np.fill_diagonal(v, a.sum(axis=1))
    return v


def build_v(n: int, n_views: int = 1, masks=None) -> list:
    """The per-view ``V`` blocks.

    Without masks every block is ``n I - 1 1^T``; with masks, block m is the
    Laplacian of the neighborhood graph of view m.
    """
    if masks is None:
        block = n * np.eye(n) - np.ones((n, n))
        return [block.copy() for _ in range(n_views)]
    return [laplacian(_mask_array(mk)) for mk in masks]


def _b_block(d, fd, mask=None, t=0.0):
    num = d if mask is None else np.where(mask, d, 0.5 * t)
    with np.errstate(divide="ignore", invalid="ignore"):
        b = np.where(fd > 0, -num / fd, 0.0)
    np.fill_diagonal(b, 0.0)
    np.fill_diagonal(b, -b.sum(axis=1))
    return b


def build_b(stacked, distances, masks=None, t=None) -> list:
    """The per-view ``B(Z~)`` blocks at the stacked configuration.

    ``stacked`` holds the M view configurations one below the other
    (``Mn x p*``).  Coincident points contribute a zero entry.
    """
    ds = [as_distance_array(d) for d in distances]
    n = ds[0].shape[0]
    x = np.asarray(stacked, dtype=float)
    if x.shape[0] != n * len(ds):
        raise DimensionError(f"stacked configuration has {x.shape[0]} rows, expected {n * len(ds)}")
    blocks = []
    for m, d in enumerate(ds):
        fd = squareform(pdist(x[m * n:(m + 1) * n]))
        if masks is None:
            blocks.append(_b_block(d, fd))
        else:
            blocks.append(_b_block(d, fd, _mask_array(masks[m]), float(np.ravel(t)[m])))
    return blocks


def _is_complete(v) -> bool:
    n = v.shape[0]
    off = v[~np.eye(n, dtype=bool)]
    return bool(np.all(off == -1.0) and np.all(np.diag(v) == n - 1))


def laplacian_pinv(v, rtol: float = 1e-10) -> np.ndarray:
    """Moore-Penrose inverse of a ``V`` block.

    The complete-graph block ``n(I - J/n)`` uses the closed form
    ``(I - J/n) / n``; anything else goes through ``eigh`` with eigenvalues
    below ``rtol * max`` treated as zero.
    """
    v = np.asarray(v, dtype=float)
    n = v.shape[0]
    if _is_complete(v):
        return (np.eye(n) - 1.0 / n) / n
    evals, evecs = np.linalg.eigh(0.5 * (v + v.T))
    top = max(float(evals.max(initial=0.0)), 0.0)
    keep = evals > rtol * top if top > 0 else np.zeros_like(evals, dtype=bool)
    inv = np.zeros_like(evals)
    inv[keep] = 1.0 / evals[keep]
    return (evecs * inv) @ evecs.T


def guttman_step(v_blocks, b_blocks, stacked, v_pinv=None) -> np.ndarray:
    """Unconstrained update ``V^+ B(Z~) Z~`` applied block by block."""
    x = np.asarray(stacked, dtype=float)
    n = v_blocks[0].shape[0]
    if v_pinv is None:
        v_pinv = [laplacian_pinv(v) for v in v_blocks]
    out = np.empty_like(x)
    for m, (vp, b) in enumerate(zip(v_pinv, b_blocks)):
        rows = slice(m * n, (m + 1) * n)
        out[rows] = vp @ (b @ x[rows])
    return out


# -- constrained (diagonal-scaling) projection ---------------------------------

def constrained_objective(targets, v_blocks, z, w) -> float:
    """``sum_m tr((Z W_m - Zbar_m)^T V_m (Z W_m - Zbar_m))``."""
    w = np.atleast_2d(np.asarray(w, dtype=float))
    total = 0.0
    for m, (zb, v) in enumerate(zip(targets, v_blocks)):
        r = z * w[m] - zb
        total += float(np.sum(r * (v @ r)))
    return total


def _connected(a) -> bool:
    return connected_components(np.abs(a) > 0, directed=False)[0] == 1


def constrained_update(targets, v_blocks, z, w, inner_iters: int = 5, complete=None,
                       connected=None, v_pinv=None):
    """Alternating least squares for ``min sum_m ||Z W_m - Zbar_m||^2_{V_m}``.

    Per column ``a`` the weights get their closed-form minimizer
    ``(z_a' V_m zbar_a) / (z_a' V_m z_a)`` and then ``z_a`` is solved from
    ``(sum_m w_ma^2 V_m) z_a = sum_m w_ma V_m zbar_a``.  Both half steps are
    exact, so the quadratic form never increases.

    Parameters
    ----------
    targets : sequence of (n, p*) arrays
        Guttman targets, one per view.
    v_blocks : sequence of (n, n) arrays
    z : (n, p*) array
    w : (M, p*) array
    inner_iters : int
    complete : bool, optional
        All blocks are ``n I - 1 1^T``; detected when omitted.
    connected : bool, optional
        Every block is a connected graph, so any weighted sum of them is too.
    v_pinv : sequence of (n, n) arrays, optional
        Precomputed pseudoinverses; used for the single-view shortcut.

    Returns
    -------
    z, w : updated copies
    """
    if inner_iters < 1:
        raise ConsensusError("inner_iters must be >= 1")
    z = np.array(z, dtype=float)
    w = np.array(np.atleast_2d(w), dtype=float)
    n, p = z.shape
    n_views = len(v_blocks)
    if complete is None:
        complete = all(_is_complete(v) for v in v_blocks)
    y = [v @ zb for v, zb in zip(v_blocks, targets)]
    ones = np.full((n, n), 1.0 / n)
    union_connected = {}
    for _ in range(inner_iters):
        for a in range(p):
            za = z[:, a]
            for m, v in enumerate(v_blocks):
                den = za @ v @ za
                if den > 0:
                    w[m, a] = (za @ y[m][:, a]) / den
                else:
                    warnings.warn(f"column {a} lies in the null space of view {m}; weight kept",
                                  DegeneracyWarning, stacklevel=2)
            coef = w[:, a] ** 2
            if not np.any(coef > 0):
                warnings.warn(f"all weights of column {a} vanished; column kept",
                              DegeneracyWarning, stacklevel=2)
                continue
            rhs = sum(w[m, a] * y[m][:, a] for m in range(n_views))
            rhs = rhs - rhs.mean()
            if complete:
                za = rhs / (n * coef.sum())
            elif n_views == 1 and v_pinv is not None:
                za = v_pinv[0] @ rhs / coef[0]
            else:
                lap = sum(coef[m] * v_blocks[m] for m in range(n_views))
                active = tuple(np.flatnonzero(coef > 0))
                if active not in union_connected:
                    union_connected[active] = bool(connected) or _connected(lap)
                if union_connected[active]:
                    # pin the constant direction at the Laplacian's own scale; rhs is centered
                    za = np.linalg.solve(lap + ones * (np.trace(lap) / n), rhs)
                else:
                    za = laplacian_pinv(lap) @ rhs
            # move the column's scale into w so neither drifts toward under/overflow
            s = np.sqrt(np.mean(za ** 2))
            if s > 0 and np.isfinite(s):
                za = za / s
                w[:, a] *= s
            z[:, a] = za
    return z, w


# -- driver ------------------------------------------------------------------

def _mean_offdiag(d) -> float:
    n = d.shape[0]
    return float(d.sum() / (n * (n - 1)))


def initial_configuration(distances, settings: SolverSettings):
    """Starting ``(Z, W)`` for the solver.

    Torgerson start: classical MDS of the mean of the distance matrices,
    each divided by its mean off-diagonal entry.  Columns whose eigenvalue
    is not positive are replaced with a small seeded perturbation.  Every
    view's weights are set so its mean fitted distance equals its mean
    target distance.
    """
    ds = [as_distance_array(d) for d in distances]
    n, p = ds[0].shape[0], settings.ndim
    rng = np.random.default_rng(settings.seed)
    if settings.init == "torgerson":
        avg = sum(d / _mean_offdiag(d) for d in ds) / len(ds)
        b_evals = None
        try:
            z, b_evals = torgerson_mds(avg, min(p, n - 1), return_eigenvalues=True)
        except DegenerateError:
            z = None
        if z is None or p > n - 1:
            z = np.zeros((n, p))
        else:
            z = np.hstack([z, np.zeros((n, p - z.shape[1]))])
        spread = float(np.sqrt(np.mean(z[:, 0] ** 2))) if np.any(z) else 1.0
        for a in range(p):
            if not np.sqrt(np.mean(z[:, a] ** 2)) > 1e-8 * spread:
                z[:, a] = 1e-3 * spread * rng.standard_normal(n)
    else:
        z = rng.standard_normal((n, p))
    fd = squareform(pdist(z))
    base = _mean_offdiag(fd)
    w = np.vstack([np.full(p, _mean_offdiag(d) / base) for d in ds])
    return z, w


def _check_distances(distances):
    ds = []
    for m, d in enumerate(distances):
        try:
            arr = as_distance_array(d)
        except ConsensusError as exc:
            raise ConsensusError(f"view {m}: {exc}") from None
        ds.append(arr)
    if not ds:
        raise ConsensusError("need at least one view")
    n = ds[0].shape[0]
    for m, d in enumerate(ds):
        if d.shape[0] != n:
            raise DimensionError(f"view {m} has {d.shape[0]} points, view 0 has {n}")
        if not np.any(d > 0):
            raise DegenerateError(f"view {m} has all distances zero")
    if n < 3:
        raise ConsensusError(f"need at least 3 points, got {n}")
    return ds


def _objective_from_fd(ds, fds, masks, t, iu):
    total = 0.0
    for m, (d, fd) in enumerate(zip(ds, fds)):
        if masks is None:
            total += float(np.sum((d[iu] - fd[iu]) ** 2))
        else:
            sel = masks[m][iu]
            total += float(np.sum((d[iu][sel] - fd[iu][sel]) ** 2) - t[m] * np.sum(fd[iu][~sel]))
    return total


ORDER_SEARCH_MAX_N = 16
ORDER_SEARCH_SCREEN = 10


def _descend(z, w, state, itmax, eps, notes):
    """Run MM iterations from ``(z, w)`` until the relative change drops below ``eps``."""
    ds, mks, t, iu = state["ds"], state["mks"], state["t"], state["iu"]
    v_blocks, ridge_terms = state["v_blocks"], state["ridge_terms"]
    n, n_views = z.shape[0], len(ds)
    fds = [squareform(pdist(z * w[m])) for m in range(n_views)]
    sigma = _objective_from_fd(ds, fds, mks, t, iu)
    trace = [sigma]
    converged = False
    iterations = 0
    for iterations in range(1, itmax + 1):
        stacked = np.vstack([z * w[m] for m in range(n_views)])
        b_blocks = []
        for m in range(n_views):
            b = _b_block(ds[m], fds[m], None if mks is None else mks[m], 0.0 if t is None else t[m])
            if ridge_terms[m] is not None:
                b = b + ridge_terms[m]
            b_blocks.append(b)
        zbar = guttman_step(v_blocks, b_blocks, stacked, state["v_pinv"])
        targets = [zbar[m * n:(m + 1) * n] for m in range(n_views)]
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", DegeneracyWarning)
            z, w = constrained_update(targets, v_blocks, z, w, state["inner"], state["complete"],
                                      state["connected"], state["v_pinv"])
        for c in caught:
            if len(notes) < 50:
                notes.append(f"iteration {iterations}: {c.message}")
        if not (np.all(np.isfinite(z)) and np.all(np.isfinite(w))):
            raise NumericalError(f"non-finite configuration at iteration {iterations}")
        fds = [squareform(pdist(z * w[m])) for m in range(n_views)]
        new = _objective_from_fd(ds, fds, mks, t, iu)
        trace.append(new)
        rel = abs(new - sigma) / max(abs(sigma), 1e-12)
        sigma = new
        if rel < eps:
            converged = True
            break
    return z, w, trace, iterations, converged


def _interchange(z, w, trace, state, settings, notes):
    """Pairwise-interchange search over the ordering of a one-dimensional fit.

    In one dimension a Guttman step lands on the best configuration for
    the current rank order, so descent stalls at whichever ordering it
    starts in.  Each candidate swaps the positions of two points and is
    screened with a short descent; since descent is monotone, a screened
    objective below the incumbent is a genuine improvement and is kept.
    The scan cycles over all pairs until a full sweep brings nothing, then
    a full descent polishes the winner.  Improvements extend ``trace``.
    """
    n = z.shape[0]
    best = trace[-1]
    pairs = [(a, b) for a in range(n - 1) for b in range(a + 1, n)]
    screen = min(settings.itmax, ORDER_SEARCH_SCREEN)
    swaps, since, pos = 0, 0, 0
    order = np.argsort(z[:, 0], kind="stable")
    # gains within the convergence tolerance are leftover descent, not a better order
    tol = max(settings.eps, 1e-10)
    while since < len(pairs) and swaps < n * n:
        a, b = pairs[pos]
        pos = (pos + 1) % len(pairs)
        since += 1
        trial = z.copy()
        trial[order[a], 0], trial[order[b], 0] = z[order[b], 0], z[order[a], 0]
        zt, wt, tr, _, _ = _descend(trial, w.copy(), state, screen, settings.eps, [])
        if tr[-1] < best - tol * max(abs(best), 1.0):
            z, w, best = zt, wt, tr[-1]
            trace.append(best)
            order = np.argsort(z[:, 0], kind="stable")
            swaps += 1
            since = 0
    if swaps:
        z, w, tr, _, _ = _descend(z, w, state, settings.itmax, settings.eps, notes)
        trace.extend(tr[1:])
    return z, w, swaps


def fit(distances, settings: Optional[SolverSettings] = None, masks=None, t=None, *,
        init=None, tau=None) -> ConsensusFit:
    """Fit a consensus configuration to M distance matrices.

    Without ``masks`` this minimizes the consensus stress over all pairs.
    With ``masks`` (one per view) and repulsion strengths ``t``, masked pairs
    keep their squared residual while the fitted distances of the remaining
    pairs are rewarded with weight ``t_m``.

    Parameters
    ----------
    distances : sequence of DistanceMatrix or (n, n) arrays
    settings : SolverSettings, optional
    masks : sequence of NeighborhoodMask or boolean arrays, optional
    t : sequence of float, optional
        Required with ``masks``; zero switches the repulsion off.
    init : tuple (Z, W), optional
        Explicit starting point overriding ``settings.init``.
    tau : float, optional
        Recorded in the fit's local parameters only.
    """
    settings = settings or SolverSettings()
    ds = _check_distances(distances)
    n, n_views, p = ds[0].shape[0], len(ds), settings.ndim
    if p > n - 1:
        raise ConsensusError(f"ndim={p} exceeds n - 1 = {n - 1}")
    local = masks is not None
    notes = []
    if local:
        if t is None:
            raise ConsensusError("local fits need one t value per view")
        if len(masks) != n_views:
            raise DimensionError(f"{len(masks)} masks for {n_views} views")
        mks = [_mask_array(mk) for mk in masks]
        for m, mk in enumerate(mks):
            if mk.shape != (n, n):
                raise DimensionError(f"view {m}: mask is {mk.shape[0]} x {mk.shape[1]}, expected {n} x {n}")
        t = np.ravel(np.asarray(t, dtype=float))
        if t.size != n_views or np.any(t < 0) or not np.all(np.isfinite(t)):
            raise ConsensusError(f"need {n_views} finite nonnegative t values, got {t}")
    else:
        mks = None

    v_blocks = build_v(n, n_views, mks)
    ridge_terms = [None] * n_views
    if local:
        full = n * np.eye(n) - np.ones((n, n))
        for m, mk in enumerate(mks):
            ncomp = connected_components(mk, directed=False)[0]
            if ncomp > 1:
                notes.append(f"view {m}: neighborhood graph has {ncomp} components")
                if settings.ridge > 0:
                    eps = settings.ridge * max(np.trace(v_blocks[m]) / n, 1.0)
                    ridge_terms[m] = eps * full
                    v_blocks[m] = v_blocks[m] + ridge_terms[m]
    complete = not local
    all_connected = complete or all(_connected(v) for v in v_blocks)
    v_pinv = [laplacian_pinv(v) for v in v_blocks]

    if init is not None:
        z = np.array(init[0], dtype=float)
        w = np.array(np.atleast_2d(init[1]), dtype=float)
        if z.shape != (n, p) or w.shape != (n_views, p):
            raise DimensionError(f"init shapes {z.shape}, {w.shape}; expected {(n, p)}, {(n_views, p)}")
    else:
        z, w = initial_configuration(ds, settings)

    iu = np.triu_indices(n, k=1)
    state = dict(ds=ds, mks=mks, t=t, iu=iu, v_blocks=v_blocks, v_pinv=v_pinv,
                 ridge_terms=ridge_terms, complete=complete,
                 connected=all_connected or None, inner=settings.als_inner_iters)
    z, w, trace, iterations, converged = _descend(z, w, state, settings.itmax, settings.eps, notes)
    search = settings.order_search
    if search is None:
        # the local objective can be unbounded below, so only explicit requests search it
        search = not local and n <= ORDER_SEARCH_MAX_N
    if p == 1 and search and n > 2:
        z, w, swaps = _interchange(z, w, trace, state, settings, notes)
        if swaps:
            notes.append(f"order search: {swaps} interchange(s) lowered the objective")

    try:
        zf, scalings = gauge_fix(z, w)
    except DegenerateError as exc:
        raise NumericalError(f"fit collapsed: {exc}") from None

    params = None
    if local:
        pct = [mk.percentile for mk in masks if isinstance(mk, NeighborhoodMask)]
        if len(pct) == n_views and len(set(pct)) == 1:
            percentile = pct[0]
        else:
            percentile = float(np.mean([mk[iu].mean() for mk in mks]))
        stored = tuple(mk if isinstance(mk, NeighborhoodMask)
                       else NeighborhoodMask(mk, percentile=max(float(mk[iu].mean()), 1e-300),
                                             threshold=float("nan"), kind="explicit")
                       for mk in masks)
        params = LocalParams(tau=tau, percentile=percentile, t=tuple(float(x) for x in t), masks=stored)
    return ConsensusFit(
        configuration=zf,
        scalings=scalings,
        stress_trace=trace,
        iterations=iterations,
        converged=converged,
        method="LoCoMDS" if local else "CoMDS",
        local=params,
        warnings=tuple(notes),
    )


def to_distances(inputs) -> list:
    """Distance matrices from an EmbeddingSet, DistanceMatrix list or raw embeddings.

    Raw arrays are read as embeddings (rows = samples).
    """
    if isinstance(inputs, EmbeddingSet):
        return [pairwise_distances(v) for v in inputs.views]
    out = []
    for x in inputs:
        out.append(x if isinstance(x, DistanceMatrix) else pairwise_distances(x))
    return out


def comds(inputs, settings: Optional[SolverSettings] = None, **kwargs) -> ConsensusFit:
    """Consensus MDS of embeddings or distance matrices (see ``to_distances``)."""
    return fit(to_distances(inputs), settings, **kwargs)


def is_monotone(trace: Sequence[float], rtol: float = 1e-10, scale: float = 0.0) -> bool:
    """Whether ``trace`` never rises by more than ``rtol * max(|previous|, scale)``."""
    tr = np.asarray(trace, dtype=float)
    prev = tr[:-1]
    return bool(np.all(tr[1:] <= prev + rtol * np.maximum(np.abs(prev), scale)))
