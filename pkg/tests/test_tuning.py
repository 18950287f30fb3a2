import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from comds import (
    ConsensusError,
    SolverSettings,
    TuningGrid,
    adjusted_lcmc,
    default_k_grid,
    gen_swiss_roll,
    locomds,
    neighborhood_mask,
    pairwise_distances,
    pca_embed,
    t_from_tau,
    torgerson_mds,
    tune,
)
from comds.tuning import select

from oracles import brute_lcmc, naive_median


def swiss_views(n=200, seed=0):
    data, intrinsic = gen_swiss_roll(seed)
    idx = np.sort(np.random.default_rng(seed).choice(len(data), n, replace=False))
    x = data[idx]
    return x, [pairwise_distances(pca_embed(x, 2)), pairwise_distances(torgerson_mds(pairwise_distances(x), 2))]


# ---------------------------------------------------------------- t and the k grid

def test_t_from_tau_formula():
    d = pairwise_distances([[0.0], [3.0], [6.0], [100.0]])
    mk = np.zeros((4, 4), dtype=bool)
    mk[0, 1] = mk[1, 0] = True
    mk[1, 2] = mk[2, 1] = True
    assert t_from_tau(0.1, 0.5, d, mk) == pytest.approx(0.3)
    mk1 = np.zeros((4, 4), dtype=bool)
    mk1[0, 1] = mk1[1, 0] = True
    d1 = pairwise_distances([[0.0], [1.0], [5.0], [9.0]])
    assert t_from_tau(1.0, 0.9, d1, mk1) == pytest.approx(9.0)


def test_t_from_tau_matches_median_oracle():
    d = pairwise_distances(np.random.default_rng(0).standard_normal((14, 2)))
    mk = neighborhood_mask(d, 0.35)
    iu = np.triu_indices(14, k=1)
    med = naive_median(list(d.values[iu][mk.mask[iu]]))
    assert_allclose(t_from_tau(0.5, 0.35, d, mk), 0.35 / 0.65 * med * 0.5, rtol=1e-14)


def test_t_from_tau_errors():
    d = pairwise_distances(np.arange(5.0)[:, None])
    with pytest.raises(ConsensusError):
        t_from_tau(1.0, 1.0, d, neighborhood_mask(d, 1.0))
    with pytest.raises(ConsensusError, match="empty"):
        t_from_tau(1.0, 0.5, d, np.zeros((5, 5), dtype=bool))
    with pytest.raises(ConsensusError):
        t_from_tau(0.0, 0.5, d, neighborhood_mask(d, 0.5))


def test_default_k_grid():
    g = default_k_grid(1000)
    assert g[:3] == [1, 2, 5] and g[3] == 10 and g[-1] == 700 and len(g) == 10
    assert default_k_grid(100)[-1] == 70
    assert default_k_grid(10) == [1, 2, 3, 4, 5]
    assert default_k_grid(4) == [1, 2, 3]
    for n in range(16, 2001):
        g = default_k_grid(n)
        assert all(b > a for a, b in zip(g, g[1:])) and g[-1] <= n - 1


def test_grid_validation():
    with pytest.raises(ConsensusError):
        TuningGrid(taus=())
    with pytest.raises(ConsensusError):
        TuningGrid(taus=(0.0,))
    with pytest.raises(ConsensusError):
        TuningGrid(percentiles=(1.0,))
    with pytest.raises(ConsensusError):
        TuningGrid(k_values=(3, 2))
    with pytest.raises(ConsensusError):
        TuningGrid(k_values=(1, 50)).with_k(20)


# ---------------------------------------------------------------- adjusted LCMC

def test_adjusted_lcmc_identity_and_reflection():
    x = np.random.default_rng(1).standard_normal((11, 3))
    assert adjusted_lcmc(x, x, 2) == pytest.approx(0.8, abs=1e-15)
    assert adjusted_lcmc(x, -x, 2) == adjusted_lcmc(x, x, 2)


def test_adjusted_lcmc_matches_brute_force():
    rng = np.random.default_rng(2)
    x, z = rng.standard_normal((8, 3)), rng.standard_normal((8, 2))
    dx, dz = pairwise_distances(x).values, pairwise_distances(z).values
    for k in range(1, 8):
        assert_allclose(adjusted_lcmc(x, z, k), brute_lcmc(dx, dz, k) - k / 7, rtol=1e-14, atol=1e-15)


def test_adjusted_lcmc_bounds_and_errors():
    rng = np.random.default_rng(3)
    x, z = rng.standard_normal((20, 3)), rng.standard_normal((20, 2))
    for k in (1, 5, 19):
        v = adjusted_lcmc(x, z, k)
        assert -k / 19 <= v <= 1 - k / 19
    with pytest.raises(ConsensusError):
        adjusted_lcmc(x, z, 20)


def test_adjusted_lcmc_invariance():
    rng = np.random.default_rng(4)
    x, z = rng.standard_normal((30, 3)), rng.standard_normal((30, 2))
    q, _ = np.linalg.qr(rng.standard_normal((2, 2)))
    assert adjusted_lcmc(x, z, 5) == adjusted_lcmc(x * 4 + 1, 0.5 * z @ q - 3, 5)


# ---------------------------------------------------------------- selection

def test_select_single_cell():
    grid = TuningGrid((1.0,), (0.3,), (1, 2, 3))
    votes, sel, ks = select(np.zeros((1, 1, 3)), grid)
    assert sel == (1.0, 0.3) and votes[0, 0] == 3 and ks == (1, 2, 3)


def test_select_dominator_and_ties():
    grid = TuningGrid((1.0, 0.1), (0.2, 0.4), (1, 2, 3, 4))
    scores = np.zeros((2, 2, 4))
    scores[1, 1] = 1.0
    votes, sel, _ = select(scores, grid)
    assert sel == (0.1, 0.4) and votes.sum() == 4
    # all tied: smaller percentile first, then smaller tau
    _, sel, _ = select(np.zeros((2, 2, 4)), grid)
    assert sel == (0.1, 0.2)


def test_select_truncation():
    grid = TuningGrid((1.0, 0.1), (0.2,), (1, 2, 3, 4))
    scores = np.array([[[0.5, 0.6, 0.2, 0.9]], [[0.1, 0.2, 0.3, 0.1]]])
    # best per k: 0.5, 0.6, 0.3, 0.9 -> first decrease at index 2
    votes, sel, ks = select(scores, grid, truncate=True)
    assert ks == (1, 2) and sel == (1.0, 0.2)
    _, _, ks = select(scores, grid)
    assert ks == (1, 2, 3, 4)


# ---------------------------------------------------------------- tune

def test_locomds_records_parameters():
    x, ds = swiss_views(60)
    f = locomds(ds, 0.1, 0.3)
    assert f.method == "LoCoMDS"
    assert f.local.tau == 0.1 and f.local.percentile == 0.3
    assert_allclose(f.local.t, [t_from_tau(0.1, 0.3, d, neighborhood_mask(d, 0.3)) for d in ds])


def test_tune_reproducible_and_consistent():
    x, ds = swiss_views(200)
    grid = TuningGrid((1.0, 0.1, 0.01), (0.1, 0.2, 0.3))
    s = SolverSettings(itmax=60)
    a = tune(ds, x, grid, s)
    b = tune(ds, x, grid, s, n_jobs=3)
    assert a.selected == b.selected
    assert_array_equal(a.scores, b.scores)
    assert_array_equal(a.votes, b.votes)
    assert a.votes.sum() == len(a.grid.k_values)
    assert a.selected[0] in grid.taus and a.selected[1] in grid.percentiles
    assert a.scores.shape == (3, 3, len(a.grid.k_values))
    i, j = a.selected_index
    assert a.votes[i, j] == a.votes.max()


def test_tune_scores_are_adjusted_lcmc():
    x, ds = swiss_views(80)
    grid = TuningGrid((0.5,), (0.2,), (2, 5))
    res, fits = tune(ds, x, grid, SolverSettings(itmax=30), return_fits=True)
    f = fits[(0.5, 0.2)]
    for l, k in enumerate((2, 5)):
        assert res.scores[0, 0, l] == pytest.approx(adjusted_lcmc(x, f.configuration, k), abs=1e-15)


def test_tune_records_failures(monkeypatch):
    import comds.tuning as tmod
    x, ds = swiss_views(40)

    def boom(*a, **k):
        raise ConsensusError("synthetic failure")

    monkeypatch.setattr(tmod, "locomds", boom)
    res = tune(ds, x, TuningGrid((1.0,), (0.3,), (1, 2)))
    assert np.all(np.isneginf(res.scores))
    assert "synthetic failure" in res.failures[(1.0, 0.3)]


def test_tune_reference_size_check():
    x, ds = swiss_views(40)
    with pytest.raises(ConsensusError):
        tune(ds, x[:30], TuningGrid((1.0,), (0.3,)))
