"""Consensus of two embeddings of a three-cluster Gaussian mixture.

One view is PCA of the raw data, the other classical MDS of the
standardized data, so they disagree about which directions matter.  The
consensus keeps one configuration with unit-scale axes and learns how
strongly each view stretches each of them.

Run with ``python3 demos/gaussian_consensus.py``.
"""

import numpy as np

from comds import (
    comds,
    gen_gaussian_mixture,
    local_lcmc,
    pairwise_distances,
    pca_embed,
    random_triplet_accuracy,
    spearman_distance_correlation,
    torgerson_mds,
)

x, labels = gen_gaussian_mixture(seed=0)
views = {
    "pca": pca_embed(x, 2),
    "mds": torgerson_mds(pairwise_distances((x - x.mean(0)) / x.std(0)), 2),
}
fit = comds(list(views.values()))

print(f"consensus stress {fit.stress:.4g} after {fit.iterations} iterations")
print("per-view axis weights:")
for name, w in zip(views, fit.weights):
    print(f"  {name:>4}: {np.array2string(w, precision=3)}")

print(f"\n{'embedding':>10} {'triplet':>8} {'spearman':>9} {'lcmc':>7}")
rows = list(views.items()) + [
    ("consensus", fit.configuration),
    ("cons x pca", fit.view_configuration(0)),
]
for name, z in rows:
    print(f"{name:>10} {random_triplet_accuracy(x, z, seed=0):8.3f} "
          f"{spearman_distance_correlation(x, z):9.3f} {local_lcmc(x, z):7.3f}")
