"""Global versus local consensus on a Swiss roll.

Two input sets are compared on a 300-point subsample:

* PCA and classical MDS of the 3-D data.  Both are the same linear
  projection, so the roll arrives already folded and the local fit has
  little to work with.
* the 3-D distances themselves.  Here the local fit keeps neighbouring
  pairs, pushes the rest apart and unrolls much of the sheet.

Each local fit is tuned over (tau, percentile) by adjusted LCMC against the
3-D data; the printout scores every fit against the intrinsic (t, u)
coordinates.  Run with ``python3 demos/swiss_roll_local.py``.
"""

import numpy as np

from comds import (
    SolverSettings,
    TuningGrid,
    comds,
    gen_swiss_roll,
    local_lcmc,
    pairwise_distances,
    pca_embed,
    torgerson_mds,
    tune,
)

data, intrinsic = gen_swiss_roll(seed=1)
idx = np.sort(np.random.default_rng(0).choice(len(data), 300, replace=False))
x, tu = data[idx], intrinsic[idx]

inputs = {
    "pca + mds": [pairwise_distances(pca_embed(x, 2)),
                  pairwise_distances(torgerson_mds(pairwise_distances(x), 2))],
    "3-d distances": [pairwise_distances(x)],
}
settings = SolverSettings(ndim=2, itmax=300)
grid = TuningGrid(taus=(1.0, 0.1, 0.01), percentiles=(0.05, 0.1, 0.2, 0.3))
ks = list(range(2, 21, 3))

print(f"LCMC against the intrinsic (t, u) coordinates, k in {ks}\n")
print(f"{'inputs':>14} {'global':>7} {'local':>7}  selected")
for name, views in inputs.items():
    result, fits = tune(views, x, grid, settings, return_fits=True)
    glob = comds(views, settings)
    tau, pi = result.selected
    print(f"{name:>14} {local_lcmc(tu, glob.configuration, ks):7.3f} "
          f"{local_lcmc(tu, fits[result.selected].configuration, ks):7.3f}  tau={tau}, percentile={pi}")
