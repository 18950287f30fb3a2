"""Consensus multidimensional scaling of several embeddings of one dataset."""

from .baselines import pca_embed, torgerson_mds
from .core import (
    ConsensusError,
    ConsensusFit,
    DegenerateError,
    DiagonalScaling,
    DimensionError,
    DistanceMatrix,
    EmbeddingSet,
    LocalParams,
    NeighborhoodMask,
    NumericalError,
    SolverSettings,
    comds_stress,
    gauge_fix,
    locomds_stress,
    stress_per_point,
    stress_per_view,
)
from .distances import knn_mask, neighborhood_mask, pairwise_distances, percentile_threshold
from .metrics import (
    lcmc_curve,
    local_lcmc,
    mantel_statistic,
    random_triplet_accuracy,
    spearman_distance_correlation,
)
from .simulate import gen_gaussian_mixture, gen_swiss_roll
from .solver import comds, fit, to_distances
from .tuning import TuningGrid, TuningResult, adjusted_lcmc, default_k_grid, locomds, t_from_tau, tune

__version__ = "0.1.0"
