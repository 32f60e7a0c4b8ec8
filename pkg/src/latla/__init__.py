"""Locally adaptive transfer-learning multiple testing with FDR control.

Primary statistics from the target domain are tested with p-value weights
learned from a source-domain distance matrix: kernel-smoothed local sparsity
and density estimates feed lfdr-style rejection thresholds, and a weighted
step-up rule controls the false discovery rate.
"""

from .core import (
    DistanceMatrix,
    GroundTruth,
    HypothesisBatch,
    NullDensity,
    TestOutcome,
    compute_fdp,
    compute_power,
    p_from_t,
    std_normal,
    student_t,
)
from .distances import (
    AuxiliarySample,
    euclidean_distance,
    ld_distance,
    load_distance_matrix,
    mahalanobis_distance,
    rank_distance,
)
from .kernels import (
    KernelSpec,
    Neighborhood,
    build_neighborhoods,
    kernel_eval,
    select_bandwidth,
    v_weight,
)
from .localstats import (
    LocalEstimates,
    calibrate_tau,
    estimate_density,
    estimate_pi,
    local_estimates,
    theoretical_pi_star,
)
from .pipeline import LatlaFit, fit_local, fit_weights, run_latla
from .procedures import ProcedureConfig, bh, bonferroni, latla_threshold, wbh
from .sim import SimDesign, SimResult, design_points, run_study
from .weights import WeightVector, lfdr_stats, oracle_threshold, oracle_weights, sparsity_weights

__version__ = "0.1.0"

__all__ = [
    "AuxiliarySample",
    "DistanceMatrix",
    "GroundTruth",
    "HypothesisBatch",
    "KernelSpec",
    "LatlaFit",
    "LocalEstimates",
    "Neighborhood",
    "NullDensity",
    "ProcedureConfig",
    "SimDesign",
    "SimResult",
    "TestOutcome",
    "WeightVector",
    "bh",
    "bonferroni",
    "build_neighborhoods",
    "calibrate_tau",
    "compute_fdp",
    "compute_power",
    "design_points",
    "estimate_density",
    "estimate_pi",
    "euclidean_distance",
    "fit_local",
    "fit_weights",
    "kernel_eval",
    "latla_threshold",
    "ld_distance",
    "lfdr_stats",
    "load_distance_matrix",
    "local_estimates",
    "mahalanobis_distance",
    "oracle_threshold",
    "oracle_weights",
    "p_from_t",
    "rank_distance",
    "run_latla",
    "run_study",
    "select_bandwidth",
    "sparsity_weights",
    "std_normal",
    "student_t",
    "theoretical_pi_star",
    "v_weight",
    "wbh",
]
