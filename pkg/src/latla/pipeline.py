"""End-to-end wiring: local estimation -> weights -> step-up decision.

The fit is split from the decision so one set of local estimates can serve
several nominal FDR levels (the screening threshold, bandwidth, neighborhoods,
and density estimates do not depend on alpha).
"""

from dataclasses import dataclass

import numpy as np

from .core import DistanceMatrix, HypothesisBatch, TestOutcome
from .kernels import KernelSpec, build_neighborhoods, select_bandwidth
from .localstats import (
    F_MIN,
    XI,
    KernelDensityEvaluator,
    LocalEstimates,
    calibrate_tau,
    local_estimates,
)
from .procedures import latla_threshold
from .weights import WeightVector, lfdr_stats, oracle_threshold, oracle_weights, sparsity_weights


@dataclass
class LatlaFit:
    """Alpha-independent state: sparsity estimates plus a density evaluator."""

    batch: HypothesisBatch
    pi: np.ndarray
    density: object
    tau: float
    kernel: KernelSpec | None = None
    estimates: LocalEstimates | None = None


def fit_local(
    batch: HypothesisBatch,
    S: DistanceMatrix,
    epsilon: float = 0.1,
    tau: float | None = None,
    tau_level: float = 0.8,
    bandwidth_rule: str = "sheather-jones",
    bandwidth: float | None = None,
    xi: float = XI,
    f_min: float = F_MIN,
) -> LatlaFit:
    """Data-driven fit: bandwidth from the primary statistics, neighborhoods
    from the distance matrix, then kernel-weighted pi and density estimates."""
    if batch.m != S.m:
        raise ValueError("batch and distance matrix sizes differ")
    h = select_bandwidth(batch.t_stats, rule=bandwidth_rule, manual=bandwidth)
    kernel = KernelSpec(h, bandwidth_rule=bandwidth_rule)
    nbhds = build_neighborhoods(S, epsilon)
    if tau is None:
        tau = calibrate_tau(batch.p_values, level=tau_level)
    est = local_estimates(batch, S, nbhds, kernel, tau, xi=xi, f_min=f_min)
    density = KernelDensityEvaluator(batch, S, nbhds, kernel, f_min=f_min)
    return LatlaFit(batch, est.pi, density, tau, kernel=kernel, estimates=est)


def fit_weights(fit: LatlaFit, alpha: float, xi: float = XI) -> WeightVector:
    """Oracle-assisted weights of a fit at nominal level alpha."""
    f_at_t = (
        fit.estimates.f_at_t
        if fit.estimates is not None
        else fit.density.at(np.arange(fit.batch.m), fit.batch.t_stats)
    )
    L = lfdr_stats(fit.pi, f_at_t, fit.batch)
    _, L_k, degenerate = oracle_threshold(L, alpha)
    return oracle_weights(fit.batch, fit.pi, fit.density, L_k, degenerate, xi=xi)


def run_latla(
    fit: LatlaFit, alpha: float, scheme: str = "oracle", xi: float = XI
) -> tuple[TestOutcome, WeightVector]:
    """Weights (oracle-assisted or sparsity-adaptive) plus the step-up decision."""
    if scheme == "oracle":
        wv = fit_weights(fit, alpha, xi=xi)
    elif scheme == "sparsity":
        wv = sparsity_weights(fit.pi, xi=xi)
    else:
        raise ValueError(f"unknown weight scheme: {scheme!r}")
    outcome = latla_threshold(fit.batch.p_values, wv, fit.pi, alpha)
    return outcome, wv
