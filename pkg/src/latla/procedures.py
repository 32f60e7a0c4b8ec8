"""Rejection procedures: the weighted step-up rule plus BH, Bonferroni, and wBH."""

from dataclasses import dataclass

import numpy as np

from .core import TestOutcome
from .weights import WeightVector

PROCEDURES = ("latla", "bh", "bonferroni", "wbh")


@dataclass(frozen=True)
class ProcedureConfig:
    alpha: float
    procedure: str = "latla"

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise ValueError("alpha must lie in (0, 1)")
        if self.procedure not in PROCEDURES:
            raise ValueError(f"unknown procedure: {self.procedure!r}")


def _step_up(pw: np.ndarray, coef: float, alpha: float) -> TestOutcome:
    """Reject the longest sorted prefix whose path value coef*v_(j)/j stays <= alpha.

    Sorting is stable, so exact ties are ordered by hypothesis index; tied
    values at the cutoff always enter or leave together because the last of
    a tied block has the smallest path value within the block.

    Values capped at 1 are never rejectable: the estimated-FDP calibration
    coef * t counts null hits via uniformity of p/w below the cap, which
    breaks at the atom t = 1 where every floor-weighted p-value piles up.
    """
    m = pw.size
    order = np.argsort(pw, kind="stable")
    pw_sorted = pw[order]
    path = coef * pw_sorted / np.arange(1, m + 1)
    hits = np.nonzero((path <= alpha) & (pw_sorted < 1.0))[0]
    k = int(hits[-1]) + 1 if hits.size else 0
    rejected = np.zeros(m, dtype=bool)
    rejected[order[:k]] = True
    threshold = float(pw_sorted[k - 1]) if k else 0.0
    return TestOutcome(rejected, k, threshold, path)


def latla_threshold(p: np.ndarray, w, pi: np.ndarray, alpha: float) -> TestOutcome:
    """Step-up rule on weighted p-values with the sparsity-discounted weight mass.

    Weighted p-values are P_i^w = min(P_i / w_i, 1); the estimated-FDP path
    is sum_i w_i (1 - pi_i) * P^w_(j) / j and the rule picks the largest j
    whose path value stays at or below alpha. With unit weights and zero
    sparsity this reduces exactly to BH.
    """
    w_arr = np.asarray(w.w if isinstance(w, WeightVector) else w, dtype=float)
    p = np.asarray(p, dtype=float)
    pi = np.asarray(pi, dtype=float)
    if not (p.shape == w_arr.shape == pi.shape):
        raise ValueError("p, weights, and pi must have matching shapes")
    pw = np.minimum(p / w_arr, 1.0)
    coef = float(np.sum(w_arr * (1.0 - pi)))
    return _step_up(pw, coef, alpha)


def bh(p: np.ndarray, alpha: float) -> TestOutcome:
    """Benjamini-Hochberg step-up on raw p-values."""
    p = np.asarray(p, dtype=float)
    return _step_up(p, float(p.size), alpha)


def bonferroni(p: np.ndarray, fwer: float) -> TestOutcome:
    """Reject p_i <= fwer / m; controls the family-wise error rate."""
    p = np.asarray(p, dtype=float)
    cutoff = fwer / p.size
    rejected = p <= cutoff
    return TestOutcome(rejected, int(rejected.sum()), cutoff)


def wbh(p: np.ndarray, w_raw: np.ndarray, alpha: float) -> TestOutcome:
    """Weighted BH with external weights, renormalized to sum to m."""
    p = np.asarray(p, dtype=float)
    w_raw = np.asarray(w_raw, dtype=float)
    if p.shape != w_raw.shape:
        raise ValueError("p and weights must have matching shapes")
    if np.any(w_raw <= 0):
        raise ValueError("weights must be strictly positive")
    w_hat = p.size * w_raw / w_raw.sum()
    pw = np.minimum(p / w_hat, 1.0)
    return _step_up(pw, float(p.size), alpha)
