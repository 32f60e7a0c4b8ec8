"""Shared domain types and evaluation metrics against known ground truth."""

from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps


@dataclass(frozen=True)
class NullDensity:
    """Known null distribution of the primary statistics.

    Only symmetric-about-zero families are supported: the standard normal
    and Student's t. Two-sided p-values and the signed rejection-region
    weights both rely on that symmetry.
    """

    family: str  # "standard-normal" | "student-t"
    df: float | None = None

    def __post_init__(self):
        if self.family == "standard-normal":
            if self.df is not None:
                raise ValueError("standard-normal null takes no df")
        elif self.family == "student-t":
            if self.df is None or self.df <= 0:
                raise ValueError("student-t null requires df > 0")
        else:
            raise ValueError(f"unknown null family: {self.family!r}")

    @property
    def _dist(self):
        if self.family == "standard-normal":
            return sps.norm
        return sps.t(self.df)

    def f0(self, t):
        """Null density at t (vectorized)."""
        return self._dist.pdf(t)

    def F0(self, t):
        """Null CDF at t (vectorized)."""
        return self._dist.cdf(t)

    def sf0(self, t):
        """Null survival function 1 - F0(t); more accurate in the tail."""
        return self._dist.sf(t)

    def F0_inv(self, q):
        """Null quantile function, polished by one Newton step.

        The extra step pulls the Student-t inversion below 1e-12 residual;
        for the normal it is a no-op at machine precision.
        """
        q = np.asarray(q, dtype=float)
        x = self._dist.ppf(q)
        dens = self._dist.pdf(x)
        with np.errstate(invalid="ignore", divide="ignore"):
            step = np.where(
                np.isfinite(x) & (dens > 0), (self._dist.cdf(x) - q) / dens, 0.0
            )
        return x - step


def std_normal() -> NullDensity:
    return NullDensity("standard-normal")


def student_t(df: float) -> NullDensity:
    return NullDensity("student-t", df=df)


def p_from_t(t_stats: np.ndarray, null_spec: NullDensity) -> np.ndarray:
    """Two-sided p-values p_i = 2*(1 - F0(|t_i|)) under the declared null.

    Values are floored at the smallest positive normal float so that the
    p in (0, 1] contract survives tail underflow for very large |t|.
    """
    t = np.asarray(t_stats, dtype=float)
    p = 2.0 * null_spec.sf0(np.abs(t))
    return np.clip(p, np.finfo(float).tiny, 1.0)


@dataclass(frozen=True)
class HypothesisBatch:
    """Primary statistics of the target domain: t/z values plus p-values."""

    t_stats: np.ndarray
    p_values: np.ndarray
    null_spec: NullDensity

    def __post_init__(self):
        t = np.asarray(self.t_stats, dtype=float)
        p = np.asarray(self.p_values, dtype=float)
        object.__setattr__(self, "t_stats", t)
        object.__setattr__(self, "p_values", p)
        if t.ndim != 1 or p.ndim != 1 or t.shape != p.shape or t.size == 0:
            raise ValueError("t_stats and p_values must be equal-length nonempty vectors")
        if np.any(np.isnan(t)):
            raise ValueError("NaN in t_stats")
        if np.any((p < 0) | (p > 1) | np.isnan(p)):
            raise ValueError("p-values must lie in [0, 1]")

    @property
    def m(self) -> int:
        return self.t_stats.size

    @classmethod
    def from_t(cls, t_stats, null_spec: NullDensity) -> "HypothesisBatch":
        t = np.asarray(t_stats, dtype=float)
        return cls(t, p_from_t(t, null_spec), null_spec)

    @classmethod
    def from_p(cls, p_values, null_spec: NullDensity) -> "HypothesisBatch":
        """Build from p-values alone; signs are unavailable, so the implied
        statistics t_i = F0_inv(1 - p_i/2) are all nonnegative."""
        p = np.clip(np.asarray(p_values, dtype=float), np.finfo(float).tiny, 1.0)
        t = null_spec.F0_inv(np.clip(1.0 - p / 2.0, 0.5, 1.0 - 1e-16))
        return cls(t, p, null_spec)


@dataclass(frozen=True)
class DistanceMatrix:
    """Symmetric nonnegative pairwise distances from the source domain.

    Entries may be +inf (the sentinel for pairs a sparse triplet file left
    unspecified); listed entries must be finite.
    """

    values: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", s)
        if s.ndim != 2 or s.shape[0] != s.shape[1] or s.shape[0] == 0:
            raise ValueError("distance matrix must be square and nonempty")
        if np.any(np.isnan(s)):
            raise ValueError("NaN in distance matrix")
        if np.any(s < 0):
            raise ValueError("negative distance")
        finite = np.isfinite(s)
        if not np.array_equal(finite, finite.T) or np.any(
            np.abs(np.where(finite, s, 0.0) - np.where(finite, s, 0.0).T) > 1e-12
        ):
            raise ValueError("distance matrix is not symmetric")

    @property
    def m(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class GroundTruth:
    """Signal indicators theta_i in {0,1}; available in simulation only."""

    theta: np.ndarray

    def __post_init__(self):
        th = np.asarray(self.theta)
        if th.ndim != 1 or not np.all((th == 0) | (th == 1)):
            raise ValueError("theta must be a vector of 0/1 indicators")
        object.__setattr__(self, "theta", th.astype(np.int8))

    @property
    def m(self) -> int:
        return self.theta.size


@dataclass(frozen=True)
class TestOutcome:
    """Decision vector of a rejection procedure plus its threshold path."""

    __test__ = False  # despite the name, not a pytest class

    rejected: np.ndarray
    k: int
    threshold: float
    fdp_hat_path: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __post_init__(self):
        rej = np.asarray(self.rejected, dtype=bool)
        object.__setattr__(self, "rejected", rej)
        object.__setattr__(self, "fdp_hat_path", np.asarray(self.fdp_hat_path, dtype=float))
        if int(rej.sum()) != self.k:
            raise ValueError("k does not match the rejection count")

    @property
    def m(self) -> int:
        return self.rejected.size


def compute_fdp(outcome: TestOutcome, truth: GroundTruth) -> float:
    """False discovery proportion: false rejections over max(rejections, 1)."""
    if outcome.m != truth.m:
        raise ValueError("outcome and truth dimensions differ")
    false = np.sum((truth.theta == 0) & outcome.rejected)
    return float(false) / max(outcome.k, 1)


def compute_power(outcome: TestOutcome, truth: GroundTruth) -> float:
    """Fraction of true signals rejected; 0 by convention for a signal-free batch."""
    if outcome.m != truth.m:
        raise ValueError("outcome and truth dimensions differ")
    hits = np.sum((truth.theta == 1) & outcome.rejected)
    return float(hits) / max(int(truth.theta.sum()), 1)
