"""Gaussian kernel, bandwidth selection, and nearest-neighborhood construction."""

import warnings
from dataclasses import dataclass

import numpy as np

from .core import DistanceMatrix

SQRT_2PI = np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class KernelSpec:
    """Gaussian smoothing kernel with bandwidth h > 0."""

    bandwidth: float
    family: str = "gaussian"
    bandwidth_rule: str = "manual"

    def __post_init__(self):
        if self.family != "gaussian":
            raise ValueError(f"unsupported kernel family: {self.family!r}")
        if not (self.bandwidth > 0 and np.isfinite(self.bandwidth)):
            raise ValueError("bandwidth must be a positive finite number")


def kernel_eval(spec: KernelSpec, x) -> np.ndarray:
    """Scaled kernel K_h(x) = K(x/h)/h with K the standard gaussian density."""
    h = spec.bandwidth
    u = np.asarray(x, dtype=float) / h
    return np.exp(-0.5 * u * u) / (h * SQRT_2PI)


def v_weight(spec: KernelSpec, s_ij) -> np.ndarray:
    """Relational weight K_h(s)/K_h(0); equals 1 at s = 0, decays with distance.

    For the gaussian kernel this is exp(-s^2 / (2 h^2)); +inf distances
    (sparse-file sentinels) get weight 0.
    """
    h = spec.bandwidth
    s = np.asarray(s_ij, dtype=float)
    with np.errstate(over="ignore"):
        return np.exp(-0.5 * np.square(s / h))


def silverman_bandwidth(values: np.ndarray) -> float:
    """Silverman's rule of thumb: 0.9 * min(sd, IQR/1.34) * n^(-1/5)."""
    x = np.asarray(values, dtype=float)
    sd = float(np.std(x, ddof=1))
    q75, q25 = np.percentile(x, [75, 25])
    a = min(sd, (q75 - q25) / 1.34)
    if a <= 0:
        a = sd
    return 0.9 * a * x.size ** (-0.2)


def _binned_pair_counts(x: np.ndarray, nb: int = 1000):
    """Bin the sample and count pairs by bin-index gap.

    Returns (d, cnt) where d is the bin width and cnt[k] is the number of
    unordered pairs whose bin indices differ by k (self-pairs excluded).
    """
    xmin = float(np.min(x))
    rang = (float(np.max(x)) - xmin) * 1.01
    d = rang / nb
    idx = np.minimum((x - xmin) // d, nb - 1).astype(np.intp)
    counts = np.bincount(idx, minlength=nb).astype(float)
    # cross-correlation of bin counts gives pair totals per gap
    cnt = np.correlate(counts, counts, mode="full")[nb - 1 :]
    cnt[0] = (cnt[0] - x.size) / 2.0
    return d, cnt


def _phi4_sum(n: int, d: float, cnt: np.ndarray, h: float) -> float:
    """Binned pairwise sum of the 4th gaussian derivative; estimates R(f'')."""
    delta2 = np.square(np.arange(cnt.size) * d / h)
    keep = delta2 < 1000.0  # cut deep underflow tail
    delta2 = delta2[keep]
    term = np.exp(-0.5 * delta2) * (delta2 * delta2 - 6.0 * delta2 + 3.0)
    total = 2.0 * float(term @ cnt[keep]) + 3.0 * n
    return total / (n * (n - 1) * h**5 * SQRT_2PI)


def _phi6_sum(n: int, d: float, cnt: np.ndarray, h: float) -> float:
    delta2 = np.square(np.arange(cnt.size) * d / h)
    keep = delta2 < 1000.0
    delta2 = delta2[keep]
    term = np.exp(-0.5 * delta2) * (
        delta2**3 - 15.0 * delta2 * delta2 + 45.0 * delta2 - 15.0
    )
    total = 2.0 * float(term @ cnt[keep]) - 15.0 * n
    return total / (n * (n - 1) * h**7 * SQRT_2PI)


def sheather_jones_bandwidth(
    values: np.ndarray, tol: float = 1e-6, max_iter: int = 50, nb: int = 1000
) -> float:
    """Sheather-Jones solve-the-equation plug-in bandwidth.

    Solves h = (R(K) / (n * SD(g(h))))^(1/5) by bisection, where SD is the
    binned pairwise estimate of the integrated squared density curvature and
    the pilot g(h) follows the usual two-stage plug-in recipe. Falls back to
    Silverman's rule (with a warning) when no bracket is found or bisection
    fails to converge within max_iter iterations.
    """
    x = np.asarray(values, dtype=float)
    n = x.size
    sd = float(np.std(x, ddof=1))
    q75, q25 = np.percentile(x, [75, 25])
    lam = min(1.349 * sd, q75 - q25)
    if lam <= 0:
        lam = 1.349 * sd

    d, cnt = _binned_pair_counts(x, nb=nb)
    a = 0.920 * lam * n ** (-1.0 / 7.0)
    b = 0.912 * lam * n ** (-1.0 / 9.0)
    TD = -_phi6_sum(n, d, cnt, b)
    SDa = _phi4_sum(n, d, cnt, a)
    if not (np.isfinite(TD) and TD > 0 and np.isfinite(SDa) and SDa > 0):
        warnings.warn("sheather-jones pilot estimates degenerate; using silverman")
        return silverman_bandwidth(x)
    alpha2_const = 1.357 * (SDa / TD) ** (1.0 / 7.0)
    c1 = 1.0 / (2.0 * np.sqrt(np.pi) * n)

    def fixed_point_gap(h):
        g = alpha2_const * h ** (5.0 / 7.0)
        sdg = _phi4_sum(n, d, cnt, g)
        if not (np.isfinite(sdg) and sdg > 0):
            return np.nan
        return (c1 / sdg) ** 0.2 - h

    hmax = 1.144 * sd * n ** (-0.2)
    lo, hi = 0.1 * hmax, hmax
    flo, fhi = fixed_point_gap(lo), fixed_point_gap(hi)
    tries = 0
    while not (np.isfinite(flo) and np.isfinite(fhi) and flo * fhi <= 0):
        lo /= 1.2
        hi *= 1.2
        flo, fhi = fixed_point_gap(lo), fixed_point_gap(hi)
        tries += 1
        if tries > 20:
            warnings.warn("sheather-jones bracket search failed; using silverman")
            return silverman_bandwidth(x)

    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fmid = fixed_point_gap(mid)
        if not np.isfinite(fmid):
            warnings.warn("sheather-jones iteration degenerate; using silverman")
            return silverman_bandwidth(x)
        if flo * fmid <= 0:
            hi = mid
        else:
            lo, flo = mid, fmid
        if hi - lo < tol:
            return 0.5 * (lo + hi)

    warnings.warn("sheather-jones did not converge; using silverman")
    return silverman_bandwidth(x)


def select_bandwidth(values, rule="sheather-jones", manual: float | None = None) -> float:
    """Pick a bandwidth from the sample by the named rule.

    rule: "manual" (returns `manual` as given), "silverman", or
    "sheather-jones" (the default; solve-the-equation variant).
    """
    if rule == "manual":
        if manual is None or manual <= 0:
            raise ValueError("manual rule requires a positive bandwidth")
        return float(manual)
    x = np.asarray(values, dtype=float)
    if x.size < 8:
        raise ValueError("need at least 8 values to select a bandwidth")
    if np.std(x, ddof=1) == 0:
        raise ValueError("zero-spread sample")
    if rule == "silverman":
        return silverman_bandwidth(x)
    if rule == "sheather-jones":
        return sheather_jones_bandwidth(x)
    raise ValueError(f"unknown bandwidth rule: {rule!r}")


@dataclass(frozen=True)
class Neighborhood:
    """Indices of the nearest hypotheses to a center, by distance-matrix column."""

    center: int
    members: np.ndarray

    @property
    def size(self) -> int:
        return self.members.size


def neighborhood_size(m: int, epsilon: float) -> int:
    """ceil(m^(1-eps)) capped at m-1; eps=0 keeps every other index."""
    return min(int(np.ceil(m ** (1.0 - epsilon))), m - 1)


def build_neighborhoods(S: DistanceMatrix, epsilon: float) -> list[Neighborhood]:
    """Nearest ceil(m^(1-eps)) indices for every row, ties broken by index.

    The stable row-wise argsort makes the member sets (and their order)
    deterministic even when distances tie exactly.
    """
    if not (0.0 <= epsilon < 1.0):
        raise ValueError("epsilon must lie in [0, 1)")
    m = S.m
    if m < 2:
        raise ValueError("need at least two hypotheses to form neighborhoods")
    k = neighborhood_size(m, epsilon)
    vals = S.values.copy()
    np.fill_diagonal(vals, np.inf)  # self never joins its own neighborhood
    order = np.argsort(vals, axis=1, kind="stable")[:, :k]
    return [Neighborhood(i, order[i]) for i in range(m)]


def neighborhood_matrix(nbhds: list[Neighborhood]) -> np.ndarray:
    """Stack equally sized member lists into an (m, k) index array."""
    return np.vstack([nb.members for nb in nbhds])
