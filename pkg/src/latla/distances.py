"""Distance-matrix builders over auxiliary data, plus file ingestion."""

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import cholesky, solve_triangular
from scipy.stats import rankdata

from .core import DistanceMatrix


@dataclass(frozen=True)
class AuxiliarySample:
    """Source-domain statistics, one K-vector per hypothesis (shape (m, K))."""

    columns: np.ndarray
    kind: str = "continuous"

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.columns, dtype=float))
        if x.ndim != 2:
            raise ValueError("columns must form a 2-D (m, K) array")
        if x.shape[0] == 1 and x.shape[1] > 1 and np.asarray(self.columns).ndim == 1:
            x = x.T  # a single 1-D column arrived as a row
        if not np.all(np.isfinite(x)):
            raise ValueError("auxiliary values must be finite")
        object.__setattr__(self, "columns", x)
        if self.kind not in ("continuous", "ld-correlation"):
            raise ValueError(f"unknown auxiliary kind: {self.kind!r}")

    @property
    def m(self) -> int:
        return self.columns.shape[0]

    @property
    def K(self) -> int:
        return self.columns.shape[1]


def _finish(S: np.ndarray) -> DistanceMatrix:
    # kill float asymmetry and the occasional -1e-17 from cancellation
    S = 0.5 * (S + S.T)
    np.clip(S, 0.0, None, out=S)
    np.fill_diagonal(S, 0.0)
    return DistanceMatrix(S)


def euclidean_distance(x: np.ndarray) -> DistanceMatrix:
    """Absolute differences |x_i - x_j| of a single auxiliary column."""
    x = np.asarray(x, dtype=float).ravel()
    return _finish(np.abs(x[:, None] - x[None, :]))


def mahalanobis_distance(aux: AuxiliarySample, scale: float) -> DistanceMatrix:
    """Scaled Mahalanobis distances (X_i - X_j)' Cov^-1 (X_i - X_j) / scale.

    Cov is the sample covariance of the m auxiliary rows. A singular
    covariance gets one ridge repair (1e-8 * trace / K on the diagonal);
    if it stays singular the sample is rejected.
    """
    if scale <= 0:
        raise ValueError("scale must be positive")
    X = aux.columns
    if X.shape[0] < 2:
        raise ValueError("need at least two rows for a sample covariance")
    cov = np.atleast_2d(np.cov(X, rowvar=False, ddof=1))
    try:
        L = cholesky(cov, lower=True)
    except np.linalg.LinAlgError:
        cov = cov + np.eye(aux.K) * (1e-8 * np.trace(cov) / aux.K)
        try:
            L = cholesky(cov, lower=True)
        except np.linalg.LinAlgError:
            raise np.linalg.LinAlgError("auxiliary covariance is singular even after ridge")
    Z = solve_triangular(L, X.T, lower=True).T
    sq = np.einsum("ij,ij->i", Z, Z)
    S = (sq[:, None] + sq[None, :] - 2.0 * (Z @ Z.T)) / scale
    return _finish(S)


def ld_distance(r: np.ndarray, scale: float = 1.0) -> DistanceMatrix:
    """Distance (1 - r_ij^2) / scale from a correlation matrix."""
    if scale <= 0:
        raise ValueError("scale must be positive")
    r = np.asarray(r, dtype=float)
    if r.ndim != 2 or r.shape[0] != r.shape[1]:
        raise ValueError("correlation matrix must be square")
    if np.any(np.abs(r) > 1.0) or not np.all(np.isfinite(r)):
        raise ValueError("correlations must lie in [-1, 1]")
    return _finish((1.0 - r * r) / scale)


def rank_distance(x: np.ndarray) -> DistanceMatrix:
    """Gaps |F(x_i) - F(x_j)| of the empirical CDF (average ranks over m)."""
    x = np.asarray(x, dtype=float).ravel()
    F = rankdata(x, method="average") / x.size
    return _finish(np.abs(F[:, None] - F[None, :]))


def load_distance_matrix(path, fmt: str = "auto", m: int | None = None) -> DistanceMatrix:
    """Read a distance matrix from disk.

    dense-csv: a header line `m=<int>` followed by m comma-separated rows.
    triplet:   lines `i,j,value` with 0-based indices; mirrors are filled in
               and unlisted pairs become +inf (treated as maximally distant).
    fmt="auto" sniffs the header line.
    """
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        first = fh.readline()
    if fmt == "auto":
        fmt = "dense-csv" if first.strip().startswith("m=") else "triplet"
    if fmt == "dense-csv":
        return _load_dense(path, m)
    if fmt == "triplet":
        return _load_triplet(path, m)
    raise ValueError(f"unknown distance format: {fmt!r}")


def _load_dense(path: Path, m_expected: int | None) -> DistanceMatrix:
    with path.open("r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header.startswith("m="):
            raise ValueError("dense-csv file must start with an m=<int> header")
        m = int(header[2:])
        S = np.loadtxt(fh, delimiter=",", ndmin=2)
    if S.shape != (m, m):
        raise ValueError(f"dense matrix shape {S.shape} does not match m={m}")
    if m_expected is not None and m != m_expected:
        raise ValueError(f"distance matrix has m={m}, expected {m_expected}")
    if not np.all(np.isfinite(S)):
        raise ValueError("dense distance entries must be finite")
    if np.any(S < 0):
        raise ValueError("negative distance entry")
    if np.max(np.abs(S - S.T)) > 1e-9:
        raise ValueError("asymmetric dense distance matrix")
    if np.max(np.abs(np.diag(S))) > 1e-9:
        raise ValueError("dense distance matrix has a nonzero diagonal")
    return _finish(S)


def _load_triplet(path: Path, m_expected: int | None) -> DistanceMatrix:
    ii, jj, vv = [], [], []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: expected i,j,value")
            i, j, v = int(parts[0]), int(parts[1]), float(parts[2])
            if i < 0 or j < 0:
                raise ValueError(f"{path}:{lineno}: negative index")
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{path}:{lineno}: distances must be finite and nonnegative")
            if i == j:
                if v != 0.0:
                    raise ValueError(f"{path}:{lineno}: nonzero diagonal entry")
                continue
            ii.append(i)
            jj.append(j)
            vv.append(v)
    if not ii:
        raise ValueError("triplet file lists no off-diagonal entries")
    m = max(max(ii), max(jj)) + 1
    if m_expected is not None:
        if m > m_expected:
            raise ValueError(f"triplet index exceeds declared m={m_expected}")
        m = m_expected
    S = np.full((m, m), np.inf)
    for i, j, v in zip(ii, jj, vv):
        for a, b in ((i, j), (j, i)):
            if np.isfinite(S[a, b]) and abs(S[a, b] - v) > 1e-9:
                raise ValueError(f"conflicting entries for pair ({i},{j})")
            S[a, b] = v
    np.fill_diagonal(S, 0.0)
    return DistanceMatrix(S)
