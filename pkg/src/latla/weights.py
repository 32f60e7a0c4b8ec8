"""Per-hypothesis p-value weights: sparsity-adaptive and oracle-assisted schemes."""

from dataclasses import dataclass

import numpy as np

from .core import HypothesisBatch
from .localstats import XI


@dataclass
class WeightVector:
    """Weights w_i with the scheme that produced them.

    Oracle-scheme weights live in [xi, 1-xi]; sparsity-scheme weights are
    pi/(1-pi) floored at xi. `degenerate` flags an oracle run whose lfdr
    threshold admitted no hypothesis, collapsing every weight to xi.
    """

    w: np.ndarray
    scheme: str
    L_threshold: float | None = None
    degenerate: bool = False


def sparsity_weights(pi: np.ndarray, xi: float = XI) -> WeightVector:
    """Odds-style weights w_i = pi_i / (1 - pi_i), floored at xi."""
    pi = np.asarray(pi, dtype=float)
    if np.any((pi < 0) | (pi > 1 - xi)):
        raise ValueError("pi must lie in [0, 1 - xi]")
    w = np.maximum(pi / (1.0 - pi), xi)
    return WeightVector(w, "sparsity")


def lfdr_stats(pi: np.ndarray, f_at_t: np.ndarray, batch: HypothesisBatch) -> np.ndarray:
    """Ranking statistic L_i = (1 - pi_i) f0(t_i) / f_i(t_i); not truncated at 1."""
    f_at_t = np.asarray(f_at_t, dtype=float)
    if np.any(f_at_t <= 0):
        raise ValueError("f_at_t must be strictly positive")
    return (1.0 - np.asarray(pi, dtype=float)) * batch.null_spec.f0(batch.t_stats) / f_at_t


def oracle_threshold(L: np.ndarray, alpha: float) -> tuple[int, float, bool]:
    """Largest k whose running mean of sorted L values stays at or below alpha.

    Returns (k, L_(k), degenerate). When even the smallest L exceeds alpha
    the threshold is degenerate: k = 0 and the reported cutoff sits just
    below min(L) so no rejection region can open.
    """
    if not (0.0 < alpha < 1.0):
        raise ValueError("alpha must lie in (0, 1)")
    Ls = np.sort(np.asarray(L, dtype=float), kind="stable")
    means = np.cumsum(Ls) / np.arange(1, Ls.size + 1)
    hits = np.nonzero(means <= alpha)[0]
    if hits.size == 0:
        return 0, float(Ls[0]) - 1e-8, True
    k = int(hits[-1]) + 1
    return k, float(Ls[k - 1]), False


def _scan_first_hit(rows, grid, ratio_on_grid, L_k, chunk=512):
    """Index of the first grid point where the ratio drops to L_k, else -1."""
    hit = np.full(rows.size, -1, dtype=np.intp)
    pending = np.arange(rows.size)
    start = 0
    while start < grid.size and pending.size:
        stop = min(start + chunk, grid.size)
        sub = ratio_on_grid(rows[pending], grid[start:stop])
        ok = sub <= L_k
        found = ok.any(axis=1)
        hit[pending[found]] = start + np.argmax(ok[found], axis=1)
        pending = pending[~found]
        start = stop
    return hit


def _bisect_boundary(rows, bad, good, ratio_at, L_k, tol, max_iter=60):
    """Shrink (bad, good) brackets onto the crossing; returns the satisfying end."""
    bad = bad.copy()
    good = good.copy()
    for _ in range(max_iter):
        wide = np.abs(good - bad) > tol
        if not wide.any():
            break
        mid = 0.5 * (bad + good)
        ok = ratio_at(rows[wide], mid[wide]) <= L_k
        good[wide] = np.where(ok, mid[wide], good[wide])
        bad[wide] = np.where(ok, bad[wide], mid[wide])
    return good


def oracle_weights(
    batch: HypothesisBatch,
    pi: np.ndarray,
    density,
    L_k: float,
    degenerate: bool = False,
    xi: float = XI,
    t_max: float = 10.0,
    grid_points: int = 4001,
    bisect_tol: float = 1e-8,
) -> WeightVector:
    """Weights from coordinate-specific rejection thresholds on the lfdr ratio.

    For t_i >= 0 the threshold is the first t >= 0 where
    (1 - pi_i) f0(t) / f_i(t) falls to L_k, found by a monotone grid scan
    refined with bisection, and the weight is the null tail mass beyond it;
    the t_i < 0 branch mirrors this on the negative axis. Rows whose ratio
    never reaches L_k on the search range get the floor weight xi, as does
    everything when the threshold is degenerate.

    `density` must expose `on_grid(rows, grid)` and `at(rows, points)`;
    any evaluator with those two methods works (kernel-based or closed form).
    """
    m = batch.m
    w = np.full(m, xi)
    if degenerate:
        return WeightVector(w, "oracle", L_k, True)

    pi = np.asarray(pi, dtype=float)
    null = batch.null_spec

    def ratio_on_grid(rows, grid):
        return (1.0 - pi[rows])[:, None] * null.f0(grid)[None, :] / density.on_grid(rows, grid)

    def ratio_at(rows, pts):
        return (1.0 - pi[rows]) * null.f0(pts) / density.at(rows, pts)

    for sign in (1.0, -1.0):
        rows = np.nonzero(batch.t_stats >= 0 if sign > 0 else batch.t_stats < 0)[0]
        if rows.size == 0:
            continue
        grid = sign * np.linspace(0.0, t_max, grid_points)
        hit = _scan_first_hit(rows, grid, ratio_on_grid, L_k)
        at_zero = hit == 0
        crossing = np.zeros(rows.size)
        inner = hit > 0
        if inner.any():
            crossing[inner] = _bisect_boundary(
                rows[inner], grid[hit[inner] - 1], grid[hit[inner]], ratio_at, L_k, bisect_tol
            )
        resolved = at_zero | inner
        if sign > 0:
            w[rows[resolved]] = null.sf0(crossing[resolved])
        else:
            w[rows[resolved]] = null.F0(crossing[resolved])

    return WeightVector(np.clip(w, xi, 1.0 - xi), "oracle", L_k, False)
