"""Kernel-weighted local sparsity and local density estimates over neighborhoods."""

from dataclasses import dataclass

import numpy as np

from .core import DistanceMatrix, HypothesisBatch
from .kernels import KernelSpec, Neighborhood, kernel_eval, neighborhood_matrix, v_weight

# Robustness floor/ceiling constant shared by the weighting pipeline.
XI = 1e-5
# Density floor; keeps the lfdr-style ratio finite without disturbing ranking.
F_MIN = 1e-10


@dataclass
class LocalEstimates:
    """Per-hypothesis local sparsity pi_i and density f_i(t_i) plus bookkeeping."""

    pi: np.ndarray
    f_at_t: np.ndarray
    tau: float
    clip_count: int
    underflow_count: int


def calibrate_tau(p_values: np.ndarray, level: float = 0.8) -> float:
    """Screening threshold: the BH step-up cutoff on the raw p-values at `level`.

    Falls back to 0.5 when BH rejects nothing (or the cutoff is degenerate
    at zero), so the indicator screen always has a usable threshold.
    """
    p = np.asarray(p_values, dtype=float)
    m = p.size
    p_sorted = np.sort(p, kind="stable")
    ok = p_sorted <= level * np.arange(1, m + 1) / m
    if not ok.any():
        return 0.5
    tau = float(p_sorted[np.nonzero(ok)[0][-1]])
    if tau <= 0.0:
        return 0.5
    return tau


def _gather_v(S: DistanceMatrix, nb_idx: np.ndarray, kernel: KernelSpec) -> np.ndarray:
    rows = np.arange(nb_idx.shape[0])[:, None]
    return v_weight(kernel, S.values[rows, nb_idx])


def estimate_pi(
    batch: HypothesisBatch,
    S: DistanceMatrix,
    nbhds: list[Neighborhood],
    kernel: KernelSpec,
    tau: float,
    xi: float = XI,
) -> np.ndarray:
    """Local sparsity pi_i, clipped to [0, 1 - xi].

    The raw estimate compares the kernel-weighted count of neighborhood
    p-values above tau with the count a pure-null neighborhood would give;
    the hypothesis' own p-value never enters (leave-one-out by construction).
    """
    pi, _, _ = _pi_with_counts(batch, S, nbhds, kernel, tau, xi)
    return pi


def _pi_with_counts(batch, S, nbhds, kernel, tau, xi):
    if not (0.0 < tau < 1.0):
        raise ValueError("tau must lie in (0, 1)")
    nb_idx = neighborhood_matrix(nbhds)
    V = _gather_v(S, nb_idx, kernel)
    above = batch.p_values[nb_idx] > tau
    vsum = V.sum(axis=1)
    num = (V * above).sum(axis=1)
    underflow = vsum <= 0.0
    raw = np.zeros(batch.m)
    np.divide(num, (1.0 - tau) * vsum, out=raw, where=~underflow)
    raw = np.where(underflow, 0.0, 1.0 - raw)
    pi = np.clip(raw, 0.0, 1.0 - xi)
    clip_count = int(np.sum(pi != raw))
    return pi, clip_count, int(underflow.sum())


class KernelDensityEvaluator:
    """Evaluates the relational kernel density f_i(t) for rows of a batch.

    `at` does direct elementwise evaluation; `on_grid` evaluates whole rows
    against a shared grid through one dense matrix product.
    """

    def __init__(self, batch, S, nbhds, kernel, f_min: float = F_MIN):
        self.kernel = kernel
        self.f_min = f_min
        self._t = batch.t_stats
        self._nb_idx = neighborhood_matrix(nbhds)
        self._V = _gather_v(S, self._nb_idx, kernel)
        self._vsum = self._V.sum(axis=1)
        self._W_norm = None

    @property
    def underflow_rows(self) -> np.ndarray:
        return self._vsum <= 0.0

    def at(self, rows: np.ndarray, points: np.ndarray) -> np.ndarray:
        rows = np.atleast_1d(rows)
        pts = np.atleast_1d(np.asarray(points, dtype=float))
        V = self._V[rows]
        tj = self._t[self._nb_idx[rows]]
        kh = kernel_eval(self.kernel, tj - pts[:, None])
        num = np.einsum("ij,ij->i", V, kh)
        vsum = self._vsum[rows]
        f = np.zeros(rows.size)
        np.divide(num, vsum, out=f, where=vsum > 0)
        return np.maximum(f, self.f_min)

    def _dense_weights(self) -> np.ndarray:
        if self._W_norm is None:
            m = self._t.size
            W = np.zeros((m, m))
            np.put_along_axis(W, self._nb_idx, self._V, axis=1)
            denom = np.where(self._vsum > 0, self._vsum, 1.0)
            self._W_norm = W / denom[:, None]
        return self._W_norm

    def on_grid(self, rows: np.ndarray, grid: np.ndarray) -> np.ndarray:
        W = self._dense_weights()[np.atleast_1d(rows)]
        phi = kernel_eval(self.kernel, self._t[:, None] - np.asarray(grid)[None, :])
        return np.maximum(W @ phi, self.f_min)


def estimate_density(
    batch: HypothesisBatch,
    S: DistanceMatrix,
    nbhds: list[Neighborhood],
    kernel: KernelSpec,
    t: float,
    i: int,
    f_min: float = F_MIN,
) -> float:
    """Relational density estimate f_i(t), floored at f_min."""
    ev = KernelDensityEvaluator(batch, S, nbhds, kernel, f_min=f_min)
    return float(ev.at(np.array([i]), np.array([t]))[0])


def local_estimates(
    batch: HypothesisBatch,
    S: DistanceMatrix,
    nbhds: list[Neighborhood],
    kernel: KernelSpec,
    tau: float,
    xi: float = XI,
    f_min: float = F_MIN,
) -> LocalEstimates:
    """Bundle pi_i and f_i(t_i) for a batch, tracking clip/underflow counts."""
    pi, clip_count, underflow = _pi_with_counts(batch, S, nbhds, kernel, tau, xi)
    ev = KernelDensityEvaluator(batch, S, nbhds, kernel, f_min=f_min)
    f_at_t = ev.at(np.arange(batch.m), batch.t_stats)
    return LocalEstimates(pi, f_at_t, tau, clip_count, underflow)


def theoretical_pi_star(ctx, tau: float) -> np.ndarray:
    """Theoretical local sparsity 1 - P(P_i > tau | side info) / (1 - tau).

    Only generative-model contexts that expose `prob_p_above(tau)` (the
    conditional chance of a p-value exceeding tau given the side
    information) can evaluate this; anything else raises.
    """
    if ctx is None or not hasattr(ctx, "prob_p_above"):
        raise TypeError("theoretical sparsity needs a generative-model context")
    prob = np.asarray(ctx.prob_p_above(tau), dtype=float)
    return np.clip(1.0 - prob / (1.0 - tau), 0.0, 1.0)
