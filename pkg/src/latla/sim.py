"""Seeded Monte-Carlo studies: four generative designs, procedure arms, scoring."""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import solve_triangular
from scipy.stats import norm
from threadpoolctl import threadpool_limits

from .core import (
    DistanceMatrix,
    GroundTruth,
    HypothesisBatch,
    TestOutcome,
    compute_fdp,
    compute_power,
    std_normal,
    student_t,
)
from .distances import AuxiliarySample, euclidean_distance, mahalanobis_distance
from .localstats import F_MIN, calibrate_tau, theoretical_pi_star
from .pipeline import LatlaFit, fit_local, run_latla
from .procedures import bh, wbh

DESIGNS = ("network", "regression", "latent", "multi-aux")
SIGNAL_PROB = 0.1
REGRESSION_DISTANCE_SCALE = 4.0
MULTI_AUX_DISTANCE_SCALE = 5.0


@dataclass(frozen=True)
class SimDesign:
    """One design point of a simulation study."""

    design: str
    m: int
    replications: int = 100
    alpha: float = 0.05
    seed: int = 2024
    epsilon: float = 0.1
    mu1: float | None = None  # network signal mean
    mu2: float | None = None  # network same-label distance mean
    n: int | None = None  # regression sample size
    K: int | None = None  # regression auxiliary study count
    mu: float | None = None  # regression / latent / multi-aux signal strength
    sigma: float | None = None  # regression auxiliary coefficient noise level (sd)
    sigma_s: float | None = None  # latent / multi-aux auxiliary noise scale
    informative: bool | None = None  # multi-aux setting switch

    def __post_init__(self):
        if self.design not in DESIGNS:
            raise ValueError(f"unknown design: {self.design!r}")
        if self.m < 2 or self.replications < 1:
            raise ValueError("m >= 2 and replications >= 1 required")
        if not (0 < self.alpha < 1):
            raise ValueError("alpha must lie in (0, 1)")
        needed = {
            "network": ("mu1", "mu2"),
            "regression": ("n", "K", "mu", "sigma"),
            "latent": ("mu", "sigma_s"),
            "multi-aux": ("mu", "sigma_s", "informative"),
        }[self.design]
        missing = [f for f in needed if getattr(self, f) is None]
        if missing:
            raise ValueError(f"{self.design} design needs {', '.join(missing)}")


def replicate_rng(seed: int, rep: int) -> np.random.Generator:
    """Counter-split generator: independent stream per (master seed, replicate)."""
    return np.random.default_rng(np.random.SeedSequence(entropy=(seed, rep)))


# ---------------------------------------------------------------------------
# generative models


def gen_network(m, mu1, mu2, rng):
    """Bernoulli(0.1) signals, unit-variance gaussian statistics, and pairwise
    distances whose mean is mu2 for same-label pairs and 1 otherwise."""
    theta = rng.random(m) < SIGNAL_PROB
    t = np.where(theta, mu1, 0.0) + rng.standard_normal(m)
    batch = HypothesisBatch.from_t(t, std_normal())
    iu = np.triu_indices(m, 1)
    means = np.where(theta[iu[0]] == theta[iu[1]], mu2, 1.0)
    vals = np.abs(means + math.sqrt(0.5) * rng.standard_normal(iu[0].size))
    S = np.zeros((m, m))
    S[iu] = vals
    S[iu[1], iu[0]] = vals
    return batch, DistanceMatrix(S), GroundTruth(theta.astype(int))


def _ols_t_stats(X, y):
    """t-statistics of an intercept-plus-slopes least-squares fit (QR route)."""
    n, m = X.shape
    D = np.concatenate([np.ones((n, 1)), X], axis=1)
    Q, R = np.linalg.qr(D)
    beta = solve_triangular(R, Q.T @ y, lower=False)
    resid = y - D @ beta
    df = n - m - 1
    sigma2 = float(resid @ resid) / df
    Rinv = solve_triangular(R, np.eye(m + 1), lower=False)
    se = np.sqrt(sigma2 * np.einsum("ij,ij->i", Rinv, Rinv))
    return (beta / se)[1:], df


def draw_signal_coefficients(m, mu, rng):
    """Sparse coefficient vector: zero with probability 0.9, otherwise
    (-1)^u |N(mu, 0.1)| with u ~ Bernoulli(0.2) (so mostly positive)."""
    nonzero = rng.random(m) < SIGNAL_PROB
    sign = np.where(rng.random(m) < 0.2, -1.0, 1.0)
    mags = np.abs(mu + math.sqrt(0.1) * rng.standard_normal(m))
    return np.where(nonzero, sign * mags, 0.0)


def gen_regression(m, n, K, mu, sigma, rng):
    """Primary OLS t-statistics plus K data-sharing auxiliary studies.

    Auxiliary coefficient vectors are the primary ones plus gaussian noise
    with standard deviation sigma (the "noise level") per coordinate, and
    the distance is the scaled Mahalanobis form over the auxiliary
    t-statistic rows.
    """
    if n < m + 2:
        raise ValueError("OLS underdetermined: need n >= m + 2")
    beta = draw_signal_coefficients(m, mu, rng)
    nonzero = beta != 0.0

    X = rng.standard_normal((n, m))
    y = X @ beta + rng.standard_normal(n)
    t, df = _ols_t_stats(X, y)
    batch = HypothesisBatch.from_t(t, student_t(df))

    aux_t = np.empty((m, K))
    for k in range(K):
        beta_k = beta + sigma * rng.standard_normal(m)
        Xk = rng.standard_normal((n, m))
        yk = Xk @ beta_k + rng.standard_normal(n)
        aux_t[:, k], _ = _ols_t_stats(Xk, yk)
    S = mahalanobis_distance(AuxiliarySample(aux_t), scale=REGRESSION_DISTANCE_SCALE)
    return batch, S, GroundTruth(nonzero.astype(int))


def gen_latent(m, mu, sigma_s, rng):
    """Shared latent means: Y_i ~ N(xi_i, 1) primary, X_i ~ N(xi_i, sigma_s^2)
    auxiliary, with xi_i zero for nulls and N(mu, 1) for signals."""
    theta = rng.random(m) < SIGNAL_PROB
    xi_latent = np.where(theta, mu + rng.standard_normal(m), 0.0)
    y = xi_latent + rng.standard_normal(m)
    x = xi_latent + sigma_s * rng.standard_normal(m)
    batch = HypothesisBatch.from_t(y, std_normal())
    aux = AuxiliarySample(x[:, None])
    return batch, aux, euclidean_distance(x), GroundTruth(theta.astype(int))


def gen_multi_aux(m, mu, sigma_s, informative, rng):
    """Four auxiliary samples around the latent means; in the non-informative
    setting the last two track an independent latent variable instead."""
    theta = rng.random(m) < SIGNAL_PROB
    xi_latent = np.where(theta, mu + rng.standard_normal(m), 0.0)
    y = xi_latent + rng.standard_normal(m)
    batch = HypothesisBatch.from_t(y, std_normal())
    cols = np.empty((m, 4))
    cols[:, 0] = xi_latent + sigma_s * rng.standard_normal(m)
    cols[:, 1] = xi_latent + sigma_s * rng.standard_normal(m)
    if informative:
        centers = xi_latent
    else:
        psi_theta = rng.random(m) < SIGNAL_PROB
        centers = np.where(psi_theta, mu + rng.standard_normal(m), 0.0)
    cols[:, 2] = centers + sigma_s * rng.standard_normal(m)
    cols[:, 3] = centers + sigma_s * rng.standard_normal(m)
    samples = [AuxiliarySample(cols[:, j : j + 1]) for j in range(4)]
    return batch, samples, GroundTruth(theta.astype(int))


# ---------------------------------------------------------------------------
# closed-form oracle for the latent design

SQRT_2PI = math.sqrt(2.0 * math.pi)


def _phi(z):
    return np.exp(-0.5 * z * z) / SQRT_2PI


class MixtureDensityEvaluator:
    """Two-component conditional density (1-q) N(0,1) + q N(m_i, s^2) per row."""

    def __init__(self, q, mean, s, f_min=F_MIN):
        self.q = np.asarray(q, dtype=float)
        self.mean = np.asarray(mean, dtype=float)
        self.s = float(s)
        self.f_min = f_min

    def _eval(self, q, mean, t):
        alt = _phi((t - mean) / self.s) / self.s
        return np.maximum((1.0 - q) * _phi(t) + q * alt, self.f_min)

    def at(self, rows, points):
        rows = np.atleast_1d(rows)
        t = np.atleast_1d(np.asarray(points, dtype=float))
        return self._eval(self.q[rows], self.mean[rows], t)

    def on_grid(self, rows, grid):
        rows = np.atleast_1d(rows)
        t = np.asarray(grid, dtype=float)[None, :]
        return self._eval(self.q[rows][:, None], self.mean[rows][:, None], t)


@dataclass(frozen=True)
class LatentModel:
    """Posterior quantities of the latent design given the auxiliary values.

    Conditional on X_i = x the signal probability is q_i, and the primary
    statistic is N(0,1) for a null or N(mean_i, s^2) for a signal, where
    (mean_i, s) come from the gaussian posterior of the latent mean.
    """

    mu: float
    sigma_s: float
    x: np.ndarray
    signal_prob: float = SIGNAL_PROB

    def posterior(self):
        x = np.asarray(self.x, dtype=float).ravel()
        var_s = self.sigma_s**2
        g0 = _phi(x / self.sigma_s) / self.sigma_s
        sd1 = math.sqrt(1.0 + var_s)
        g1 = _phi((x - self.mu) / sd1) / sd1
        q = self.signal_prob * g1 / ((1.0 - self.signal_prob) * g0 + self.signal_prob * g1)
        post_var = var_s / (1.0 + var_s)
        post_mean = (self.mu * var_s + x) / (1.0 + var_s)
        s = math.sqrt(1.0 + post_var)
        return q, post_mean, s

    def prob_p_above(self, tau: float) -> np.ndarray:
        """P(two-sided p-value > tau | X_i) under the conditional mixture."""
        q, mean, s = self.posterior()
        z_tau = norm.ppf(1.0 - tau / 2.0)
        central_alt = norm.cdf((z_tau - mean) / s) - norm.cdf((-z_tau - mean) / s)
        return (1.0 - q) * (1.0 - tau) + q * central_alt

    def density_evaluator(self) -> MixtureDensityEvaluator:
        q, mean, s = self.posterior()
        return MixtureDensityEvaluator(q, mean, s)


def fit_oracle_model(batch: HypothesisBatch, model: LatentModel, tau: float) -> LatlaFit:
    """Fit with the model-exact sparsity and density in place of kernel estimates."""
    pi_star = theoretical_pi_star(model, tau)
    return LatlaFit(batch, pi_star, model.density_evaluator(), tau)


# ---------------------------------------------------------------------------
# study harness

DEFAULT_ARMS = {
    "network": ("bh", "latla_dd"),
    "regression": ("bh", "latla_dd"),
    "latent": ("bh", "latla_dd", "latla_or", "wbh"),
    "multi-aux": ("bh", "latla_dd", "avg"),
}
ALL_ARMS = ("bh", "latla_dd", "latla_or", "wbh", "avg", "external")


def validate_arms(design: str, arms) -> tuple[str, ...]:
    arms = tuple(arms)
    for arm in arms:
        if arm not in ALL_ARMS:
            raise ValueError(f"unknown procedure arm: {arm!r}")
        if arm == "latla_or" and design != "latent":
            raise ValueError("latla_or is only defined for the latent design")
        if arm == "avg" and design != "multi-aux":
            raise ValueError("avg is only defined for the multi-aux design")
    return arms


@dataclass
class ArmStats:
    """Per-replicate traces and their aggregates for one procedure arm."""

    fdp: np.ndarray
    power: np.ndarray
    rejections: np.ndarray

    @property
    def mean_fdr(self) -> float:
        return float(np.mean(self.fdp))

    @property
    def se_fdr(self) -> float:
        r = self.fdp.size
        return float(np.std(self.fdp, ddof=1) / math.sqrt(r)) if r > 1 else 0.0

    @property
    def mean_power(self) -> float:
        return float(np.mean(self.power))

    @property
    def se_power(self) -> float:
        r = self.power.size
        return float(np.std(self.power, ddof=1) / math.sqrt(r)) if r > 1 else 0.0


@dataclass
class SimResult:
    design: SimDesign
    arms: dict[str, ArmStats]


def _score(outcome, truth):
    return compute_fdp(outcome, truth), compute_power(outcome, truth), outcome.k


def _replicate_scores(design: SimDesign, arms, rep: int, external_set=None):
    """All requested arms on one generated dataset; BLAS is pinned to one
    thread so results do not depend on how replicates are scheduled."""
    with threadpool_limits(limits=1):
        rng = replicate_rng(design.seed, rep)
        scores = {}
        aux_samples = None
        model = None
        if design.design == "network":
            batch, S, truth = gen_network(design.m, design.mu1, design.mu2, rng)
        elif design.design == "regression":
            batch, S, truth = gen_regression(
                design.m, design.n, design.K, design.mu, design.sigma, rng
            )
        elif design.design == "latent":
            batch, aux, S, truth = gen_latent(design.m, design.mu, design.sigma_s, rng)
            model = LatentModel(design.mu, design.sigma_s, aux.columns[:, 0])
        else:
            batch, aux_samples, truth = gen_multi_aux(
                design.m, design.mu, design.sigma_s, design.informative, rng
            )
            S = mahalanobis_distance(
                AuxiliarySample(np.hstack([a.columns for a in aux_samples])),
                scale=MULTI_AUX_DISTANCE_SCALE,
            )

        if "bh" in arms:
            scores["bh"] = _score(bh(batch.p_values, design.alpha), truth)

        fit = None
        if "latla_dd" in arms or "wbh" in arms:
            fit = fit_local(batch, S, epsilon=design.epsilon)
            outcome, wv = run_latla(fit, design.alpha)
            if "latla_dd" in arms:
                scores["latla_dd"] = _score(outcome, truth)
            if "wbh" in arms:
                scores["wbh"] = _score(wbh(batch.p_values, wv.w, design.alpha), truth)

        if "latla_or" in arms:
            tau = fit.tau if fit is not None else calibrate_tau(batch.p_values)
            or_fit = fit_oracle_model(batch, model, tau)
            outcome, _ = run_latla(or_fit, design.alpha)
            scores["latla_or"] = _score(outcome, truth)

        if "avg" in arms:
            x_avg = np.mean(np.hstack([a.columns for a in aux_samples]), axis=1)
            avg_fit = fit_local(batch, euclidean_distance(x_avg), epsilon=design.epsilon)
            outcome, _ = run_latla(avg_fit, design.alpha)
            scores["avg"] = _score(outcome, truth)

        if "external" in arms:
            rejected = np.zeros(batch.m, dtype=bool)
            if external_set is not None:
                idx = np.asarray(external_set, dtype=int)
                if idx.size and (idx.min() < 0 or idx.max() >= batch.m):
                    raise ValueError("external rejection index out of range")
                rejected[idx] = True
            scores["external"] = _score(
                TestOutcome(rejected, int(rejected.sum()), 0.0), truth
            )
        return rep, scores


def load_external_rejections(path) -> dict[int, np.ndarray]:
    """Parse a `replicate,index` CSV of third-party rejections per replicate."""
    sets: dict[int, list[int]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#") or line.lower().startswith("replicate"):
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected replicate,index")
            sets.setdefault(int(parts[0]), []).append(int(parts[1]))
    return {rep: np.asarray(sorted(idx), dtype=int) for rep, idx in sets.items()}


def run_study(
    design: SimDesign,
    procedures=None,
    n_jobs: int = 1,
    external_rejections=None,
) -> SimResult:
    """Run all replicates of one design point and aggregate FDP/power.

    Replicates use counter-split seeds and are reduced in replicate order,
    so the result is identical for any worker count.
    """
    arms = validate_arms(design.design, procedures or DEFAULT_ARMS[design.design])
    external = external_rejections
    if external is not None and not isinstance(external, dict):
        external = load_external_rejections(external)
    if "external" not in arms and external is not None:
        arms = arms + ("external",)

    reps = range(design.replications)
    ext_for = (lambda r: external.get(r)) if external is not None else (lambda r: None)
    if n_jobs > 1 and design.replications > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            results = dict(
                pool.map(
                    _replicate_scores,
                    [design] * design.replications,
                    [arms] * design.replications,
                    reps,
                    [ext_for(r) for r in reps],
                    chunksize=max(1, design.replications // (4 * n_jobs)),
                )
            )
    else:
        results = dict(_replicate_scores(design, arms, r, ext_for(r)) for r in reps)

    out = {}
    for arm in arms:
        triples = [results[r][arm] for r in reps]
        out[arm] = ArmStats(
            fdp=np.array([t[0] for t in triples]),
            power=np.array([t[1] for t in triples]),
            rejections=np.array([t[2] for t in triples]),
        )
    return SimResult(design, out)


# ---------------------------------------------------------------------------
# published study grids

STUDY_GRIDS = {
    ("network", 1): ("mu1", (2.5, 2.6, 2.7, 2.8, 2.9, 3.0), {"m": 1200, "mu2": 0.0}),
    ("network", 2): ("mu2", (0.0, 0.2, 0.4, 0.6, 0.8, 1.0), {"m": 1200, "mu1": 3.0}),
    ("regression", 1): (
        "sigma",
        (0.05, 0.06, 0.07, 0.08, 0.09, 0.1),
        {"m": 800, "n": 1000, "K": 3, "mu": 0.3},
    ),
    ("regression", 2): (
        "mu",
        (0.25, 0.275, 0.3, 0.325, 0.35),
        {"m": 800, "n": 1000, "K": 3, "sigma": 0.05},
    ),
    ("latent", 1): ("sigma_s", (0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0), {"m": 1200, "mu": 2.5}),
    ("latent", 2): ("mu", (3.0, 3.2, 3.4, 3.6, 3.8, 4.0), {"m": 1200, "sigma_s": 1.0}),
    ("multi-aux", 1): (
        "sigma_s",
        (0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0),
        {"m": 1200, "mu": 3.0, "informative": True},
    ),
    ("multi-aux", 2): (
        "sigma_s",
        (0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0),
        {"m": 1200, "mu": 3.0, "informative": False},
    ),
}


def design_points(
    design: str,
    setting: int,
    replications: int = 100,
    alpha: float = 0.05,
    seed: int = 2024,
    epsilon: float = 0.1,
    m: int | None = None,
) -> tuple[str, list[SimDesign]]:
    """The grid of design points for a published study setting.

    Returns (varied parameter name, design list). `m` overrides the grid's
    default problem size, which keeps smoke runs cheap.
    """
    key = (design, setting)
    if key not in STUDY_GRIDS:
        raise ValueError(f"no study grid for design={design!r} setting={setting}")
    param, values, fixed = STUDY_GRIDS[key]
    fixed = dict(fixed)
    if m is not None:
        fixed["m"] = m
    base = SimDesign(
        design=design,
        replications=replications,
        alpha=alpha,
        seed=seed,
        epsilon=epsilon,
        **{**fixed, param: values[0]},
    )
    return param, [replace(base, **{param: v}) for v in values]
