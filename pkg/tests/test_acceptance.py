"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s`. The simulation-backed
criteria share session-scoped studies; the whole module takes roughly ten
minutes on two cores.
"""

import os
import time

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.stats import norm

from latla.core import HypothesisBatch, std_normal
from latla.distances import AuxiliarySample, mahalanobis_distance
from latla.kernels import KernelSpec, build_neighborhoods, kernel_eval
from latla.localstats import XI, estimate_pi, theoretical_pi_star
from latla.pipeline import fit_local, fit_weights
from latla.procedures import bh, latla_threshold
from latla.sim import (
    LatentModel,
    MixtureDensityEvaluator,
    SimDesign,
    design_points,
    gen_latent,
    replicate_rng,
    run_study,
)
from latla.weights import oracle_weights

N_JOBS = min(4, os.cpu_count() or 1)
SEED = 20260810
ALPHA = 0.05
FDR_BOUND = 0.065


def report(criterion, ok, detail):
    print(f"\nACCEPTANCE {criterion} {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, f"criterion {criterion}: {detail}"


def run_grid(design_name, setting, arms, reps):
    param, points = design_points(
        design_name, setting, replications=reps, alpha=ALPHA, seed=SEED
    )
    return param, {
        getattr(pt, param): run_study(pt, procedures=arms, n_jobs=N_JOBS)
        for pt in points
    }


@pytest.fixture(scope="session")
def network_setting1():
    t0 = time.perf_counter()
    param, studies = run_grid("network", 1, ("bh", "latla_dd"), reps=100)
    return studies, time.perf_counter() - t0


@pytest.fixture(scope="session")
def latent_setting1():
    _, studies = run_grid("latent", 1, ("bh", "latla_dd", "latla_or", "wbh"), reps=100)
    return studies


@pytest.fixture(scope="session")
def latent_setting2():
    _, studies = run_grid("latent", 2, ("bh", "latla_or"), reps=100)
    return studies


def test_criterion_1_bh_reduction_equivalence():
    rng = np.random.default_rng(SEED)
    t0 = time.perf_counter()
    mismatches = 0
    for m in (1, 2, 10, 100):
        for _ in range(250):
            p = rng.random(m)
            out = latla_threshold(p, np.ones(m), np.zeros(m), ALPHA)
            if not np.array_equal(out.rejected, bh(p, ALPHA).rejected):
                mismatches += 1
    elapsed = time.perf_counter() - t0
    report(
        1,
        mismatches == 0 and elapsed < 5.0,
        f"unit-weight rule vs BH on 1000 vectors: {mismatches} mismatches, "
        f"{elapsed:.2f}s (< 5s)",
    )


def test_criterion_2_network_fdr_control(network_setting1):
    studies, elapsed = network_setting1
    worst = max(res.arms["latla_dd"].mean_fdr for res in studies.values())
    ok = worst <= FDR_BOUND and elapsed < 600.0
    report(
        2,
        ok,
        f"network Setting 1 (R=100): max LATLA.DD mean FDP {worst:.4f} <= "
        f"{FDR_BOUND}, study runtime {elapsed:.0f}s (< 600s)",
    )


def test_criterion_3_network_power_dominance(network_setting1):
    studies, _ = network_setting1
    gaps = {
        mu1: res.arms["latla_dd"].mean_power - res.arms["bh"].mean_power
        for mu1, res in studies.items()
    }
    ok = gaps[3.0] >= 0.02 and all(g >= 0 for g in gaps.values())
    report(
        3,
        ok,
        "network Setting 1 power gap LATLA.DD - BH: "
        + ", ".join(f"mu1={k:g}: {v:+.3f}" for k, v in sorted(gaps.items()))
        + " (need >= +0.02 at mu1=3, >= 0 everywhere)",
    )


def test_criterion_4_noninformative_distances_still_help():
    pt = SimDesign(
        design="network", m=1200, replications=200, alpha=ALPHA, seed=SEED,
        mu1=3.0, mu2=1.0,
    )
    res = run_study(pt, procedures=("bh", "latla_dd"), n_jobs=N_JOBS)
    dd, base = res.arms["latla_dd"], res.arms["bh"]
    ok = dd.mean_power >= base.mean_power and dd.mean_fdr <= FDR_BOUND
    report(
        4,
        ok,
        f"network mu2=1 (R=200): LATLA.DD power {dd.mean_power:.3f} >= BH "
        f"{base.mean_power:.3f}, FDR {dd.mean_fdr:.4f} <= {FDR_BOUND}",
    )


def test_criterion_5_sparsity_estimate_converges():
    reps = 50
    mse = {}
    for m in (300, 600, 1200):
        per_rep = []
        for rep in range(reps):
            rng = replicate_rng(SEED + 1, rep)
            batch, aux, S, _ = gen_latent(m, 3.0, 1.0, rng)
            fit = fit_local(batch, S, epsilon=0.1)
            pi_star = theoretical_pi_star(
                LatentModel(3.0, 1.0, aux.columns[:, 0]), fit.tau
            )
            per_rep.append(float(np.mean((fit.pi - pi_star) ** 2)))
        mse[m] = float(np.mean(per_rep))
    ok = mse[300] > mse[600] > mse[1200]
    report(
        5,
        ok,
        "latent mu=3 sigma_s=1, mean (pi - pi*)^2 over 50 replicates: "
        + ", ".join(f"m={m}: {v:.5f}" for m, v in mse.items())
        + " (strictly decreasing)",
    )


def test_criterion_6_oracle_power_dominance(latent_setting1, latent_setting2):
    rows = []
    ok = True
    for label, studies in (("sigma_s", latent_setting1), ("mu", latent_setting2)):
        for val, res in sorted(studies.items()):
            orc, base = res.arms["latla_or"], res.arms["bh"]
            good = orc.mean_power >= base.mean_power and orc.mean_fdr <= FDR_BOUND
            ok = ok and good
            rows.append(
                f"{label}={val:g}: OR {orc.mean_power:.3f}/BH {base.mean_power:.3f}"
                f" fdr {orc.mean_fdr:.3f}"
            )
    report(6, ok, "latent grids (R=100), LATLA.OR vs BH power and OR FDR: " + "; ".join(rows))


def test_criterion_7_wbh_conservative(latent_setting1):
    ok = True
    rows = []
    for val, res in sorted(latent_setting1.items()):
        w, dd = res.arms["wbh"], res.arms["latla_dd"]
        bound = dd.mean_fdr + 2 * dd.se_fdr
        good = w.mean_fdr <= bound
        ok = ok and good
        rows.append(f"sigma_s={val:g}: WBH {w.mean_fdr:.4f} <= {bound:.4f}")
    report(7, ok, "latent Setting 1 (R=100), WBH FDP vs LATLA.DD + 2SE: " + "; ".join(rows))


def test_criterion_8_multi_aux_robustness():
    pt = SimDesign(
        design="multi-aux", m=1200, replications=100, alpha=ALPHA, seed=SEED,
        mu=3.0, sigma_s=2.0, informative=False,
    )
    res = run_study(pt, procedures=("bh", "latla_dd", "avg"), n_jobs=N_JOBS)
    dd, avg = res.arms["latla_dd"], res.arms["avg"]
    ok = (
        dd.mean_power >= avg.mean_power
        and dd.mean_fdr <= FDR_BOUND
        and avg.mean_fdr <= FDR_BOUND
    )
    report(
        8,
        ok,
        f"multi-aux Setting 2, sigma_s=2 (R=100): LATLA power {dd.mean_power:.3f} "
        f">= AVG {avg.mean_power:.3f}; FDRs {dd.mean_fdr:.4f}/{avg.mean_fdr:.4f}"
        f" <= {FDR_BOUND}",
    )


def test_criterion_9_invariant_suite():
    t0 = time.perf_counter()
    rng = np.random.default_rng(SEED + 2)
    checks = []

    # oracle weights stay inside [xi, 1 - xi] on a realistic batch
    batch, aux, S, _ = gen_latent(400, 3.0, 1.0, replicate_rng(SEED, 0))
    fit = fit_local(batch, S, epsilon=0.1)
    wv = fit_weights(fit, ALPHA)
    checks.append(("weight bounds", bool(np.all((wv.w >= XI) & (wv.w <= 1 - XI)))))

    # leave-one-out: perturbing p_i alone never moves pi_i
    nbhds = build_neighborhoods(S, 0.1)
    kernel = fit.kernel
    pi_base = estimate_pi(batch, S, nbhds, kernel, fit.tau)
    loo_ok = True
    for i in range(0, 400, 37):
        p2 = batch.p_values.copy()
        p2[i] = 0.5 if p2[i] != 0.5 else 0.9
        batch2 = HypothesisBatch(batch.t_stats, p2, batch.null_spec)
        pi_pert = estimate_pi(batch2, S, nbhds, kernel, fit.tau)
        loo_ok = loo_ok and pi_base[i] == pi_pert[i]
    checks.append(("leave-one-out pi", loo_ok))

    # distance builders: symmetry and permutation equivariance
    X = rng.standard_normal((60, 3))
    M = mahalanobis_distance(AuxiliarySample(X), scale=2.0).values
    perm = rng.permutation(60)
    M_perm = mahalanobis_distance(AuxiliarySample(X[perm]), scale=2.0).values
    sym = np.array_equal(M, M.T) and np.allclose(M_perm, M[np.ix_(perm, perm)], atol=1e-10)
    checks.append(("distance symmetry/equivariance", bool(sym)))

    # tie handling: exactly tied weighted p-values reject as a block, stably
    p = np.array([0.012, 0.012, 0.012, 0.9, 0.95])
    out1 = latla_threshold(p, np.ones(5), np.zeros(5), ALPHA)
    out2 = latla_threshold(p, np.ones(5), np.zeros(5), ALPHA)
    ties_ok = out1.k == 3 and np.array_equal(out1.rejected, out2.rejected)
    checks.append(("tie-handling determinism", ties_ok))

    # identical results for any worker count
    d = SimDesign(design="latent", m=150, replications=4, alpha=ALPHA, seed=SEED,
                  mu=3.0, sigma_s=1.0)
    serial = run_study(d, procedures=("bh", "latla_dd"), n_jobs=1)
    threaded = run_study(d, procedures=("bh", "latla_dd"), n_jobs=2)
    same = all(
        np.array_equal(serial.arms[a].fdp, threaded.arms[a].fdp)
        and np.array_equal(serial.arms[a].power, threaded.arms[a].power)
        for a in serial.arms
    )
    checks.append(("seed determinism across worker counts", same))

    elapsed = time.perf_counter() - t0
    ok = all(flag for _, flag in checks) and elapsed < 120.0
    report(
        9,
        ok,
        "; ".join(f"{name}: {'ok' if flag else 'FAIL'}" for name, flag in checks)
        + f"; runtime {elapsed:.1f}s (< 120s)",
    )


def test_criterion_10_numerical_oracles():
    rng = np.random.default_rng(SEED + 3)

    # mahalanobis against a per-pair explicit solve
    X = rng.standard_normal((50, 3)) @ (rng.standard_normal((3, 3)) + np.eye(3))
    got = mahalanobis_distance(AuxiliarySample(X), scale=4.0).values
    cov = np.cov(X, rowvar=False, ddof=1)
    want = np.zeros_like(got)
    for i in range(50):
        d = X[i] - X
        want[i] = np.einsum("ij,ij->i", d, np.linalg.solve(cov, d.T).T) / 4.0
    mahal_ok = np.allclose(got, want, rtol=1e-8, atol=1e-10)

    # rejection-threshold search against a 1e6-point brute-force grid
    q, mean, s, pi_val, L_k = 0.3, 2.0, 1.0, 0.3, 0.4
    density = MixtureDensityEvaluator(np.full(1, q), np.full(1, mean), s, f_min=0.0)
    batch = HypothesisBatch.from_t(np.array([1.0]), std_normal())
    wv = oracle_weights(batch, np.full(1, pi_val), density, L_k=L_k)
    grid = np.linspace(0.0, 10.0, 1_000_001)
    f = (1 - q) * norm.pdf(grid) + q * norm.pdf((grid - mean) / s) / s
    ratio = (1 - pi_val) * norm.pdf(grid) / f
    t_brute = grid[np.argmax(ratio <= L_k)]
    t_impl = norm.isf(wv.w[0])
    search_ok = abs(t_impl - t_brute) <= 1e-5

    # gaussian kernel moment conditions by quadrature
    spec = KernelSpec(1.0)
    mass, _ = quad(lambda x: kernel_eval(spec, x), -10, 10)
    mean_k, _ = quad(lambda x: x * kernel_eval(spec, x), -10, 10)
    second, _ = quad(lambda x: x * x * kernel_eval(spec, x), -10, 10)
    kernel_ok = abs(mass - 1) < 1e-6 and abs(mean_k) < 1e-8 and abs(second - 1) < 1e-6

    report(
        10,
        mahal_ok and search_ok and kernel_ok,
        f"mahalanobis-vs-solve: {'ok' if mahal_ok else 'FAIL'}; "
        f"threshold search |{t_impl:.6f} - {t_brute:.6f}| <= 1e-5: "
        f"{'ok' if search_ok else 'FAIL'}; kernel quadrature: "
        f"{'ok' if kernel_ok else 'FAIL'}",
    )
