"""Command-line entry points for data analysis and simulation studies."""

import argparse
import csv
import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .core import HypothesisBatch, std_normal, student_t
from .distances import load_distance_matrix
from .pipeline import fit_local, run_latla
from .plots import plot_analysis, plot_study
from .sim import DEFAULT_ARMS, DESIGNS, design_points, run_study, validate_arms


class ConfigError(Exception):
    """Invalid configuration; maps to exit code 1."""


@dataclass
class RunConfig:
    """Fully resolved invocation parameters; echoed into every output file."""

    mode: str
    out: str = "latla-out"
    alpha: list = field(default_factory=lambda: [0.05])
    epsilon: float = 0.1
    xi: float = 1e-5
    tau: str = "bh0.8"
    bandwidth: str = "sheather-jones"
    weights: str = "oracle"
    # analyze
    stats: str | None = None
    dist: str | None = None
    dist_format: str = "auto"
    null: str = "normal"
    df: float | None = None
    # simulate
    design: str | None = None
    setting: int = 1
    reps: int = 100
    seed: int = 2024
    jobs: int = 1
    m: int | None = None
    arms: list | None = None
    external: str | None = None
    traces: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="latla",
        description="Locally adaptive transfer-learning multiple testing.",
    )
    sub = parser.add_subparsers(dest="mode", required=True)

    pa = sub.add_parser("analyze", help="run the weighted procedure on data files")
    pa.add_argument("--stats", help="CSV of primary statistics (id,t or id,p)")
    pa.add_argument("--dist", help="distance-matrix file (dense-csv or triplet)")
    pa.add_argument("--dist-format", choices=["auto", "dense-csv", "triplet"])
    pa.add_argument("--alpha", help="nominal FDR level(s), comma separated")
    pa.add_argument("--eps", type=float, help="neighborhood exponent (default 0.1)")
    pa.add_argument("--xi", type=float, help="weight clipping constant (default 1e-5)")
    pa.add_argument("--tau", help="screening threshold: bh0.8 or a fixed value")
    pa.add_argument("--bandwidth", help="sheather-jones | silverman | <number>")
    pa.add_argument("--weights", choices=["oracle", "sparsity"])
    pa.add_argument("--null", choices=["normal", "t"], help="null family (default normal)")
    pa.add_argument("--df", type=float, help="degrees of freedom for the t null")
    pa.add_argument("--out", help="output directory")
    pa.add_argument("--config", help="YAML config file; flags override its values")

    ps = sub.add_parser("simulate", help="run a published simulation study grid")
    ps.add_argument("--design", help="|".join(DESIGNS))
    ps.add_argument("--setting", type=int, help="study setting number (1 or 2)")
    ps.add_argument("--reps", type=int, help="replicates per design point (default 100)")
    ps.add_argument("--seed", type=int, help="master seed (default 2024)")
    ps.add_argument("--alpha", help="nominal FDR level (default 0.05)")
    ps.add_argument("--eps", type=float)
    ps.add_argument("--m", type=int, help="override the grid's problem size")
    ps.add_argument("--arms", help="comma-separated procedure arms")
    ps.add_argument("--external", help="replicate,index CSV of external rejections")
    ps.add_argument("--jobs", type=int, help="parallel worker processes (default 1)")
    ps.add_argument("--traces", action="store_true", help="write per-replicate traces")
    ps.add_argument("--out", help="output directory")
    ps.add_argument("--config", help="YAML config file; flags override its values")
    return parser


def _load_config_file(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed config file: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a key/value mapping")
    return data


def _parse_alphas(spec) -> list:
    if isinstance(spec, (int, float)):
        spec = str(spec)
    if isinstance(spec, (list, tuple)):
        vals = [float(v) for v in spec]
    else:
        vals = [float(tok) for tok in str(spec).split(",") if tok.strip()]
    if not vals or any(not (0 < a < 1) for a in vals):
        raise ConfigError("alpha levels must lie in (0, 1)")
    return vals


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Merge flags over config-file values over defaults, then validate."""
    file_vals = _load_config_file(args.config) if getattr(args, "config", None) else {}
    cfg = RunConfig(mode=args.mode)

    def pick(name, flag_name=None):
        flag = getattr(args, flag_name or name, None)
        if flag is not None and flag is not False:
            return flag
        if name in file_vals:
            return file_vals[name]
        return getattr(cfg, name)

    cfg.out = str(pick("out"))
    cfg.alpha = _parse_alphas(pick("alpha"))
    cfg.epsilon = float(pick("epsilon", "eps"))
    if not (0 <= cfg.epsilon < 1):
        raise ConfigError("eps must lie in [0, 1)")

    if args.mode == "analyze":
        cfg.xi = float(pick("xi"))
        if not (0 < cfg.xi < 0.5):
            raise ConfigError("xi must lie in (0, 0.5)")
        cfg.tau = str(pick("tau"))
        if cfg.tau != "bh0.8":
            try:
                tau_val = float(cfg.tau)
            except ValueError:
                raise ConfigError("tau must be bh0.8 or a number in (0, 1)")
            if not (0 < tau_val < 1):
                raise ConfigError("fixed tau must lie in (0, 1)")
        cfg.bandwidth = str(pick("bandwidth"))
        if cfg.bandwidth not in ("sheather-jones", "silverman"):
            try:
                if float(cfg.bandwidth) <= 0:
                    raise ValueError
            except ValueError:
                raise ConfigError("bandwidth must be sheather-jones, silverman, or > 0")
        cfg.weights = str(pick("weights"))
        if cfg.weights not in ("oracle", "sparsity"):
            raise ConfigError("weights must be oracle or sparsity")
        cfg.null = str(pick("null"))
        cfg.df = pick("df")
        if cfg.null == "t" and (cfg.df is None or float(cfg.df) <= 0):
            raise ConfigError("t null requires --df > 0")
        cfg.stats = pick("stats")
        cfg.dist = pick("dist")
        cfg.dist_format = str(pick("dist_format"))
        if not cfg.stats or not cfg.dist:
            raise ConfigError("analyze requires --stats and --dist")
        for path in (cfg.stats, cfg.dist):
            if not Path(path).exists():
                raise ConfigError(f"input file not found: {path}")
    else:
        cfg.design = pick("design")
        if cfg.design not in DESIGNS:
            raise ConfigError(f"design must be one of {', '.join(DESIGNS)}")
        cfg.setting = int(pick("setting"))
        cfg.reps = int(pick("reps"))
        cfg.seed = int(pick("seed"))
        cfg.jobs = int(pick("jobs"))
        cfg.m = pick("m")
        if cfg.m is not None:
            cfg.m = int(cfg.m)
        if len(cfg.alpha) != 1:
            raise ConfigError("simulate takes a single alpha level")
        if cfg.reps < 1 or cfg.jobs < 1:
            raise ConfigError("reps and jobs must be positive")
        arms = pick("arms")
        if arms is not None and not isinstance(arms, (list, tuple)):
            arms = [tok.strip() for tok in str(arms).split(",") if tok.strip()]
        try:
            cfg.arms = (
                list(validate_arms(cfg.design, arms))
                if arms
                else list(DEFAULT_ARMS[cfg.design])
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        cfg.external = pick("external")
        if cfg.external is not None and not Path(cfg.external).exists():
            raise ConfigError(f"external rejections file not found: {cfg.external}")
        cfg.traces = bool(pick("traces"))
    return cfg


# ---------------------------------------------------------------------------
# analyze


def _read_stats_file(path, null_spec):
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError("empty statistics file")
        cols = [c.strip().lower() for c in header]
        if "id" not in cols or not ({"t", "p"} & set(cols)):
            raise ValueError("statistics file needs an id column and t and/or p")
        idx = {c: cols.index(c) for c in cols}
        ids, t_vals, p_vals = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or not "".join(row).strip():
                continue
            try:
                ids.append(row[idx["id"]].strip())
                if "t" in idx:
                    t_vals.append(float(row[idx["t"]]))
                if "p" in idx:
                    p_vals.append(float(row[idx["p"]]))
            except (ValueError, IndexError) as exc:
                raise ValueError(f"{path}:{lineno}: malformed row") from exc
    if not ids:
        raise ValueError("statistics file lists no hypotheses")
    if t_vals:
        batch = HypothesisBatch.from_t(np.array(t_vals), null_spec)
        if p_vals:
            drift = np.max(np.abs(np.array(p_vals) - batch.p_values))
            if drift > 1e-6:
                print(
                    f"warning: file p-values differ from recomputed ones by {drift:.2e};"
                    " using the t-statistics",
                    file=sys.stderr,
                )
        return ids, batch
    return ids, HypothesisBatch.from_p(np.array(p_vals), null_spec)


def _write_decisions(path, config_line, ids, batch, wv, pi, pw, outcome):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(config_line)
        fh.write("id,p,weight,pi,weighted_p,rejected\n")
        for i, name in enumerate(ids):
            fh.write(
                f"{name},{batch.p_values[i]:.12g},{wv.w[i]:.12g},"
                f"{pi[i]:.12g},{pw[i]:.12g},{str(bool(outcome.rejected[i])).lower()}\n"
            )


def cmd_analyze(cfg: RunConfig) -> int:
    null_spec = std_normal() if cfg.null == "normal" else student_t(float(cfg.df))
    ids, batch = _read_stats_file(cfg.stats, null_spec)
    S = load_distance_matrix(cfg.dist, fmt=cfg.dist_format, m=batch.m)

    fixed_tau = None if cfg.tau == "bh0.8" else float(cfg.tau)
    if cfg.bandwidth in ("sheather-jones", "silverman"):
        rule, manual = cfg.bandwidth, None
    else:
        rule, manual = "manual", float(cfg.bandwidth)
    fit = fit_local(
        batch, S, epsilon=cfg.epsilon, tau=fixed_tau, bandwidth_rule=rule,
        bandwidth=manual, xi=cfg.xi,
    )

    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    config_json = json.dumps(cfg.to_dict(), sort_keys=True)
    config_line = f"# config: {config_json}\n"

    summary = {
        "config": cfg.to_dict(),
        "m": batch.m,
        "tau": fit.tau,
        "bandwidth": fit.kernel.bandwidth,
        "pi_clip_count": fit.estimates.clip_count,
        "underflow_count": fit.estimates.underflow_count,
        "levels": {},
    }
    rejections = {}
    last_pw = None
    for alpha in cfg.alpha:
        outcome, wv = run_latla(fit, alpha, scheme=cfg.weights, xi=cfg.xi)
        pw = np.minimum(batch.p_values / wv.w, 1.0)
        last_pw = pw
        name = out_dir / f"decisions_alpha{alpha:g}.csv"
        _write_decisions(name, config_line, ids, batch, wv, fit.pi, pw, outcome)
        summary["levels"][f"{alpha:g}"] = {
            "k": outcome.k,
            "threshold": outcome.threshold,
            "degenerate_weights": bool(wv.degenerate),
            "decisions_file": name.name,
        }
        rejections[alpha] = outcome.k
        print(f"alpha={alpha:g}: rejected {outcome.k} of {batch.m}")

    with open(out_dir / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    plot_analysis(batch.p_values, last_pw, rejections, out_dir / "analysis.png")
    return 0


# ---------------------------------------------------------------------------
# simulate


def cmd_simulate(cfg: RunConfig) -> int:
    param, points = design_points(
        cfg.design,
        cfg.setting,
        replications=cfg.reps,
        alpha=cfg.alpha[0],
        seed=cfg.seed,
        epsilon=cfg.epsilon,
        m=cfg.m,
    )
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    config_json = json.dumps(cfg.to_dict(), sort_keys=True)

    records = []
    traces = []
    for point in points:
        res = run_study(
            point, procedures=cfg.arms, n_jobs=cfg.jobs, external_rejections=cfg.external
        )
        for arm, stats in res.arms.items():
            records.append(
                {
                    "param": getattr(point, param),
                    "arm": arm,
                    "mean_fdr": stats.mean_fdr,
                    "se_fdr": stats.se_fdr,
                    "mean_power": stats.mean_power,
                    "se_power": stats.se_power,
                }
            )
            if cfg.traces:
                for rep in range(point.replications):
                    traces.append(
                        (
                            getattr(point, param),
                            arm,
                            rep,
                            stats.fdp[rep],
                            stats.power[rep],
                            int(stats.rejections[rep]),
                        )
                    )

    stem = f"{cfg.design.replace('-', '_')}_setting{cfg.setting}"
    results_path = out_dir / f"results_{stem}.csv"
    with open(results_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# config: {config_json}\n")
        fh.write(f"design,setting,{param},procedure,mean_fdr,se_fdr,mean_power,se_power,R\n")
        for r in records:
            fh.write(
                f"{cfg.design},{cfg.setting},{r['param']:g},{r['arm']},"
                f"{r['mean_fdr']:.12g},{r['se_fdr']:.12g},"
                f"{r['mean_power']:.12g},{r['se_power']:.12g},{cfg.reps}\n"
            )
    if cfg.traces:
        with open(out_dir / f"traces_{stem}.csv", "w", encoding="utf-8", newline="\n") as fh:
            fh.write(f"# config: {config_json}\n")
            fh.write(f"{param},procedure,replicate,fdp,power,rejections\n")
            for row in traces:
                fh.write(
                    f"{row[0]:g},{row[1]},{row[2]},{row[3]:.12g},{row[4]:.12g},{row[5]}\n"
                )

    figure_path = out_dir / f"fdr_power_{stem}.png"
    plot_study(records, param, cfg.alpha[0], figure_path)

    print(f"design={cfg.design} setting={cfg.setting} alpha={cfg.alpha[0]:g} R={cfg.reps}")
    print(f"{param:>10s} {'procedure':<10s} {'mean_fdr':>9s} {'se_fdr':>8s} "
          f"{'mean_power':>11s} {'se_power':>9s}")
    for r in records:
        print(
            f"{r['param']:>10.4g} {r['arm']:<10s} {r['mean_fdr']:>9.4f} "
            f"{r['se_fdr']:>8.4f} {r['mean_power']:>11.4f} {r['se_power']:>9.4f}"
        )
    print(f"results written to {results_path}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    try:
        if cfg.mode == "analyze":
            return cmd_analyze(cfg)
        return cmd_simulate(cfg)
    except (OSError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
