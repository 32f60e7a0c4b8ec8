"""Matplotlib figures rendered next to the delimited outputs."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

ARM_LABELS = {
    "bh": "BH",
    "latla_dd": "LATLA.DD",
    "latla_or": "LATLA.OR",
    "wbh": "WBH",
    "avg": "AVG",
    "external": "EXT",
}
ARM_COLORS = {
    "bh": "#555555",
    "latla_dd": "#d62728",
    "latla_or": "#1f77b4",
    "wbh": "#2ca02c",
    "avg": "#9467bd",
    "external": "#8c564b",
}

_RC = {
    "figure.dpi": 110,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "legend.frameon": False,
    "font.size": 10,
}


def plot_study(records, param_name, alpha, out_path):
    """FDR and power against the varied design parameter, one line per arm.

    `records` holds dicts with keys: param, arm, mean_fdr, se_fdr,
    mean_power, se_power (one per design point and arm).
    """
    arms = sorted({r["arm"] for r in records}, key=lambda a: list(ARM_LABELS).index(a))
    with plt.rc_context(_RC):
        fig, (ax_fdr, ax_pow) = plt.subplots(1, 2, figsize=(9.2, 3.6))
        for arm in arms:
            pts = sorted((r for r in records if r["arm"] == arm), key=lambda r: r["param"])
            x = [r["param"] for r in pts]
            color = ARM_COLORS.get(arm, "black")
            label = ARM_LABELS.get(arm, arm)
            ax_fdr.errorbar(
                x,
                [r["mean_fdr"] for r in pts],
                yerr=[r["se_fdr"] for r in pts],
                marker="o",
                ms=3.5,
                color=color,
                label=label,
            )
            ax_pow.errorbar(
                x,
                [r["mean_power"] for r in pts],
                yerr=[r["se_power"] for r in pts],
                marker="o",
                ms=3.5,
                color=color,
                label=label,
            )
        ax_fdr.axhline(alpha, color="black", ls="--", lw=0.8)
        ax_fdr.set_xlabel(param_name)
        ax_fdr.set_ylabel("FDR")
        ax_fdr.set_ylim(bottom=0)
        ax_pow.set_xlabel(param_name)
        ax_pow.set_ylabel("power")
        ax_pow.legend(loc="best")
        fig.tight_layout()
        fig.savefig(out_path)
        plt.close(fig)


def plot_analysis(p_values, weighted_p, rejections_by_alpha, out_path):
    """Weighted versus raw p-value histogram plus rejections per FDR level."""
    p_values = np.asarray(p_values)
    weighted_p = np.asarray(weighted_p)
    with plt.rc_context(_RC):
        fig, (ax_hist, ax_rej) = plt.subplots(1, 2, figsize=(9.2, 3.6))
        bins = np.linspace(0, 1, 41)
        ax_hist.hist(p_values, bins=bins, alpha=0.55, label="p", color="#555555")
        ax_hist.hist(
            weighted_p, bins=bins, alpha=0.55, label="weighted p", color="#d62728"
        )
        ax_hist.set_xlabel("p-value")
        ax_hist.set_ylabel("count")
        ax_hist.legend()
        levels = sorted(rejections_by_alpha)
        ax_rej.bar(
            range(len(levels)),
            [rejections_by_alpha[a] for a in levels],
            color="#1f77b4",
            width=0.6,
        )
        ax_rej.set_xticks(range(len(levels)), [f"{a:g}" for a in levels])
        ax_rej.set_xlabel("nominal FDR level")
        ax_rej.set_ylabel("rejections")
        fig.tight_layout()
        fig.savefig(out_path)
        plt.close(fig)
