"""Figures for a finished run: angle time series and measured-vs-estimated scatter."""

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
}


def _timeseries(ax, cols):
    t = cols["t_s"]
    ax.plot(t, cols["theta_meas_deg"], color="tab:red", lw=1.0, label="measured")
    ax.plot(t, cols["theta_est_deg"], color="tab:blue", lw=0.8, label="estimated")
    val = cols["is_validation"]
    if val.any():
        ax.axvline(t[val][0], color="0.5", ls=":", lw=1.0)
    ax.set_xlabel("time [s]")
    ax.set_ylabel("joint angle [deg]")
    ax.legend(loc="upper right", frameon=False)


def _scatter(ax, cols):
    val = cols["is_validation"]
    m, e = cols["theta_meas_deg"][val], cols["theta_est_deg"][val]
    lo = float(min(m.min(), e.min()))
    hi = float(max(m.max(), e.max()))
    ax.plot([lo, hi], [lo, hi], color="0.5", ls=":", lw=1.0)
    ax.scatter(m, e, s=3, color="tab:blue")
    ax.set_xlabel("measured [deg]")
    ax.set_ylabel("estimated [deg]")
    ax.set_aspect("equal")


def render_figures(cols, out_dir):
    """Save ``timeseries.png`` and, when there is a validation segment, ``scatter.png``."""
    paths = {}
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(7.0, 2.6))
        _timeseries(ax, cols)
        fig.tight_layout()
        p = os.path.join(out_dir, "timeseries.png")
        fig.savefig(p)
        plt.close(fig)
        paths["timeseries_png"] = p

        if np.any(cols["is_validation"]):
            fig, ax = plt.subplots(figsize=(3.2, 3.2))
            _scatter(ax, cols)
            fig.tight_layout()
            p = os.path.join(out_dir, "scatter.png")
            fig.savefig(p)
            plt.close(fig)
            paths["scatter_png"] = p
    return paths
