"""Figure rendering for pipeline runs (file output only, Agg backend)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _date_ticks(ax, dates, n: int) -> None:
    if dates is None:
        return
    ticks = np.unique(np.linspace(0, n - 1, 6).astype(int))
    ax.set_xticks(ticks)
    ax.set_xticklabels([dates[t] for t in ticks], rotation=30, ha="right")


def save_forecast_figure(path, returns, var, es=None, dates=None, tau: float = 0.05):
    """Out-of-sample returns with the implied quantile and ES paths.

    ``var`` is in the positive loss convention; the plot shows -var so all
    series share return space.  Violations are marked.
    """
    returns = np.asarray(returns, dtype=float)
    var = np.asarray(var, dtype=float)
    n = returns.size
    x = np.arange(n)
    fig, ax = plt.subplots(figsize=(9, 4.5))
    ax.plot(x, returns, color="0.6", linewidth=0.6, label="return")
    ax.plot(x, -var, color="tab:red", linewidth=1.0, label=f"VaR ({tau:g})")
    if es is not None:
        ax.plot(x, np.asarray(es, dtype=float), color="tab:purple",
                linewidth=1.0, linestyle="--", label="ES")
    viol = returns < -var
    if viol.any():
        ax.plot(x[viol], returns[viol], "v", color="black", markersize=4,
                label="violation")
    _date_ticks(ax, dates, n)
    ax.set_ylabel("return")
    ax.legend(loc="upper left", frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_nic_figure(path, grid, mean, lo, hi):
    """Posterior news-impact curve with its credible band."""
    grid = np.asarray(grid, dtype=float)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.fill_between(grid, np.asarray(lo, float), np.asarray(hi, float),
                    color="tab:blue", alpha=0.25, label="95% band")
    ax.plot(grid, np.asarray(mean, float), color="tab:blue", linewidth=1.2,
            label="posterior mean")
    ax.set_xlabel("lagged return")
    ax.set_ylabel("news impact")
    ax.legend(loc="upper center", frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
