"""Report figures rendered next to the delimited outputs.

Everything draws through the Agg backend so the command line tools can
save figures on headless machines.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from scipy.stats import norm

_DET_TICKS = [0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.4]


def _probit(p):
    return norm.ppf(np.clip(p, 1e-6, 1.0 - 1e-6))


def plot_det_curve(points, path, label=None):
    """Detection error tradeoff on normal-deviate axes."""
    p_fa = np.array([p[0] for p in points])
    p_miss = np.array([p[1] for p in points])
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    ax.plot(_probit(p_fa), _probit(p_miss), lw=1.2, label=label)
    ticks = _probit(np.array(_DET_TICKS))
    ax.set_xticks(ticks)
    ax.set_xticklabels(["%g" % (100 * t) for t in _DET_TICKS], fontsize=7)
    ax.set_yticks(ticks)
    ax.set_yticklabels(["%g" % (100 * t) for t in _DET_TICKS], fontsize=7)
    ax.set_xlim(ticks[0], ticks[-1])
    ax.set_ylim(ticks[0], ticks[-1])
    ax.set_xlabel("false alarm probability (%)")
    ax.set_ylabel("miss probability (%)")
    ax.grid(True, lw=0.3, alpha=0.6)
    if label:
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_sweep(values, eers, mindcfs, xlabel, path):
    """Operating-point trends over one swept parameter."""
    fig, ax1 = plt.subplots(figsize=(5.0, 3.4))
    ax1.plot(values, 100.0 * np.asarray(eers), "o-", color="tab:blue", lw=1.2)
    ax1.set_xlabel(xlabel)
    ax1.set_ylabel("EER (%)", color="tab:blue")
    ax1.tick_params(axis="y", labelcolor="tab:blue")
    ax2 = ax1.twinx()
    ax2.plot(values, mindcfs, "s--", color="tab:red", lw=1.2)
    ax2.set_ylabel("minDCF", color="tab:red")
    ax2.tick_params(axis="y", labelcolor="tab:red")
    ax1.grid(True, lw=0.3, alpha=0.6)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
