"""Report figures. Rendering goes through the Agg backend straight to PNG files."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# no Software tag, so identical data gives identical bytes
_PNG_META = {"Software": None}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, format="png", dpi=100, metadata=_PNG_META)
    plt.close(fig)
    return path


def plot_regret_slope(path, horizons, mean_regret, slope, intercept, target, title=""):
    fig, ax = plt.subplots(figsize=(5.5, 4))
    T = np.asarray(horizons, dtype=float)
    ax.loglog(T, mean_regret, "o", label="mean cumulative regret")
    ax.loglog(T, np.exp(intercept) * T**slope, "-", label=f"fit, slope {slope:.3f}")
    ref = mean_regret[0] * (T / T[0]) ** target
    ax.loglog(T, ref, "--", color="grey", label=f"T^{target:.3g}")
    ax.set_xlabel("horizon T")
    ax.set_ylabel("R_T")
    ax.set_title(title)
    ax.legend(frameon=False)
    return _save(fig, path)


def plot_gamma(path, T, gamma, cumvar, title=""):
    fig, ax = plt.subplots(figsize=(5.5, 4))
    ax.loglog(T, 4 * np.asarray(gamma), "o-", label="4 gamma_T (greedy)")
    ax.loglog(T, cumvar, "s-", label="mean sum k_{t-1}(x_t, x_t)")
    ax.set_xlabel("T")
    ax.set_title(title)
    ax.legend(frameon=False)
    return _save(fig, path)


def plot_saturation(path, fractions, title=""):
    """One line per run: saturated share of the probe grid against the round."""
    fig, ax = plt.subplots(figsize=(5.5, 4))
    for label, frac in fractions:
        ax.plot(np.arange(1, len(frac) + 1), frac, lw=0.8, label=label)
    ax.set_xlabel("round t")
    ax.set_ylabel("saturated fraction")
    ax.set_ylim(0, 1)
    ax.set_title(title)
    if len(fractions) <= 8:
        ax.legend(frameon=False, fontsize="small")
    return _save(fig, path)


def plot_identity(path, errors, conditions, title=""):
    fig, ax = plt.subplots(figsize=(5.5, 4))
    err = np.maximum(np.asarray(errors), 1e-18)
    ax.loglog(conditions, err, ".")
    ax.set_xlabel("condition number")
    ax.set_ylabel("relative error")
    ax.set_title(title)
    return _save(fig, path)
