"""Static figure rendering for experiment results.

Figures are written as SVG with a fixed hash salt and no embedded date, so
repeated runs of the same experiment produce byte-identical files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "nmarreg"

import matplotlib.pyplot as plt
import numpy as np


def _save(fig, path):
    suffix = str(path).rsplit(".", 1)[-1].lower()
    metadata = {"Date": None} if suffix == "svg" else None
    fig.savefig(path, metadata=metadata)
    plt.close(fig)


def rate_plot(result, path) -> None:
    """Log-log medians of the integrated error against n, one line per
    estimator, with the fitted power law dashed alongside."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    config = result.config
    for name in config.estimators:
        ns = np.array(config.n_grid, dtype=float)
        meds = np.array([result.median(name, int(n)) for n in ns])
        keep = np.isfinite(meds) & (meds > 0)
        if not keep.any():
            continue
        (line,) = ax.loglog(ns[keep], meds[keep], "o-", label=name)
        fit = result.rate_fits.get(name)
        if fit is not None:
            grid = np.geomspace(ns[keep].min(), ns[keep].max(), 50)
            ax.loglog(
                grid,
                np.exp(fit.intercept) * grid ** fit.slope,
                "--",
                color=line.get_color(),
                alpha=0.6,
                label=f"{name}: slope {fit.slope:.2f}",
            )
    ax.set_xlabel("sample size n")
    ax.set_ylabel(f"median L{config.p:g} error")
    ax.set_title("Monte Carlo error vs sample size")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    _save(fig, path)


def risk_profile_plot(cover, risks, chosen_index, path) -> None:
    """Per-member empirical risk across an exponential cover."""
    gammas = cover.gammas
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    if np.isnan(gammas).any():
        xs = np.arange(len(risks))
        ax.set_xlabel("cover member index")
    else:
        xs = gammas
        ax.set_xlabel("exponent gamma")
    ax.plot(xs, risks, "o-", ms=3)
    ax.axvline(xs[chosen_index], color="crimson", ls="--", label="selected")
    ax.set_ylabel("inverse-weighted validation risk")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    _save(fig, path)
