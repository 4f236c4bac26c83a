"""File outputs for experiments: delimited tables, JSON reports, figures.

Figures use the Agg backend so rendering works headless; every writer takes
an explicit path and creates parent directories as needed.
"""

from __future__ import annotations

import json
import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .experiment import SlopeFit, SweepResult


def _ensure_parent(path: str) -> None:
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)


def write_slope_json(fit: SlopeFit, path: str) -> None:
    """Slope-fit report as a JSON document."""
    _ensure_parent(path)
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(fit.to_json_dict(), handle, indent=2, sort_keys=True)
        handle.write("\n")


def write_bound_csv(points: list[tuple[int, float, float]], path: str) -> None:
    """Upper-bound curve rows: sample size, bound, bound minus n times entropy."""
    _ensure_parent(path)
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write("n,bound,bound_minus_nS\n")
        for n, bound, centered in points:
            handle.write(f"{n},{bound!r},{centered!r}\n")


def plot_sweep(result: SweepResult, fit: SlopeFit, path: str) -> None:
    """Scatter of per-cell F_n - n S_n with the fitted line and the bound slope."""
    _ensure_parent(path)
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ns = np.array([row.n for row in result.rows])
    devs = np.array([row.f_minus_n_sn for row in result.rows])
    ax.scatter(ns, devs, s=14, alpha=0.6, label="replications")
    grid = np.linspace(np.log(ns.min()), np.log(ns.max()), 50)
    ax.plot(
        np.exp(grid),
        fit.lambda_hat * grid + fit.intercept,
        "r-",
        label=f"fit: {fit.lambda_hat:.2f} log n + {fit.intercept:.2f}",
    )
    ax.plot(
        np.exp(grid),
        fit.lambda_bound * grid + fit.intercept,
        "k--",
        label=f"bound slope {fit.lambda_bound:g}",
    )
    ax.set_xscale("log")
    ax.set_xlabel("n")
    ax.set_ylabel(r"$\hat F_n - n S_n$")
    ax.legend(fontsize=8)
    ax.set_title("free energy vs sample size")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_bound_curve(points: list[tuple[int, float, float]], lam: float, path: str) -> None:
    """Upper-bound curve against the lambda log n reference line."""
    _ensure_parent(path)
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ns = np.array([p[0] for p in points], dtype=float)
    centered = np.array([p[2] for p in points])
    ax.plot(ns, centered, "o-", label="volume bound - nS")
    anchor = centered[0] - lam * np.log(ns[0])
    ax.plot(ns, lam * np.log(ns) + anchor, "k--", label=f"slope {lam:g} reference")
    ax.set_xscale("log")
    ax.set_xlabel("n")
    ax.set_ylabel("bound - nS")
    ax.legend(fontsize=8)
    ax.set_title("volume upper bound")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
