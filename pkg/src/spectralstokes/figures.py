"""Matplotlib figure rendering for the CLI report paths.

Figures are written next to their CSV companions; everything uses the Agg
backend so runs work headless.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def save_loglog(path, x, series, xlabel, ylabel, title="", guide_slopes=()):
    """Log-log plot of one or more series with optional slope guide lines."""
    fig, ax = plt.subplots(figsize=(5.0, 3.8))
    x = list(x)
    for label, y in series.items():
        ax.loglog(x, y, "o-", label=label)
    for slope in guide_slopes:
        y0 = next(iter(series.values()))[0]
        guide = [y0 * (xi / x[0]) ** slope for xi in x]
        ax.loglog(x, guide, "k--", alpha=0.5, label=f"slope {slope:g}")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(Path(path), dpi=150)
    plt.close(fig)
    return Path(path)


def save_series(path, t, series, xlabel="t", ylabel="value", title=""):
    """Line plot of time series (e.g. boundary flow rates)."""
    fig, ax = plt.subplots(figsize=(5.0, 3.8))
    for label, y in series.items():
        ax.plot(t, y, label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(Path(path), dpi=150)
    plt.close(fig)
    return Path(path)


def save_profiles(path, coord, profiles, xlabel, ylabel, title=""):
    """Velocity profiles against a wall-normal/radial coordinate."""
    fig, ax = plt.subplots(figsize=(5.0, 3.8))
    for label, y in profiles.items():
        ax.plot(coord, y, label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(Path(path), dpi=150)
    plt.close(fig)
    return Path(path)
