"""Report figures rendered next to the delimited outputs.

Three figure kinds mirror the usual presentation of extrapolated analyses:
survival curves (posterior mean with a 95% band, follow-up end marked, an
optional empirical step overlay), the matching hazard panel, and the density
of a per-draw estimand such as life-years gained.
"""

from __future__ import annotations

import warnings

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .data import KaplanMeierCurve
from .extrapolate import ExtrapolatedCurve

_BAND_ALPHA = 0.18


def _plot_band(ax, grid, values, label, color=None):
    mean = values.mean(axis=0)
    lo, hi = np.percentile(values, [2.5, 97.5], axis=0)
    (line,) = ax.plot(grid, mean, label=label, color=color)
    ax.fill_between(grid, lo, hi, alpha=_BAND_ALPHA, color=line.get_color())
    return line


def plot_survival(
    curves: dict[str, ExtrapolatedCurve],
    path,
    km: KaplanMeierCurve | None = None,
    km_label: str = "empirical",
) -> None:
    """Posterior survival bands per curve, with t* and an optional KM overlay."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    t_star = None
    for label, curve in curves.items():
        _plot_band(ax, curve.grid, curve.survival, label)
        t_star = curve.t_star if t_star is None else t_star
    if km is not None and km.times.size:
        ax.step(
            np.concatenate([[0.0], km.times]),
            np.concatenate([[1.0], km.survival]),
            where="post",
            linestyle=":",
            color="black",
            label=km_label,
        )
    if t_star is not None:
        ax.axvline(t_star, color="gray", linewidth=0.8)
    ax.set_xlabel("time")
    ax.set_ylabel("survival probability")
    ax.set_ylim(0.0, 1.02)
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_hazard(
    curves: dict[str, ExtrapolatedCurve],
    path,
    empirical: tuple[np.ndarray, np.ndarray] | None = None,
) -> None:
    """Posterior hazard bands per curve; optionally overlays a kernel estimate."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    t_star = None
    finite_max = 0.0
    for label, curve in curves.items():
        values = np.where(np.isfinite(curve.hazard), curve.hazard, np.nan)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)  # all-nan t = 0 column
            mean = np.nanmean(values, axis=0)
            lo, hi = np.nanpercentile(values, [2.5, 97.5], axis=0)
        (line,) = ax.plot(curve.grid, mean, label=label)
        ax.fill_between(curve.grid, lo, hi, alpha=_BAND_ALPHA, color=line.get_color())
        finite_max = max(finite_max, np.nanmax(hi[np.isfinite(hi)], initial=0.0))
        t_star = curve.t_star if t_star is None else t_star
    if empirical is not None:
        ax.plot(empirical[0], empirical[1], linestyle=":", color="black", label="empirical")
    if t_star is not None:
        ax.axvline(t_star, color="gray", linewidth=0.8)
    if finite_max > 0:
        ax.set_ylim(0.0, 1.1 * finite_max)
    ax.set_xlabel("time")
    ax.set_ylabel("hazard")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_estimand_density(values: np.ndarray, path, label: str = "life-years gained") -> None:
    """Smoothed density of per-draw estimand values with the mean marked."""
    values = np.asarray(values, dtype=float)
    fig, ax = plt.subplots(figsize=(6, 4))
    if np.ptp(values) > 0:
        from scipy.stats import gaussian_kde

        kde = gaussian_kde(values)
        xs = np.linspace(values.min(), values.max(), 400)
        ax.plot(xs, kde(xs))
        ax.fill_between(xs, kde(xs), alpha=_BAND_ALPHA)
    else:
        ax.hist(values, bins=1)
    ax.axvline(values.mean(), color="black", linewidth=1.0)
    ax.set_xlabel(label)
    ax.set_ylabel("posterior density")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
