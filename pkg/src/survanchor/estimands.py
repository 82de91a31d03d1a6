"""Mean survival, restricted mean survival, and life-years gained.

All integrals use the trapezoidal rule on the curve grid.  Mean survival
integrates each draw until its survival first falls below the "effectively
zero" threshold (default 1e-4, configurable); draws that never reach it are
integrated to the grid end and flagged as restricted.  Life-years gained is
the per-draw difference of the two areas taken to the later of the two
cut-offs, which pairs draw j of one curve with draw j of the other.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .extrapolate import ExtrapolatedCurve

DEFAULT_ZERO_THRESHOLD = 1e-4


@dataclass(frozen=True)
class EstimandResult:
    """Per-draw values of one estimand plus its posterior summary."""

    name: str
    values: np.ndarray   # (draws,)
    t_max: np.ndarray    # (draws,) integration end per draw
    units: str
    restricted_draws: int = 0  # draws whose survival never became effectively zero

    @property
    def mean(self) -> float:
        return float(self.values.mean())

    @property
    def sd(self) -> float:
        return float(self.values.std(ddof=1)) if self.values.size > 1 else 0.0

    def percentile(self, q) -> float:
        return float(np.percentile(self.values, q))

    def summary(self) -> dict:
        return {
            "name": self.name,
            "mean": self.mean,
            "sd": self.sd,
            "q2.5": self.percentile(2.5),
            "q50": self.percentile(50),
            "q97.5": self.percentile(97.5),
            "units": self.units,
            "t_max": float(self.t_max.max()),
            "restricted_draws": self.restricted_draws,
            "n_draws": int(self.values.size),
        }


def trapezoid_integral(values, grid) -> float:
    """Trapezoid sum of sampled values over a strictly increasing grid."""
    grid = np.asarray(grid, dtype=float)
    values = np.asarray(values, dtype=float)
    if grid.ndim != 1 or grid.size != values.size:
        raise ValueError("grid and values must be 1-d and equal length")
    if np.any(np.diff(grid) <= 0.0):
        raise ValueError("grid must be strictly increasing")
    if not np.all(np.isfinite(values)):
        raise ValueError("values must be finite")
    return float(np.trapezoid(values, grid))


def _cumulative_trapezoid(curve: ExtrapolatedCurve) -> np.ndarray:
    """(draws, T) running integral of survival along the grid."""
    s = curve.survival
    dt = np.diff(curve.grid)
    inner = np.cumsum(0.5 * (s[:, 1:] + s[:, :-1]) * dt[None, :], axis=1)
    return np.concatenate([np.zeros((s.shape[0], 1)), inner], axis=1)


def _cutoff_index(curve: ExtrapolatedCurve, threshold: float) -> tuple[np.ndarray, np.ndarray]:
    """Per draw, the first grid index where survival < threshold (grid end if never)."""
    below = curve.survival < threshold
    has = below.any(axis=1)
    idx = np.where(has, below.argmax(axis=1), curve.grid.size - 1)
    return idx, ~has


def mean_survival(
    curve: ExtrapolatedCurve,
    threshold: float = DEFAULT_ZERO_THRESHOLD,
    name: str | None = None,
) -> EstimandResult:
    """Area under each draw's survival curve up to where it is effectively zero."""
    ct = _cumulative_trapezoid(curve)
    idx, restricted = _cutoff_index(curve, threshold)
    values = ct[np.arange(curve.n_draws), idx]
    return EstimandResult(
        name=name or f"mean_survival[{curve.group}]",
        values=values,
        t_max=curve.grid[idx],
        units=curve.time_unit,
        restricted_draws=int(np.count_nonzero(restricted)),
    )


def restricted_mean_survival(
    curve: ExtrapolatedCurve, restriction_time: float, name: str | None = None
) -> EstimandResult:
    """Area under the survival curve on [0, restriction_time]."""
    tau = float(restriction_time)
    grid = curve.grid
    if tau > grid[-1] or tau <= 0.0:
        raise ValueError(f"restriction time {tau} outside the grid (0, {grid[-1]}]")
    ct = _cumulative_trapezoid(curve)
    j = int(np.searchsorted(grid, tau))
    if grid[j] == tau:
        values = ct[:, j]
    else:
        # interpolate survival at tau and add the partial trapezoid
        s_tau = curve.survival[:, j - 1] + (curve.survival[:, j] - curve.survival[:, j - 1]) * (
            (tau - grid[j - 1]) / (grid[j] - grid[j - 1])
        )
        values = ct[:, j - 1] + 0.5 * (curve.survival[:, j - 1] + s_tau) * (tau - grid[j - 1])
    return EstimandResult(
        name=name or f"rms[{curve.group},{tau}]",
        values=values,
        t_max=np.full(curve.n_draws, tau),
        units=curve.time_unit,
    )


def life_years_gained(
    curve1: ExtrapolatedCurve,
    curve2: ExtrapolatedCurve,
    threshold: float = DEFAULT_ZERO_THRESHOLD,
    name: str | None = None,
) -> EstimandResult:
    """Per-draw difference of the two areas, integrated to the later cut-off.

    Draws are paired by index, so the two curves must hold the same number of
    draws on the same grid.
    """
    if not np.array_equal(curve1.grid, curve2.grid):
        raise ValueError("curves must share one time grid")
    if curve1.n_draws != curve2.n_draws:
        raise ValueError(
            f"draw counts differ ({curve1.n_draws} vs {curve2.n_draws}); cannot pair per draw"
        )
    idx1, r1 = _cutoff_index(curve1, threshold)
    idx2, r2 = _cutoff_index(curve2, threshold)
    idx = np.maximum(idx1, idx2)
    rows = np.arange(curve1.n_draws)
    values = _cumulative_trapezoid(curve1)[rows, idx] - _cumulative_trapezoid(curve2)[rows, idx]
    return EstimandResult(
        name=name or f"lyg[{curve1.group}-{curve2.group}]",
        values=values,
        t_max=curve1.grid[idx],
        units=curve1.time_unit,
        restricted_draws=int(np.count_nonzero(r1 | r2)),
    )


# ---------------------------------------------------------------------------
# reporting
# ---------------------------------------------------------------------------


def write_estimand_report(path, results: list[EstimandResult], meta: dict | None = None) -> None:
    payload = {"meta": meta or {}, "estimands": [r.summary() for r in results]}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_estimand_draws_csv(path, results: list[EstimandResult], header_comment: str | None = None) -> None:
    """Per-draw values in long format, ready for density plots."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        writer = csv.writer(fh)
        writer.writerow(["estimand", "draw", "value"])
        for r in results:
            for i, v in enumerate(r.values):
                writer.writerow([r.name, i, repr(float(v))])
