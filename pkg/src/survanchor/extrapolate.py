"""Extrapolated hazard and survival curves beyond the end of follow-up.

Five methods are available.  ``baseline`` projects the fitted disease
polyhazard itself.  ``constant-difference`` and ``constant-ratio`` freeze the
additive (D) or multiplicative (R) relation between the disease and
population hazards, averaged over the last k in-follow-up grid points, and
drive the extension with the population hazard.  The pseudo-cause-specific
variants apply the same idea to selected disease components against their
population counterparts only, leaving the remaining components on their
fitted trajectories.  HR-derived arms scale (a subset of) the hazard by a
hazard ratio, optionally sampled from a log-normal matched to a reported
confidence interval.

Every method reproduces the fitted disease curve on [0, t*]; beyond t* the
survival continues from the closed-form S(t*), so curves are continuous at
the end of follow-up by construction.  D and R are computed per posterior
draw, which lets the window uncertainty flow into downstream estimands.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .hazards import _cum_hazard, _log_hazard_pos, _hazard_limit_at_zero

EXTRAPOLATION_METHODS = (
    "baseline",
    "constant-difference",
    "constant-ratio",
    "pseudo-cs-difference",
    "pseudo-cs-ratio",
)

_DEFAULT_TAIL_THRESHOLD = 1e-4


@dataclass
class ExtrapolatedCurve:
    """Per-draw hazard and survival on a fixed grid, with follow-up marker t*."""

    grid: np.ndarray                 # (T,)
    hazard: np.ndarray               # (draws, T)
    survival: np.ndarray             # (draws, T)
    group: str
    method: str
    t_star: float
    time_unit: str = "months"
    component_hazard: np.ndarray | None = None      # (draws, M, T)
    component_cum_hazard: np.ndarray | None = None  # (draws, M, T)
    window_stat: np.ndarray | None = None           # per-draw D or R (draws,) or (draws, m)
    floored_draws: int = 0
    tail_warning_draws: int = 0

    @property
    def n_draws(self) -> int:
        return self.hazard.shape[0]


def make_grid(horizon: float, step: float = 1.0) -> np.ndarray:
    """Uniform grid 0, step, 2*step, ... covering [0, horizon]."""
    if horizon <= 0 or step <= 0:
        raise ValueError("horizon and step must be positive")
    return np.arange(0.0, horizon + 0.5 * step, step)


def _check_grid(grid: np.ndarray) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2:
        raise ValueError("grid must be a 1-d array with at least two points")
    if grid[0] != 0.0 or np.any(np.diff(grid) <= 0.0):
        raise ValueError("grid must start at 0 and be strictly increasing")
    return grid


# ---------------------------------------------------------------------------
# closed-form evaluation of bound model structures over draws
# ---------------------------------------------------------------------------


def _component_values(bc, theta: np.ndarray, t: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    """(weighted hazard, weighted cumulative hazard, weight) of one bound component."""
    params = tuple(theta[bc.param_idx])
    w = float(theta[bc.const_idx]) if bc.const_idx is not None else 1.0
    haz = np.empty_like(t)
    pos = t > 0.0
    haz[pos] = np.exp(_log_hazard_pos(bc.family, params, t[pos]))
    if np.any(~pos):
        haz[~pos] = _hazard_limit_at_zero(bc.family, params)
    cum = _cum_hazard(bc.family, params, t)
    return w * haz, w * cum, w


def _single_segment_grids(segments, draws: np.ndarray, grid: np.ndarray):
    """(draws, M, T) weighted hazard and cumulative hazard for one segment."""
    comps = segments[0]
    n_draws = draws.shape[0]
    haz = np.empty((n_draws, len(comps), grid.size))
    cum = np.empty_like(haz)
    for s in range(n_draws):
        for m, bc in enumerate(comps):
            haz[s, m], cum[s, m], _ = _component_values(bc, draws[s], grid)
    return haz, cum


def _total_grids(segments, boundaries: np.ndarray, draws: np.ndarray, grid: np.ndarray):
    """(draws, T) total hazard and cumulative hazard, change-point aware.

    The final segment is open-ended, so grids may extend past the last
    interior boundary (that is what extrapolation needs).
    """
    if len(segments) == 1:
        haz, cum = _single_segment_grids(segments, draws, grid)
        return haz.sum(axis=1), cum.sum(axis=1)

    n_draws = draws.shape[0]
    seg_of = np.searchsorted(boundaries, grid, side="right")
    haz = np.zeros((n_draws, grid.size))
    cum = np.zeros((n_draws, grid.size))
    bounds = np.concatenate([[0.0], boundaries])
    for s in range(n_draws):
        theta = draws[s]
        accrued = 0.0
        for k, comps in enumerate(segments):
            sel = seg_of == k
            lo = bounds[k]
            lo_arr = np.array([lo])
            if np.any(sel):
                t_k = grid[sel]
                for bc in comps:
                    h, c, _ = _component_values(bc, theta, t_k)
                    haz[s, sel] += h
                    c_lo = _component_values(bc, theta, lo_arr)[1][0] if lo > 0 else 0.0
                    cum[s, sel] += c - c_lo
                cum[s, sel] += accrued
            if k + 1 < len(segments):
                hi_arr = np.array([bounds[k + 1]])
                for bc in comps:
                    c_hi = _component_values(bc, theta, hi_arr)[1][0]
                    c_lo = _component_values(bc, theta, lo_arr)[1][0] if lo > 0 else 0.0
                    accrued += c_hi - c_lo
    return haz, cum


def _eval_group(model, group: str, draws: np.ndarray, grid: np.ndarray):
    segments, boundaries = model.curve_segments(group)
    return _total_grids(segments, boundaries, draws, grid)


def _tail_check(survival: np.ndarray, threshold: float) -> int:
    bad = int(np.count_nonzero(survival[:, -1] >= threshold))
    if bad:
        warnings.warn(
            f"{bad} of {survival.shape[0]} draws keep survival above {threshold} "
            "at the grid end; extend the horizon for complete mean-survival integrals",
            stacklevel=3,
        )
    return bad


def _default_t_star(model, t_star) -> float:
    if t_star is not None:
        return float(t_star)
    observed = model.data_max_time("disease")
    if observed is None:
        raise ValueError("t_star not given and the model has no bound disease data")
    return observed


# ---------------------------------------------------------------------------
# extrapolation methods
# ---------------------------------------------------------------------------


def extrapolate_baseline(
    model,
    draws: np.ndarray,
    grid,
    group: str = "disease",
    t_star: float | None = None,
    time_unit: str = "months",
    tail_threshold: float = _DEFAULT_TAIL_THRESHOLD,
) -> ExtrapolatedCurve:
    """Project the fitted polyhazard of a group over the whole grid."""
    grid = _check_grid(grid)
    draws = np.atleast_2d(np.asarray(draws, dtype=float))
    segments, boundaries = model.curve_segments(group)
    if boundaries.size and boundaries[-1] >= grid[-1]:
        raise ValueError("grid must extend past the last change-point")
    comp_haz = comp_cum = None
    if len(segments) == 1:
        comp_haz, comp_cum = _single_segment_grids(segments, draws, grid)
        hazard = comp_haz.sum(axis=1)
        cum = comp_cum.sum(axis=1)
    else:
        hazard, cum = _total_grids(segments, boundaries, draws, grid)
    survival = np.exp(-cum)
    try:
        t_star_val = _default_t_star(model, t_star)
    except ValueError:
        t_star_val = float(grid[-1])
    return ExtrapolatedCurve(
        grid=grid,
        hazard=hazard,
        survival=survival,
        group=group,
        method="baseline",
        t_star=t_star_val,
        time_unit=time_unit,
        component_hazard=comp_haz,
        component_cum_hazard=comp_cum,
        tail_warning_draws=_tail_check(survival, tail_threshold),
    )


def _window_indices(grid: np.ndarray, t_star: float, k: int) -> np.ndarray:
    in_followup = np.flatnonzero(grid <= t_star)
    if in_followup.size < k:
        raise ValueError(
            f"window k={k} exceeds the {in_followup.size} grid points inside follow-up"
        )
    if k < 1:
        raise ValueError("window k must be >= 1")
    return in_followup[-k:]


def _require_extension(grid: np.ndarray, t_star: float) -> np.ndarray:
    ext = grid > t_star
    if not np.any(ext):
        raise ValueError(f"grid must extend beyond the end of follow-up t*={t_star}")
    return ext


def extrapolate_constant_difference(
    model,
    draws: np.ndarray,
    grid,
    k: int,
    t_star: float | None = None,
    time_unit: str = "months",
    tail_threshold: float = _DEFAULT_TAIL_THRESHOLD,
) -> ExtrapolatedCurve:
    """Additive anchoring: beyond t* the hazard is D + h_p(t'), with D the mean
    of the last k in-follow-up differences h_d - h_p (per draw).

    Negative extended hazards are floored at zero (counted per draw); floored
    draws fall back to trapezoid integration for the survival extension.
    """
    grid = _check_grid(grid)
    draws = np.atleast_2d(np.asarray(draws, dtype=float))
    t_star_val = _default_t_star(model, t_star)
    window = _window_indices(grid, t_star_val, k)
    ext = _require_extension(grid, t_star_val)

    dis_haz, dis_cum = _eval_group(model, "disease", draws, grid)
    pop_haz, _ = _eval_group(model, "population", draws, grid)
    diff = np.mean(dis_haz[:, window] - pop_haz[:, window], axis=1)

    hazard = dis_haz.copy()
    raw_ext = diff[:, None] + pop_haz[:, ext]
    floored = raw_ext < 0.0
    hazard[:, ext] = np.where(floored, 0.0, raw_ext)
    survival = np.exp(-dis_cum)
    _extend_survival_additive(model, draws, grid, ext, t_star_val, diff, hazard, survival, floored)

    return ExtrapolatedCurve(
        grid=grid,
        hazard=hazard,
        survival=survival,
        group="disease",
        method="constant-difference",
        t_star=t_star_val,
        time_unit=time_unit,
        window_stat=diff,
        floored_draws=int(np.count_nonzero(floored.any(axis=1))),
        tail_warning_draws=_tail_check(survival, tail_threshold),
    )


def _extend_survival_additive(model, draws, grid, ext, t_star, diff, hazard, survival, floored):
    """Continue survival past t* under hazard D + h_p, respecting flooring."""
    _, pop_cum_grid = _eval_group(model, "population", draws, grid)
    t_star_arr = np.array([t_star])
    dis_haz_star, dis_cum_star = _eval_group(model, "disease", draws, t_star_arr)
    pop_haz_star, pop_cum_star = _eval_group(model, "population", draws, t_star_arr)
    s_star = np.exp(-dis_cum_star[:, 0])

    ext_idx = np.flatnonzero(ext)
    t_ext = grid[ext]
    clean = ~floored.any(axis=1)
    # closed form when no flooring: H(t) - H(t*) = D (t - t*) + H_p(t) - H_p(t*)
    inc = diff[:, None] * (t_ext - t_star)[None, :] + pop_cum_grid[:, ext] - pop_cum_star
    survival[np.ix_(clean, ext_idx)] = s_star[clean, None] * np.exp(-inc[clean])

    dirty = np.flatnonzero(~clean)
    if dirty.size:
        # trapezoid over the floored hazard, starting from the closed-form S(t*)
        haz_star = np.maximum(diff + pop_haz_star[:, 0], 0.0)
        times = np.concatenate([[t_star], t_ext])
        dt = np.diff(times)
        for s in dirty:
            h_path = np.concatenate([[haz_star[s]], hazard[s, ext]])
            inc_num = np.cumsum(0.5 * (h_path[1:] + h_path[:-1]) * dt)
            survival[s, ext_idx] = s_star[s] * np.exp(-inc_num)


def extrapolate_constant_ratio(
    model,
    draws: np.ndarray,
    grid,
    k: int,
    t_star: float | None = None,
    time_unit: str = "months",
    tail_threshold: float = _DEFAULT_TAIL_THRESHOLD,
) -> ExtrapolatedCurve:
    """Multiplicative anchoring: beyond t* the hazard is R * h_p(t'), with R the
    mean of the last k in-follow-up hazard ratios h_d / h_p (per draw)."""
    grid = _check_grid(grid)
    draws = np.atleast_2d(np.asarray(draws, dtype=float))
    t_star_val = _default_t_star(model, t_star)
    window = _window_indices(grid, t_star_val, k)
    ext = _require_extension(grid, t_star_val)

    dis_haz, dis_cum = _eval_group(model, "disease", draws, grid)
    pop_haz, pop_cum = _eval_group(model, "population", draws, grid)
    win_pop = pop_haz[:, window]
    if np.any(win_pop == 0.0):
        raise ValueError("population hazard is zero at a window point; ratio undefined")
    ratio = np.mean(dis_haz[:, window] / win_pop, axis=1)

    hazard = dis_haz.copy()
    hazard[:, ext] = ratio[:, None] * pop_haz[:, ext]
    survival = np.exp(-dis_cum)
    t_star_arr = np.array([t_star_val])
    _, dis_cum_star = _eval_group(model, "disease", draws, t_star_arr)
    _, pop_cum_star = _eval_group(model, "population", draws, t_star_arr)
    s_star = np.exp(-dis_cum_star)
    survival[:, ext] = s_star * np.exp(-ratio[:, None] * (pop_cum[:, ext] - pop_cum_star))

    return ExtrapolatedCurve(
        grid=grid,
        hazard=hazard,
        survival=survival,
        group="disease",
        method="constant-ratio",
        t_star=t_star_val,
        time_unit=time_unit,
        window_stat=ratio,
        tail_warning_draws=_tail_check(survival, tail_threshold),
    )


def extrapolate_pseudo_cause_specific(
    model,
    draws: np.ndarray,
    grid,
    k: int,
    variant: str,
    mask,
    t_star: float | None = None,
    time_unit: str = "months",
    tail_threshold: float = _DEFAULT_TAIL_THRESHOLD,
) -> ExtrapolatedCurve:
    """Apply the difference/ratio anchoring to selected disease components only.

    ``mask`` holds indices of disease components that have a population
    counterpart (shared or proportional); the remaining components keep their
    fitted trajectories beyond t* and the total hazard is the sum.
    """
    if variant not in ("difference", "ratio"):
        raise ValueError(f"variant must be 'difference' or 'ratio', got {variant!r}")
    grid = _check_grid(grid)
    draws = np.atleast_2d(np.asarray(draws, dtype=float))
    t_star_val = _default_t_star(model, t_star)
    window = _window_indices(grid, t_star_val, k)
    ext = _require_extension(grid, t_star_val)
    ext_idx = np.flatnonzero(ext)

    segments, boundaries = model.curve_segments("disease")
    if len(segments) != 1:
        raise ValueError("pseudo-cause-specific extrapolation needs a single-segment disease model")
    comps = segments[0]
    mask = sorted(set(int(m) for m in mask))
    if not mask:
        raise ValueError("component mask must be nonempty")
    if any(m < 0 or m >= len(comps) for m in mask):
        raise ValueError(f"mask indices out of range for {len(comps)} components")

    dis_spec = model.spec.disease.segments[0]
    for m in mask:
        if dis_spec[m].role.value == "free":
            raise ValueError(
                f"masked component {m} is free; it has no population counterpart"
            )

    comp_haz, comp_cum = _single_segment_grids(segments, draws, grid)
    n_draws = draws.shape[0]
    t_star_arr = np.array([t_star_val])
    stats = np.empty((n_draws, len(mask)))
    floored_any = np.zeros(n_draws, dtype=bool)

    for j, m in enumerate(mask):
        bc = comps[m]
        for s in range(n_draws):
            theta = draws[s]
            w_haz, w_cum, w = _component_values(bc, theta, grid)
            cp_haz, cp_cum = w_haz / w, w_cum / w
            cp_cum_star = _component_values(bc, theta, t_star_arr)[1][0] / w
            if variant == "ratio":
                stat = np.mean(w_haz[window] / cp_haz[window])
                comp_haz[s, m, ext_idx] = stat * cp_haz[ext]
                comp_cum[s, m, ext_idx] = (
                    w * cp_cum_star + stat * (cp_cum[ext] - cp_cum_star)
                )
            else:
                stat = np.mean(w_haz[window] - cp_haz[window])
                raw = stat + cp_haz[ext]
                neg = raw < 0.0
                comp_haz[s, m, ext_idx] = np.where(neg, 0.0, raw)
                if np.any(neg):
                    floored_any[s] = True
                    t_ext = grid[ext]
                    haz_star = max(
                        stat
                        + _component_values(bc, theta, t_star_arr)[0][0] / w,
                        0.0,
                    )
                    h_path = np.concatenate([[haz_star], comp_haz[s, m, ext_idx]])
                    dt = np.diff(np.concatenate([[t_star_val], t_ext]))
                    inc = np.cumsum(0.5 * (h_path[1:] + h_path[:-1]) * dt)
                    comp_cum[s, m, ext_idx] = w * cp_cum_star + inc
                else:
                    comp_cum[s, m, ext_idx] = (
                        w * cp_cum_star
                        + stat * (grid[ext] - t_star_val)
                        + (cp_cum[ext] - cp_cum_star)
                    )
            stats[s, j] = stat

    # unmasked components keep their fitted closed forms; everything shares the
    # same cumulative-hazard anchor at t*, so the total is continuous there
    hazard = comp_haz.sum(axis=1)
    survival = np.exp(-comp_cum.sum(axis=1))

    method = f"pseudo-cs-{variant}"
    return ExtrapolatedCurve(
        grid=grid,
        hazard=hazard,
        survival=survival,
        group="disease",
        method=method,
        t_star=t_star_val,
        time_unit=time_unit,
        component_hazard=comp_haz,
        component_cum_hazard=comp_cum,
        window_stat=stats if stats.shape[1] > 1 else stats[:, 0],
        floored_draws=int(np.count_nonzero(floored_any)),
        tail_warning_draws=_tail_check(survival, tail_threshold),
    )


def build_cause_specific_disease_curve(
    model,
    draws: np.ndarray,
    grid,
    t_star: float | None = None,
    time_unit: str = "months",
    tail_threshold: float = _DEFAULT_TAIL_THRESHOLD,
) -> ExtrapolatedCurve:
    """Disease curve C*h_p1 + h_p2 from a cause-specific fit, on the full grid."""
    if not model.spec.cause_specific:
        raise ValueError("model is not cause-specific")
    curve = extrapolate_baseline(
        model, draws, grid, group="disease", t_star=t_star,
        time_unit=time_unit, tail_threshold=tail_threshold,
    )
    curve.method = "cause-specific-baseline"
    return curve


# ---------------------------------------------------------------------------
# hazard-ratio derived arms
# ---------------------------------------------------------------------------


def hr_draws_from_ci(
    point: float, lower: float, upper: float, n_draws: int, rng: np.random.Generator
) -> np.ndarray:
    """Log-normal HR draws with median at the point estimate and 95% quantiles
    matched to the reported interval."""
    if not (0 < lower <= point <= upper):
        raise ValueError(f"need 0 < lower <= point <= upper, got ({point}, {lower}, {upper})")
    sigma = (np.log(upper) - np.log(lower)) / (2.0 * ndtri(0.975))
    return np.exp(np.log(point) + sigma * rng.standard_normal(n_draws))


def derive_hr_arm(
    curve: ExtrapolatedCurve,
    hr,
    mask="all",
    group: str = "derived",
    rng: np.random.Generator | None = None,
) -> ExtrapolatedCurve:
    """Scale (a subset of) the hazard by a hazard ratio and rebuild the survival.

    ``hr`` is a positive scalar, a per-draw array, or a (point, lower, upper)
    triple from which per-draw log-normal values are sampled.  With
    ``mask='all'`` the whole hazard scales, so S -> S^HR exactly; a component
    mask requires a curve that carries per-component grids.
    """
    if isinstance(hr, tuple) and len(hr) == 3:
        rng = np.random.default_rng(0) if rng is None else rng
        hr_vec = hr_draws_from_ci(hr[0], hr[1], hr[2], curve.n_draws, rng)
    else:
        hr_vec = np.broadcast_to(np.asarray(hr, dtype=float), (curve.n_draws,)).copy()
    if np.any(hr_vec <= 0.0):
        raise ValueError("hazard ratio must be > 0")

    col = hr_vec[:, None]
    if isinstance(mask, str) and mask == "all":
        hazard = curve.hazard * col
        survival = np.power(curve.survival, col)
        comp_haz = None if curve.component_hazard is None else curve.component_hazard * hr_vec[:, None, None]
        comp_cum = None if curve.component_cum_hazard is None else curve.component_cum_hazard * hr_vec[:, None, None]
    else:
        if curve.component_hazard is None or curve.component_cum_hazard is None:
            raise ValueError("component mask needs a curve with per-component grids")
        m_all = curve.component_hazard.shape[1]
        mask_idx = sorted(set(int(m) for m in mask))
        if any(m < 0 or m >= m_all for m in mask_idx):
            raise ValueError(f"mask indices out of range for {m_all} components")
        scale = np.ones((curve.n_draws, m_all))
        scale[:, mask_idx] = hr_vec[:, None]
        comp_haz = curve.component_hazard * scale[:, :, None]
        comp_cum = curve.component_cum_hazard * scale[:, :, None]
        hazard = comp_haz.sum(axis=1)
        survival = np.exp(-comp_cum.sum(axis=1))

    return ExtrapolatedCurve(
        grid=curve.grid.copy(),
        hazard=hazard,
        survival=survival,
        group=group,
        method=f"{curve.method}+hr",
        t_star=curve.t_star,
        time_unit=curve.time_unit,
        component_hazard=comp_haz,
        component_cum_hazard=comp_cum,
        window_stat=hr_vec,
    )


# ---------------------------------------------------------------------------
# curve I/O
# ---------------------------------------------------------------------------


def write_curve_csv(path, curve: ExtrapolatedCurve, header_comment: str | None = None) -> None:
    """Long-format export: one row per (draw, time)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        fh.write(f"# t_star={curve.t_star!r} time_unit={curve.time_unit}\n")
        writer = csv.writer(fh)
        writer.writerow(["group", "method", "draw", "time", "hazard", "survival"])
        for s in range(curve.n_draws):
            for j, t in enumerate(curve.grid):
                writer.writerow(
                    [
                        curve.group,
                        curve.method,
                        s,
                        repr(float(t)),
                        repr(float(curve.hazard[s, j])),
                        repr(float(curve.survival[s, j])),
                    ]
                )


def load_curve_csv(path) -> ExtrapolatedCurve:
    """Read back a long-format curve CSV (component grids are not persisted)."""
    t_star = None
    time_unit = "months"
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#"):
                for tok in line[1:].split():
                    if tok.startswith("t_star="):
                        t_star = float(tok.split("=", 1)[1])
                    elif tok.startswith("time_unit="):
                        time_unit = tok.split("=", 1)[1]
                continue
            rows.append(line.rstrip("\n"))
    reader = csv.reader(rows)
    header = next(reader)
    expected = ["group", "method", "draw", "time", "hazard", "survival"]
    if header != expected:
        raise ValueError(f"{path}: unexpected curve header {header}")
    group = method = None
    data: dict[int, list[tuple[float, float, float]]] = {}
    for row in reader:
        if not row:
            continue
        group, method = row[0], row[1]
        data.setdefault(int(row[2]), []).append((float(row[3]), float(row[4]), float(row[5])))
    if not data:
        raise ValueError(f"{path}: no curve rows")
    n_draws = max(data) + 1
    grid = np.asarray([t for t, _, _ in data[0]])
    hazard = np.empty((n_draws, grid.size))
    survival = np.empty((n_draws, grid.size))
    for s, triples in data.items():
        hazard[s] = [h for _, h, _ in triples]
        survival[s] = [v for _, _, v in triples]
    return ExtrapolatedCurve(
        grid=grid,
        hazard=hazard,
        survival=survival,
        group=group,
        method=method,
        t_star=grid[-1] if t_star is None else t_star,
        time_unit=time_unit,
    )


def write_curve_summary_csv(path, curve: ExtrapolatedCurve, header_comment: str | None = None) -> None:
    """Pointwise posterior mean and central 95% interval for hazard and survival."""
    qs = [2.5, 97.5]
    # hazards may be legitimately +inf at t = 0 for decreasing-hazard shapes
    with np.errstate(invalid="ignore"):
        h_mean = curve.hazard.mean(axis=0)
        s_mean = curve.survival.mean(axis=0)
        h_q = np.percentile(curve.hazard, qs, axis=0)
        s_q = np.percentile(curve.survival, qs, axis=0)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        if curve.window_stat is not None:
            stat = np.atleast_2d(curve.window_stat.T).T
            means = ",".join(repr(float(v)) for v in stat.mean(axis=0))
            fh.write(f"# window_stat_mean={means}\n")
        writer = csv.writer(fh)
        writer.writerow(
            [
                "group", "method", "time",
                "hazard_mean", "hazard_q2.5", "hazard_q97.5",
                "survival_mean", "survival_q2.5", "survival_q97.5",
            ]
        )
        for j, t in enumerate(curve.grid):
            writer.writerow(
                [
                    curve.group,
                    curve.method,
                    repr(float(t)),
                    repr(float(h_mean[j])),
                    repr(float(h_q[0, j])),
                    repr(float(h_q[1, j])),
                    repr(float(s_mean[j])),
                    repr(float(s_q[0, j])),
                    repr(float(s_q[1, j])),
                ]
            )
