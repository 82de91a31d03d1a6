"""Bayesian Lee-Carter mortality model, projection, and cohort synthesis.

The model for log-mortality y[x, t] at age x and calendar year t is

    y[x, t] = alpha[x] + beta[x] * kappa[t] + eps,   eps ~ N(0, sigma_eps^2)
    kappa[t] = u + kappa[t-1] + v,                   v   ~ N(0, sigma_v^2)

fitted by Gibbs sampling: conditionally conjugate normal updates for the age
profiles (alpha, beta) and the drift u, forward-filtering backward-sampling
for the period index kappa, and inverse-gamma updates for both variances.
Each stored draw is rotated onto the identifiability convention
sum(beta) = 1, sum(kappa) = 0 (the likelihood is invariant under this
rotation, so it only fixes the reporting scale).

Projected rates feed two consumers: cohort survival probabilities of the
form exp(-sum of projected rates over the ages traversed), and synthetic
age-sex matched time-to-death datasets for use as an external population.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import SurvivalDataset, SurvivalRecord


@dataclass(frozen=True)
class MortalitySurface:
    """Log mortality rates on a complete age x year grid for one sex."""

    ages: np.ndarray
    years: np.ndarray
    sex: str
    log_rates: np.ndarray  # shape (n_ages, n_years)

    def __post_init__(self):
        object.__setattr__(self, "ages", np.asarray(self.ages, dtype=int))
        object.__setattr__(self, "years", np.asarray(self.years, dtype=int))
        object.__setattr__(self, "log_rates", np.asarray(self.log_rates, dtype=float))
        if self.log_rates.shape != (self.ages.size, self.years.size):
            raise ValueError(
                f"log_rates shape {self.log_rates.shape} does not match "
                f"{self.ages.size} ages x {self.years.size} years"
            )
        if not np.all(np.isfinite(self.log_rates)):
            raise ValueError("log_rates must be finite (zero or missing raw rates?)")
        if np.any(np.diff(self.ages) != 1) or np.any(np.diff(self.years) != 1):
            raise ValueError("ages and years must be contiguous integer ranges")


@dataclass(frozen=True)
class LeeCarterPosterior:
    """Posterior draws, already rotated to sum(beta)=1, sum(kappa)=0 per draw."""

    ages: np.ndarray
    years: np.ndarray
    sex: str
    alpha: np.ndarray     # (draws, n_ages)
    beta: np.ndarray      # (draws, n_ages)
    kappa: np.ndarray     # (draws, n_years)
    drift: np.ndarray     # (draws,)
    sigma2_v: np.ndarray  # (draws,)
    sigma2_eps: np.ndarray  # (draws,)

    @property
    def n_draws(self) -> int:
        return self.drift.size


@dataclass(frozen=True)
class ProjectedRates:
    """Per-draw age-specific mortality rates at one target calendar year."""

    ages: np.ndarray
    target_year: int
    sex: str
    rates: np.ndarray  # (draws, n_ages), strictly positive

    def __post_init__(self):
        if np.any(self.rates <= 0.0) or not np.all(np.isfinite(self.rates)):
            raise ValueError("projected rates must be finite and > 0")

    @property
    def n_draws(self) -> int:
        return self.rates.shape[0]


def load_mortality_csv(path, sex: str) -> MortalitySurface:
    """Read a ``year,age,sex,mx`` central-death-rate CSV into one sex's surface."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"mortality CSV not found: {path}")
    cells: dict[tuple[int, int], float] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(row for row in fh if not row.startswith("#"))
        header = next(reader)
        missing = [c for c in ("year", "age", "sex", "mx") if c not in header]
        if missing:
            raise ValueError(f"{path}: missing columns {missing}")
        iy, ia, isx, im = (header.index(c) for c in ("year", "age", "sex", "mx"))
        for i, row in enumerate(reader, start=2):
            if not row or row[isx] != sex:
                continue
            mx = float(row[im])
            if mx <= 0.0:
                raise ValueError(f"{path}: row {i}: mx must be > 0 to take logs, got {mx}")
            cells[(int(row[ia]), int(row[iy]))] = np.log(mx)
    if not cells:
        raise ValueError(f"{path}: no rows for sex {sex!r}")
    ages = np.arange(min(a for a, _ in cells), max(a for a, _ in cells) + 1)
    years = np.arange(min(y for _, y in cells), max(y for _, y in cells) + 1)
    grid = np.full((ages.size, years.size), np.nan)
    for (a, y), v in cells.items():
        grid[a - ages[0], y - years[0]] = v
    if np.any(np.isnan(grid)):
        raise ValueError(f"{path}: incomplete age x year grid for sex {sex!r}")
    return MortalitySurface(ages=ages, years=years, sex=sex, log_rates=grid)


def write_rates_csv(path, rates: ProjectedRates, header_comment: str | None = None) -> None:
    """Per-draw projected rates in ``age,draw,mx`` long format."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        fh.write(f"# sex={rates.sex} target_year={rates.target_year}\n")
        writer = csv.writer(fh)
        writer.writerow(["age", "draw", "mx"])
        for d in range(rates.n_draws):
            for i, age in enumerate(rates.ages):
                writer.writerow([int(age), d, repr(float(rates.rates[d, i]))])


def load_rates_csv(path) -> ProjectedRates:
    sex, target_year = "female", 0
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#"):
                for tok in line[1:].split():
                    if tok.startswith("sex="):
                        sex = tok.split("=", 1)[1]
                    elif tok.startswith("target_year="):
                        target_year = int(tok.split("=", 1)[1])
                continue
            rows.append(line.rstrip("\n"))
    reader = csv.reader(rows)
    header = next(reader)
    if header != ["age", "draw", "mx"]:
        raise ValueError(f"{path}: not a projected-rates CSV (header {header})")
    cells = {(int(r[1]), int(r[0])): float(r[2]) for r in reader if r}
    if not cells:
        raise ValueError(f"{path}: no rate rows")
    draws = sorted({d for d, _ in cells})
    ages = np.array(sorted({a for _, a in cells}))
    age_index = {int(a): i for i, a in enumerate(ages)}
    rates = np.empty((len(draws), ages.size))
    for (d, a), v in cells.items():
        rates[d, age_index[a]] = v
    return ProjectedRates(ages=ages, target_year=target_year, sex=sex, rates=rates)


# ---------------------------------------------------------------------------
# Gibbs sampler
# ---------------------------------------------------------------------------

_PRIOR_VAR = 1.0e4       # diffuse normal variance for alpha, beta, drift
_IG_SHAPE = 2.0          # inverse-gamma prior on both innovation variances
_IG_SCALE = 0.01
_KAPPA1_VAR = 1.0e6      # diffuse initial-state variance for the filter


def _svd_start(log_rates: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Classic SVD-based starting values (also pins the sign convention)."""
    alpha = log_rates.mean(axis=1)
    centered = log_rates - alpha[:, None]
    u_mat, s, vt = np.linalg.svd(centered, full_matrices=False)
    beta = u_mat[:, 0] * s[0]
    kappa = vt[0]
    scale = beta.sum()
    if scale == 0.0:
        scale = 1.0
    beta = beta / scale
    kappa = kappa * scale
    if kappa[-1] > kappa[0]:  # fix sign so the period index trends downward
        beta, kappa = -beta, -kappa
    return alpha, beta, kappa - kappa.mean()


def _ffbs_kappa(
    resid: np.ndarray,
    beta: np.ndarray,
    drift: float,
    s2_v: float,
    s2_eps: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Forward-filter backward-sample the scalar state kappa_t.

    resid is y - alpha, shape (n_ages, n_years); observation at year t is
    resid[:, t] = beta * kappa_t + noise.
    """
    n_years = resid.shape[1]
    bb = float(beta @ beta)
    m = np.empty(n_years)
    p = np.empty(n_years)
    # t = 0: diffuse prior
    prior_m, prior_p = 0.0, _KAPPA1_VAR
    for t in range(n_years):
        if t > 0:
            prior_m = m[t - 1] + drift
            prior_p = p[t - 1] + s2_v
        # scalar observation update using the sufficient statistic beta'resid
        obs_prec = bb / s2_eps
        post_prec = 1.0 / prior_p + obs_prec
        m[t] = (prior_m / prior_p + (beta @ resid[:, t]) / s2_eps) / post_prec
        p[t] = 1.0 / post_prec
    kappa = np.empty(n_years)
    kappa[-1] = rng.normal(m[-1], np.sqrt(p[-1]))
    for t in range(n_years - 2, -1, -1):
        gain = p[t] / (p[t] + s2_v)
        mean = m[t] + gain * (kappa[t + 1] - drift - m[t])
        var = p[t] * (1.0 - gain)
        kappa[t] = rng.normal(mean, np.sqrt(var))
    return kappa


def _rotate(alpha, beta, kappa, drift, s2_v):
    """Map a raw draw onto sum(beta)=1, sum(kappa)=0; likelihood-invariant."""
    c = beta.sum()
    beta_r = beta / c
    kappa_r = kappa * c
    shift = kappa_r.mean()
    kappa_r = kappa_r - shift
    alpha_r = alpha + beta_r * shift
    return alpha_r, beta_r, kappa_r, drift * c, s2_v * c * c


def fit_lee_carter(
    surface: MortalitySurface,
    iterations: int = 1000,
    warmup: int = 1000,
    seed: int = 0,
) -> LeeCarterPosterior:
    """Gibbs-sample the posterior of the random-walk-with-drift model."""
    n_ages, n_years = surface.log_rates.shape
    if n_years < 5:
        raise ValueError(f"need at least 5 years of data, got {n_years}")
    if n_ages < 2:
        raise ValueError(f"need at least 2 ages, got {n_ages}")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")

    rng = np.random.default_rng(seed)
    y = surface.log_rates
    alpha, beta, kappa = _svd_start(y)
    diffs = np.diff(kappa)
    drift = float(diffs.mean()) if diffs.size else 0.0
    s2_v = max(float(np.var(diffs - drift)), 1e-6)
    s2_eps = max(float(np.var(y - alpha[:, None] - np.outer(beta, kappa))), 1e-6)

    total = warmup + iterations
    out_alpha = np.empty((iterations, n_ages))
    out_beta = np.empty((iterations, n_ages))
    out_kappa = np.empty((iterations, n_years))
    out_drift = np.empty(iterations)
    out_s2v = np.empty(iterations)
    out_s2e = np.empty(iterations)

    prior_prec = 1.0 / _PRIOR_VAR
    for it in range(total):
        kappa = _ffbs_kappa(y - alpha[:, None], beta, drift, s2_v, s2_eps, rng)

        # per-age conjugate bivariate regression y[x, :] ~ alpha_x + beta_x * kappa
        design = np.column_stack([np.ones(n_years), kappa])
        xtx = design.T @ design
        for x in range(n_ages):
            prec = xtx / s2_eps + prior_prec * np.eye(2)
            cov = np.linalg.inv(prec)
            mean = cov @ (design.T @ y[x]) / s2_eps
            draw = rng.multivariate_normal(mean, cov, method="cholesky")
            alpha[x], beta[x] = draw

        diffs = np.diff(kappa)
        prec_u = diffs.size / s2_v + prior_prec
        mean_u = (diffs.sum() / s2_v) / prec_u
        drift = rng.normal(mean_u, np.sqrt(1.0 / prec_u))

        sse_v = float(np.sum((diffs - drift) ** 2))
        s2_v = 1.0 / rng.gamma(_IG_SHAPE + 0.5 * diffs.size, 1.0 / (_IG_SCALE + 0.5 * sse_v))
        resid = y - alpha[:, None] - np.outer(beta, kappa)
        sse_e = float(np.sum(resid**2))
        s2_eps = 1.0 / rng.gamma(_IG_SHAPE + 0.5 * resid.size, 1.0 / (_IG_SCALE + 0.5 * sse_e))

        if it >= warmup:
            k = it - warmup
            a_r, b_r, k_r, u_r, v_r = _rotate(alpha, beta, kappa, drift, s2_v)
            out_alpha[k] = a_r
            out_beta[k] = b_r
            out_kappa[k] = k_r
            out_drift[k] = u_r
            out_s2v[k] = v_r
            out_s2e[k] = s2_eps

    return LeeCarterPosterior(
        ages=surface.ages.copy(),
        years=surface.years.copy(),
        sex=surface.sex,
        alpha=out_alpha,
        beta=out_beta,
        kappa=out_kappa,
        drift=out_drift,
        sigma2_v=out_s2v,
        sigma2_eps=out_s2e,
    )


# ---------------------------------------------------------------------------
# projection and cohort quantities
# ---------------------------------------------------------------------------


def project_rates(
    post: LeeCarterPosterior,
    target_year: int,
    rng: np.random.Generator | None = None,
) -> ProjectedRates:
    """Propagate kappa to the target year and exponentiate the log-rates.

    Both parameter uncertainty (via the posterior draws) and random-walk
    innovation noise (sampled per step) enter the projection.
    """
    last = int(post.years[-1])
    steps = target_year - last
    if steps <= 0:
        raise ValueError(f"target year {target_year} must be after the last observed year {last}")
    rng = np.random.default_rng(0) if rng is None else rng
    kappa_t = post.kappa[:, -1].copy()
    sd_v = np.sqrt(post.sigma2_v)
    for _ in range(steps):
        kappa_t = kappa_t + post.drift + rng.normal(0.0, 1.0, size=kappa_t.size) * sd_v
    rates = np.exp(post.alpha + post.beta * kappa_t[:, None])
    return ProjectedRates(
        ages=post.ages.copy(), target_year=target_year, sex=post.sex, rates=rates
    )


def project_rates_sequence(
    post: LeeCarterPosterior,
    first_year: int,
    last_year: int,
    rng: np.random.Generator | None = None,
) -> list[ProjectedRates]:
    """Projected rates for every year in [first_year, last_year], sharing one
    innovation path per draw; feeds the diagonal-trajectory cohort variant."""
    last_obs = int(post.years[-1])
    if first_year <= last_obs or last_year < first_year:
        raise ValueError(
            f"projection years must satisfy {last_obs} < first_year <= last_year"
        )
    rng = np.random.default_rng(0) if rng is None else rng
    kappa_t = post.kappa[:, -1].copy()
    sd_v = np.sqrt(post.sigma2_v)
    out = []
    for year in range(last_obs + 1, last_year + 1):
        kappa_t = kappa_t + post.drift + rng.normal(0.0, 1.0, size=kappa_t.size) * sd_v
        if year >= first_year:
            out.append(
                ProjectedRates(
                    ages=post.ages.copy(),
                    target_year=year,
                    sex=post.sex,
                    rates=np.exp(post.alpha + post.beta * kappa_t[:, None]),
                )
            )
    return out


def cohort_survival(rates: ProjectedRates, start_age: int, horizon: int) -> np.ndarray:
    """Per-draw probability of reaching age start_age + horizon from start_age.

    exp(-sum of the projected rates over the horizon ages); horizon 0 gives 1.
    """
    if horizon < 0:
        raise ValueError(f"horizon must be >= 0, got {horizon}")
    lo = start_age - int(rates.ages[0])
    hi = lo + horizon
    if lo < 0 or (horizon > 0 and hi > rates.ages.size):
        raise ValueError(
            f"ages {start_age}..{start_age + horizon - 1} fall outside the "
            f"projected range {rates.ages[0]}..{rates.ages[-1]}"
        )
    if horizon == 0:
        return np.ones(rates.n_draws)
    return np.exp(-rates.rates[:, lo:hi].sum(axis=1))


def _death_year_probabilities(m: np.ndarray, start_idx: int) -> np.ndarray:
    """Discrete law of the death year implied by one draw's rate vector.

    Entry j is P(death during year j after start); the final entry is the
    probability of surviving past the last tabulated age.
    """
    cum = np.concatenate([[0.0], np.cumsum(m[start_idx:])])
    pi = np.exp(-cum)
    probs = -np.diff(pi)
    return np.concatenate([probs, [pi[-1]]])


def synthesize_cohort(
    rates: ProjectedRates | dict[str, ProjectedRates],
    profile: list[tuple[int, str, int]],
    cause_proportions: dict[int, float] | None = None,
    seed: int = 0,
    time_unit: str = "years",
    group: str = "population",
    diagonal: list[ProjectedRates] | dict[str, list[ProjectedRates]] | None = None,
) -> SurvivalDataset | tuple[SurvivalDataset, SurvivalDataset]:
    """Generate synthetic time-to-death records matched to an age-sex profile.

    Each individual picks a posterior draw uniformly at random, then samples a
    death year from that draw's implied discrete distribution (uniform within
    the year); survivors past the last tabulated age are censored there.
    Rates are taken at the single target year by default; passing ``diagonal``
    (a per-year rate sequence starting at the target year) instead walks each
    individual's aging trajectory, advancing the calendar year with age.

    With ``cause_proportions`` (age at death -> probability the death is due to
    the cause of interest) the output is a pair of datasets: the first carries
    the cause-of-interest deaths as events, the second the remaining deaths,
    with all other records censored, matching the cause-specific likelihood
    decomposition.
    """
    if not profile:
        raise ValueError("profile must contain at least one (age, sex, count) entry")
    if cause_proportions is not None:
        bad = {a: p for a, p in cause_proportions.items() if not (0.0 <= p <= 1.0)}
        if bad:
            raise ValueError(f"cause proportions must lie in [0, 1]: {bad}")
        prop_ages = np.array(sorted(cause_proportions))
        prop_vals = np.array([cause_proportions[a] for a in prop_ages])

    unit_scale = 12.0 if time_unit == "months" else 1.0
    rng = np.random.default_rng(seed)

    def rates_for(sex: str) -> ProjectedRates:
        if isinstance(rates, dict):
            if sex not in rates:
                raise ValueError(f"no projected rates supplied for sex {sex!r}")
            return rates[sex]
        return rates

    def diagonal_for(sex: str):
        if diagonal is None:
            return None
        return diagonal[sex] if isinstance(diagonal, dict) else diagonal

    cause_records: list[SurvivalRecord] = []
    other_records: list[SurvivalRecord] = []
    single_records: list[SurvivalRecord] = []
    for age, sex, count in profile:
        if count < 1:
            raise ValueError(f"profile counts must be >= 1, got {count} for age {age}")
        r = rates_for(sex)
        diag = diagonal_for(sex)
        start_idx = age - int(r.ages[0])
        if start_idx < 0 or start_idx >= r.ages.size:
            raise ValueError(f"profile age {age} outside projected ages")
        n_years_left = r.ages.size - start_idx
        draw_idx = rng.integers(0, r.n_draws, size=count)
        for d in draw_idx:
            if diag is None:
                m_path = r.rates[d, start_idx:]
            else:
                # calendar year advances with age along the individual's diagonal
                m_path = np.array(
                    [
                        diag[min(j, len(diag) - 1)].rates[d, start_idx + j]
                        for j in range(n_years_left)
                    ]
                )
            probs = _death_year_probabilities(m_path, 0)
            j = rng.choice(probs.size, p=probs / probs.sum())
            if j == n_years_left:  # survived past the table
                t = n_years_left * unit_scale
                rec = SurvivalRecord(time=t, event=0, age=age, sex=sex, group=group)
                single_records.append(rec)
                cause_records.append(rec)
                other_records.append(rec)
                continue
            # within-year time uniform on (0, 1); keep strictly positive
            t = (j + rng.uniform(np.nextafter(0.0, 1.0), 1.0)) * unit_scale
            if cause_proportions is None:
                single_records.append(
                    SurvivalRecord(time=t, event=1, age=age, sex=sex, group=group)
                )
                continue
            age_at_death = age + int(j)
            p_cause = float(np.interp(age_at_death, prop_ages, prop_vals))
            is_cause = rng.uniform() < p_cause
            cause_records.append(
                SurvivalRecord(time=t, event=int(is_cause), age=age, sex=sex, group=group)
            )
            other_records.append(
                SurvivalRecord(time=t, event=int(not is_cause), age=age, sex=sex, group=group)
            )
    if cause_proportions is None:
        return SurvivalDataset(tuple(single_records), time_unit=time_unit)
    return (
        SurvivalDataset(tuple(cause_records), time_unit=time_unit),
        SurvivalDataset(tuple(other_records), time_unit=time_unit),
    )
