"""Posterior sampling, convergence diagnostics, and information criteria.

``sample`` runs the no-U-turn sampler over a model context (anything exposing
``n_params``, ``log_posterior_and_gradient``, ``constrain`` and, for the
criteria, ``pointwise_log_likelihood``).  Chains use independent RNG streams
spawned from one master seed, so results are reproducible and independent of
scheduling.  Diagnostics follow the split-chain, rank-normalized convention;
the criteria record reports AIC, BIC, DIC, DIC2 and WAIC together with their
effective-parameter terms.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp, ndtri
from scipy.stats import rankdata

from .nuts import ChainStats, nuts_chain


@dataclass(frozen=True)
class SamplerConfig:
    chains: int = 4
    warmup: int = 1000
    samples: int = 1000
    seed: int = 0
    target_accept: float = 0.8
    max_tree_depth: int = 10
    init_jitter: float = 1.0
    init: tuple[float, ...] | None = None  # unconstrained center for initialization

    def __post_init__(self):
        if self.chains < 1:
            raise ValueError("chains must be >= 1")
        if self.samples < 1 or self.warmup < 0:
            raise ValueError("iteration counts must be positive")
        if not (0.0 < self.target_accept < 1.0):
            raise ValueError("target_accept must be in (0, 1)")


@dataclass
class PosteriorSamples:
    """Draws on the constrained scale plus everything the criteria need."""

    draws: np.ndarray                  # (chains, iterations, n_params)
    unconstrained: np.ndarray          # same shape, sampling scale
    param_names: list[str]
    log_lik: np.ndarray | None = None  # (chains * iterations, n_observations)
    chain_stats: list[ChainStats] = field(default_factory=list)

    @property
    def n_chains(self) -> int:
        return self.draws.shape[0]

    @property
    def n_iterations(self) -> int:
        return self.draws.shape[1]

    def flat(self) -> np.ndarray:
        return self.draws.reshape(-1, self.draws.shape[2])

    def flat_unconstrained(self) -> np.ndarray:
        return self.unconstrained.reshape(-1, self.unconstrained.shape[2])

    @property
    def divergences(self) -> int:
        return sum(s.divergences for s in self.chain_stats)

    def to_csv(self, path, header_comment: str | None = None) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            writer = csv.writer(fh)
            writer.writerow(["chain", "draw", *self.param_names])
            for c in range(self.n_chains):
                for i in range(self.n_iterations):
                    writer.writerow([c, i, *(repr(float(v)) for v in self.draws[c, i])])


def load_draws_csv(path) -> PosteriorSamples:
    """Read a draws CSV back into PosteriorSamples (no pointwise likelihoods)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(row for row in fh if not row.startswith("#"))
        header = next(reader)
        if header[:2] != ["chain", "draw"]:
            raise ValueError(f"{path}: not a draws CSV (header {header[:2]})")
        names = header[2:]
        rows = [(int(r[0]), int(r[1]), [float(v) for v in r[2:]]) for r in reader if r]
    if not rows:
        raise ValueError(f"{path}: no draws")
    n_chains = max(r[0] for r in rows) + 1
    n_iter = max(r[1] for r in rows) + 1
    draws = np.empty((n_chains, n_iter, len(names)))
    for c, i, vals in rows:
        draws[c, i] = vals
    return PosteriorSamples(
        draws=draws, unconstrained=draws.copy(), param_names=names
    )


def sample(model, config: SamplerConfig) -> PosteriorSamples:
    """Draw from the model posterior; deterministic given the seed."""
    seed_seq = np.random.SeedSequence(config.seed)
    chain_seeds = seed_seq.spawn(config.chains)
    dim = model.n_params

    all_draws = np.empty((config.chains, config.samples, dim))
    stats: list[ChainStats] = []
    for c in range(config.chains):
        rng = np.random.default_rng(chain_seeds[c])
        u0 = _initial_point(model, config, rng)
        chain_draws, chain_stat = nuts_chain(
            model.log_posterior_and_gradient,
            u0,
            config.warmup,
            config.samples,
            rng,
            target_accept=config.target_accept,
            max_tree_depth=config.max_tree_depth,
        )
        all_draws[c] = chain_draws
        stats.append(chain_stat)

    constrained = np.empty_like(all_draws)
    for c in range(config.chains):
        for i in range(config.samples):
            constrained[c, i] = model.constrain(all_draws[c, i])

    log_lik = None
    if getattr(model, "n_observations", 0):
        flat = constrained.reshape(-1, dim)
        log_lik = np.empty((flat.shape[0], model.n_observations))
        for s in range(flat.shape[0]):
            log_lik[s] = model.pointwise_log_likelihood(flat[s])

    total_divergences = sum(s.divergences for s in stats)
    if total_divergences > 0.1 * config.chains * config.samples:
        import warnings

        warnings.warn(
            f"{total_divergences} divergent transitions "
            f"(> 10% of {config.chains * config.samples} draws); "
            "results may be unreliable",
            stacklevel=2,
        )
    return PosteriorSamples(
        draws=constrained,
        unconstrained=all_draws,
        param_names=list(model.param_names),
        log_lik=log_lik,
        chain_stats=stats,
    )


def _initial_point(model, config: SamplerConfig, rng: np.random.Generator) -> np.ndarray:
    center = np.zeros(model.n_params) if config.init is None else np.asarray(config.init, dtype=float)
    for _ in range(100):
        u0 = center + rng.uniform(-config.init_jitter, config.init_jitter, size=model.n_params)
        lp, _ = model.log_posterior_and_gradient(u0)
        if np.isfinite(lp):
            return u0
    raise RuntimeError("failed to find a finite initial point after 100 attempts")


# ---------------------------------------------------------------------------
# convergence diagnostics
# ---------------------------------------------------------------------------


def _split_and_rank_normalize(x: np.ndarray) -> np.ndarray:
    """Split each chain in half, then map pooled ranks through the normal quantile."""
    n_chains, n = x.shape
    half = n // 2
    split = np.vstack([x[:, :half], x[:, half : 2 * half]])
    ranks = rankdata(split, axis=None).reshape(split.shape)
    return ndtri((ranks - 0.375) / (split.size + 0.25))


def _rhat_from(z: np.ndarray) -> float:
    m, n = z.shape
    if n < 2:
        return float("nan")
    chain_means = z.mean(axis=1)
    within = z.var(axis=1, ddof=1).mean()
    between = n * chain_means.var(ddof=1)
    if within == 0.0:
        return float("inf") if between > 0 else 1.0
    var_plus = (n - 1) / n * within + between / n
    return float(np.sqrt(var_plus / within))


def split_rhat(x: np.ndarray) -> float:
    """Rank-normalized split-R̂ of draws shaped (chains, iterations)."""
    return _rhat_from(_split_and_rank_normalize(np.asarray(x, dtype=float)))


def _autocovariance(z: np.ndarray) -> np.ndarray:
    """Per-chain autocovariance via FFT, biased (divide by n) normalization."""
    m, n = z.shape
    centered = z - z.mean(axis=1, keepdims=True)
    size = 2 ** int(np.ceil(np.log2(2 * n)))
    f = np.fft.rfft(centered, size, axis=1)
    acov = np.fft.irfft(f * np.conj(f), size, axis=1)[:, :n].real
    return acov / n


def bulk_ess(x: np.ndarray) -> float:
    """Bulk effective sample size (split chains, rank-normalized, Geyer pairing)."""
    z = _split_and_rank_normalize(np.asarray(x, dtype=float))
    m, n = z.shape
    if n < 4:
        return float("nan")
    acov = _autocovariance(z)
    chain_var = acov[:, 0] * n / (n - 1.0)
    within = chain_var.mean()
    var_plus = within * (n - 1.0) / n
    if m > 1:
        var_plus += z.mean(axis=1).var(ddof=1)
    if var_plus == 0.0 or within == 0.0:
        return float("nan")

    rho = 1.0 - (within - acov.mean(axis=0)) / var_plus
    rho[0] = 1.0
    # Geyer initial monotone positive sequence over consecutive pairs
    tau = 0.0
    prev_pair = np.inf
    t = 0
    while t + 1 < n:
        pair = rho[t] + rho[t + 1]
        if pair <= 0.0:
            break
        pair = min(pair, prev_pair)
        tau += 2.0 * pair
        prev_pair = pair
        t += 2
    tau = max(tau - 1.0, 1e-12)
    return float(m * n / tau)


def diagnostics(samples: PosteriorSamples) -> dict:
    """Per-parameter split-R̂ and bulk ESS; R̂ is omitted for single-chain runs."""
    out: dict = {"rhat": {}, "ess": {}, "notes": []}
    single = samples.n_chains < 2
    if single:
        out["rhat"] = None
        out["notes"].append("split-R-hat unavailable with a single chain")
    for j, name in enumerate(samples.param_names):
        x = samples.draws[:, :, j]
        if not single:
            out["rhat"][name] = split_rhat(x)
        out["ess"][name] = bulk_ess(x)
    return out


# ---------------------------------------------------------------------------
# information criteria
# ---------------------------------------------------------------------------


def _variance_exact(a: np.ndarray, axis: int = 0) -> np.ndarray:
    """ddof=1 variance that is exactly 0 for constant slices."""
    a = np.asarray(a, dtype=float)
    v = a.var(axis=axis, ddof=1) if a.shape[axis] > 1 else np.zeros(np.delete(a.shape, axis))
    constant = np.ptp(a, axis=axis) == 0.0
    return np.where(constant, 0.0, v)


def _mean_exact(a: np.ndarray, axis: int = 0) -> np.ndarray:
    """Mean that returns the common value exactly when a slice is constant."""
    a = np.asarray(a, dtype=float)
    m = a.mean(axis=axis)
    constant = np.ptp(a, axis=axis) == 0.0
    return np.where(constant, np.take(a, 0, axis=axis), m)


def information_criteria(samples: PosteriorSamples, model) -> dict:
    """Model-comparison record: AIC, BIC, DIC, DIC2, WAIC and their penalties.

    AIC and BIC are plug-in values at the posterior mean taken on the
    unconstrained scale and mapped back; DIC uses the classic p_d, DIC2 the
    half-variance-of-deviance p_v, and WAIC the pointwise variance p_w.
    """
    if samples.log_lik is None:
        raise ValueError("posterior samples carry no pointwise log-likelihood matrix")
    ll = samples.log_lik                      # (S, n)
    n_draws, n_obs = ll.shape
    deviance = -2.0 * ll.sum(axis=1)          # (S,)

    u_mean = _mean_exact(samples.flat_unconstrained(), axis=0)
    theta_mean = model.constrain(u_mean)
    log_lik_at_mean = float(model.log_likelihood(theta_mean))
    d_mean_params = -2.0 * log_lik_at_mean
    d_bar = float(_mean_exact(deviance))

    p = model.n_params
    p_d = d_bar - d_mean_params
    p_v = 0.5 * float(_variance_exact(deviance))
    lppd = float(np.sum(logsumexp(ll, axis=0) - np.log(n_draws)))
    p_w = float(np.sum(_variance_exact(ll, axis=0)))

    return {
        "AIC": d_mean_params + 2.0 * p,
        "BIC": d_mean_params + p * float(np.log(n_obs)),
        "DIC": d_bar + p_d,
        "DIC2": d_bar + p_v,
        "WAIC": -2.0 * (lppd - p_w),
        "p_d": p_d,
        "p_v": p_v,
        "p_w": p_w,
        "p": p,
        "n_observations": n_obs,
    }


# ---------------------------------------------------------------------------
# fit report
# ---------------------------------------------------------------------------


@dataclass
class FitReport:
    """Posterior summary plus sampler health and the criteria record."""

    parameters: dict
    diagnostics: dict
    criteria: dict
    divergences: int
    wall_time_s: float
    notes: list[str] = field(default_factory=list)

    def to_json(self, path, meta: dict | None = None) -> None:
        payload = {
            "meta": meta or {},
            "parameters": self.parameters,
            "diagnostics": self.diagnostics,
            "criteria": self.criteria,
            "divergences": self.divergences,
            "wall_time_s": self.wall_time_s,
            "notes": self.notes,
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True, allow_nan=True)
            fh.write("\n")


def fit(model, config: SamplerConfig) -> tuple[PosteriorSamples, FitReport]:
    """Sample, then assemble the summary/diagnostics/criteria report."""
    start = time.perf_counter()
    samples = sample(model, config)
    wall = time.perf_counter() - start

    diag = diagnostics(samples)
    criteria = information_criteria(samples, model)
    criteria["wall_time_s"] = wall

    flat = samples.flat()
    params = {}
    for j, name in enumerate(samples.param_names):
        col = flat[:, j]
        q = np.percentile(col, [2.5, 50.0, 97.5])
        params[name] = {
            "mean": float(col.mean()),
            "sd": float(col.std(ddof=1)) if col.size > 1 else 0.0,
            "q2.5": float(q[0]),
            "q50": float(q[1]),
            "q97.5": float(q[2]),
            "rhat": None if diag["rhat"] is None else diag["rhat"][name],
            "ess_bulk": diag["ess"][name],
        }
    return samples, FitReport(
        parameters=params,
        diagnostics=diag,
        criteria=criteria,
        divergences=samples.divergences,
        wall_time_s=wall,
        notes=diag["notes"],
    )
