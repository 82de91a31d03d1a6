"""Joint log-likelihood and log-posterior for disease + external-population models.

A joint model couples one polyhazard per group.  Disease components either
carry their own parameters (free), reuse a population component's parameters
exactly (shared), or reuse them with the hazard scaled by a proportionality
constant C > 0 (proportional), in which case the component survival enters to
the power C.  The cause-specific variant binds each of the two population
components to its own cause dataset, so the total likelihood factorizes as
the disease term times the two single-cause population terms.

Right-censored records contribute log S only; events add log h.  Sampling
happens on an unconstrained scale (log transform for positive parameters,
identity for locations) with the Jacobian folded into the posterior.  All
gradients are analytic and vectorized over records.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .data import SurvivalDataset
from .hazards import (
    ComponentParams,
    Family,
    PolyComponent,
    PolyhazardSpec,
    Role,
    _cum_hazard,
    _dcum_hazard,
    _dlog_hazard_pos,
    _log_hazard_pos,
    positivity_mask,
)

# ---------------------------------------------------------------------------
# declarative model structure
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ComponentDecl:
    """Declares one component of a group before parameters exist.

    Free components name their own family; shared and proportional components
    point at a population component (``of``) and inherit its family and
    parameters.
    """

    family: Family | None = None
    role: Role = Role.FREE
    of: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "role", Role(self.role))
        if self.family is not None:
            object.__setattr__(self, "family", Family(self.family))
        if self.role is Role.FREE:
            if self.family is None:
                raise ValueError("free components must declare a family")
        else:
            if self.of is None:
                raise ValueError(f"{self.role.value} components must reference a population component")


@dataclass(frozen=True)
class GroupDecl:
    """Component structure of one group, optionally split at fixed change-points."""

    segments: tuple[tuple[ComponentDecl, ...], ...]
    change_points: tuple[float, ...] = ()

    def __post_init__(self):
        segs = tuple(tuple(s) for s in self.segments)
        object.__setattr__(self, "segments", segs)
        cps = tuple(float(c) for c in self.change_points)
        object.__setattr__(self, "change_points", cps)
        if len(segs) == 0 or any(len(s) == 0 for s in segs):
            raise ValueError("every segment needs at least one component")
        if len(cps) != len(segs) - 1:
            raise ValueError(
                f"{len(segs)} segments need {len(segs) - 1} interior change-points, got {len(cps)}"
            )
        if any(c <= 0 for c in cps) or any(c2 <= c1 for c1, c2 in zip(cps, cps[1:])):
            raise ValueError("change-points must be positive and strictly increasing")

    @classmethod
    def simple(cls, *components: ComponentDecl) -> "GroupDecl":
        return cls(segments=(tuple(components),))

    @property
    def n_segments(self) -> int:
        return len(self.segments)


def free_components(*families: Family | str) -> tuple[ComponentDecl, ...]:
    """Convenience: a tuple of free component declarations."""
    return tuple(ComponentDecl(family=Family(f)) for f in families)


@dataclass(frozen=True)
class JointModelSpec:
    """Population structure plus an optional disease structure with sharing roles."""

    population: GroupDecl
    disease: GroupDecl | None = None
    cause_specific: bool = False

    def __post_init__(self):
        for seg in self.population.segments:
            for c in seg:
                if c.role is not Role.FREE:
                    raise ValueError("population components must all be free")
        if self.cause_specific:
            if self.population.n_segments != 1 or len(self.population.segments[0]) != 2:
                raise ValueError(
                    "cause-specific models need a single-segment two-component population"
                )
            if self.disease is None:
                object.__setattr__(
                    self,
                    "disease",
                    GroupDecl.simple(
                        ComponentDecl(role=Role.PROPORTIONAL, of=0),
                        ComponentDecl(role=Role.SHARED, of=1),
                    ),
                )
        if self.disease is not None:
            non_shared = 0
            for s, seg in enumerate(self.disease.segments):
                pop_seg = self.population.segments[min(s, self.population.n_segments - 1)]
                for c in seg:
                    if c.role is Role.FREE:
                        non_shared += 1
                        continue
                    if c.of >= len(pop_seg):
                        raise ValueError(
                            f"disease segment {s} references population component {c.of}, "
                            f"but that segment only has {len(pop_seg)}"
                        )
                    if c.role is Role.PROPORTIONAL:
                        non_shared += 1
            if non_shared == 0:
                raise ValueError(
                    "disease group must have at least one free or proportional component"
                )

    def group_names(self) -> tuple[str, ...]:
        names: list[str] = []
        if self.cause_specific:
            names += ["cause", "other"]
        else:
            names.append("population")
        if self.disease is not None:
            names.append("disease")
        return tuple(names)


# ---------------------------------------------------------------------------
# priors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Prior:
    """One prior density; ``dist`` is exponential (rate), gamma (shape, rate)
    or normal (mean, sd)."""

    dist: str
    a: float
    b: float = 0.0

    def log_pdf(self, x: float) -> float:
        if self.dist == "exponential":
            if x <= 0:
                return -np.inf
            return np.log(self.a) - self.a * x
        if self.dist == "gamma":
            if x <= 0:
                return -np.inf
            from scipy.special import gammaln

            return self.a * np.log(self.b) - gammaln(self.a) + (self.a - 1.0) * np.log(x) - self.b * x
        if self.dist == "normal":
            return -0.5 * np.log(2.0 * np.pi) - np.log(self.b) - 0.5 * ((x - self.a) / self.b) ** 2
        raise ValueError(f"unknown prior distribution {self.dist!r}")

    def dlog_pdf(self, x: float) -> float:
        if self.dist == "exponential":
            return -self.a
        if self.dist == "gamma":
            return (self.a - 1.0) / x - self.b
        if self.dist == "normal":
            return -(x - self.a) / (self.b * self.b)
        raise ValueError(f"unknown prior distribution {self.dist!r}")


#: default priors keyed by parameter role
DEFAULT_PRIORS = {
    "shape": Prior("exponential", 0.1),        # mean 10
    "rate": Prior("gamma", 2.0, 0.5),          # shape-rate convention, mean 4
    "location": Prior("normal", 0.0, 5.0),
    "scale": Prior("gamma", 2.0, 0.5),
    "constant": Prior("exponential", 1.0),     # mean 1, centered on "same as population"
}


@dataclass(frozen=True)
class PriorSpec:
    """Role defaults plus per-parameter overrides (keyed by parameter name)."""

    defaults: dict = field(default_factory=lambda: dict(DEFAULT_PRIORS))
    overrides: dict = field(default_factory=dict)

    def prior_for(self, name: str, role: str) -> Prior:
        if name in self.overrides:
            return self.overrides[name]
        if role not in self.defaults:
            raise ValueError(f"no prior configured for parameter role {role!r}")
        return self.defaults[role]


_FAMILY_ROLES = {
    Family.WEIBULL: ("shape", "rate"),
    Family.EXPONENTIAL: ("rate",),
    Family.LOGNORMAL: ("location", "scale"),
    Family.LOGLOGISTIC: ("shape", "scale"),
}


# ---------------------------------------------------------------------------
# parameter pool and bound evaluation structures
# ---------------------------------------------------------------------------


@dataclass
class _PoolParam:
    name: str
    role: str
    positive: bool


@dataclass
class _BoundComponent:
    family: Family
    param_idx: np.ndarray          # pool indices of the family parameters
    const_idx: int | None = None   # pool index of C when proportional


@dataclass
class _BoundGroup:
    name: str
    boundaries: np.ndarray                      # interior change-points only
    segments: list[list[_BoundComponent]] = field(default_factory=list)

    def segment_of(self, t: np.ndarray) -> np.ndarray:
        if self.boundaries.size == 0:
            return np.zeros(t.size, dtype=int)
        return np.searchsorted(self.boundaries, t, side="right")


class ParameterTransform:
    """Bijection between constrained parameters and the sampling space.

    Positive parameters are sampled as logs; locations pass through.  The
    log-absolute-Jacobian of the inverse transform is the sum of the log
    coordinates of the positive parameters.
    """

    def __init__(self, positive: np.ndarray):
        self.positive = np.asarray(positive, dtype=bool)

    def constrain(self, u: np.ndarray) -> np.ndarray:
        theta = np.array(u, dtype=float, copy=True)
        theta[self.positive] = np.exp(u[self.positive])
        return theta

    def unconstrain(self, theta: np.ndarray) -> np.ndarray:
        u = np.array(theta, dtype=float, copy=True)
        u[self.positive] = np.log(theta[self.positive])
        return u

    def log_jacobian(self, u: np.ndarray) -> float:
        return float(np.sum(u[self.positive]))

    def chain(self, grad_theta: np.ndarray, theta: np.ndarray) -> np.ndarray:
        """d/du of a function given d/dtheta, plus the Jacobian's own gradient."""
        grad_u = np.array(grad_theta, dtype=float, copy=True)
        grad_u[self.positive] = grad_u[self.positive] * theta[self.positive] + 1.0
        return grad_u


class JointModel:
    """A model spec bound to datasets: evaluates likelihood, prior, posterior.

    ``data`` maps group names (see ``JointModelSpec.group_names``) to datasets;
    groups without data contribute nothing, so the same machinery covers
    population-only fits and cause-specific fits with or without disease data.
    """

    def __init__(
        self,
        spec: JointModelSpec,
        data: dict[str, SurvivalDataset] | None = None,
        priors: PriorSpec | None = None,
    ):
        self.spec = spec
        self.priors = priors if priors is not None else PriorSpec()
        self._pool: list[_PoolParam] = []
        self._groups: list[_BoundGroup] = []
        self._build_pool()
        self._bind_data(data or {})

    # -- construction -----------------------------------------------------

    def _add_param(self, name: str, role: str, positive: bool) -> int:
        self._pool.append(_PoolParam(name, role, positive))
        return len(self._pool) - 1

    def _add_component_params(self, prefix: str, family: Family) -> np.ndarray:
        idx = []
        for pname, role, pos in zip(
            family.param_names, _FAMILY_ROLES[family], positivity_mask(family)
        ):
            idx.append(self._add_param(f"{prefix}.{pname}", role, pos))
        return np.asarray(idx, dtype=int)

    def _build_pool(self) -> None:
        spec = self.spec
        pop_bound: list[list[_BoundComponent]] = []
        multi = spec.population.n_segments > 1
        for s, seg in enumerate(spec.population.segments):
            bound_seg = []
            for i, decl in enumerate(seg):
                prefix = f"pop.s{s + 1}.c{i + 1}" if multi else f"pop.c{i + 1}"
                idx = self._add_component_params(prefix, decl.family)
                bound_seg.append(_BoundComponent(decl.family, idx))
            pop_bound.append(bound_seg)
        self._pop_bound = pop_bound

        self._dis_bound: list[list[_BoundComponent]] | None = None
        if spec.disease is not None:
            n_const = 0
            dis_bound = []
            multi_d = spec.disease.n_segments > 1
            for s, seg in enumerate(spec.disease.segments):
                pop_seg = pop_bound[min(s, len(pop_bound) - 1)]
                bound_seg = []
                for i, decl in enumerate(seg):
                    if decl.role is Role.FREE:
                        prefix = f"dis.s{s + 1}.c{i + 1}" if multi_d else f"dis.c{i + 1}"
                        idx = self._add_component_params(prefix, decl.family)
                        bound_seg.append(_BoundComponent(decl.family, idx))
                    elif decl.role is Role.SHARED:
                        ref = pop_seg[decl.of]
                        bound_seg.append(_BoundComponent(ref.family, ref.param_idx))
                    else:
                        ref = pop_seg[decl.of]
                        n_const += 1
                        cidx = self._add_param(f"C{n_const}", "constant", True)
                        bound_seg.append(_BoundComponent(ref.family, ref.param_idx, cidx))
                dis_bound.append(bound_seg)
            self._dis_bound = dis_bound

        self.transform = ParameterTransform(np.array([p.positive for p in self._pool]))

    def _bind_data(self, data: dict[str, SurvivalDataset]) -> None:
        spec = self.spec
        known = set(spec.group_names())
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown group datasets {sorted(unknown)}; expected {sorted(known)}")

        def make_group(name, segments, change_points):
            return _BoundGroup(name=name, boundaries=np.asarray(change_points, dtype=float), segments=segments)

        groups = []
        if spec.cause_specific:
            comps = self._pop_bound[0]
            groups.append(make_group("cause", [[comps[0]]], ()))
            groups.append(make_group("other", [[comps[1]]], ()))
        else:
            groups.append(make_group("population", self._pop_bound, spec.population.change_points))
        if spec.disease is not None:
            groups.append(make_group("disease", self._dis_bound, spec.disease.change_points))

        self._groups = []
        self._datasets: list[tuple[_BoundGroup, np.ndarray, np.ndarray]] = []
        self.observation_groups: list[str] = []
        for g in groups:
            self._groups.append(g)
            if g.name not in data:
                continue
            ds = data[g.name]
            times = ds.times
            events = ds.events
            self._datasets.append((g, times, events))
            self.observation_groups.extend([g.name] * len(ds))

    # -- basic queries ------------------------------------------------------

    @property
    def n_params(self) -> int:
        return len(self._pool)

    @property
    def param_names(self) -> list[str]:
        return [p.name for p in self._pool]

    @property
    def param_roles(self) -> list[str]:
        return [p.role for p in self._pool]

    @property
    def n_observations(self) -> int:
        return sum(t.size for _, t, _ in self._datasets)

    def constrain(self, u: np.ndarray) -> np.ndarray:
        return self.transform.constrain(np.asarray(u, dtype=float))

    def unconstrain(self, theta: np.ndarray) -> np.ndarray:
        return self.transform.unconstrain(np.asarray(theta, dtype=float))

    def group(self, name: str) -> _BoundGroup:
        for g in self._groups:
            if g.name == name:
                return g
        raise KeyError(f"no group named {name!r}")

    def data_max_time(self, group: str) -> float | None:
        """Largest observed time in the dataset bound to a group, if any."""
        for g, times, _ in self._datasets:
            if g.name == group:
                return float(times.max())
        return None

    # -- structural export ---------------------------------------------------

    def curve_segments(self, group: str) -> tuple[list[list[_BoundComponent]], np.ndarray]:
        """Bound component segments + interior boundaries for curve evaluation.

        For cause-specific models ``population`` resolves to the two cause
        components summed, which is the total external-population hazard.
        """
        if self.spec.cause_specific and group == "population":
            comps = self._pop_bound[0]
            return [list(comps)], np.zeros(0)
        g = self.group(group)
        return [list(seg) for seg in g.segments], g.boundaries

    def polyhazard_at(self, group: str, theta: np.ndarray, segment: int = 0) -> PolyhazardSpec:
        """Materialize one segment of a group as a concrete polyhazard.

        For cause-specific models ``population`` yields the sum of both cause
        components.
        """
        theta = np.asarray(theta, dtype=float)
        segments, _ = self.curve_segments(group)
        comps = []
        for bc in segments[segment]:
            params = ComponentParams(bc.family, tuple(theta[bc.param_idx]))
            if bc.const_idx is not None:
                comps.append(
                    PolyComponent(params, role=Role.PROPORTIONAL, constant=float(theta[bc.const_idx]))
                )
            else:
                comps.append(PolyComponent(params))
        return PolyhazardSpec(tuple(comps))

    # -- likelihood ----------------------------------------------------------

    def _group_loglik(
        self,
        g: _BoundGroup,
        times: np.ndarray,
        events: np.ndarray,
        theta: np.ndarray,
        grad: np.ndarray | None = None,
        pointwise: np.ndarray | None = None,
    ) -> float:
        """Log-likelihood of one dataset under one group's (piecewise) polyhazard.

        When ``grad`` is given, accumulates d loglik / d theta into it.
        When ``pointwise`` is given, writes per-record log-likelihoods.
        """
        seg_idx = g.segment_of(times)
        n_seg = len(g.segments)
        bounds = np.concatenate([[0.0], g.boundaries])
        total = 0.0
        if pointwise is not None:
            pointwise.fill(0.0)

        for k in range(n_seg):
            in_k = seg_idx == k
            t_k = times[in_k]
            # records strictly past this segment accrue its full increment
            past = seg_idx > k
            n_past = int(np.count_nonzero(past))
            if t_k.size == 0 and n_past == 0:
                continue
            lo = bounds[k]
            hi = bounds[k + 1] if k + 1 < n_seg else None  # last segment is open-ended
            ev_k = events[in_k] == 1
            t_ev = t_k[ev_k]

            comps = g.segments[k]
            # ---- hazard at event times (log-sum-exp over weighted components)
            if t_ev.size:
                log_terms = np.empty((len(comps), t_ev.size))
                for c, bc in enumerate(comps):
                    params = tuple(theta[bc.param_idx])
                    lh = _log_hazard_pos(bc.family, params, t_ev)
                    if bc.const_idx is not None:
                        lh = lh + np.log(theta[bc.const_idx])
                    log_terms[c] = lh
                log_h_tot = logsumexp(log_terms, axis=0)
                total += float(np.sum(log_h_tot))
                if pointwise is not None:
                    idx_ev = np.flatnonzero(in_k)[ev_k]
                    pointwise[idx_ev] += log_h_tot
                if grad is not None:
                    with np.errstate(invalid="ignore"):
                        soft = np.exp(log_terms - log_h_tot[None, :])
                    for c, bc in enumerate(comps):
                        params = tuple(theta[bc.param_idx])
                        dlh = _dlog_hazard_pos(bc.family, params, t_ev)
                        np.add.at(grad, bc.param_idx, dlh @ soft[c])
                        if bc.const_idx is not None:
                            grad[bc.const_idx] += float(np.sum(soft[c])) / theta[bc.const_idx]

            # ---- cumulative hazard increments
            for bc in comps:
                params = tuple(theta[bc.param_idx])
                w = theta[bc.const_idx] if bc.const_idx is not None else 1.0
                h_lo = float(_cum_hazard(bc.family, params, np.array([lo]))[0]) if lo > 0 else 0.0
                h_t = _cum_hazard(bc.family, params, t_k) if t_k.size else np.zeros(0)
                h_hi = (
                    float(_cum_hazard(bc.family, params, np.array([hi]))[0])
                    if hi is not None and n_past
                    else 0.0
                )
                contrib = float(np.sum(h_t)) - t_k.size * h_lo
                if hi is not None and n_past:
                    contrib += n_past * (h_hi - h_lo)
                total -= w * contrib
                if pointwise is not None:
                    if t_k.size:
                        pointwise[np.flatnonzero(in_k)] -= w * (h_t - h_lo)
                    if hi is not None and n_past:
                        pointwise[np.flatnonzero(past)] -= w * (h_hi - h_lo)
                if grad is not None:
                    d_lo = (
                        _dcum_hazard(bc.family, params, np.array([lo]))[:, 0]
                        if lo > 0
                        else np.zeros(len(params))
                    )
                    d_sum = (
                        _dcum_hazard(bc.family, params, t_k).sum(axis=1)
                        if t_k.size
                        else np.zeros(len(params))
                    )
                    d_contrib = d_sum - t_k.size * d_lo
                    if hi is not None and n_past:
                        d_hi = _dcum_hazard(bc.family, params, np.array([hi]))[:, 0]
                        d_contrib = d_contrib + n_past * (d_hi - d_lo)
                    np.add.at(grad, bc.param_idx, -w * d_contrib)
                    if bc.const_idx is not None:
                        grad[bc.const_idx] -= contrib
        return total

    def log_likelihood(self, theta: np.ndarray) -> float:
        theta = np.asarray(theta, dtype=float)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            return sum(self._group_loglik(g, t, e, theta) for g, t, e in self._datasets)

    def pointwise_log_likelihood(self, theta: np.ndarray) -> np.ndarray:
        """Per-record log-likelihood contributions, groups concatenated in binding order."""
        theta = np.asarray(theta, dtype=float)
        parts = []
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            for g, t, e in self._datasets:
                pw = np.zeros(t.size)
                self._group_loglik(g, t, e, theta, pointwise=pw)
                parts.append(pw)
        return np.concatenate(parts) if parts else np.zeros(0)

    def log_prior(self, theta: np.ndarray) -> float:
        theta = np.asarray(theta, dtype=float)
        return float(
            sum(
                self.priors.prior_for(p.name, p.role).log_pdf(theta[i])
                for i, p in enumerate(self._pool)
            )
        )

    def _log_prior_grad(self, theta: np.ndarray) -> np.ndarray:
        return np.array(
            [
                self.priors.prior_for(p.name, p.role).dlog_pdf(theta[i])
                for i, p in enumerate(self._pool)
            ]
        )

    def log_posterior_and_gradient(self, u: np.ndarray) -> tuple[float, np.ndarray]:
        """Joint log posterior and gradient in the unconstrained space.

        Nonfinite evaluations return (-inf, zeros), which samplers treat as a
        rejected point.
        """
        u = np.asarray(u, dtype=float)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            theta = self.transform.constrain(u)
            grad_theta = self._log_prior_grad(theta)
            lp = self.log_prior(theta)
            for g, t, e in self._datasets:
                lp += self._group_loglik(g, t, e, theta, grad=grad_theta)
            lp += self.transform.log_jacobian(u)
            grad_u = self.transform.chain(grad_theta, theta)
        if not (np.isfinite(lp) and np.all(np.isfinite(grad_u))):
            return -np.inf, np.zeros_like(u)
        return float(lp), grad_u


# ---------------------------------------------------------------------------
# free-function likelihood surface (thin wrappers over JointModel)
# ---------------------------------------------------------------------------


def log_likelihood_population(
    spec: JointModelSpec, theta: np.ndarray, data: SurvivalDataset
) -> float:
    """Population-side log-likelihood: sum of event log-hazards and log-survivals."""
    if spec.cause_specific:
        raise ValueError("use log_likelihood_cause_specific for cause-specific models")
    return JointModel(spec, {"population": data}).log_likelihood(theta)


def log_likelihood_disease(
    spec: JointModelSpec, theta: np.ndarray, data: SurvivalDataset
) -> float:
    """Disease-side log-likelihood, with sharing-aware hazards and survivals."""
    if spec.disease is None:
        raise ValueError("model spec declares no disease group")
    return JointModel(spec, {"disease": data}).log_likelihood(theta)


def log_likelihood_cause_specific(
    spec: JointModelSpec,
    theta: np.ndarray,
    cause_data: SurvivalDataset,
    other_data: SurvivalDataset,
    disease_data: SurvivalDataset | None = None,
) -> float:
    """Cause-specific joint log-likelihood: disease + per-cause population terms."""
    if not spec.cause_specific:
        raise ValueError("model spec is not cause-specific")
    data = {"cause": cause_data, "other": other_data}
    if disease_data is not None:
        data["disease"] = disease_data
    return JointModel(spec, data).log_likelihood(theta)


def log_prior(spec: JointModelSpec, theta: np.ndarray, priors: PriorSpec | None = None) -> float:
    """Sum of log prior densities on the constrained scale."""
    return JointModel(spec, {}, priors).log_prior(np.asarray(theta, dtype=float))


def log_posterior_and_gradient(
    spec: JointModelSpec,
    u: np.ndarray,
    data: dict[str, SurvivalDataset],
    priors: PriorSpec | None = None,
) -> tuple[float, np.ndarray]:
    """Log posterior and analytic gradient at an unconstrained point."""
    return JointModel(spec, data, priors).log_posterior_and_gradient(np.asarray(u, dtype=float))
