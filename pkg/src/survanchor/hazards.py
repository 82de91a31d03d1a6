"""Closed-form hazard, cumulative hazard and survival functions.

Building blocks for additive-hazard (polyhazard) survival models: a total
hazard is a sum of M parametric component hazards, the survival function is
the product of the component survivals.  Components from a reference
population may enter a disease group's hazard scaled by a proportionality
constant C, in which case the component survival enters raised to the power C.

Parameterizations (fixed, documented so priors stay meaningful):

  Weibull(shape a, rate l):   h(t) = l*a*t^(a-1),       H(t) = l*t^a
  Exponential(rate l):        h(t) = l,                 H(t) = l*t
  LogNormal(mu, sigma):       h(t) = pdf(t)/S(t),       H(t) = -log Phi(-z),
                              z = (log t - mu)/sigma
  LogLogistic(shape a, scale s):
                              S(t) = 1/(1+(t/s)^a),     H(t) = log(1+(t/s)^a)

All evaluation goes through log-space where products or powers appear, so
large times do not underflow.  Hazards at t = 0 return the limiting value
(possibly +inf for decreasing-hazard shapes) instead of raising, which makes
grid evaluation starting at 0 safe.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.special import expit, log_ndtr

_HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)


class Family(str, Enum):
    """Supported parametric hazard families."""

    WEIBULL = "weibull"
    EXPONENTIAL = "exponential"
    LOGNORMAL = "lognormal"
    LOGLOGISTIC = "loglogistic"

    @property
    def arity(self) -> int:
        return len(self.param_names)

    @property
    def param_names(self) -> tuple[str, ...]:
        return _PARAM_NAMES[self]


_PARAM_NAMES = {
    Family.WEIBULL: ("shape", "rate"),
    Family.EXPONENTIAL: ("rate",),
    Family.LOGNORMAL: ("location", "scale"),
    Family.LOGLOGISTIC: ("shape", "scale"),
}

#: which parameters are constrained positive (True) vs unconstrained reals
_POSITIVE = {
    Family.WEIBULL: (True, True),
    Family.EXPONENTIAL: (True,),
    Family.LOGNORMAL: (False, True),
    Family.LOGLOGISTIC: (True, True),
}


class Role(str, Enum):
    """Cross-group sharing role of a hazard component."""

    FREE = "free"
    SHARED = "shared"
    PROPORTIONAL = "proportional"


def positivity_mask(family: Family) -> tuple[bool, ...]:
    """Per-parameter positivity constraints for a family."""
    return _POSITIVE[family]


@dataclass(frozen=True)
class ComponentParams:
    """Concrete parameter values of one hazard component.

    Raises ValueError if the arity does not match the family or a
    positivity constraint is violated.
    """

    family: Family
    params: tuple[float, ...]

    def __post_init__(self):
        family = Family(self.family)
        object.__setattr__(self, "family", family)
        params = tuple(float(p) for p in self.params)
        object.__setattr__(self, "params", params)
        if len(params) != family.arity:
            raise ValueError(
                f"{family.value} takes {family.arity} parameters, got {len(params)}"
            )
        for name, value, positive in zip(
            family.param_names, params, _POSITIVE[family]
        ):
            if not np.isfinite(value):
                raise ValueError(f"{family.value} {name} must be finite, got {value}")
            if positive and value <= 0.0:
                raise ValueError(f"{family.value} {name} must be > 0, got {value}")


@dataclass(frozen=True)
class PolyComponent:
    """A component inside a polyhazard sum, with its sharing role.

    ``constant`` is the proportionality constant C; it scales the hazard
    (and exponentiates the survival) only when ``role`` is PROPORTIONAL.
    """

    params: ComponentParams
    role: Role = Role.FREE
    constant: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "role", Role(self.role))
        if self.role is Role.PROPORTIONAL and self.constant <= 0.0:
            raise ValueError(f"proportionality constant must be > 0, got {self.constant}")

    @property
    def weight(self) -> float:
        """Multiplier applied to this component's hazard and cumulative hazard."""
        return self.constant if self.role is Role.PROPORTIONAL else 1.0


@dataclass(frozen=True)
class PolyhazardSpec:
    """Sum of M hazard components with concrete parameters."""

    components: tuple[PolyComponent, ...]

    def __post_init__(self):
        comps = tuple(
            c if isinstance(c, PolyComponent) else PolyComponent(c)
            for c in self.components
        )
        object.__setattr__(self, "components", comps)
        if len(comps) < 1:
            raise ValueError("a polyhazard needs at least one component")

    @property
    def n_components(self) -> int:
        return len(self.components)


@dataclass(frozen=True)
class ChangePointSchedule:
    """Time partition 0 = tau_0 < tau_1 < ... < tau_K with one polyhazard per segment.

    Segment k governs the half-open interval [tau_{k-1}, tau_k); the final
    segment additionally owns tau_K, so the hazard is single-valued everywhere.
    """

    boundaries: tuple[float, ...]
    segments: tuple[PolyhazardSpec, ...] = field(default=())

    def __post_init__(self):
        bounds = tuple(float(b) for b in self.boundaries)
        object.__setattr__(self, "boundaries", bounds)
        if len(self.segments) == 0:
            raise ValueError("empty schedule: at least one segment is required")
        if len(bounds) != len(self.segments) + 1:
            raise ValueError(
                f"{len(self.segments)} segments need {len(self.segments) + 1} "
                f"boundaries, got {len(bounds)}"
            )
        if bounds[0] != 0.0:
            raise ValueError(f"first boundary must be 0, got {bounds[0]}")
        if any(b1 >= b2 for b1, b2 in zip(bounds, bounds[1:])):
            raise ValueError("boundaries must be strictly increasing")

    @property
    def n_segments(self) -> int:
        return len(self.segments)

    @property
    def end(self) -> float:
        return self.boundaries[-1]

    def segment_index(self, t: np.ndarray) -> np.ndarray:
        """Index of the segment owning each time (left-closed convention)."""
        idx = np.searchsorted(np.asarray(self.boundaries[1:]), t, side="right")
        return np.minimum(idx, self.n_segments - 1)


# ---------------------------------------------------------------------------
# family kernels (vectorized over t; t is a positive float array)
# ---------------------------------------------------------------------------


def _log_hazard_pos(family: Family, params: tuple[float, ...], t: np.ndarray) -> np.ndarray:
    log_t = np.log(t)
    if family is Family.WEIBULL:
        a, l = params
        return np.log(l) + np.log(a) + (a - 1.0) * log_t
    if family is Family.EXPONENTIAL:
        (l,) = params
        return np.full_like(t, np.log(l))
    if family is Family.LOGNORMAL:
        mu, sigma = params
        z = (log_t - mu) / sigma
        # log h = log pdf - log S;  log S = log Phi(-z)
        return -0.5 * z * z - _HALF_LOG_2PI - np.log(sigma) - log_t - log_ndtr(-z)
    if family is Family.LOGLOGISTIC:
        a, s = params
        log_ts = log_t - np.log(s)
        return np.log(a) - np.log(s) + (a - 1.0) * log_ts - np.logaddexp(0.0, a * log_ts)
    raise ValueError(f"unknown family {family!r}")


def _hazard_limit_at_zero(family: Family, params: tuple[float, ...]) -> float:
    """lim_{t -> 0+} h(t); may be +inf for decreasing-hazard shapes."""
    if family is Family.WEIBULL:
        a, l = params
        return l if a == 1.0 else (0.0 if a > 1.0 else np.inf)
    if family is Family.EXPONENTIAL:
        return params[0]
    if family is Family.LOGNORMAL:
        return 0.0
    if family is Family.LOGLOGISTIC:
        a, s = params
        return 1.0 / s if a == 1.0 else (0.0 if a > 1.0 else np.inf)
    raise ValueError(f"unknown family {family!r}")


def _cum_hazard(family: Family, params: tuple[float, ...], t: np.ndarray) -> np.ndarray:
    """H(t) for t >= 0 (vectorized); H(0) = 0 exactly."""
    out = np.zeros_like(t, dtype=float)
    pos = t > 0.0
    if not np.any(pos):
        return out
    tp = t[pos]
    log_t = np.log(tp)
    if family is Family.WEIBULL:
        a, l = params
        out[pos] = l * tp**a
    elif family is Family.EXPONENTIAL:
        (l,) = params
        out[pos] = l * tp
    elif family is Family.LOGNORMAL:
        mu, sigma = params
        z = (log_t - mu) / sigma
        out[pos] = -log_ndtr(-z)
    elif family is Family.LOGLOGISTIC:
        a, s = params
        out[pos] = np.logaddexp(0.0, a * (log_t - np.log(s)))
    else:
        raise ValueError(f"unknown family {family!r}")
    return out


def _dlog_hazard_pos(family: Family, params: tuple[float, ...], t: np.ndarray) -> np.ndarray:
    """Partials of log h(t) w.r.t. the family parameters; shape (arity, n)."""
    log_t = np.log(t)
    if family is Family.WEIBULL:
        a, l = params
        return np.stack([1.0 / a + log_t, np.full_like(t, 1.0 / l)])
    if family is Family.EXPONENTIAL:
        (l,) = params
        return np.full((1, t.size), 1.0 / l)
    if family is Family.LOGNORMAL:
        mu, sigma = params
        z = (log_t - mu) / sigma
        # psi = pdf(z)/Phi(-z), the hazard of a standard normal at z
        psi = np.exp(-0.5 * z * z - _HALF_LOG_2PI - log_ndtr(-z))
        d_mu = (z - psi) / sigma
        d_sigma = (-1.0 + z * z - z * psi) / sigma
        return np.stack([d_mu, d_sigma])
    if family is Family.LOGLOGISTIC:
        a, s = params
        log_ts = log_t - np.log(s)
        one_minus_sig = expit(-a * log_ts)  # 1/(1+u)
        d_a = 1.0 / a + log_ts * one_minus_sig
        d_s = -(a / s) * one_minus_sig
        return np.stack([d_a, d_s])
    raise ValueError(f"unknown family {family!r}")


def _dcum_hazard(family: Family, params: tuple[float, ...], t: np.ndarray) -> np.ndarray:
    """Partials of H(t) w.r.t. the family parameters; shape (arity, n), zero at t = 0."""
    out = np.zeros((len(params), t.size))
    pos = t > 0.0
    if not np.any(pos):
        return out
    tp = t[pos]
    log_t = np.log(tp)
    if family is Family.WEIBULL:
        a, l = params
        H = l * tp**a
        out[0, pos] = H * log_t
        out[1, pos] = H / l
    elif family is Family.EXPONENTIAL:
        out[0, pos] = tp
    elif family is Family.LOGNORMAL:
        mu, sigma = params
        z = (log_t - mu) / sigma
        psi = np.exp(-0.5 * z * z - _HALF_LOG_2PI - log_ndtr(-z))
        out[0, pos] = -psi / sigma
        out[1, pos] = -z * psi / sigma
    elif family is Family.LOGLOGISTIC:
        a, s = params
        log_ts = log_t - np.log(s)
        sig = expit(a * log_ts)  # u/(1+u)
        out[0, pos] = log_ts * sig
        out[1, pos] = -(a / s) * sig
    else:
        raise ValueError(f"unknown family {family!r}")
    return out


# ---------------------------------------------------------------------------
# public single-component operations
# ---------------------------------------------------------------------------


def _as_time_array(t, allow_zero: bool, what: str) -> tuple[np.ndarray, bool]:
    arr = np.atleast_1d(np.asarray(t, dtype=float))
    scalar = np.ndim(t) == 0
    if np.any(~np.isfinite(arr)) or np.any(arr < 0.0) or (not allow_zero and np.any(arr == 0.0)):
        bound = ">= 0" if allow_zero else "> 0"
        raise ValueError(f"{what} requires time {bound}, got {t!r}")
    return arr, scalar


def _maybe_scalar(values: np.ndarray, scalar: bool):
    return float(values[0]) if scalar else values


def component_hazard(c: ComponentParams, t):
    """Hazard h(t) of a single component; t = 0 returns the limiting value."""
    arr, scalar = _as_time_array(t, allow_zero=True, what="component_hazard")
    out = np.empty_like(arr)
    pos = arr > 0.0
    out[pos] = np.exp(_log_hazard_pos(c.family, c.params, arr[pos]))
    out[~pos] = _hazard_limit_at_zero(c.family, c.params)
    return _maybe_scalar(out, scalar)


def component_cumulative_hazard(c: ComponentParams, t):
    """Cumulative hazard H(t) with S(t) = exp(-H(t)); H(0) = 0."""
    arr, scalar = _as_time_array(t, allow_zero=True, what="component_cumulative_hazard")
    return _maybe_scalar(_cum_hazard(c.family, c.params, arr), scalar)


def component_survival(c: ComponentParams, t):
    """Survival S(t) = exp(-H(t)) of a single component."""
    arr, scalar = _as_time_array(t, allow_zero=True, what="component_survival")
    return _maybe_scalar(np.exp(-_cum_hazard(c.family, c.params, arr)), scalar)


# ---------------------------------------------------------------------------
# polyhazard operations
# ---------------------------------------------------------------------------


def poly_hazard(spec: PolyhazardSpec, t):
    """Total hazard: sum of component hazards, proportional ones scaled by C."""
    arr, scalar = _as_time_array(t, allow_zero=True, what="poly_hazard")
    total = np.zeros_like(arr)
    for comp in spec.components:
        total = total + comp.weight * np.asarray(component_hazard(comp.params, arr))
    return _maybe_scalar(total, scalar)


def poly_cumulative_hazard(spec: PolyhazardSpec, t):
    """Total cumulative hazard: sum of weighted component cumulative hazards."""
    arr, scalar = _as_time_array(t, allow_zero=True, what="poly_cumulative_hazard")
    total = np.zeros_like(arr)
    for comp in spec.components:
        total = total + comp.weight * _cum_hazard(comp.params.family, comp.params.params, arr)
    return _maybe_scalar(total, scalar)


def poly_log_survival(spec: PolyhazardSpec, t):
    """log S(t) = -sum_m w_m H_m(t); proportional survivals enter to the power C."""
    arr, scalar = _as_time_array(t, allow_zero=True, what="poly_log_survival")
    total = np.zeros_like(arr)
    for comp in spec.components:
        total = total - comp.weight * _cum_hazard(comp.params.family, comp.params.params, arr)
    return _maybe_scalar(total, scalar)


def poly_survival(spec: PolyhazardSpec, t):
    """Survival of the polyhazard sum, computed in log-space."""
    arr, scalar = _as_time_array(t, allow_zero=True, what="poly_survival")
    return _maybe_scalar(np.exp(np.asarray(poly_log_survival(spec, arr))), scalar)


# ---------------------------------------------------------------------------
# change-point compositions
# ---------------------------------------------------------------------------


def changepoint_hazard(sched: ChangePointSchedule, t):
    """Hazard of the segment owning t (segments are left-closed, last owns tau_K)."""
    arr, scalar = _as_time_array(t, allow_zero=True, what="changepoint_hazard")
    if np.any(arr > sched.end):
        raise ValueError(f"time beyond the final change-point {sched.end}")
    idx = sched.segment_index(arr)
    out = np.empty_like(arr)
    for k in range(sched.n_segments):
        sel = idx == k
        if np.any(sel):
            out[sel] = np.asarray(poly_hazard(sched.segments[k], arr[sel]))
    return _maybe_scalar(out, scalar)


def changepoint_cumulative_hazard(sched: ChangePointSchedule, t):
    """Accumulated hazard: each traversed segment contributes its own increment.

    -log S(t) = sum_{j < J} [H_j(tau_j) - H_j(tau_{j-1})] + H_J(t) - H_J(tau_{J-1})
    for t in segment J, which is the multiplicative survival adjustment at each
    change-point written additively on the cumulative-hazard scale.
    """
    arr, scalar = _as_time_array(t, allow_zero=True, what="changepoint_cumulative_hazard")
    if np.any(arr > sched.end):
        raise ValueError(f"time beyond the final change-point {sched.end}")
    bounds = np.asarray(sched.boundaries)
    # cumulative hazard accrued at each boundary
    accrued = np.zeros(sched.n_segments + 1)
    for k, seg in enumerate(sched.segments):
        inc = poly_cumulative_hazard(seg, bounds[k + 1]) - poly_cumulative_hazard(seg, bounds[k])
        accrued[k + 1] = accrued[k] + inc
    idx = sched.segment_index(arr)
    out = np.empty_like(arr)
    for k in range(sched.n_segments):
        sel = idx == k
        if np.any(sel):
            seg = sched.segments[k]
            out[sel] = (
                accrued[k]
                + np.asarray(poly_cumulative_hazard(seg, arr[sel]))
                - poly_cumulative_hazard(seg, bounds[k])
            )
    return _maybe_scalar(out, scalar)


def changepoint_survival(sched: ChangePointSchedule, t):
    """Piecewise survival, continuous across change-points; S(0) = 1."""
    arr, scalar = _as_time_array(t, allow_zero=True, what="changepoint_survival")
    return _maybe_scalar(
        np.exp(-np.asarray(changepoint_cumulative_hazard(sched, arr))), scalar
    )
