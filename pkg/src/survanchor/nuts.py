"""No-U-Turn sampler with dual-averaging step size and diagonal mass adaptation.

Implements the dynamic-trajectory Hamiltonian sampler with slice-based
multinomial selection (the classic recursive formulation), a warmup schedule
of an initial step-size buffer, expanding variance-estimation windows for the
diagonal inverse mass matrix, and a final step-size buffer.  Everything is
driven by an explicit ``numpy.random.Generator`` so runs are reproducible
bit-for-bit given a seed.

The target is supplied as a callable ``logp_grad(u) -> (float, ndarray)``
over an unconstrained parameter vector; nonfinite log densities are treated
as rejected proposals and trajectories crossing them count as divergent.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_MAX_DELTA = 1000.0  # energy error beyond which a transition is divergent

# dual-averaging constants (shrinkage, iteration offset, decay exponent)
_DA_GAMMA = 0.05
_DA_T0 = 10.0
_DA_KAPPA = 0.75


@dataclass
class ChainStats:
    """Per-chain sampling diagnostics."""

    divergences: int = 0
    step_size: float = float("nan")
    mean_accept: float = float("nan")
    tree_depths: list = field(default_factory=list)


def _leapfrog(logp_grad, u, r, grad, eps, inv_mass):
    r_half = r + 0.5 * eps * grad
    u_new = u + eps * inv_mass * r_half
    logp_new, grad_new = logp_grad(u_new)
    r_new = r_half + 0.5 * eps * grad_new
    return u_new, r_new, grad_new, logp_new


def _kinetic(r, inv_mass) -> float:
    return 0.5 * float(np.dot(r, inv_mass * r))


def find_reasonable_epsilon(logp_grad, u, logp, grad, inv_mass, rng) -> float:
    """Heuristic initial step size: double/halve until the acceptance
    probability of one leapfrog step crosses 1/2."""
    eps = 1.0
    r = rng.standard_normal(u.size) / np.sqrt(inv_mass)
    joint0 = logp - _kinetic(r, inv_mass)
    _, r1, _, logp1 = _leapfrog(logp_grad, u, r, grad, eps, inv_mass)
    joint1 = logp1 - _kinetic(r1, inv_mass)
    if not np.isfinite(joint1):
        joint1 = -np.inf
    direction = 1.0 if joint1 - joint0 > np.log(0.5) else -1.0
    for _ in range(100):
        eps *= 2.0**direction
        _, r1, _, logp1 = _leapfrog(logp_grad, u, r, grad, eps, inv_mass)
        joint1 = logp1 - _kinetic(r1, inv_mass)
        if not np.isfinite(joint1):
            joint1 = -np.inf
        if direction * (joint1 - joint0) <= direction * np.log(0.5):
            break
    return eps


class _TreeState:
    __slots__ = (
        "u_minus", "r_minus", "grad_minus",
        "u_plus", "r_plus", "grad_plus",
        "u_prop", "grad_prop", "logp_prop",
        "n", "keep_going", "sum_accept", "n_accept", "diverged",
    )


def _build_tree(logp_grad, u, r, grad, log_slice, direction, depth, eps, inv_mass, joint0, rng):
    """Doubling recursion; returns a _TreeState."""
    out = _TreeState()
    if depth == 0:
        u1, r1, grad1, logp1 = _leapfrog(logp_grad, u, r, grad, direction * eps, inv_mass)
        joint = logp1 - _kinetic(r1, inv_mass)
        if not np.isfinite(joint):
            joint = -np.inf
        out.u_minus = out.u_plus = out.u_prop = u1
        out.r_minus = out.r_plus = r1
        out.grad_minus = out.grad_plus = out.grad_prop = grad1
        out.logp_prop = logp1
        out.n = int(log_slice <= joint)
        out.diverged = log_slice - _MAX_DELTA >= joint
        out.keep_going = not out.diverged
        out.sum_accept = float(np.exp(min(0.0, joint - joint0)))
        out.n_accept = 1
        return out

    first = _build_tree(
        logp_grad, u, r, grad, log_slice, direction, depth - 1, eps, inv_mass, joint0, rng
    )
    if not first.keep_going:
        return first
    if direction == -1:
        second = _build_tree(
            logp_grad, first.u_minus, first.r_minus, first.grad_minus,
            log_slice, direction, depth - 1, eps, inv_mass, joint0, rng,
        )
        first.u_minus, first.r_minus, first.grad_minus = (
            second.u_minus, second.r_minus, second.grad_minus,
        )
    else:
        second = _build_tree(
            logp_grad, first.u_plus, first.r_plus, first.grad_plus,
            log_slice, direction, depth - 1, eps, inv_mass, joint0, rng,
        )
        first.u_plus, first.r_plus, first.grad_plus = (
            second.u_plus, second.r_plus, second.grad_plus,
        )
    total = first.n + second.n
    if total > 0 and rng.uniform() < second.n / total:
        first.u_prop = second.u_prop
        first.grad_prop = second.grad_prop
        first.logp_prop = second.logp_prop
    first.n = total
    first.sum_accept += second.sum_accept
    first.n_accept += second.n_accept
    first.diverged = first.diverged or second.diverged
    span = first.u_plus - first.u_minus
    no_u_turn = (
        np.dot(span, inv_mass * first.r_minus) >= 0.0
        and np.dot(span, inv_mass * first.r_plus) >= 0.0
    )
    first.keep_going = second.keep_going and not first.diverged and no_u_turn
    return first


def _warmup_windows(n_warmup: int) -> list[tuple[int, int, bool]]:
    """(start, end, estimate_mass) phases: initial buffer, expanding windows,
    terminal buffer; mirrors the usual three-phase schedule."""
    if n_warmup < 20:
        return [(0, n_warmup, False)]
    init_buf = min(75, max(1, int(0.15 * n_warmup)))
    term_buf = min(50, max(1, int(0.10 * n_warmup)))
    windows = []
    start = init_buf
    size = 25
    end_of_windows = n_warmup - term_buf
    while start < end_of_windows:
        end = min(start + size, end_of_windows)
        # absorb a too-small tail into the final window
        if end_of_windows - end < size // 2:
            end = end_of_windows
        windows.append((start, end, True))
        start = end
        size *= 2
    return [(0, init_buf, False)] + windows + [(end_of_windows, n_warmup, False)]


def nuts_chain(
    logp_grad,
    u0: np.ndarray,
    n_warmup: int,
    n_samples: int,
    rng: np.random.Generator,
    target_accept: float = 0.8,
    max_tree_depth: int = 10,
) -> tuple[np.ndarray, ChainStats]:
    """Run one chain; returns draws (n_samples, dim) in the unconstrained space."""
    u = np.array(u0, dtype=float)
    dim = u.size
    logp, grad = logp_grad(u)
    if not np.isfinite(logp):
        raise ValueError("initial point has nonfinite log density")

    inv_mass = np.ones(dim)
    eps = find_reasonable_epsilon(logp_grad, u, logp, grad, inv_mass, rng)
    mu = np.log(10.0 * eps)
    log_eps_bar = 0.0
    h_bar = 0.0
    da_iter = 0

    windows = _warmup_windows(n_warmup)
    window_draws: list[np.ndarray] = []

    draws = np.empty((n_samples, dim))
    stats = ChainStats()
    accept_accum: list[float] = []

    for it in range(n_warmup + n_samples):
        warming = it < n_warmup
        r0 = rng.standard_normal(dim) / np.sqrt(inv_mass)
        joint0 = logp - _kinetic(r0, inv_mass)
        log_slice = joint0 + np.log1p(-rng.uniform())  # log of U(0, exp(joint0))

        u_minus = u_plus = u
        r_minus = r_plus = r0
        grad_minus = grad_plus = grad
        n_kept = 1
        depth = 0
        keep_going = True
        sum_accept, n_accept = 0.0, 0
        diverged = False

        while keep_going and depth < max_tree_depth:
            direction = 1 if rng.uniform() < 0.5 else -1
            if direction == -1:
                tree = _build_tree(
                    logp_grad, u_minus, r_minus, grad_minus,
                    log_slice, direction, depth, eps, inv_mass, joint0, rng,
                )
                u_minus, r_minus, grad_minus = tree.u_minus, tree.r_minus, tree.grad_minus
            else:
                tree = _build_tree(
                    logp_grad, u_plus, r_plus, grad_plus,
                    log_slice, direction, depth, eps, inv_mass, joint0, rng,
                )
                u_plus, r_plus, grad_plus = tree.u_plus, tree.r_plus, tree.grad_plus
            if tree.keep_going and tree.n > 0 and rng.uniform() < min(1.0, tree.n / n_kept):
                u = tree.u_prop
                grad = tree.grad_prop
                logp = tree.logp_prop
            n_kept += tree.n
            sum_accept += tree.sum_accept
            n_accept += tree.n_accept
            diverged = diverged or tree.diverged
            span = u_plus - u_minus
            keep_going = (
                tree.keep_going
                and np.dot(span, inv_mass * r_minus) >= 0.0
                and np.dot(span, inv_mass * r_plus) >= 0.0
            )
            depth += 1

        accept_frac = sum_accept / max(n_accept, 1)
        if diverged and not warming:
            stats.divergences += 1
        if not warming:
            draws[it - n_warmup] = u
            stats.tree_depths.append(depth)
            accept_accum.append(accept_frac)

        if warming:
            da_iter += 1
            frac = 1.0 / (da_iter + _DA_T0)
            h_bar = (1.0 - frac) * h_bar + frac * (target_accept - accept_frac)
            log_eps = mu - np.sqrt(da_iter) / _DA_GAMMA * h_bar
            eta = da_iter ** (-_DA_KAPPA)
            log_eps_bar = (1.0 - eta) * log_eps_bar + eta * log_eps
            eps = float(np.exp(log_eps))

            for w_start, w_end, estimate in windows:
                if estimate and w_start <= it < w_end:
                    window_draws.append(u.copy())
                if estimate and it == w_end - 1 and len(window_draws) >= 5:
                    sample = np.asarray(window_draws)
                    n_w = sample.shape[0]
                    var = sample.var(axis=0, ddof=1)
                    inv_mass = (n_w / (n_w + 5.0)) * var + (5.0 / (n_w + 5.0)) * 1e-3
                    inv_mass = np.maximum(inv_mass, 1e-10)
                    window_draws = []
                    eps = find_reasonable_epsilon(logp_grad, u, logp, grad, inv_mass, rng)
                    mu = np.log(10.0 * eps)
                    log_eps_bar = 0.0
                    h_bar = 0.0
                    da_iter = 0
            if it == n_warmup - 1:  # freeze at the dual-averaged value
                eps = float(np.exp(log_eps_bar))

    stats.step_size = eps
    stats.mean_accept = float(np.mean(accept_accum)) if accept_accum else float("nan")
    return draws, stats
