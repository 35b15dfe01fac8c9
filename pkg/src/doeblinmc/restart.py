"""Restart (strong Doeblin) chains built from a base kernel and a reference.

With probability ``epsilon`` a step discards the current state and draws a
fresh one from the reference; otherwise it takes one base-kernel step. The
stationary law is the geometric mixture
``pi_eps = eps * sum_t (1 - eps)**t * (ref @ A**t)``, which can be sampled
exactly by drawing the time since the last restart.
"""

import math
from dataclasses import dataclass
from typing import Any, NamedTuple

import numpy as np

from .chain import (
    FIXED_POINT_TOL,
    DenseDistribution,
    DenseKernel,
    NonErgodicError,
    _same_space,
    check_dense,
    stationary_of,
    tv_distance,
)

# Neglected tail mass allowed when truncating geometric series.
TAIL_TOL = 1e-10


def check_epsilon(epsilon):
    eps = float(epsilon)
    if not 0.0 < eps <= 1.0:
        raise ValueError(f"epsilon must lie in (0, 1], got {epsilon!r}")
    return eps


@dataclass(frozen=True, eq=False)
class DoeblinChain:
    """Base kernel wrapped with restarts to ``reference`` at rate ``epsilon``.

    ``base`` needs ``step(x, rng)``; ``reference`` needs ``sample(rng)`` and
    ``logpmf(x)``. Optional ``step_many`` / ``sample_many`` methods enable the
    vectorized samplers.
    """

    base: Any
    reference: Any
    epsilon: float

    def __post_init__(self):
        object.__setattr__(self, "epsilon", check_epsilon(self.epsilon))


class RestartEvent(NamedTuple):
    restarted: bool
    next_state: Any


def wrapped_step(chain, x, rng):
    """One step of the restart chain from state ``x``.

    The restart coin is tossed before the base step and replaces it.
    """
    if rng.random() < chain.epsilon:
        return RestartEvent(True, chain.reference.sample(rng))
    return RestartEvent(False, chain.base.step(x, rng))


def sample_restart_time(epsilon, rng, size=None):
    """Draw ``T`` with ``P(T = t) = eps * (1 - eps)**t`` by inversion.

    Returns an int, or an int64 array when ``size`` is given.
    """
    eps = check_epsilon(epsilon)
    n = 1 if size is None else int(size)
    if eps == 1.0:
        out = np.zeros(n, dtype=np.int64)
    else:
        u = rng.random(n)
        # random() lives in [0, 1); redraw exact zeros to keep log finite
        while np.any(u == 0.0):
            zero = u == 0.0
            u[zero] = rng.random(int(zero.sum()))
        out = np.floor(np.log(u) / math.log1p(-eps)).astype(np.int64)
    return int(out[0]) if size is None else out


def sample_stationary(chain, rng, size=None):
    """Exact draw(s) from the stationary law of ``chain``.

    Draws the time since the last restart, a reference state, and then runs
    that many base-kernel steps (no nested restarts).
    """
    if size is None:
        T = sample_restart_time(chain.epsilon, rng)
        x = chain.reference.sample(rng)
        for _ in range(T):
            x = chain.base.step(x, rng)
        return x
    T = sample_restart_time(chain.epsilon, rng, size)
    xs = chain.reference.sample_many(int(size), rng)
    for s in range(int(T.max(initial=0))):
        active = np.flatnonzero(T > s)
        xs[active] = chain.base.step_many(xs[active], rng)
    return xs


def wrapped_kernel(base, reference, epsilon):
    """Dense restart kernel ``(1 - eps) * A + eps * 1 ref^T``."""
    eps = check_epsilon(epsilon)
    _same_space(base, reference)
    check_dense(base.space)
    rows = (1.0 - eps) * base.rows + eps * reference.probs[None, :]
    return DenseKernel(base.space, rows)


def stationary_dense(base, reference, epsilon):
    """Stationary law of the restart chain from the dense linear system.

    Solves ``(I - (1 - eps) A^T) pi = eps * ref``; the matrix is always
    nonsingular for ``eps > 0``.
    """
    eps = check_epsilon(epsilon)
    _same_space(base, reference)
    check_dense(base.space)
    if eps == 1.0:
        return reference
    n = base.space.N
    M = np.eye(n) - (1.0 - eps) * base.rows.T
    pi = np.linalg.solve(M, eps * reference.probs)
    dist = DenseDistribution.normalized(base.space, pi)
    Aw = wrapped_kernel(base, reference, eps)
    resid = 0.5 * np.abs(dist.probs @ Aw.rows - dist.probs).sum()
    if resid > FIXED_POINT_TOL:
        raise RuntimeError(f"restart stationary residual {resid:.3g} exceeds tolerance")
    return dist


def contraction_check(base, reference, epsilon, mu, nu):
    """Return ``(TV(mu Aw, nu Aw), (1 - eps) TV(mu, nu))`` for the restart kernel.

    The first never exceeds the second (up to round-off).
    """
    eps = check_epsilon(epsilon)
    Aw = wrapped_kernel(base, reference, eps).rows
    _same_space(base, mu)
    _same_space(base, nu)
    lhs = 0.5 * float(np.abs(mu.probs @ Aw - nu.probs @ Aw).sum())
    rhs = (1.0 - eps) * tv_distance(mu, nu)
    return lhs, rhs


def mixing_curve(base, reference, epsilon, start, t_max):
    """``[(t, TV(start Aw^t, pi_eps)) for t in 0..t_max]``."""
    if int(t_max) < 0:
        raise ValueError("t_max must be non-negative")
    eps = check_epsilon(epsilon)
    Aw = wrapped_kernel(base, reference, eps).rows
    target = stationary_dense(base, reference, eps).probs
    _same_space(base, start)
    mu = start.probs.copy()
    curve = []
    for t in range(int(t_max) + 1):
        curve.append((t, 0.5 * float(np.abs(mu - target).sum())))
        mu = mu @ Aw
        mu /= mu.sum()
    return curve


def envelope_violations(curve, epsilon, tol=FIXED_POINT_TOL):
    """Entries of a mixing curve above ``(1 - eps)**t * value(0) + tol``."""
    v0 = curve[0][1]
    return [
        (t, v) for t, v in curve if v > (1.0 - epsilon) ** t * v0 + tol
    ]


class GapRecord(NamedTuple):
    epsilon: float
    gap: float
    bound: float


def tail_cutoff(epsilon, tail=TAIL_TOL):
    """Smallest ``t_cap`` with ``(1 - eps)**(t_cap + 1) <= tail``."""
    eps = check_epsilon(epsilon)
    if eps == 1.0:
        return 0
    t_cap = max(0, math.ceil(math.log(tail) / math.log1p(-eps)) - 1)
    while (1.0 - eps) ** (t_cap + 1) > tail:
        t_cap += 1
    return t_cap


def approximation_gap(base, reference, epsilons):
    """Distance from each restart stationary law to the base stationary law.

    For every ``eps`` returns ``GapRecord(eps, TV(pi_eps, pi), B(eps))`` where
    ``B(eps) = sum_{t <= t_cap} eps (1 - eps)**t TV(ref A^t, pi)`` dominates
    the gap by the triangle inequality.

    Raises
    ------
    NonErgodicError
        If the base kernel has no unique stationary law.
    """
    _same_space(base, reference)
    check_dense(base.space)
    pi = stationary_of(base)
    records = []
    for epsilon in epsilons:
        eps = check_epsilon(epsilon)
        gap = tv_distance(stationary_dense(base, reference, eps), pi)
        mu = reference.probs.copy()
        bound = 0.0
        for t in range(tail_cutoff(eps) + 1):
            bound += eps * (1.0 - eps) ** t * 0.5 * float(np.abs(mu - pi.probs).sum())
            mu = mu @ base.rows
        records.append(GapRecord(eps, gap, bound))
    return records

