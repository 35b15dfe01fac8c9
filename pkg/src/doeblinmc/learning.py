"""Maximum likelihood under the stationary law of a Gibbs restart chain.

The gradient of ``log pi_eps(y)`` is the posterior expectation, over restart
paths ending in ``y``, of the summed per-step Gibbs log-probability
gradients. Paths are proposed by running the Gibbs kernel backwards from
``y`` (valid by detailed balance) and reweighted by ``ref(x0) / p~(x0)``.
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .chain import DENSE_CAP
from .models import (
    conditional,
    dense_gibbs_kernel,
    features,
    gibbs_step,
    gibbs_step_many,
    unnorm_logp,
)
from .restart import check_epsilon, sample_restart_time, stationary_dense
from .seeding import derive_rng

logger = logging.getLogger(__name__)

FD_STEP = 1e-5
THETA_LIMIT = 50.0
DEGENERATE_ESS_FRACTION = 0.01


class DivergenceError(RuntimeError):
    """Training pushed a parameter beyond ``THETA_LIMIT``; carries the partial log."""

    def __init__(self, message, log, model):
        super().__init__(message)
        self.log = log
        self.model = model


# ---------------------------------------------------------------- exact oracles


def restart_stationary(model, reference, epsilon):
    """Dense stationary law of the Gibbs restart chain."""
    return stationary_dense(dense_gibbs_kernel(model), reference.to_dense(), epsilon)


def loglik_exact(model, reference, epsilon, y):
    """``log pi_eps(y)`` from the dense linear solve."""
    pi = restart_stationary(model, reference, epsilon)
    return float(np.log(pi.probs[model.space.index(y)]))


def mean_loglik_exact(model, reference, epsilon, data):
    """Mean ``log pi_eps`` over the rows of ``data`` (one dense solve)."""
    pi = restart_stationary(model, reference, epsilon)
    idx = model.space.index(np.atleast_2d(np.asarray(data, dtype=np.int64)))
    return float(np.mean(np.log(pi.probs[idx])))


def grad_loglik_fd(model, reference, epsilon, y, h=FD_STEP):
    """Central finite differences of ``loglik_exact`` in every parameter."""
    theta = model.theta
    grad = np.zeros(theta.size)
    for i in range(theta.size):
        step = np.zeros(theta.size)
        step[i] = h
        up = loglik_exact(model.with_theta(theta + step), reference, epsilon, y)
        down = loglik_exact(model.with_theta(theta - step), reference, epsilon, y)
        grad[i] = (up - down) / (2 * h)
    return grad


# ---------------------------------------------------------------- path sampling


@dataclass(frozen=True, eq=False)
class RestartPath:
    """One restart path in forward order.

    ``states[t]`` is ``x_t`` for ``t = 0..T``; step ``t`` (1-based) resampled
    site ``coords[t-1]`` to label ``labels[t-1]``.
    """

    T: int
    states: np.ndarray
    coords: np.ndarray
    labels: np.ndarray
    log_weight: float


def sample_posterior_path(model, reference, epsilon, y, rng):
    """Propose a restart path ending at ``y`` by backward Gibbs steps.

    ``log_weight = log ref(x0) - unnorm_logp(x0)``; the omitted ``y``-only
    factor cancels under self-normalization.
    """
    check_epsilon(epsilon)
    T = sample_restart_time(epsilon, rng)
    x = np.asarray(y, dtype=np.int64).copy()
    backward = [x]
    coords = []
    for _ in range(T):
        x, v, _ = gibbs_step(model, x, rng)
        backward.append(x)
        coords.append(v)
    states = np.array(backward[::-1])
    coords = np.array(coords[::-1], dtype=np.int64)
    labels = states[np.arange(1, T + 1), coords] if T else np.zeros(0, dtype=np.int64)
    x0 = states[0]
    log_weight = reference.logpmf(x0) - unnorm_logp(model, x0)
    return RestartPath(T, states, coords, labels, float(log_weight))


def path_gradient(model, path):
    """Sum over forward steps of ``d/dtheta log conditional(x_{t-1}, v_t)[k_t]``."""
    K = model.space.K
    grad = np.zeros(model.n_params)
    for t in range(path.T):
        x_prev = path.states[t]
        v, k = int(path.coords[t]), int(path.labels[t])
        delta = -conditional(model, x_prev, v)
        delta[k] += 1.0
        grad[v * K : (v + 1) * K] += delta
        for e, other, first in model.incidence[v]:
            off = model.edge_offset(e)
            if first:
                grad[off + np.arange(K) * K + x_prev[other]] += delta
            else:
                grad[off + x_prev[other] * K + np.arange(K)] += delta
    return grad


def _accumulate_step(model, G, rows, xs, vs, ks, probs):
    # forward-step gradient rows of G: onehot(ks) - probs on every local feature
    K = model.space.K
    delta = -probs
    delta[np.arange(len(rows)), ks] += 1.0
    labels = np.arange(K)
    G[rows[:, None], vs[:, None] * K + labels] += delta
    for e, (u, w) in enumerate(model.edges):
        off = model.edge_offset(e)
        m = vs == u
        if m.any():
            G[rows[m][:, None], off + labels * K + xs[m, w][:, None]] += delta[m]
        m = vs == w
        if m.any():
            G[rows[m][:, None], off + xs[m, u][:, None] * K + labels] += delta[m]


def sample_path_block(model, reference, epsilon, y, n, rng):
    """Vectorized backward proposal of ``n`` paths.

    Returns ``(log_weights, path_grads, T, x0)``; ``path_grads[m]`` is the
    summed forward-step gradient of path ``m`` and ``x0[m]`` its start state.
    """
    T = sample_restart_time(epsilon, rng, n)
    xs = np.tile(np.asarray(y, dtype=np.int64), (n, 1))
    G = np.zeros((n, model.n_params))
    for s in range(int(T.max(initial=0))):
        rows = np.flatnonzero(T > s)
        prev = xs[rows]
        nxt, vs, _, probs = gibbs_step_many(model, prev, rng)
        # the forward step goes nxt -> prev and lands on label prev[v]
        ks = prev[np.arange(len(rows)), vs]
        _accumulate_step(model, G, rows, nxt, vs, ks, probs)
        xs[rows] = nxt
    log_w = reference.logpmf(xs) - unnorm_logp(model, xs)
    return log_w, G, T, xs


@dataclass(frozen=True, eq=False)
class GradientEstimate:
    grad: np.ndarray
    stderr: np.ndarray
    n_particles: int
    ess: float
    max_weight: float
    degenerate: bool = False


def _self_normalize(log_w, G):
    w = np.exp(log_w - log_w.max())
    w_hat = w / w.sum()
    grad = w_hat @ G
    stderr = np.sqrt((w_hat**2) @ (G - grad) ** 2)
    ess = float(w.sum() ** 2 / (w**2).sum())
    return grad, stderr, ess, float(w_hat.max())


def grad_loglik_estimate(
    model, reference, epsilon, y, M, rng, block_size=4096, executor=None
):
    """Self-normalized importance-sampling estimate of ``d log pi_eps(y) / dtheta``.

    Particles are split into blocks of ``block_size``, each with its own
    stream spawned from ``rng``; blocks are reduced in order, so the result
    does not depend on whether ``executor`` runs them concurrently.
    """
    check_epsilon(epsilon)
    if M < 1:
        raise ValueError("need at least one particle")
    sizes = [block_size] * (M // block_size)
    if M % block_size:
        sizes.append(M % block_size)
    streams = rng.spawn(len(sizes))

    def run(i):
        return sample_path_block(model, reference, epsilon, y, sizes[i], streams[i])

    mapper = executor.map if executor is not None else map
    blocks = list(mapper(run, range(len(sizes))))
    log_w = np.concatenate([b[0] for b in blocks])
    G = np.concatenate([b[1] for b in blocks])
    grad, stderr, ess, max_w = _self_normalize(log_w, G)
    return GradientEstimate(
        grad, stderr, M, ess, max_w, degenerate=ess < DEGENERATE_ESS_FRACTION * M
    )


# ---------------------------------------------------------------- training


@dataclass
class TrainConfig:
    """SGD settings; ``step_size / (1 + i / decay)`` is the step at iteration ``i``.

    ``epsilon_schedule`` is a list of ``(iteration, epsilon)`` pairs; the last
    pair whose iteration is ``<= i`` is in force, falling back to ``epsilon``.
    """

    epsilon: float = 0.3
    epsilon_schedule: Optional[list] = None
    particles: int = 100
    step_size: float = 0.5
    decay: float = 100.0
    iterations: int = 200
    batch_size: int = 10
    seed: int = 0
    eval_every: int = 20
    workers: int = 1
    block_size: int = 4096

    def __post_init__(self):
        check_epsilon(self.epsilon)
        for it, eps in self.epsilon_schedule or []:
            check_epsilon(eps)
            if it < 0:
                raise ValueError("schedule iterations must be non-negative")
        if self.particles < 1:
            raise ValueError("particles must be >= 1")
        if self.step_size < 0 or self.decay <= 0:
            raise ValueError("step_size must be >= 0 and decay > 0")
        if self.iterations < 0 or self.batch_size < 1 or self.eval_every < 1:
            raise ValueError("iterations >= 0, batch_size >= 1, eval_every >= 1 required")
        if self.workers < 1 or self.block_size < 1:
            raise ValueError("workers and block_size must be >= 1")

    def epsilon_at(self, i):
        eps = self.epsilon
        for it, e in sorted(self.epsilon_schedule or [], key=lambda p: p[0]):
            if it <= i:
                eps = e
        return float(eps)

    def step_at(self, i):
        return self.step_size / (1.0 + i / self.decay)


def _eval_record(model, reference, eps, data, heldout, i, ess, max_w, t0):
    exact = model.space.N <= DENSE_CAP
    rec = {
        "iteration": i,
        "epsilon": eps,
        "train_loglik_exact": mean_loglik_exact(model, reference, eps, data) if exact else None,
        "heldout_loglik_exact": (
            mean_loglik_exact(model, reference, eps, heldout)
            if exact and heldout is not None
            else None
        ),
        "mean_ess": float(np.mean(ess)) if ess else None,
        "max_weight": float(np.max(max_w)) if max_w else None,
        "wallclock_ms": round((time.perf_counter() - t0) * 1000.0, 3),
    }
    return rec


def sgd_train(dataset, model, reference, config, heldout=None):
    """Stochastic gradient ascent on the mean ``log pi_eps`` of ``dataset``.

    Returns ``(final_model, log)`` where ``log`` holds one record per
    evaluation. Every random draw comes from streams derived from
    ``config.seed``, so results are reproducible for any ``config.workers``.

    Raises
    ------
    DivergenceError
        If any parameter leaves ``[-THETA_LIMIT, THETA_LIMIT]``.
    """
    data = np.atleast_2d(np.asarray(dataset, dtype=np.int64))
    if data.size == 0:
        raise ValueError("empty dataset")
    t0 = time.perf_counter()
    log = []
    ess_acc, maxw_acc = [], []
    executor = ThreadPoolExecutor(config.workers) if config.workers > 1 else None
    try:
        log.append(
            _eval_record(model, reference, config.epsilon_at(0), data, heldout, 0, [], [], t0)
        )
        for i in range(config.iterations):
            eps = config.epsilon_at(i)
            batch = derive_rng(config.seed, "batch", i).integers(len(data), size=config.batch_size)

            def point_grad(j):
                rng = derive_rng(config.seed, "grad", i, j)
                return grad_loglik_estimate(
                    model, reference, eps, data[batch[j]], config.particles, rng,
                    block_size=config.block_size,
                )

            mapper = executor.map if executor is not None else map
            estimates = list(mapper(point_grad, range(config.batch_size)))
            g = np.mean([est.grad for est in estimates], axis=0)
            ess_acc.extend(est.ess for est in estimates)
            maxw_acc.extend(est.max_weight for est in estimates)
            model = model.with_theta(model.theta + config.step_at(i) * g)
            if np.max(np.abs(model.theta)) > THETA_LIMIT:
                raise DivergenceError(
                    f"parameter magnitude exceeded {THETA_LIMIT} at iteration {i + 1}",
                    log,
                    model,
                )
            done = i + 1
            if done % config.eval_every == 0 or done == config.iterations:
                log.append(
                    _eval_record(
                        model, reference, config.epsilon_at(done), data, heldout,
                        done, ess_acc, maxw_acc, t0,
                    )
                )
                logger.debug("iteration %d: %s", done, log[-1])
                ess_acc, maxw_acc = [], []
    finally:
        if executor is not None:
            executor.shutdown()
    return model, log


# ---------------------------------------------------------------- baseline


def cd_gradient(model, y, k_steps, rng):
    """Contrastive-divergence surrogate ``phi(y) - phi(x_k)``.

    ``x_k`` is ``y`` after ``k_steps`` Gibbs updates without restarts.
    """
    if k_steps < 1:
        raise ValueError("k_steps must be >= 1")
    y = np.asarray(y, dtype=np.int64)
    x = y
    for _ in range(k_steps):
        x = gibbs_step(model, x, rng)[0]
    return features(model, y) - features(model, x)
