"""Discrete pairwise MRFs, single-site Gibbs kernels and enumeration oracles.

Parameters are overcomplete indicator weights stored in one flat vector:
node weights ``theta_node[v, k]`` at ``v * K + k`` first, then edge weights
``theta_edge[e, k, k2]`` at ``V * K + e * K * K + k * K + k2`` where edge
``e = (u, w)`` has ``u < w`` and ``k`` is the label of ``u``.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .chain import DenseDistribution, DenseKernel, StateSpace, check_dense

PROB_FLOOR = 1e-6


def chain_edges(V):
    return [(v, v + 1) for v in range(V - 1)]


def grid_edges(rows, cols):
    """4-neighbour grid, variables numbered row-major."""
    edges = []
    for r in range(rows):
        for c in range(cols):
            v = r * cols + c
            if c + 1 < cols:
                edges.append((v, v + 1))
            if r + 1 < rows:
                edges.append((v, v + cols))
    return sorted(edges)


def num_params(V, K, n_edges):
    return V * K + n_edges * K * K


@dataclass(frozen=True, eq=False)
class PairwiseModel:
    """Pairwise MRF ``log p~(x) = sum_v node[v, x_v] + sum_(u,w) edge[e, x_u, x_w]``."""

    space: StateSpace
    edges: tuple
    theta: np.ndarray

    def __post_init__(self):
        V, K = self.space.V, self.space.K
        edges = tuple(sorted((min(int(u), int(w)), max(int(u), int(w))) for u, w in self.edges))
        if any(u == w for u, w in edges):
            raise ValueError("self-loop edge")
        if len(set(edges)) != len(edges):
            raise ValueError("duplicate edge")
        if any(u < 0 or w >= V for u, w in edges):
            raise ValueError("edge endpoint out of range")
        theta = np.array(self.theta, dtype=float)
        if theta.shape != (num_params(V, K, len(edges)),):
            raise ValueError(
                f"theta has shape {theta.shape}, expected ({num_params(V, K, len(edges))},)"
            )
        theta.setflags(write=False)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "theta", theta)
        # incidence[v] = [(edge index, neighbour, v_is_first_endpoint), ...]
        incidence = [[] for _ in range(V)]
        for e, (u, w) in enumerate(edges):
            incidence[u].append((e, w, True))
            incidence[w].append((e, u, False))
        object.__setattr__(self, "incidence", tuple(tuple(i) for i in incidence))

    @classmethod
    def zeros(cls, space, edges):
        edges = list(edges)
        return cls(space, edges, np.zeros(num_params(space.V, space.K, len(edges))))

    @property
    def n_params(self):
        return self.theta.size

    @property
    def node(self):
        V, K = self.space.V, self.space.K
        return self.theta[: V * K].reshape(V, K)

    @property
    def edge(self):
        V, K = self.space.V, self.space.K
        return self.theta[V * K :].reshape(len(self.edges), K, K)

    def edge_offset(self, e):
        K = self.space.K
        return self.space.V * K + e * K * K

    def with_theta(self, theta):
        return PairwiseModel(self.space, self.edges, theta)


def random_model(space, edges, rng, scale=1.0):
    """Model with i.i.d. ``N(0, scale**2)`` parameters."""
    edges = list(edges)
    theta = scale * rng.standard_normal(num_params(space.V, space.K, len(edges)))
    return PairwiseModel(space, edges, theta)


def unnorm_logp(model, x):
    """Unnormalized log-probability of a state, or of each row of an array."""
    x = np.asarray(x, dtype=np.int64)
    batch = np.atleast_2d(x)
    node, edge = model.node, model.edge
    out = node[np.arange(model.space.V), batch].sum(axis=1)
    for e, (u, w) in enumerate(model.edges):
        out = out + edge[e, batch[:, u], batch[:, w]]
    return float(out[0]) if x.ndim == 1 else out


def exact_distribution(model):
    """Normalized ``exp(unnorm_logp)`` over all states, by enumeration."""
    check_dense(model.space)
    logp = unnorm_logp(model, model.space.all_states())
    return DenseDistribution.normalized(model.space, np.exp(logp - logsumexp(logp)))


def _conditional_logits(model, xs, vs):
    """Logits of ``x_v`` given the rest, for each row ``xs[i]`` and site ``vs[i]``."""
    logits = model.node[vs].copy()
    edge = model.edge
    for e, (u, w) in enumerate(model.edges):
        at_u = vs == u
        if at_u.any():
            logits[at_u] += edge[e][:, xs[at_u, w]].T
        at_w = vs == w
        if at_w.any():
            logits[at_w] += edge[e][xs[at_w, u], :]
    return logits


def _softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    p = np.exp(z)
    return p / p.sum(axis=-1, keepdims=True)


def conditional_many(model, xs, vs):
    """Gibbs conditionals, shape ``(n, K)``, for rows ``xs`` and sites ``vs``."""
    xs = np.asarray(xs, dtype=np.int64)
    vs = np.asarray(vs, dtype=np.int64)
    return _softmax(_conditional_logits(model, xs, vs))


def conditional(model, x, v):
    """``P(x_v = k | x_{-v})`` as a length-``K`` vector."""
    x = np.asarray(x, dtype=np.int64)
    if not model.space.contains(x):
        raise ValueError(f"invalid state {x!r}")
    if not 0 <= v < model.space.V:
        raise ValueError(f"variable index {v} out of range")
    return conditional_many(model, x[None, :], np.array([v]))[0]


def gibbs_step(model, x, rng):
    """Random-scan single-site update; returns ``(x_new, v, k)``."""
    x = np.asarray(x, dtype=np.int64)
    v = int(rng.integers(model.space.V))
    p = conditional(model, x, v)
    k = int(min(np.searchsorted(np.cumsum(p), rng.random() * p.sum(), side="right"), p.size - 1))
    x_new = x.copy()
    x_new[v] = k
    return x_new, v, k


def gibbs_step_many(model, xs, rng):
    """Vectorized ``gibbs_step`` over the rows of ``xs``; returns ``(xs_new, vs, ks, probs)``.

    ``probs[i]`` is the conditional used at row ``i``; it is the same before
    and after the update because rows only change at ``vs[i]``.
    """
    xs = np.asarray(xs, dtype=np.int64)
    n = xs.shape[0]
    vs = rng.integers(model.space.V, size=n)
    probs = conditional_many(model, xs, vs)
    cdf = np.cumsum(probs, axis=1)
    u = rng.random(n)[:, None] * cdf[:, -1:]
    ks = np.minimum((cdf <= u).sum(axis=1), model.space.K - 1)
    out = xs.copy()
    out[np.arange(n), vs] = ks
    return out, vs, ks, probs


@dataclass(frozen=True, eq=False)
class GibbsKernel:
    """Random-scan single-site Gibbs kernel of ``model`` acting on state vectors."""

    model: PairwiseModel

    @property
    def space(self):
        return self.model.space

    def step(self, x, rng):
        return gibbs_step(self.model, x, rng)[0]

    def step_many(self, xs, rng):
        return gibbs_step_many(self.model, xs, rng)[0]

    def log_prob(self, x, x_new):
        return kernel_logprob(self.model, x, x_new)

    def dense(self):
        return dense_gibbs_kernel(self.model)


def kernel_logprob(model, x, x_new):
    """Log transition probability of one random-scan step (``-inf`` if impossible)."""
    x = np.asarray(x, dtype=np.int64)
    x_new = np.asarray(x_new, dtype=np.int64)
    V = model.space.V
    diff = np.flatnonzero(x != x_new)
    if diff.size >= 2:
        return -np.inf
    if diff.size == 1:
        v = int(diff[0])
        return float(np.log(conditional(model, x, v)[x_new[v]] / V))
    total = sum(conditional(model, x, v)[x[v]] for v in range(V))
    return float(np.log(total / V))


def grad_step_logprob(model, x_prev, v, k_new):
    """Gradient of ``log conditional(model, x_prev, v)[k_new]`` in theta.

    Returns a sparse ``{flat parameter index: value}`` holding only the node
    weights of ``v`` and the weights of edges incident to ``v``.
    """
    x_prev = np.asarray(x_prev, dtype=np.int64)
    K = model.space.K
    p = conditional(model, x_prev, v)
    grad = {}
    for k in range(K):
        grad[v * K + k] = float(k == k_new) - float(p[k])
    for e, other, first in model.incidence[v]:
        base = model.edge_offset(e)
        for k in range(K):
            idx = base + (k * K + x_prev[other] if first else x_prev[other] * K + k)
            grad[int(idx)] = float(k == k_new) - float(p[k])
    return grad


def sparse_to_dense(grad, n_params):
    out = np.zeros(n_params)
    for i, g in grad.items():
        out[i] += g
    return out


def dense_gibbs_kernel(model):
    """Densified random-scan Gibbs kernel; self-transitions sum over all sites."""
    space = model.space
    check_dense(space)
    states = space.all_states()
    N, V, K = space.N, space.V, space.K
    src = np.arange(N)
    rows = np.zeros((N, N))
    for v in range(V):
        probs = conditional_many(model, states, np.full(N, v))
        place = K ** (V - 1 - v)
        for k in range(K):
            dst = src + (k - states[:, v]) * place
            np.add.at(rows, (src, dst), probs[:, k] / V)
    return DenseKernel(space, rows)


def features(model, x):
    """Full indicator sufficient-statistics vector ``phi(x)``."""
    x = np.asarray(x, dtype=np.int64)
    V, K = model.space.V, model.space.K
    phi = np.zeros(model.n_params)
    phi[np.arange(V) * K + x] = 1.0
    for e, (u, w) in enumerate(model.edges):
        phi[model.edge_offset(e) + x[u] * K + x[w]] = 1.0
    return phi


@dataclass(frozen=True, eq=False)
class ReferenceModel:
    """Fully factorized categorical distribution used as the restart law.

    Rows are normalized and floored at ``PROB_FLOOR`` at construction.
    """

    space: StateSpace
    q: np.ndarray

    def __post_init__(self):
        q = np.array(self.q, dtype=float)
        if q.shape != (self.space.V, self.space.K):
            raise ValueError(f"q has shape {q.shape}, expected ({self.space.V}, {self.space.K})")
        if np.any(q < 0) or not np.all(np.isfinite(q)):
            raise ValueError("reference probabilities must be finite and non-negative")
        q = np.maximum(q / q.sum(axis=1, keepdims=True), PROB_FLOOR)
        # rescale only the mass above the floor so floored entries stay at it
        excess = q - PROB_FLOOR
        q = PROB_FLOOR + excess * (1.0 - self.space.K * PROB_FLOOR) / excess.sum(axis=1, keepdims=True)
        q.setflags(write=False)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "_cdf", np.cumsum(q, axis=1))

    @classmethod
    def uniform(cls, space):
        return cls(space, np.full((space.V, space.K), 1.0 / space.K))

    def logpmf(self, x):
        x = np.asarray(x, dtype=np.int64)
        batch = np.atleast_2d(x)
        out = np.log(self.q[np.arange(self.space.V), batch]).sum(axis=1)
        return float(out[0]) if x.ndim == 1 else out

    def sample(self, rng):
        return self.sample_many(1, rng)[0]

    def sample_many(self, n, rng):
        u = rng.random((int(n), self.space.V))
        xs = (self._cdf[None, :, :] <= u[:, :, None] * self._cdf[None, :, -1:]).sum(axis=2)
        return np.minimum(xs, self.space.K - 1).astype(np.int64)

    def to_dense(self):
        check_dense(self.space)
        return DenseDistribution.normalized(
            self.space, np.exp(self.logpmf(self.space.all_states()))
        )


def fit_reference(dataset, space, alpha=1.0):
    """Smoothed per-variable marginals ``(count + alpha) / (n + alpha K)``."""
    data = np.asarray(dataset, dtype=np.int64)
    if data.size == 0:
        raise ValueError("empty dataset")
    if alpha <= 0:
        raise ValueError("smoothing alpha must be positive")
    data = np.atleast_2d(data)
    if data.shape[1] != space.V or np.any(data < 0) or np.any(data >= space.K):
        raise ValueError("dataset rows do not match the state space")
    counts = np.stack([np.bincount(data[:, v], minlength=space.K) for v in range(space.V)])
    return ReferenceModel(space, (counts + alpha) / (data.shape[0] + alpha * space.K))
