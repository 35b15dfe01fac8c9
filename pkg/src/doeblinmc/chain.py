"""Finite state spaces, probability vectors and dense transition kernels.

Kernels are row-stochastic with rows indexing the current state, so a
distribution evolves as ``mu <- mu @ A``.
"""

import warnings
from dataclasses import dataclass
from typing import Protocol

import numpy as np
import scipy.linalg

# Centralized numerical tolerances.
MASS_TOL = 1e-12
FIXED_POINT_TOL = 1e-10
# Largest state space that may be densified.
DENSE_CAP = 4096


class SizeCapError(ValueError):
    """Raised when a dense oracle is requested for a space above ``DENSE_CAP``."""


class NonErgodicError(ValueError):
    """Raised when a kernel has no unique stationary distribution."""


@dataclass(frozen=True)
class StateSpace:
    """Product space of ``V`` variables with ``K`` labels each.

    Flat indices use mixed radix with variable 0 most significant.
    """

    V: int
    K: int

    def __post_init__(self):
        if int(self.V) < 1 or int(self.K) < 1:
            raise ValueError(f"need V >= 1 and K >= 1, got V={self.V}, K={self.K}")

    @classmethod
    def flat(cls, n):
        return cls(1, int(n))

    @property
    def N(self):
        return self.K**self.V

    @property
    def radix(self):
        """Place value of each variable in the flat index."""
        return self.K ** np.arange(self.V - 1, -1, -1, dtype=np.int64)

    def index(self, x):
        """Flat index of a state vector, or of each row of an ``(n, V)`` array."""
        x = np.asarray(x, dtype=np.int64)
        if x.shape[-1] != self.V:
            raise ValueError(f"state has {x.shape[-1]} entries, expected {self.V}")
        if np.any(x < 0) or np.any(x >= self.K):
            raise ValueError("label out of range")
        out = x @ self.radix
        return int(out) if out.ndim == 0 else out

    def state(self, i):
        """State vector(s) for flat index or array of indices."""
        i = np.asarray(i, dtype=np.int64)
        if np.any(i < 0) or np.any(i >= self.N):
            raise ValueError("flat index out of range")
        return (i[..., None] // self.radix) % self.K

    def all_states(self):
        """``(N, V)`` array of every state in flat-index order."""
        check_dense(self)
        return self.state(np.arange(self.N))

    def contains(self, x):
        x = np.asarray(x)
        return x.shape == (self.V,) and bool(np.all((x >= 0) & (x < self.K)))


def check_dense(space):
    if space.N > DENSE_CAP:
        raise SizeCapError(
            f"state space of size {space.N} exceeds the dense cap of {DENSE_CAP}"
        )


class SamplingKernel(Protocol):
    """Anything that can advance a state by one Markov step."""

    def step(self, x, rng):
        ...


@dataclass(frozen=True, eq=False)
class DenseDistribution:
    """Probability vector over an enumerated ``StateSpace``.

    States are flat indices when used as a sampler.
    """

    space: StateSpace
    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=float)
        if p.shape != (self.space.N,):
            raise ValueError(f"probs has shape {p.shape}, expected ({self.space.N},)")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise ValueError("probabilities must be finite and non-negative")
        if abs(p.sum() - 1.0) > MASS_TOL:
            raise ValueError(f"probabilities sum to {p.sum()!r}, not 1")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @classmethod
    def normalized(cls, space, weights):
        """Build from non-negative weights, clipping round-off negatives."""
        w = np.clip(np.asarray(weights, dtype=float), 0.0, None)
        return cls(space, w / w.sum())

    @classmethod
    def uniform(cls, space):
        return cls(space, np.full(space.N, 1.0 / space.N))

    @classmethod
    def point_mass(cls, space, i):
        p = np.zeros(space.N)
        p[i] = 1.0
        return cls(space, p)

    def __len__(self):
        return self.space.N

    def __getitem__(self, i):
        return self.probs[i]

    def sample(self, rng):
        return int(rng.choice(self.space.N, p=self.probs))

    def sample_many(self, n, rng):
        cdf = np.cumsum(self.probs)
        idx = np.searchsorted(cdf, rng.random(n) * cdf[-1], side="right")
        return np.minimum(idx, self.space.N - 1)

    def logpmf(self, i):
        with np.errstate(divide="ignore"):
            return float(np.log(self.probs[i]))


@dataclass(frozen=True, eq=False)
class DenseKernel:
    """Row-stochastic matrix; ``rows[x, y] = P(next = y | current = x)``."""

    space: StateSpace
    rows: np.ndarray

    def __post_init__(self):
        A = np.array(self.rows, dtype=float)
        n = self.space.N
        if A.shape != (n, n):
            raise ValueError(f"kernel has shape {A.shape}, expected ({n}, {n})")
        if np.any(A < 0) or not np.all(np.isfinite(A)):
            raise ValueError("kernel entries must be finite and non-negative")
        err = np.max(np.abs(A.sum(axis=1) - 1.0))
        if err > MASS_TOL:
            raise ValueError(f"kernel rows are not stochastic (max error {err:.3g})")
        A.setflags(write=False)
        object.__setattr__(self, "rows", A)
        object.__setattr__(self, "_cdf", np.cumsum(A, axis=1))

    @classmethod
    def identity(cls, space):
        return cls(space, np.eye(space.N))

    def step(self, x, rng):
        return int(self.step_many(np.array([x]), rng)[0])

    def step_many(self, xs, rng):
        """Advance each flat state in ``xs`` by one independent step."""
        xs = np.asarray(xs, dtype=np.int64)
        cdf = self._cdf[xs]
        u = rng.random(len(xs))[:, None] * cdf[:, -1:]
        nxt = (cdf <= u).sum(axis=1)
        return np.minimum(nxt, self.space.N - 1)


def _same_space(a, b):
    if a.space.N != b.space.N:
        raise ValueError(f"dimension mismatch: {a.space.N} vs {b.space.N}")


def apply(kernel, dist):
    """One chain step in distribution space: ``dist @ kernel``."""
    _same_space(kernel, dist)
    return DenseDistribution.normalized(dist.space, dist.probs @ kernel.rows)


def tv_distance(p, q):
    """Total variation distance ``0.5 * sum |p - q|``."""
    _same_space(p, q)
    return float(0.5 * np.abs(p.probs - q.probs).sum())


def stationary_of(kernel):
    """Stationary distribution by a direct linear solve.

    The system ``(I - A^T) pi = 0`` has its last equation replaced by the
    normalization ``sum(pi) = 1``.

    Raises
    ------
    NonErgodicError
        If the stationary distribution is not unique.
    """
    A = kernel.rows
    n = A.shape[0]
    M = np.eye(n) - A.T
    M[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            lu, piv = scipy.linalg.lu_factor(M, check_finite=False)
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise NonErgodicError("non-ergodic kernel: singular stationary system") from exc
    pivots = np.abs(np.diag(lu))
    if pivots.min() <= 1e-13 * pivots.max():
        raise NonErgodicError("non-ergodic kernel: stationary distribution is not unique")
    pi = scipy.linalg.lu_solve((lu, piv), rhs, check_finite=False)
    if np.min(pi) < -1e-9:
        raise NonErgodicError("non-ergodic kernel: solution has negative mass")
    dist = DenseDistribution.normalized(kernel.space, pi)
    resid = np.max(np.abs(dist.probs @ A - dist.probs))
    if resid > FIXED_POINT_TOL:
        raise NonErgodicError(f"stationary residual {resid:.3g} exceeds tolerance")
    return dist


def stationary_power(kernel, start=None, tol=1e-13, max_iter=100_000):
    """Power-iteration cross-check for ``stationary_of`` (aperiodic chains only)."""
    mu = DenseDistribution.uniform(kernel.space).probs if start is None else start.probs
    for _ in range(max_iter):
        nxt = mu @ kernel.rows
        if 0.5 * np.abs(nxt - mu).sum() < tol:
            return DenseDistribution.normalized(kernel.space, nxt)
        mu = nxt
    raise RuntimeError("power iteration did not converge")


def empirical_distribution(samples, space):
    """Normalized histogram of flat state indices."""
    samples = np.asarray(samples, dtype=np.int64).ravel()
    if samples.size == 0:
        raise ValueError("empty sample list")
    if np.any(samples < 0) or np.any(samples >= space.N):
        raise ValueError("sample index out of range")
    counts = np.bincount(samples, minlength=space.N)
    return DenseDistribution(space, counts / samples.size)
