"""Mixing control: the restart rate bounds the distance to stationarity.

Every step of the restart kernel shrinks total variation by at least a factor
``1 - eps``. Smaller ``eps`` mixes more slowly but keeps the stationary law
closer to that of the base chain.
"""

import numpy as np

from doeblinmc import (
    DenseDistribution,
    DenseKernel,
    StateSpace,
    approximation_gap,
    mixing_curve,
)

rng = np.random.default_rng(3)
n = 8
# a "sticky" base chain: mostly stays put, so on its own it mixes slowly
rows = 0.9 * np.eye(n) + 0.1 * rng.dirichlet(np.ones(n), size=n)
A = DenseKernel(StateSpace.flat(n), rows)
ref = DenseDistribution.uniform(A.space)
start = DenseDistribution.point_mass(A.space, 0)

print("TV(start * Aw^t, pi_eps) against the (1-eps)^t envelope")
for eps in (0.5, 0.1, 0.02):
    curve = mixing_curve(A, ref, eps, start, 20)
    row = "  ".join(f"{v:.3f}" for t, v in curve[::5])
    env = "  ".join(f"{(1 - eps) ** t * curve[0][1]:.3f}" for t, _ in curve[::5])
    print(f"eps={eps:<5} curve  {row}\n           bound  {env}")

print("\nApproximation gap TV(pi_eps, pi) and its geometric-series bound")
for rec in approximation_gap(A, ref, [0.5, 0.2, 0.05, 0.01, 0.001]):
    print(f"eps={rec.epsilon:<6} gap={rec.gap:.5f}  bound={rec.bound:.5f}")
