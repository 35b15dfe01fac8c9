import numpy as np
import pytest

from doeblinmc.chain import (
    DenseDistribution,
    DenseKernel,
    SizeCapError,
    StateSpace,
    apply,
    empirical_distribution,
    stationary_of,
    tv_distance,
)
from doeblinmc.restart import (
    DoeblinChain,
    approximation_gap,
    contraction_check,
    envelope_violations,
    mixing_curve,
    sample_restart_time,
    sample_stationary,
    stationary_dense,
    tail_cutoff,
    wrapped_kernel,
    wrapped_step,
)

from conftest import random_dist, random_kernel

S2 = StateSpace.flat(2)
FLIP = DenseKernel(S2, [[0.0, 1.0], [1.0, 0.0]])
E0 = DenseDistribution.point_mass(S2, 0)


def series_stationary(base, ref, eps, t_max=2000):
    """Truncated geometric series ``eps * sum_t (1-eps)^t ref A^t``."""
    out = np.zeros(base.space.N)
    mu = ref.probs.copy()
    for t in range(t_max):
        out += eps * (1 - eps) ** t * mu
        mu = mu @ base.rows
    return out


def test_epsilon_validation():
    for bad in (0.0, -0.1, 1.5):
        with pytest.raises(ValueError):
            DoeblinChain(FLIP, E0, bad)
        with pytest.raises(ValueError):
            sample_restart_time(bad, np.random.default_rng(0))


def test_wrapped_step_eps_one_always_restarts(rng):
    ref = DenseDistribution(StateSpace.flat(3), [0.2, 0.3, 0.5])
    chain = DoeblinChain(DenseKernel.identity(ref.space), ref, 1.0)
    events = [wrapped_step(chain, 0, rng) for _ in range(20_000)]
    assert all(e.restarted for e in events)
    emp = empirical_distribution([e.next_state for e in events], ref.space)
    assert tv_distance(emp, ref) <= 0.02


def test_wrapped_step_identity_base_row(rng):
    space = StateSpace.flat(3)
    ref = DenseDistribution(space, [0.2, 0.3, 0.5])
    chain = DoeblinChain(DenseKernel.identity(space), ref, 0.5)
    nxt = [wrapped_step(chain, 1, rng).next_state for _ in range(100_000)]
    expected = 0.5 * np.eye(3)[1] + 0.5 * ref.probs
    np.testing.assert_allclose(wrapped_kernel(chain.base, ref, 0.5).rows[1], expected, atol=1e-15)
    assert tv_distance(empirical_distribution(nxt, space), DenseDistribution(space, expected)) <= 0.01
    # P(next = s) = 0.5 + 0.5 * ref(s)
    assert expected[1] == pytest.approx(0.5 + 0.5 * 0.3)


def test_wrapped_kernel_identity(rng):
    for n in (2, 5, 9):
        base, ref = random_kernel(rng, n), random_dist(rng, n)
        for eps in (0.1, 0.5, 1.0):
            W = wrapped_kernel(base, ref, eps).rows
            expected = (1 - eps) * base.rows + eps * np.outer(np.ones(n), ref.probs)
            assert np.max(np.abs(W - expected)) <= 1e-12
            assert np.max(np.abs(W.sum(axis=1) - 1)) <= 1e-12


def test_restart_time_eps_one(rng):
    assert sample_restart_time(1.0, rng) == 0
    assert np.all(sample_restart_time(1.0, rng, 1000) == 0)


def test_restart_time_moments(rng):
    T = sample_restart_time(0.5, rng, 100_000)
    assert abs(T.mean() - 1.0) <= 0.02
    T = sample_restart_time(0.25, rng, 100_000)
    assert abs(np.mean(T == 0) - 0.25) <= 0.01


def test_restart_time_pmf(rng):
    eps = 0.3
    T = sample_restart_time(eps, rng, 200_000)
    for t in range(6):
        assert abs(np.mean(T == t) - eps * (1 - eps) ** t) <= 0.005


def test_restart_time_scalar_loop_matches_vector(rng):
    T = [sample_restart_time(0.4, rng) for _ in range(20_000)]
    assert abs(np.mean(T) - 0.6 / 0.4) <= 0.05


def test_stationary_dense_reductions(rng):
    base, ref = random_kernel(rng, 6), random_dist(rng, 6)
    assert tv_distance(stationary_dense(base, ref, 1.0), ref) <= 1e-12
    ident = DenseKernel.identity(ref.space)
    for eps in (0.05, 0.5, 0.9):
        assert tv_distance(stationary_dense(ident, ref, eps), ref) <= 1e-12


def test_stationary_dense_flip_closed_form():
    pi = stationary_dense(FLIP, E0, 0.5)
    # even restart ages keep state 0: sum_k eps (1-eps)^(2k) = 1 / (2 - eps)
    np.testing.assert_allclose(pi.probs, [1 / (2 - 0.5), 1 - 1 / (2 - 0.5)], atol=1e-12)
    np.testing.assert_allclose(pi.probs, [2 / 3, 1 / 3], atol=1e-12)


@pytest.mark.parametrize("eps", [0.05, 0.3, 0.8])
def test_stationary_dense_matches_series_and_fixed_point(rng, eps):
    base, ref = random_kernel(rng, 7, 0.5), random_dist(rng, 7)
    pi = stationary_dense(base, ref, eps)
    np.testing.assert_allclose(pi.probs, series_stationary(base, ref, eps), atol=1e-12)
    W = wrapped_kernel(base, ref, eps)
    assert tv_distance(apply(W, pi), pi) <= 1e-10
    assert tv_distance(stationary_of(W), pi) <= 1e-10


class _Big:
    """Stand-in exposing only ``space``; the cap check fires first."""

    def __init__(self, space):
        self.space = space


def test_dense_restart_oracles_refuse_large_spaces():
    big = _Big(StateSpace(13, 2))
    with pytest.raises(SizeCapError):
        stationary_dense(big, big, 0.5)
    with pytest.raises(SizeCapError):
        wrapped_kernel(big, big, 0.5)


def test_sample_stationary_eps_one_and_identity(rng):
    ref = DenseDistribution(StateSpace.flat(3), [0.2, 0.3, 0.5])
    for base, eps in ((random_kernel(rng, 3), 1.0), (DenseKernel.identity(ref.space), 0.3)):
        chain = DoeblinChain(base, ref, eps)
        emp = empirical_distribution(sample_stationary(chain, rng, 100_000), ref.space)
        assert tv_distance(emp, ref) <= 0.01


def test_sample_stationary_flip(rng):
    chain = DoeblinChain(FLIP, E0, 0.5)
    emp = empirical_distribution(sample_stationary(chain, rng, 200_000), S2)
    assert tv_distance(emp, stationary_dense(FLIP, E0, 0.5)) <= 0.01
    assert abs(emp.probs[0] - 2 / 3) <= 0.01


def test_sample_stationary_scalar_path(rng):
    base, ref = random_kernel(rng, 4), random_dist(rng, 4)
    chain = DoeblinChain(base, ref, 0.4)
    draws = [sample_stationary(chain, rng) for _ in range(40_000)]
    assert tv_distance(empirical_distribution(draws, ref.space), stationary_dense(base, ref, 0.4)) <= 0.02


def test_sample_stationary_matches_long_wrapped_run(rng):
    base, ref = random_kernel(rng, 5), random_dist(rng, 5)
    chain = DoeblinChain(base, ref, 0.3)
    x, draws = 0, []
    for i in range(60_000):
        x = wrapped_step(chain, x, rng).next_state
        if i >= 100:
            draws.append(x)
    assert tv_distance(empirical_distribution(draws, ref.space), stationary_dense(base, ref, 0.3)) <= 0.02


def test_contraction_examples():
    ident = DenseKernel.identity(S2)
    ref = DenseDistribution(S2, [0.4, 0.6])
    lhs, rhs = contraction_check(ident, ref, 0.3, E0, E0)
    assert lhs == 0 and rhs == 0
    lhs, rhs = contraction_check(ident, ref, 0.3, E0, DenseDistribution.point_mass(S2, 1))
    assert lhs == pytest.approx(0.7, abs=1e-15)
    assert rhs == pytest.approx(0.7, abs=1e-15)


def test_contraction_random_pairs(rng):
    for _ in range(5):
        base, ref = random_kernel(rng, 8), random_dist(rng, 8)
        for _ in range(100):
            mu, nu = random_dist(rng, 8, 0.3), random_dist(rng, 8, 0.3)
            lhs, rhs = contraction_check(base, ref, 0.2, mu, nu)
            assert lhs <= rhs + 1e-12


def test_mixing_curve_properties(rng):
    base, ref = random_kernel(rng, 6, 0.2), random_dist(rng, 6)
    start = DenseDistribution.point_mass(ref.space, 3)
    curve = mixing_curve(base, ref, 0.2, start, 40)
    assert curve[0] == (0, tv_distance(start, stationary_dense(base, ref, 0.2)))
    assert envelope_violations(curve, 0.2) == []
    one = mixing_curve(base, ref, 1.0, start, 10)
    assert all(v <= 1e-12 for t, v in one if t >= 1)
    with pytest.raises(ValueError):
        mixing_curve(base, ref, 0.2, start, -1)


def test_mixing_curve_flip_envelope():
    curve = mixing_curve(FLIP, E0, 0.5, E0, 30)
    v0 = curve[0][1]
    assert v0 == pytest.approx(1 / 3)
    for t, v in curve:
        assert v <= 0.5**t * v0 + 1e-10


def test_tail_cutoff():
    assert tail_cutoff(1.0) == 0
    for eps in (0.05, 0.3, 0.9):
        t = tail_cutoff(eps)
        assert (1 - eps) ** (t + 1) <= 1e-10 < (1 - eps) ** t


def test_approximation_gap_examples(rng):
    base, ref = random_kernel(rng, 6), random_dist(rng, 6)
    pi = stationary_of(base)
    (rec,) = approximation_gap(base, ref, [1.0])
    assert rec.gap == pytest.approx(tv_distance(ref, pi), abs=1e-15)
    for rec in approximation_gap(base, pi, [0.05, 0.3, 1.0]):
        assert rec.gap <= 1e-10
    recs = approximation_gap(base, ref, [0.05, 0.5])
    assert recs[0].gap < recs[1].gap
    for rec in recs:
        assert rec.gap <= rec.bound + 1e-8


def test_approximation_gap_non_ergodic():
    from doeblinmc.chain import NonErgodicError

    with pytest.raises(NonErgodicError):
        approximation_gap(DenseKernel.identity(S2), E0, [0.5])
