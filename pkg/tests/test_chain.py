import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from doeblinmc.chain import (
    DenseDistribution,
    DenseKernel,
    NonErgodicError,
    SizeCapError,
    StateSpace,
    apply,
    check_dense,
    empirical_distribution,
    stationary_of,
    stationary_power,
    tv_distance,
)

from conftest import random_dist, random_kernel

S2 = StateSpace.flat(2)
S3 = StateSpace.flat(3)


def test_state_space_cardinality():
    assert StateSpace(3, 2).N == 8
    assert StateSpace(2, 3).N == 9
    assert StateSpace.flat(7).N == 7
    with pytest.raises(ValueError):
        StateSpace(0, 2)


def test_index_is_mixed_radix_with_first_variable_most_significant():
    space = StateSpace(3, 2)
    assert space.index([0, 0, 1]) == 1
    assert space.index([1, 0, 0]) == 4
    np.testing.assert_array_equal(space.state(6), [1, 1, 0])


@pytest.mark.parametrize("V,K", [(1, 5), (3, 2), (4, 3), (12, 2), (6, 4)])
def test_index_round_trip_is_bijective(V, K):
    space = StateSpace(V, K)
    states = space.all_states()
    assert len({tuple(s) for s in states}) == space.N
    np.testing.assert_array_equal(space.index(states), np.arange(space.N))


def test_size_cap():
    check_dense(StateSpace(12, 2))
    with pytest.raises(SizeCapError):
        check_dense(StateSpace(13, 2))
    with pytest.raises(SizeCapError):
        StateSpace(7, 4).all_states()


def test_distribution_and_kernel_validation():
    with pytest.raises(ValueError):
        DenseDistribution(S2, [0.5, 0.6])
    with pytest.raises(ValueError):
        DenseDistribution(S2, [1.5, -0.5])
    with pytest.raises(ValueError):
        DenseKernel(S2, [[0.5, 0.6], [0.5, 0.5]])
    with pytest.raises(ValueError):
        DenseKernel(S2, np.eye(3))


def test_apply_identity_and_flip():
    d = DenseDistribution(S3, [0.2, 0.3, 0.5])
    np.testing.assert_array_equal(apply(DenseKernel.identity(S3), d).probs, d.probs)
    flip = DenseKernel(S2, [[0, 1], [1, 0]])
    np.testing.assert_array_equal(apply(flip, DenseDistribution(S2, [1, 0])).probs, [0, 1])


def test_apply_matches_brute_force_product():
    A = [[0.1, 0.6, 0.3], [0.5, 0.25, 0.25], [0.0, 0.2, 0.8]]
    d = [0.2, 0.3, 0.5]
    expected = [sum(d[x] * A[x][y] for x in range(3)) for y in range(3)]
    assert expected == pytest.approx([0.17, 0.295, 0.535], abs=1e-15)
    out = apply(DenseKernel(S3, A), DenseDistribution(S3, d))
    np.testing.assert_allclose(out.probs, expected, atol=1e-15)


def test_apply_dimension_mismatch():
    with pytest.raises(ValueError):
        apply(DenseKernel.identity(S3), DenseDistribution.uniform(S2))


def test_apply_preserves_mass(rng):
    for n in (2, 5, 17):
        out = apply(random_kernel(rng, n), random_dist(rng, n))
        assert np.all(out.probs >= 0)
        assert abs(out.probs.sum() - 1) <= 1e-12


def test_tv_distance_examples():
    p = DenseDistribution(S2, [0.5, 0.5])
    assert tv_distance(p, p) == 0
    assert tv_distance(DenseDistribution.point_mass(S2, 0), DenseDistribution.point_mass(S2, 1)) == 1
    assert tv_distance(p, DenseDistribution(S2, [1, 0])) == 0.5
    with pytest.raises(ValueError):
        tv_distance(p, DenseDistribution.uniform(S3))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 30))
def test_tv_distance_is_a_metric(seed, n):
    rng = np.random.default_rng(seed)
    p, q, r = (random_dist(rng, n, 0.5) for _ in range(3))
    assert tv_distance(p, q) == tv_distance(q, p)
    assert tv_distance(p, r) <= tv_distance(p, q) + tv_distance(q, r) + 1e-12
    assert 0 <= tv_distance(p, q) <= 1


def test_stationary_of_doubly_stochastic_is_uniform():
    A = np.array([[0.2, 0.5, 0.3], [0.5, 0.3, 0.2], [0.3, 0.2, 0.5]])
    np.testing.assert_allclose(stationary_of(DenseKernel(S3, A)).probs, np.full(3, 1 / 3), atol=1e-14)


def test_stationary_of_two_state_closed_form():
    a, b = 0.3, 0.1
    kernel = DenseKernel(S2, [[1 - a, a], [b, 1 - b]])
    pi = stationary_of(kernel)
    np.testing.assert_allclose(pi.probs, [b / (a + b), a / (a + b)], atol=1e-14)
    np.testing.assert_allclose(pi.probs, [0.25, 0.75], atol=1e-14)
    np.testing.assert_allclose(stationary_power(kernel).probs, pi.probs, atol=1e-12)


def test_stationary_of_identity_is_non_ergodic():
    with pytest.raises(NonErgodicError):
        stationary_of(DenseKernel.identity(S3))


def test_stationary_of_reducible_kernel_is_non_ergodic(rng):
    rows = np.zeros((6, 6))
    rows[:3, :3] = rng.dirichlet(np.ones(3), size=3)
    rows[3:, 3:] = rng.dirichlet(np.ones(3), size=3)
    with pytest.raises(NonErgodicError):
        stationary_of(DenseKernel(StateSpace.flat(6), rows))


def test_stationary_of_periodic_flip_has_unique_solution():
    pi = stationary_of(DenseKernel(S2, [[0, 1], [1, 0]]))
    np.testing.assert_allclose(pi.probs, [0.5, 0.5])


@pytest.mark.parametrize("n", [2, 8, 64, 500])
def test_stationary_of_is_fixed_point(rng, n):
    kernel = random_kernel(rng, n, 0.3)
    pi = stationary_of(kernel)
    assert tv_distance(apply(kernel, pi), pi) <= 1e-10
    assert tv_distance(stationary_power(kernel), pi) <= 1e-10


def test_empirical_distribution():
    np.testing.assert_array_equal(empirical_distribution([0, 0, 0, 0], S2).probs, [1, 0])
    np.testing.assert_array_equal(empirical_distribution([0, 1, 0, 1], S2).probs, [0.5, 0.5])
    with pytest.raises(ValueError):
        empirical_distribution([], S2)
    with pytest.raises(ValueError):
        empirical_distribution([0, 2], S2)


def test_empirical_distribution_converges(rng):
    truth = DenseDistribution(S3, [0.2, 0.3, 0.5])
    emp = empirical_distribution(truth.sample_many(100_000, rng), S3)
    assert tv_distance(emp, truth) <= 0.02


def test_dense_kernel_step_matches_rows(rng):
    kernel = random_kernel(rng, 4)
    xs = np.full(200_000, 2)
    emp = empirical_distribution(kernel.step_many(xs, rng), kernel.space)
    assert tv_distance(emp, DenseDistribution(kernel.space, kernel.rows[2])) <= 0.01
