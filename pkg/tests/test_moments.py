import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.polynomial.hermite_e import hermegauss

from conftest import random_gmm
from emperor import errors
from emperor.model import UnivariateGMM, make_rng, sample_gmm, validate_gmm
from emperor.momentindex import enumerate_multi_indices
from emperor.moments import (
    MomentSequence,
    carleman_partial_sum,
    empirical_moment,
    gaussian_product_moment,
    gaussian_raw_moment,
    gmm_moment_vector,
    hankel_matrix,
    hankel_psd_check,
    multivariate_gmm_moment,
    slice_gmm,
    sliced_gmm_moment,
    univariate_gmm_moment,
    univariate_moment_sequence,
)

NODES, WEIGHTS = hermegauss(12)  # exact for polynomials of degree <= 23
WEIGHTS = WEIGHTS / WEIGHTS.sum()


def quad_gaussian_moment(mean, cov, alpha):
    # tensor Gauss-Hermite: x = mean + chol z
    d = len(mean)
    C = np.linalg.cholesky(cov)
    total = 0.0
    for idx in itertools.product(range(NODES.size), repeat=d):
        z = NODES[list(idx)]
        x = mean + C @ z
        total += np.prod(WEIGHTS[list(idx)]) * np.prod(x ** np.asarray(alpha))
    return total


def test_standard_normal_moments():
    assert [gaussian_raw_moment(0.0, 1.0, n) for n in range(9)] == [1, 0, 1, 0, 3, 0, 15, 0, 105]


@given(st.floats(-3, 3), st.floats(0.1, 3), st.integers(0, 10))
def test_univariate_vs_quadrature(mu, sigma, n):
    ref = float(np.sum(WEIGHTS * (mu + sigma * NODES) ** n))
    assert gaussian_raw_moment(mu, sigma, n) == pytest.approx(ref, rel=1e-10, abs=1e-10)


def test_univariate_bad_args():
    with pytest.raises(ValueError):
        gaussian_raw_moment(0, 1, -1)
    with pytest.raises(ValueError):
        gaussian_raw_moment(0, 0, 2)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 3), st.integers(0, 5))
def test_product_moment_vs_quadrature(seed, d, k):
    rng = make_rng(seed)
    A = rng.normal(size=(d, d))
    cov = A @ A.T + 0.2 * np.eye(d)
    mean = rng.normal(size=d)
    for alpha in enumerate_multi_indices(d, k):
        ref = quad_gaussian_moment(mean, cov, alpha)
        assert gaussian_product_moment(mean, cov, alpha) == pytest.approx(ref, rel=1e-9, abs=1e-9)


def test_isserlis_fourth_moment():
    # E[x1 x2 x3 x4] = s12 s34 + s13 s24 + s14 s23
    S = np.array([[2, 0.3, 0.1, 0.2], [0.3, 1, 0.4, 0.5], [0.1, 0.4, 3, 0.6], [0.2, 0.5, 0.6, 1.5]])
    expected = 0.3 * 0.6 + 0.1 * 0.5 + 0.2 * 0.4
    assert gaussian_product_moment(np.zeros(4), S, (1, 1, 1, 1)) == pytest.approx(expected, rel=1e-14)


def test_degree_cap_and_dimension():
    g = validate_gmm([1.0], [[0.0, 0.0]], [np.eye(2)])
    with pytest.raises(errors.DegreeCapExceeded):
        multivariate_gmm_moment(g, (4, 3))
    assert multivariate_gmm_moment(g, (4, 4), degree_cap=8) == pytest.approx(9.0)
    with pytest.raises(errors.DimensionMismatch):
        multivariate_gmm_moment(g, (1, 1, 0))


def test_slice_gmm_and_unit_check():
    g = validate_gmm([0.5, 0.5], [[1.0, 0.0], [0.0, 2.0]], [np.eye(2), np.diag([1.0, 4.0])])
    s = slice_gmm(g, [0.0, 1.0])
    np.testing.assert_allclose(s.means, [0.0, 2.0])
    np.testing.assert_allclose(s.stddevs, [1.0, 2.0])
    with pytest.raises(errors.NonUnitDirection):
        slice_gmm(g, [1.0, 1.0])
    with pytest.raises(errors.DimensionMismatch):
        slice_gmm(g, [1.0, 0.0, 0.0])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 4), st.integers(0, 4))
def test_sliced_moment_equals_multinomial_expansion(seed, d, k):
    rng = make_rng(seed)
    g = random_gmm(rng, d, 2)
    theta = rng.normal(size=d)
    theta /= np.linalg.norm(theta)
    basis = enumerate_multi_indices(d, k)
    m = gmm_moment_vector(g, k).values
    expansion = math.fsum(float(c) * float(np.prod(theta ** np.array(a))) * v for a, c, v in zip(basis, basis.coefficients(), m))
    assert sliced_gmm_moment(g, theta, k) == pytest.approx(expansion, rel=1e-9, abs=1e-9)


def test_empirical_moment_converges_and_is_order_free(rng):
    g = validate_gmm([0.4, 0.6], [[1.0, -1.0], [0.0, 1.0]], [np.eye(2), [[2.0, 0.5], [0.5, 1.0]]])
    ps = sample_gmm(g, 40000, 11)
    for alpha in [(1, 0), (1, 1), (0, 2), (2, 1)]:
        exact = multivariate_gmm_moment(g, alpha)
        assert empirical_moment(ps, alpha) == pytest.approx(exact, abs=0.08)
    perm = rng.permutation(ps.n)
    from emperor.model import PointSet

    shuffled = PointSet(ps.points[perm])
    assert empirical_moment(shuffled, (2, 1)) == empirical_moment(ps, (2, 1))


def test_hankel_matrix_layout():
    H = hankel_matrix(MomentSequence([1, 2, 3, 4, 5]), 2)
    np.testing.assert_array_equal(H, [[1, 2, 3], [2, 3, 4], [3, 4, 5]])
    with pytest.raises(errors.InsufficientMoments):
        hankel_matrix(MomentSequence([1, 2, 3]), 2)


def test_hankel_psd_valid_and_invalid():
    ok, lo = hankel_psd_check(univariate_moment_sequence(UnivariateGMM([1.0], [0.0], [1.0]), 8), 4)
    assert ok and lo > 0
    ok, lo = hankel_psd_check([1.0, 0.0, -1.0], 1)
    assert not ok and lo == pytest.approx(-1.0)
    # a point mass at 2 has a singular but valid Hankel matrix
    ok, _ = hankel_psd_check([1.0, 2.0, 4.0, 8.0, 16.0], 2)
    assert ok


def test_carleman_standard_normal():
    # m2 = 1, m4 = 3: 1 + 3^(-1/4)
    assert carleman_partial_sum([1.0, 3.0], 2) == pytest.approx(1 + 3 ** -0.25, rel=1e-15)
    assert carleman_partial_sum([1.0, 3.0], 2) == pytest.approx(1.7598356856515925, rel=1e-15)
    with pytest.raises(errors.InsufficientMoments):
        carleman_partial_sum([1.0], 2)
    with pytest.raises(errors.NonPositiveEvenMoment):
        carleman_partial_sum([1.0, 0.0], 2)


def test_univariate_gmm_moment_mixture():
    g = UnivariateGMM([0.5, 0.5], [-1.0, 1.0], [1.0, 1.0])
    # symmetric: odd moments vanish; m2 = 2, m4 = 3 + 6 + 1 = 10
    assert univariate_gmm_moment(g, 1) == 0.0
    assert univariate_gmm_moment(g, 2) == pytest.approx(2.0)
    assert univariate_gmm_moment(g, 4) == pytest.approx(10.0)
