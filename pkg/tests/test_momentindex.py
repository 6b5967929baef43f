import itertools
import math
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from emperor.momentindex import enumerate_multi_indices, monomial_count, monomials, multinomial_coefficient


def brute_indices(d, k):
    # every exponent tuple with the right total, sorted descending
    return sorted((a for a in itertools.product(range(k + 1), repeat=d) if sum(a) == k), reverse=True)


def test_small_order():
    assert enumerate_multi_indices(2, 2).indices == ((2, 0), (1, 1), (0, 2))
    assert enumerate_multi_indices(3, 1).indices == ((1, 0, 0), (0, 1, 0), (0, 0, 1))
    assert enumerate_multi_indices(4, 0).indices == ((0, 0, 0, 0),)


@given(st.integers(1, 5), st.integers(0, 6))
def test_matches_brute_force(d, k):
    basis = enumerate_multi_indices(d, k)
    assert list(basis.indices) == brute_indices(d, k)
    assert len(basis) == monomial_count(d, k)


@given(st.lists(st.integers(0, 12), min_size=1, max_size=6))
def test_multinomial_factorial_formula(alpha):
    k = sum(alpha)
    expected = math.factorial(k)
    for a in alpha:
        expected //= math.factorial(a)
    assert multinomial_coefficient(k, alpha) == expected


@given(st.integers(1, 6), st.integers(0, 6))
def test_multinomial_theorem(d, k):
    # sum of coefficients = d^k
    basis = enumerate_multi_indices(d, k)
    assert sum(multinomial_coefficient(k, a) for a in basis) == d**k
    assert int(basis.coefficients().sum()) == d**k


def test_multinomial_large_is_exact():
    assert multinomial_coefficient(60, (30, 30)) == math.comb(60, 30)


def test_multinomial_rejects_bad_alpha():
    with pytest.raises(ValueError):
        multinomial_coefficient(3, (1, 1))
    with pytest.raises(ValueError):
        multinomial_coefficient(0, (1, -1))


def test_invalid_dk():
    with pytest.raises(ValueError):
        enumerate_multi_indices(0, 2)
    with pytest.raises(ValueError):
        enumerate_multi_indices(2, -1)


def test_monomial_count_overflow():
    assert monomial_count(3, 4) == 15
    with pytest.raises(OverflowError):
        monomial_count(10**6, 10**6)


@settings(max_examples=30)
@given(st.integers(1, 4), st.integers(0, 4), st.integers(0, 2**31))
def test_monomials_polynomial_expansion(d, k, seed):
    # sum_alpha C(k, alpha) theta^alpha x^alpha == (theta . x)^k
    rng = np.random.default_rng(seed)
    theta, x = rng.normal(size=d), rng.normal(size=d)
    basis = enumerate_multi_indices(d, k)
    lhs = float(np.sum(basis.coefficients() * monomials(theta, basis) * monomials(x, basis)))
    assert lhs == pytest.approx(float(theta @ x) ** k, rel=1e-10, abs=1e-12)


def test_monomials_stacked():
    basis = enumerate_multi_indices(2, 2)
    th = np.array([[1.0, 2.0], [3.0, -1.0]])
    np.testing.assert_array_equal(monomials(th, basis), [[1, 2, 4], [9, -3, 1]])
