"""Multi-indices of fixed total degree and multinomial coefficients.

Canonical monomial order
------------------------
All indices of total degree ``k`` in ``d`` variables are listed in
*descending lexicographic* order of their exponent tuples, so the power of
``x_1`` falls first, then ``x_2``, and so on::

    d=2, k=2:  (2,0) (1,1) (0,2)
    d=3, k=2:  (2,0,0) (1,1,0) (1,0,1) (0,2,0) (0,1,1) (0,0,2)

This is the order used for every :class:`MomentVector` coordinate and every
design-matrix column in the package. It never changes between calls.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class MonomialBasis:
    """All multi-indices with ``|alpha| = k`` in ``d`` variables, in canonical order."""

    d: int
    k: int
    indices: tuple[tuple[int, ...], ...]

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __getitem__(self, i):
        return self.indices[i]

    def as_array(self) -> np.ndarray:
        """``(M_k, d)`` integer array of exponents."""
        return np.array(self.indices, dtype=np.int64).reshape(len(self.indices), self.d)

    def coefficients(self) -> np.ndarray:
        """Multinomial coefficient of each index, as floats."""
        return np.array([float(multinomial_coefficient(self.k, a)) for a in self.indices])


def _check_dk(d: int, k: int) -> None:
    if int(d) != d or int(k) != k:
        raise ValueError("d and k must be integers")
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    if k < 0:
        raise ValueError(f"degree must be >= 0, got {k}")


def _descend(d: int, k: int):
    if d == 1:
        yield (k,)
        return
    for first in range(k, -1, -1):
        for rest in _descend(d - 1, k - first):
            yield (first,) + rest


@lru_cache(maxsize=256)
def enumerate_multi_indices(d: int, k: int) -> MonomialBasis:
    """Return every multi-index of total degree ``k`` in ``d`` variables.

    >>> enumerate_multi_indices(2, 2).indices
    ((2, 0), (1, 1), (0, 2))
    """
    _check_dk(d, k)
    return MonomialBasis(int(d), int(k), tuple(_descend(int(d), int(k))))


def multinomial_coefficient(k: int, alpha: Sequence[int]) -> int:
    """``k! / (alpha_1! ... alpha_d!)`` as an exact integer.

    Built as a product of binomials so intermediate values never exceed the
    result.
    """
    alpha = tuple(int(a) for a in alpha)
    if any(a < 0 for a in alpha):
        raise ValueError(f"negative exponent in {alpha}")
    if sum(alpha) != k:
        raise ValueError(f"|alpha| = {sum(alpha)} does not equal k = {k}")
    out = 1
    running = 0
    for a in alpha:
        running += a
        out *= math.comb(running, a)
    return out


def monomial_count(d: int, k: int) -> int:
    """Number of monomials of total degree exactly ``k`` in ``d`` variables."""
    _check_dk(d, k)
    # C(d+k-1, k) built up one factor at a time, stopping once it overflows
    r = min(k, d - 1)
    n = 1
    for i in range(1, r + 1):
        n = n * (d + k - r + i - 1) // i
        if n > sys.maxsize:
            raise OverflowError(f"monomial count C({d + k - 1},{k}) exceeds the index range")
    return n


def monomials(theta: np.ndarray, basis: MonomialBasis) -> np.ndarray:
    """Evaluate ``theta**alpha`` for each index of ``basis``.

    ``theta`` may be a single vector or an ``(L, d)`` stack; the result has the
    basis as its last axis.
    """
    theta = np.asarray(theta, dtype=float)
    exps = basis.as_array()
    # integer powers, multiplied coordinate by coordinate
    out = np.ones(theta.shape[:-1] + (len(basis),))
    for j in range(basis.d):
        out = out * theta[..., j : j + 1] ** exps[:, j]
    return out
