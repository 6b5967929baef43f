"""Exact and empirical moments, plus Hankel / Carleman diagnostics.

Two independent routes to the same numbers live here:

* :func:`sliced_gmm_moment` pushes a mixture onto a direction and uses the
  closed-form univariate Gaussian moment.
* :func:`multivariate_gmm_moment` evaluates ``E[X^alpha]`` directly, shifting
  to central moments and summing over pair partitions (Isserlis).

The multinomial expansion links them, and the test-suite checks it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from . import errors
from .model import MultivariateGMM, PointSet, UnivariateGMM
from .momentindex import MonomialBasis, enumerate_multi_indices

DEFAULT_DEGREE_CAP = 6
UNIT_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class MomentSequence:
    """Univariate moments ``(m_0, m_1, ..., m_n)``."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float, copy=True).ravel()
        if v.size == 0:
            raise errors.InsufficientMoments("empty moment sequence")
        if not np.all(np.isfinite(v)):
            raise errors.NonFiniteEntry("moments must be finite")
        if v[0] <= 0:
            raise errors.EmperorError(f"m_0 must be positive, got {v[0]!r}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size


@dataclass(frozen=True, eq=False)
class MomentVector:
    """Degree-``k`` moments, coordinate ``i`` belonging to ``basis[i]``."""

    basis: MonomialBasis
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float, copy=True).ravel()
        if v.size != len(self.basis):
            raise errors.ShapeMismatch(f"{v.size} values for a basis of {len(self.basis)} monomials")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def degree(self) -> int:
        return self.basis.k

    def items(self):
        return zip(self.basis.indices, self.values.tolist())


def _double_factorial_odd(m: int) -> int:
    # (m)!! for odd m >= -1, with (-1)!! = 1
    out = 1
    while m > 1:
        out *= m
        m -= 2
    return out


def gaussian_raw_moment(mu: float, sigma: float, n: int) -> float:
    """``E[Z^n]`` for ``Z ~ N(mu, sigma^2)``.

    ``sum_j C(n, 2j) (2j-1)!! sigma^(2j) mu^(n-2j)`` with ``(-1)!! = 1``.
    """
    if n < 0 or int(n) != n:
        raise ValueError(f"moment order must be a nonnegative integer, got {n}")
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    n = int(n)
    var = float(sigma) ** 2
    mu = float(mu)
    total = 0.0
    for j in range(n // 2 + 1):
        total += math.comb(n, 2 * j) * _double_factorial_odd(2 * j - 1) * var**j * mu ** (n - 2 * j)
    return total


def univariate_gmm_moment(gmm: UnivariateGMM, n: int) -> float:
    return float(sum(w * gaussian_raw_moment(m, s, n) for w, m, s in zip(gmm.weights, gmm.means, gmm.stddevs)))


def univariate_moment_sequence(gmm: UnivariateGMM, n_max: int) -> MomentSequence:
    return MomentSequence([univariate_gmm_moment(gmm, n) for n in range(n_max + 1)])


def check_unit(theta, d: int | None = None, tol: float = UNIT_TOL) -> np.ndarray:
    theta = np.asarray(theta, dtype=float).ravel()
    if d is not None and theta.size != d:
        raise errors.DimensionMismatch(f"direction has {theta.size} entries, expected {d}")
    norm = math.sqrt(float(theta @ theta))
    if abs(norm - 1.0) > tol:
        raise errors.NonUnitDirection(f"direction has norm {norm!r}")
    return theta


def slice_gmm(gmm: MultivariateGMM, theta) -> UnivariateGMM:
    """Push ``gmm`` forward along ``theta``: components ``N(theta.mu_j, theta' Sigma_j theta)``."""
    theta = check_unit(theta, gmm.d)
    means = gmm.means @ theta
    variances = np.einsum("i,kij,j->k", theta, gmm.covariances, theta)
    return UnivariateGMM(gmm.weights, means, np.sqrt(variances))


def sliced_gmm_moment(gmm: MultivariateGMM, theta, k: int) -> float:
    return univariate_gmm_moment(slice_gmm(gmm, theta), k)


@lru_cache(maxsize=4096)
def _pair_partitions(items: tuple[int, ...]) -> tuple[tuple[tuple[int, int], ...], ...]:
    """All perfect matchings of the positions of ``items``, as coordinate pairs."""
    if not items:
        return ((),)
    if len(items) % 2:
        return ()
    first, rest = items[0], items[1:]
    out = []
    for i, partner in enumerate(rest):
        remaining = rest[:i] + rest[i + 1 :]
        for tail in _pair_partitions(remaining):
            out.append(((first, partner),) + tail)
    return tuple(out)


def _central_moment(cov: np.ndarray, beta: tuple[int, ...]) -> float:
    """``E[Z^beta]`` for ``Z ~ N(0, cov)`` by Isserlis' theorem."""
    items = tuple(i for i, b in enumerate(beta) for _ in range(b))
    if len(items) % 2:
        return 0.0
    total = 0.0
    for matching in _pair_partitions(items):
        prod = 1.0
        for a, b in matching:
            prod *= cov[a, b]
        total += prod
    return total


def _sub_indices(alpha: tuple[int, ...]):
    if not alpha:
        yield ()
        return
    for b in range(alpha[0] + 1):
        for rest in _sub_indices(alpha[1:]):
            yield (b,) + rest


def gaussian_product_moment(mean: np.ndarray, cov: np.ndarray, alpha: Sequence[int]) -> float:
    """``E[X^alpha]`` for ``X ~ N(mean, cov)``, via the binomial shift to central moments."""
    alpha = tuple(int(a) for a in alpha)
    total = 0.0
    for beta in _sub_indices(alpha):
        if sum(beta) % 2:
            continue
        coef = 1.0
        for a, b, m in zip(alpha, beta, mean):
            coef *= math.comb(a, b) * m ** (a - b)
        if coef == 0.0:
            continue
        total += coef * _central_moment(cov, beta)
    return total


def multivariate_gmm_moment(gmm: MultivariateGMM, alpha: Sequence[int], *, degree_cap: int = DEFAULT_DEGREE_CAP) -> float:
    alpha = tuple(int(a) for a in alpha)
    if len(alpha) != gmm.d:
        raise errors.DimensionMismatch(f"multi-index has {len(alpha)} entries, mixture has d={gmm.d}")
    if any(a < 0 for a in alpha):
        raise ValueError(f"negative exponent in {alpha}")
    if sum(alpha) > degree_cap:
        raise errors.DegreeCapExceeded(f"|alpha| = {sum(alpha)} exceeds the degree cap {degree_cap}")
    return float(
        sum(w * gaussian_product_moment(m, c, alpha) for w, m, c in zip(gmm.weights, gmm.means, gmm.covariances))
    )


def gmm_moment_vector(gmm: MultivariateGMM, k: int, *, degree_cap: int = DEFAULT_DEGREE_CAP) -> MomentVector:
    basis = enumerate_multi_indices(gmm.d, k)
    return MomentVector(basis, [multivariate_gmm_moment(gmm, a, degree_cap=degree_cap) for a in basis])


def empirical_moment(points: PointSet, alpha: Sequence[int]) -> float:
    """Sample mean of ``x^alpha``.

    Summed with :func:`math.fsum`, so the value is exactly rounded and does
    not depend on row order.
    """
    alpha = tuple(int(a) for a in alpha)
    if len(alpha) != points.d:
        raise errors.DimensionMismatch(f"multi-index has {len(alpha)} entries, points have d={points.d}")
    prod = np.ones(points.n)
    for j, a in enumerate(alpha):
        if a:
            prod = prod * points.points[:, j] ** a
    return math.fsum(prod) / points.n


def empirical_moment_vector(points: PointSet, k: int) -> MomentVector:
    basis = enumerate_multi_indices(points.d, k)
    return MomentVector(basis, [empirical_moment(points, a) for a in basis])


def hankel_matrix(moments: MomentSequence, n: int) -> np.ndarray:
    m = moments.values
    if m.size < 2 * n + 1:
        raise errors.InsufficientMoments(f"H_{n} needs {2 * n + 1} moments, got {m.size}")
    idx = np.arange(n + 1)
    return m[idx[:, None] + idx[None, :]]


def hankel_psd_check(moments, n: int) -> tuple[bool, float]:
    """Is ``H_n = (m_{i+j})_{i,j<=n}`` positive semidefinite?

    Returns ``(is_psd, min_eigenvalue)``; the flag allows eigenvalues down to
    ``-1e-10 * ||H_n||_2`` to absorb rounding on singular matrices.
    """
    if not isinstance(moments, MomentSequence):
        moments = MomentSequence(moments)
    H = hankel_matrix(moments, n)
    eig = np.linalg.eigvalsh(H)
    lo = float(eig[0])
    scale = float(np.max(np.abs(eig)))
    return lo >= -1e-10 * scale, lo


def carleman_partial_sum(even_moments: Sequence[float], terms: int) -> float:
    """``sum_{k=1}^{terms} m_{2k}^(-1/(2k))`` with ``even_moments[k-1] = m_{2k}``.

    Finitely many terms cannot establish divergence; this is a diagnostic
    for how fast the partial sums grow, nothing more.
    """
    if terms < 1:
        raise ValueError("terms must be >= 1")
    if len(even_moments) < terms:
        raise errors.InsufficientMoments(f"{terms} terms requested, {len(even_moments)} even moments given")
    total = 0.0
    for k in range(1, terms + 1):
        m = float(even_moments[k - 1])
        if not m > 0:
            raise errors.NonPositiveEvenMoment(f"m_{2 * k} = {m!r} is not positive")
        total += m ** (-1.0 / (2 * k))
    return total
