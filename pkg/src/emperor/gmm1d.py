"""Univariate Gaussian mixture fitting by EM.

Each slice of a descriptor is fitted independently by :func:`fit_gmm1d`.
The samples are sorted first, and everything downstream (initialisation,
EM sums) runs over the sorted array, so the fit does not depend on the order
the samples arrive in.

Initialisation, per restart ``r`` (random stream ``(seed, r)``):

1. k-means++ seeding on the sorted samples: the first centre is the sample
   at a uniformly drawn position, each further centre is drawn with
   probability proportional to squared distance to the nearest centre.
2. One Lloyd pass: assign each sample to its nearest centre, recompute the
   centres as cluster means.
3. Moment matching: each cluster gives (proportion, mean, variance). Clusters
   with fewer than two samples start at variance ``var(y) / K**2`` instead.

Every step commutes with ``y -> a*y + b`` for ``a > 0``, and the
convergence test uses the change in mean log-likelihood (which such a map
only shifts by a constant), so fits are affine-equivariant for positive
scalings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import errors, kernels
from .model import UnivariateGMM, make_rng

ABS_VARIANCE_FLOOR = 1e-12


@dataclass(frozen=True)
class EMConfig:
    components: int = 2
    max_iters: int = 200
    rel_tol: float = 1e-8
    restarts: int = 5
    variance_floor_scale: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.components < 1:
            raise ValueError(f"components must be >= 1, got {self.components}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.restarts < 1:
            raise ValueError(f"restarts must be >= 1, got {self.restarts}")
        if not self.variance_floor_scale > 0:
            raise ValueError(f"variance_floor_scale must be > 0, got {self.variance_floor_scale}")
        if not self.rel_tol >= 0:
            raise ValueError(f"rel_tol must be >= 0, got {self.rel_tol}")

    def with_seed(self, seed: int) -> "EMConfig":
        return replace(self, seed=int(seed))


@dataclass(frozen=True, eq=False)
class FitReport:
    gmm: UnivariateGMM
    final_loglik: float
    iterations: int
    restarts_used: int
    converged: bool
    floor_hit: bool
    loglik_trace: np.ndarray = field(repr=False, default=None)
    reseed_steps: tuple = ()


def sort_components(gmm: UnivariateGMM) -> UnivariateGMM:
    """Order components by mean, then stddev, then weight (all ascending)."""
    order = np.lexsort((gmm.weights, gmm.stddevs, gmm.means))
    return UnivariateGMM(gmm.weights[order], gmm.means[order], gmm.stddevs[order])


def _as_samples(samples) -> np.ndarray:
    y = np.ascontiguousarray(np.asarray(samples, dtype=float).ravel())
    if not np.all(np.isfinite(y)):
        raise errors.NonFiniteEntry("samples must be finite")
    return y


def _variance(y: np.ndarray) -> float:
    m = y.sum() / y.size
    dy = y - m
    return float(dy @ dy) / y.size


def variance_floor(y: np.ndarray, scale: float = 1e-6) -> float:
    v = _variance(y)
    return scale * v if v > 0 else ABS_VARIANCE_FLOOR


def log_likelihood(samples, gmm: UnivariateGMM, *, backend=None) -> float:
    """``sum_i log sum_k pi_k N(y_i; mu_k, sigma_k^2)``, via log-sum-exp."""
    y = _as_samples(samples)
    return kernels.get(backend).log_likelihood(y, gmm.weights.copy(), gmm.means.copy(), gmm.stddevs**2)


def em_step(samples, gmm: UnivariateGMM, *, variance_floor_value=None, backend=None):
    """One EM iteration.

    Returns the updated mixture and the log-likelihood of the mixture that
    was passed in. Variances are clamped at ``variance_floor_value``
    (default ``1e-6 * var(samples)``).
    """
    y = _as_samples(samples)
    floor = variance_floor(y) if variance_floor_value is None else float(variance_floor_value)
    w, mu, var = gmm.weights.copy(), gmm.means.copy(), gmm.stddevs**2
    ll, _, _ = kernels.get(backend).em_step(y, w, mu, var, floor)
    return UnivariateGMM(w, mu, np.sqrt(var)), ll


def responsibilities(samples, gmm: UnivariateGMM) -> np.ndarray:
    """``(N, K)`` posterior component probabilities."""
    y = _as_samples(samples)
    var = gmm.stddevs**2
    t = np.log(gmm.weights) - 0.5 * np.log(2 * np.pi * var) - 0.5 * (y[:, None] - gmm.means) ** 2 / var
    t -= t.max(axis=1, keepdims=True)
    r = np.exp(t)
    return r / r.sum(axis=1, keepdims=True)


def _draw_index(rng: np.random.Generator, n: int) -> int:
    return min(int(rng.random() * n), n - 1)


def initial_parameters(ys: np.ndarray, K: int, rng: np.random.Generator, floor: float):
    """k-means++ seeding, one Lloyd pass, moment matching. ``ys`` must be sorted."""
    N = ys.size
    total_var = _variance(ys)
    centres = np.empty(K)
    centres[0] = ys[_draw_index(rng, N)]
    d2 = (ys - centres[0]) ** 2
    for c in range(1, K):
        cum = np.cumsum(d2)
        if cum[-1] > 0:
            idx = min(int(np.searchsorted(cum, rng.random() * cum[-1], side="right")), N - 1)
        else:
            idx = _draw_index(rng, N)
        centres[c] = ys[idx]
        d2 = np.minimum(d2, (ys - centres[c]) ** 2)
    centres.sort()

    labels = np.argmin(np.abs(ys[:, None] - centres[None, :]), axis=1)
    w, mu, var = np.empty(K), np.empty(K), np.empty(K)
    for k in range(K):
        members = ys[labels == k]
        n_k = members.size
        if n_k == 0:
            w[k], mu[k], var[k] = 1.0 / N, centres[k], total_var
            continue
        m = members.sum() / n_k
        w[k], mu[k] = n_k / N, m
        var[k] = float((members - m) @ (members - m)) / n_k if n_k >= 2 else total_var / K**2
    var = np.maximum(var, floor)
    w /= w.sum()
    return w, mu, var


def fit_gmm1d(samples, config: EMConfig, *, backend=None) -> FitReport:
    """Fit a ``config.components``-component mixture by EM with restarts.

    The restart with the highest final log-likelihood wins (earliest restart
    on ties); its mixture is returned in canonical order.
    """
    y = _as_samples(samples)
    K, N = config.components, y.size
    if N < K:
        raise errors.TooFewSamples(f"{N} samples cannot support {K} components")
    ys = np.sort(y)
    kern = kernels.get(backend)

    if ys[0] == ys[-1]:
        floor = ABS_VARIANCE_FLOOR
        gmm = UnivariateGMM(np.full(K, 1.0 / K), np.full(K, ys[0]), np.full(K, math.sqrt(floor)))
        ll = kern.log_likelihood(ys, gmm.weights.copy(), gmm.means.copy(), gmm.stddevs**2)
        return FitReport(gmm, ll, 0, 0, True, True, np.empty(0))

    floor = variance_floor(ys, config.variance_floor_scale)

    if K == 1:
        m = ys.sum() / N
        v = max(_variance(ys), floor)
        w_, mu_, var_ = np.ones(1), np.array([m]), np.array([v])
        ll = kern.log_likelihood(ys, w_, mu_, var_)
        gmm = UnivariateGMM(w_, mu_, np.sqrt(var_))
        return FitReport(gmm, ll, 1, 1, True, v == floor, np.array([ll]))

    total_var = _variance(ys)
    best = None
    for r in range(config.restarts):
        rng = make_rng(config.seed, r)
        w, mu, var = initial_parameters(ys, K, rng, floor)
        trace = np.empty(config.max_iters)
        reseeded = np.zeros(config.max_iters, dtype=np.int8)
        its, conv, fh, ll = kern.em_run(ys, w, mu, var, floor, total_var, config.max_iters, config.rel_tol, trace, reseeded)
        if best is None or ll > best[0] + 1e-12 * max(1.0, abs(best[0])):
            steps = tuple(int(i) for i in np.flatnonzero(reseeded[:its]))
            best = (ll, w, mu, var, its, conv, fh, trace[:its].copy(), steps)
    ll, w, mu, var, its, conv, fh, trace, steps = best
    gmm = sort_components(UnivariateGMM(w, mu, np.sqrt(var)))
    return FitReport(gmm, ll, its, config.restarts, conv, fh, trace, steps)


def moment_matched_fit(samples, K: int) -> UnivariateGMM:
    """Fallback: ``K`` identical components carrying the sample mean and variance."""
    ys = np.sort(_as_samples(samples))
    m = ys.sum() / ys.size
    v = max(_variance(ys), ABS_VARIANCE_FLOOR)
    return UnivariateGMM(np.full(K, 1.0 / K), np.full(K, m), np.full(K, math.sqrt(v)))
