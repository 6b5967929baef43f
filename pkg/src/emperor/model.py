"""Point sets and Gaussian mixtures.

Random numbers come from numpy's ``PCG64`` bit generator seeded through
``SeedSequence``; the stream for a given integer seed is fixed by numpy's
documented algorithms and is the same on every platform.

GMM specification file (JSON)::

    {
      "weights": [0.5, 0.5],
      "means": [[-1.0, 0.0], [1.0, 0.0]],
      "covariances": [[[1.0, 0.0], [0.0, 1.0]], [[1.0, 0.0], [0.0, 1.0]]]
    }

``weights`` has K entries, ``means`` is K x d, ``covariances`` is K x d x d.

PointSet CSV: one point per line, d comma-separated decimal floats. Lines
starting with ``#`` and blank lines are ignored.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import errors

WEIGHT_SUM_TOL = 1e-12


def make_rng(seed, *key: int) -> np.random.Generator:
    """PCG64 generator for ``seed``, optionally on the substream named by ``key``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))))


@dataclass(frozen=True, eq=False)
class PointSet:
    """``N x d`` finite samples."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float, copy=True)
        if pts.ndim != 2:
            raise errors.ShapeMismatch(f"points must be 2-D, got shape {pts.shape}")
        if pts.shape[0] < 1:
            raise errors.Empty("point set has no rows")
        if pts.shape[1] < 1:
            raise errors.ShapeMismatch("points must have at least one coordinate")
        if not np.all(np.isfinite(pts)):
            bad = int(np.argwhere(~np.isfinite(pts))[0, 0])
            raise errors.NonFiniteEntry(f"row {bad} has a non-finite entry")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return self.n


def _frozen(a):
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class MultivariateGMM:
    """A validated mixture ``sum_j pi_j N(mu_j, Sigma_j)``.

    Use :func:`validate_gmm` to build one; the constructor expects already
    checked arrays.
    """

    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    chol: np.ndarray = field(repr=False)

    @property
    def k(self) -> int:
        return self.weights.shape[0]

    @property
    def d(self) -> int:
        return self.means.shape[1]

    def mean(self) -> np.ndarray:
        return self.weights @ self.means

    def to_dict(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "means": self.means.tolist(),
            "covariances": self.covariances.tolist(),
        }


@dataclass(frozen=True, eq=False)
class UnivariateGMM:
    """One slice's mixture ``sum_k pi_k N(mu_k, sigma_k^2)``.

    Components may be in any order here; :func:`emperor.gmm1d.sort_components`
    produces the canonical (ascending mean) form that descriptors store.
    """

    weights: np.ndarray
    means: np.ndarray
    stddevs: np.ndarray

    def __post_init__(self):
        w, m, s = (_frozen(np.atleast_1d(x)) for x in (self.weights, self.means, self.stddevs))
        if not (w.ndim == m.ndim == s.ndim == 1 and w.shape == m.shape == s.shape) or w.size == 0:
            raise errors.ShapeMismatch("weights, means and stddevs must be 1-D arrays of equal nonzero length")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(m)) and np.all(np.isfinite(s))):
            raise errors.NonFiniteEntry("mixture parameters must be finite")
        if np.any(w <= 0):
            raise errors.NonPositiveWeight(f"weights must be positive, got {w.tolist()}")
        if abs(w.sum() - 1.0) > WEIGHT_SUM_TOL * max(1, w.size):
            raise errors.WeightSum(f"weights sum to {w.sum()!r}, not 1")
        if np.any(s <= 0):
            raise errors.NonPDCovariance(f"stddevs must be positive, got {s.tolist()}")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", m)
        object.__setattr__(self, "stddevs", s)

    @property
    def k(self) -> int:
        return self.weights.shape[0]

    def pdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)[..., None]
        z = (x - self.means) / self.stddevs
        return np.sum(self.weights * np.exp(-0.5 * z * z) / (math.sqrt(2 * math.pi) * self.stddevs), axis=-1)

    def triplets(self) -> np.ndarray:
        """``(K, 3)`` array of ``(pi, mu, sigma)`` rows."""
        return np.stack([self.weights, self.means, self.stddevs], axis=1)


def validate_gmm(weights, means, covariances, *, jitter: bool = False) -> MultivariateGMM:
    """Check mixture parameters and return a :class:`MultivariateGMM`.

    Checks run in order (weight sign, weight sum, symmetry, positive
    definiteness) and the first failure is raised. Weights within
    ``WEIGHT_SUM_TOL`` of summing to one are renormalised. With
    ``jitter=True`` each covariance gets ``1e-10 * trace / d`` added to its
    diagonal before the Cholesky test; this is never done implicitly.
    """
    w = np.atleast_1d(np.asarray(weights, dtype=float))
    mu = np.asarray(means, dtype=float)
    cov = np.asarray(covariances, dtype=float)
    if w.ndim != 1 or w.size < 1:
        raise errors.ShapeMismatch("weights must be a non-empty 1-D sequence")
    K = w.size
    if mu.ndim == 1 and K == 1:
        mu = mu[None, :]
    if mu.ndim != 2 or mu.shape[0] != K:
        raise errors.ShapeMismatch(f"means must be K x d with K={K}, got shape {mu.shape}")
    d = mu.shape[1]
    if d < 1:
        raise errors.ShapeMismatch("dimension must be >= 1")
    if cov.ndim == 2 and K == 1:
        cov = cov[None, :, :]
    if cov.shape != (K, d, d):
        raise errors.ShapeMismatch(f"covariances must have shape {(K, d, d)}, got {cov.shape}")
    for name, a in (("weights", w), ("means", mu), ("covariances", cov)):
        if not np.all(np.isfinite(a)):
            raise errors.NonFiniteEntry(f"{name} contain non-finite values")

    if np.any(w <= 0):
        j = int(np.argmax(w <= 0))
        raise errors.NonPositiveWeight(f"weight {j} is {w[j]!r}; weights must be > 0")
    total = w.sum()
    if abs(total - 1.0) > WEIGHT_SUM_TOL:
        raise errors.WeightSum(f"weights sum to {total!r}, not 1")
    w = w / total

    chol = np.empty_like(cov)
    for j in range(K):
        c = cov[j]
        if not np.array_equal(c, c.T):
            asym = np.max(np.abs(c - c.T))
            raise errors.AsymmetricCovariance(f"covariance {j} is not symmetric (max |C - C^T| = {asym:.3g})")
        if jitter:
            c = c + (1e-10 * np.trace(c) / d) * np.eye(d)
            cov[j] = c
        try:
            chol[j] = np.linalg.cholesky(c)
        except np.linalg.LinAlgError:
            raise errors.NonPDCovariance(f"covariance {j} is not positive definite") from None
        if not np.all(np.diag(chol[j]) > 0):
            raise errors.NonPDCovariance(f"covariance {j} is not positive definite")
    return MultivariateGMM(_frozen(w), _frozen(mu), _frozen(cov), _frozen(chol))


def sample_gmm(gmm: MultivariateGMM, n: int, seed: int) -> PointSet:
    """Draw ``n`` i.i.d. points from ``gmm``.

    Component labels come from inverse-CDF lookup of uniforms on the
    cumulative weights; each point is ``mu_j + L_j z`` with ``L_j`` the
    Cholesky factor and ``z`` standard normal.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = make_rng(seed)
    u = rng.random(n)
    cdf = np.cumsum(gmm.weights)
    cdf[-1] = 1.0
    labels = np.searchsorted(cdf, u, side="right")
    z = rng.standard_normal((n, gmm.d))
    out = np.empty((n, gmm.d))
    for j in range(gmm.k):
        sel = labels == j
        out[sel] = gmm.means[j] + z[sel] @ gmm.chol[j].T
    return PointSet(out)


def pointset_from_rows(rows: Sequence[Sequence[float]]) -> PointSet:
    rows = list(rows)
    if not rows:
        raise errors.Empty("no rows")
    width = len(rows[0])
    for i, r in enumerate(rows):
        if len(r) != width:
            raise errors.RaggedRows(f"row {i} has {len(r)} entries, expected {width}")
    arr = np.array(rows, dtype=float).reshape(len(rows), width)
    return PointSet(arr)


# file formats


def read_pointset_csv(path) -> PointSet:
    path = Path(path)
    rows, width = [], None
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            try:
                vals = [float(t) for t in s.split(",")]
            except ValueError:
                raise errors.FormatError(f"cannot parse {s!r} as comma-separated floats", path, lineno) from None
            if width is None:
                width = len(vals)
            elif len(vals) != width:
                raise errors.FormatError(f"expected {width} values, got {len(vals)}", path, lineno)
            if not all(math.isfinite(v) for v in vals):
                raise errors.FormatError("non-finite value", path, lineno)
            rows.append(vals)
    if not rows:
        raise errors.FormatError("no data rows", path)
    return PointSet(np.array(rows))


def format_pointset_csv(points: PointSet) -> str:
    return "".join(",".join(repr(float(v)) for v in row) + "\n" for row in points.points)


def gmm_from_dict(doc: dict) -> MultivariateGMM:
    missing = [k for k in ("weights", "means", "covariances") if k not in doc]
    if missing:
        raise errors.FormatError(f"GMM spec is missing field(s) {', '.join(missing)}")
    return validate_gmm(doc["weights"], doc["means"], doc["covariances"])


def load_gmm_spec(path) -> MultivariateGMM:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise errors.FormatError(exc.msg, path, exc.lineno) from None
    try:
        return gmm_from_dict(doc)
    except errors.FormatError as exc:
        raise errors.FormatError(str(exc), path) from None
