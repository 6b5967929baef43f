"""Directions on the unit sphere, projections, and slice-collision scores."""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import errors
from .model import MultivariateGMM, PointSet, make_rng
from .moments import check_unit


class Scheme(str, enum.Enum):
    IID_GAUSSIAN_NORMALIZED = "iid_gaussian_normalized"
    AXIS_ALIGNED_THEN_RANDOM = "axis_aligned_then_random"


@dataclass(frozen=True, eq=False)
class SliceSet:
    """``L x d`` unit directions plus the recipe that produced them."""

    directions: np.ndarray
    seed: int
    scheme: Scheme

    def __post_init__(self):
        dirs = np.array(self.directions, dtype=float, copy=True)
        if dirs.ndim != 2 or dirs.shape[0] < 1 or dirs.shape[1] < 1:
            raise errors.ShapeMismatch(f"directions must be a non-empty L x d array, got shape {dirs.shape}")
        norms = np.sqrt(np.sum(dirs * dirs, axis=1))
        if np.any(np.abs(norms - 1.0) > 1e-12):
            raise errors.NonUnitDirection(f"direction {int(np.argmax(np.abs(norms - 1)))} is not unit length")
        dirs.setflags(write=False)
        object.__setattr__(self, "directions", dirs)
        object.__setattr__(self, "scheme", Scheme(self.scheme))

    @property
    def L(self) -> int:
        return self.directions.shape[0]

    @property
    def d(self) -> int:
        return self.directions.shape[1]

    def __len__(self):
        return self.L

    def to_dict(self) -> dict:
        return {"scheme": self.scheme.value, "seed": int(self.seed), "directions": self.directions.tolist()}

    @classmethod
    def from_dict(cls, doc: dict) -> "SliceSet":
        return cls(np.asarray(doc["directions"], dtype=float), int(doc["seed"]), Scheme(doc["scheme"]))


def _unit_gaussian(rng: np.random.Generator, d: int) -> np.ndarray:
    while True:
        v = rng.standard_normal(d)
        norm = math.sqrt(float(v @ v))
        if norm > 0:
            return v / norm


def generate_directions(d: int, L: int, seed: int, scheme=Scheme.IID_GAUSSIAN_NORMALIZED) -> SliceSet:
    """Draw ``L`` directions in ``R^d``.

    Direction ``l`` is drawn from its own PCG64 substream ``(seed, l)``, so
    any slice can be regenerated without the others.
    """
    if d < 1 or L < 1:
        raise ValueError(f"need d >= 1 and L >= 1, got d={d}, L={L}")
    scheme = Scheme(scheme)
    out = np.empty((L, d))
    n_axes = min(d, L) if scheme is Scheme.AXIS_ALIGNED_THEN_RANDOM else 0
    out[:n_axes] = np.eye(d)[:n_axes]
    for ell in range(n_axes, L):
        out[ell] = _unit_gaussian(make_rng(seed, ell), d)
    return SliceSet(out, int(seed), scheme)


def project(points: PointSet, theta) -> np.ndarray:
    """``y_i = <x_i, theta>``.

    Accumulated coordinate by coordinate so each ``y_i`` depends only on row
    ``i`` (the value is unaffected by the row's position in the array).
    """
    theta = np.asarray(theta, dtype=float).ravel()
    if theta.size != points.d:
        raise errors.DimensionMismatch(f"direction has {theta.size} entries, points have d={points.d}")
    check_unit(theta)
    X = points.points
    y = X[:, 0] * theta[0]
    for j in range(1, points.d):
        y = y + X[:, j] * theta[j]
    return y


def collision_score(gmm: MultivariateGMM, theta) -> float:
    """How far the closest pair of components is from colliding along ``theta``.

    ``min_{j<j'} max(|theta.(mu_j - mu_j')|, |theta'(Sigma_j - Sigma_j')theta|)``.
    Zero means two components project onto the same 1-D Gaussian. A single
    component has nothing to collide with and scores ``inf``.
    """
    theta = check_unit(theta, gmm.d)
    if gmm.k < 2:
        return math.inf
    pm = gmm.means @ theta
    pv = np.einsum("i,kij,j->k", theta, gmm.covariances, theta)
    best = math.inf
    for a, b in itertools.combinations(range(gmm.k), 2):
        best = min(best, max(abs(pm[a] - pm[b]), abs(pv[a] - pv[b])))
    return float(best)
