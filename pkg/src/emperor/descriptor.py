"""EMPEROR descriptors and baseline poolings.

A descriptor holds, for each of ``L`` directions, a ``K``-component
univariate mixture fitted to the projected points, components sorted by
mean. :func:`flatten` lays it out as ``L * K * 3`` numbers: slice-major,
then component, then ``(pi, mu, sigma)``.

Descriptor file (JSON, keys sorted)::

    {
      "format": "emperor-descriptor",
      "version": 1,
      "config": {"slices": L, "components": K, "seed": s,
                 "direction_scheme": "...", "standardize_slices": false,
                 "em": {...EMConfig fields...}},
      "slices": {"scheme": "...", "seed": s, "directions": [[...], ...]},
      "per_slice": [{"weights": [...], "means": [...], "stddevs": [...],
                     "center": c, "scale": s}, ...],
      "metadata": {"warnings": [...], "package_version": "..."}
    }

When ``standardize_slices`` is set, slice ``l`` was fitted to
``(y - center) / scale`` and ``per_slice`` stores the fitted parameters in
those units; otherwise ``center = 0`` and ``scale = 1``. Floats are written
with Python's shortest round-trip representation, so reading a file back
gives bit-identical values.
"""

from __future__ import annotations

import enum
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__, errors
from .gmm1d import EMConfig, fit_gmm1d, moment_matched_fit
from .model import PointSet, UnivariateGMM
from .slicing import Scheme, SliceSet, generate_directions, project

FORMAT_TAG = "emperor-descriptor"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class DescriptorConfig:
    slices: int = 64
    components: int = 3
    em: EMConfig = field(default_factory=EMConfig)
    direction_scheme: Scheme = Scheme.IID_GAUSSIAN_NORMALIZED
    seed: int = 0
    standardize_slices: bool = False

    def __post_init__(self):
        if self.slices < 1:
            raise ValueError(f"slices must be >= 1, got {self.slices}")
        if self.components < 1:
            raise ValueError(f"components must be >= 1, got {self.components}")
        object.__setattr__(self, "direction_scheme", Scheme(self.direction_scheme))

    def to_dict(self) -> dict:
        return {
            "slices": self.slices,
            "components": self.components,
            "seed": int(self.seed),
            "direction_scheme": self.direction_scheme.value,
            "standardize_slices": bool(self.standardize_slices),
            "em": asdict(self.em),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "DescriptorConfig":
        return cls(
            slices=int(doc["slices"]),
            components=int(doc["components"]),
            em=EMConfig(**doc.get("em", {})),
            direction_scheme=Scheme(doc.get("direction_scheme", Scheme.IID_GAUSSIAN_NORMALIZED.value)),
            seed=int(doc.get("seed", 0)),
            standardize_slices=bool(doc.get("standardize_slices", False)),
        )


@dataclass(frozen=True, eq=False)
class Descriptor:
    slices: SliceSet
    per_slice: tuple
    config: DescriptorConfig
    centers: np.ndarray
    scales: np.ndarray
    warnings: tuple = ()

    def __post_init__(self):
        if len(self.per_slice) != self.slices.L:
            raise errors.ShapeMismatch(f"{len(self.per_slice)} slice mixtures for {self.slices.L} directions")
        ks = {g.k for g in self.per_slice}
        if len(ks) != 1:
            raise errors.ShapeMismatch("every slice must have the same number of components")
        for ell, g in enumerate(self.per_slice):
            if np.any(np.diff(g.means) < 0):
                raise errors.EmperorError(f"slice {ell} components are not sorted by mean")

    @property
    def L(self) -> int:
        return self.slices.L

    @property
    def K(self) -> int:
        return self.per_slice[0].k

    def slice_mixture(self, ell: int) -> UnivariateGMM:
        """Mixture of slice ``ell`` in the units of the raw projections."""
        g = self.per_slice[ell]
        c, s = float(self.centers[ell]), float(self.scales[ell])
        if c == 0.0 and s == 1.0:
            return g
        return UnivariateGMM(g.weights, g.means * s + c, g.stddevs * s)

    def to_dict(self) -> dict:
        return {
            "format": FORMAT_TAG,
            "version": FORMAT_VERSION,
            "config": self.config.to_dict(),
            "slices": self.slices.to_dict(),
            "per_slice": [
                {
                    "weights": g.weights.tolist(),
                    "means": g.means.tolist(),
                    "stddevs": g.stddevs.tolist(),
                    "center": float(c),
                    "scale": float(s),
                }
                for g, c, s in zip(self.per_slice, self.centers, self.scales)
            ],
            "metadata": {"warnings": list(self.warnings), "package_version": __version__},
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Descriptor":
        if doc.get("format") != FORMAT_TAG:
            raise errors.FormatError(f"not a descriptor document (format={doc.get('format')!r})")
        if doc.get("version") != FORMAT_VERSION:
            raise errors.FormatError(f"unsupported descriptor version {doc.get('version')!r}")
        try:
            per = doc["per_slice"]
            mixtures = tuple(UnivariateGMM(p["weights"], p["means"], p["stddevs"]) for p in per)
            return cls(
                SliceSet.from_dict(doc["slices"]),
                mixtures,
                DescriptorConfig.from_dict(doc["config"]),
                np.array([float(p.get("center", 0.0)) for p in per]),
                np.array([float(p.get("scale", 1.0)) for p in per]),
                tuple(doc.get("metadata", {}).get("warnings", ())),
            )
        except KeyError as exc:
            raise errors.FormatError(f"descriptor is missing field {exc}") from None

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"

    @classmethod
    def loads(cls, text: str) -> "Descriptor":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise errors.FormatError(exc.msg, line=exc.lineno) from None
        return cls.from_dict(doc)


def slice_seed(seed: int, ell: int) -> int:
    """EM seed for slice ``ell``, independent of every other slice."""
    return int(np.random.SeedSequence(int(seed), spawn_key=(1, int(ell))).generate_state(1, np.uint64)[0] >> 1)


def _fit_slice(points: PointSet, theta, ell: int, config: DescriptorConfig):
    y = project(points, theta)
    center, scale = 0.0, 1.0
    if config.standardize_slices:
        center = math.fsum(np.sort(y)) / y.size
        sd = math.sqrt(math.fsum(np.sort((y - center) ** 2)) / y.size)
        scale = sd if sd > 0 else 1.0
        y = (y - center) / scale
    em = EMConfig(
        components=config.components,
        max_iters=config.em.max_iters,
        rel_tol=config.em.rel_tol,
        restarts=config.em.restarts,
        variance_floor_scale=config.em.variance_floor_scale,
        seed=slice_seed(config.seed, ell),
    )
    try:
        return fit_gmm1d(y, em).gmm, center, scale, None
    except (errors.NonFiniteEntry, errors.ShapeMismatch, errors.NonPositiveWeight, errors.WeightSum,
            errors.NonPDCovariance, FloatingPointError, ZeroDivisionError) as exc:
        fallback = moment_matched_fit(y, config.components)
        return fallback, center, scale, f"slice {ell}: EM failed ({exc}); moment-matched fallback used"


def emperor_descriptor(points: PointSet, config: DescriptorConfig, *, threads: int = 1) -> Descriptor:
    """Project ``points`` on ``config.slices`` directions and fit each slice.

    Slices are independent and may be fitted on ``threads`` worker threads;
    the result does not depend on ``threads``.
    """
    if points.n < config.components:
        raise errors.TooFewSamples(f"{points.n} points cannot support {config.components} components")
    slices = generate_directions(points.d, config.slices, config.seed, config.direction_scheme)

    def work(ell):
        return _fit_slice(points, slices.directions[ell], ell, config)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, range(slices.L)))
    else:
        results = [work(ell) for ell in range(slices.L)]
    mixtures = tuple(r[0] for r in results)
    warnings = tuple(r[3] for r in results if r[3] is not None)
    return Descriptor(
        slices,
        mixtures,
        config,
        np.array([r[1] for r in results]),
        np.array([r[2] for r in results]),
        warnings,
    )


def flatten(descriptor: Descriptor) -> np.ndarray:
    return np.concatenate([g.triplets().ravel() for g in descriptor.per_slice])


def format_flat_csv(descriptor: Descriptor) -> str:
    return ",".join(repr(float(v)) for v in flatten(descriptor)) + "\n"


class Pool(str, enum.Enum):
    GAP = "gap"
    MAX = "max"
    GEM = "gem"
    COV = "cov"


def _sorted_mean(a: np.ndarray) -> np.ndarray:
    # column sums over sorted values do not depend on row order
    return np.sort(a, axis=0).sum(axis=0) / a.shape[0]


def baseline_pool(points: PointSet, method, *, p: float = 3.0, strict: bool = False) -> np.ndarray:
    """Order-invariant pooling of a point set.

    ``gap``: coordinate means. ``max``: coordinate maxima. ``gem``: signed
    power mean ``sign(m) |m|^(1/p)`` with ``m = mean(sign(x) |x|^p)``; with
    ``strict=True`` negative inputs raise instead. ``cov``: the mean followed
    by the upper triangle (row-major) of the biased covariance, length
    ``d + d(d+1)/2``.
    """
    method = Pool(str(method).lower())
    X = points.points
    if method is Pool.GAP:
        return _sorted_mean(X)
    if method is Pool.MAX:
        return X.max(axis=0)
    if method is Pool.GEM:
        if p < 1:
            raise errors.GeMDomainError(f"GeM needs p >= 1, got {p}")
        if strict and np.any(X < 0):
            raise errors.GeMDomainError("strict GeM requires nonnegative inputs")
        m = _sorted_mean(np.sign(X) * np.abs(X) ** p)
        return np.sign(m) * np.abs(m) ** (1.0 / p)
    mean = _sorted_mean(X)
    C = X - mean
    iu = np.triu_indices(points.d)
    prods = C[:, iu[0]] * C[:, iu[1]]
    return np.concatenate([mean, _sorted_mean(prods)])
