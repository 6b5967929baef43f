"""Recovering multivariate moments from sliced moments.

The degree-``k`` sliced moment along ``theta`` is linear in the degree-``k``
moments: ``m_k(theta) = sum_alpha C(k, alpha) theta^alpha m_alpha``. Stacking
``L`` directions gives ``y = Phi m`` with the design matrix ``Phi`` built by
:func:`design_matrix`; :func:`solve_moments` inverts it by least squares.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import errors
from .descriptor import Descriptor, DescriptorConfig, emperor_descriptor
from .gmm1d import EMConfig
from .model import MultivariateGMM, make_rng, sample_gmm
from .momentindex import MonomialBasis, enumerate_multi_indices, monomial_count, monomials
from .moments import MomentVector, gmm_moment_vector, sliced_gmm_moment, univariate_gmm_moment
from .slicing import SliceSet, generate_directions

RANK_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    entries: np.ndarray
    basis: MonomialBasis
    slices: SliceSet

    @property
    def degree(self) -> int:
        return self.basis.k


@dataclass(frozen=True, eq=False)
class SlicedMomentVector:
    degree: int
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float, copy=True).ravel()
        if not np.all(np.isfinite(v)):
            raise errors.NonFiniteEntry("sliced moments must be finite")
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size


def design_matrix(slices: SliceSet, k: int) -> DesignMatrix:
    """``Phi[l, alpha] = C(k, alpha) * theta_l^alpha``, columns in canonical basis order."""
    basis = enumerate_multi_indices(slices.d, k)
    entries = monomials(slices.directions, basis) * basis.coefficients()
    return DesignMatrix(entries, basis, slices)


def exact_sliced_moments(gmm: MultivariateGMM, slices: SliceSet, k: int) -> SlicedMomentVector:
    return SlicedMomentVector(k, [sliced_gmm_moment(gmm, th, k) for th in slices.directions])


def sliced_moments_from_descriptor(descriptor: Descriptor, k: int) -> SlicedMomentVector:
    return SlicedMomentVector(k, [univariate_gmm_moment(descriptor.slice_mixture(ell), k) for ell in range(descriptor.L)])


def design_diagnostics(design: DesignMatrix) -> tuple[float, float, float]:
    """``(sigma_min, sigma_max, condition)`` of the design matrix.

    A design with fewer rows than columns has ``sigma_min = 0``.
    """
    Phi = design.entries
    sv = np.linalg.svd(Phi, compute_uv=False)
    smax = float(sv[0]) if sv.size else 0.0
    smin = float(sv[-1]) if Phi.shape[0] >= Phi.shape[1] else 0.0
    cond = smax / smin if smin > 0 else math.inf
    return smin, smax, cond


def default_ridge(design: DesignMatrix) -> float:
    """No ridge when ``L >= 2 M_k``; otherwise ``1e-8 * trace(Phi' Phi) / M_k``."""
    L, M = design.entries.shape
    if L >= 2 * M:
        return 0.0
    return 1e-8 * float(np.sum(design.entries**2)) / M


def solve_moments(design: DesignMatrix, y: SlicedMomentVector, ridge: float = 0.0) -> tuple[MomentVector, float]:
    """Least squares (``ridge = 0``) or ridge solution of ``Phi m = y``.

    Both cases go through a QR factorisation; the ridge problem is solved as
    the stacked system ``[Phi; sqrt(ridge) I] m = [y; 0]``. With
    ``ridge = 0`` a design whose smallest singular value is below
    ``1e-10 * sigma_max`` is refused.

    Returns the moment vector and ``||Phi m - y||_2``.
    """
    Phi = design.entries
    L, M = Phi.shape
    yv = y.values
    if yv.size != L:
        raise errors.DimensionMismatch(f"{yv.size} sliced moments for {L} design rows")
    if ridge < 0 or not math.isfinite(ridge):
        raise ValueError(f"ridge must be a finite nonnegative number, got {ridge}")
    if ridge == 0:
        smin, smax, _ = design_diagnostics(design)
        if L < M or smin < RANK_TOL * smax:
            raise errors.RankDeficient(
                f"design is rank deficient (L={L}, M_k={M}, sigma_min={smin:.3g}, sigma_max={smax:.3g}); use ridge > 0"
            )
        A, b = Phi, yv
    else:
        A = np.vstack([Phi, math.sqrt(ridge) * np.eye(M)])
        b = np.concatenate([yv, np.zeros(M)])
    Q, R = np.linalg.qr(A)
    m = np.linalg.solve(R, Q.T @ b)
    resid = float(np.linalg.norm(Phi @ m - yv))
    return MomentVector(design.basis, m), resid


def recover_moments(descriptor: Descriptor, k: int, ridge: float | None = None) -> MomentVector:
    """Degree-``k`` moments implied by a descriptor (``ridge=None``: :func:`default_ridge`)."""
    design = design_matrix(descriptor.slices, k)
    y = sliced_moments_from_descriptor(descriptor, k)
    lam = default_ridge(design) if ridge is None else float(ridge)
    return solve_moments(design, y, lam)[0]


# rate study


@dataclass(frozen=True)
class RateStudyConfig:
    gmm: MultivariateGMM
    degree: int
    slice_counts: tuple
    trials: int = 50
    noise_scale: float = 1.0
    sample_size: int = 100
    ridge: float = 0.0
    seed: int = 0
    mode: str = "noise"
    em: EMConfig = field(default_factory=lambda: EMConfig(restarts=1, max_iters=100, rel_tol=1e-6))

    def __post_init__(self):
        counts = tuple(int(L) for L in self.slice_counts)
        object.__setattr__(self, "slice_counts", counts)
        if not counts or any(b <= a for a, b in zip(counts, counts[1:])):
            raise ValueError("slice_counts must be a non-empty strictly increasing sequence")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.noise_scale < 0 or self.ridge < 0:
            raise ValueError("noise_scale and ridge must be >= 0")
        if self.sample_size < 1:
            raise ValueError("sample_size must be >= 1")
        if self.mode not in ("noise", "end-to-end"):
            raise ValueError(f"unknown mode {self.mode!r}")
        M = monomial_count(self.gmm.d, self.degree)
        if self.ridge == 0 and counts[0] < M:
            raise ValueError(f"without ridge every L must be >= M_k = {M}")

    @property
    def noise_std(self) -> float:
        return self.noise_scale / math.sqrt(self.sample_size)


@dataclass
class RateStudyResult:
    trials: list  # (L, trial, error)
    table: list  # (L, rmse, std of the per-trial errors)
    slope: float
    excluded: tuple = ()
    lambda_min: float = float("nan")


def fit_log_slope(Ls, errs) -> tuple[float, tuple]:
    """OLS slope of ``log(err)`` on ``log(L)``.

    The smallest ``L`` is dropped when its residual against the fit of the
    remaining points exceeds three times their residual standard deviation.
    Returns ``(slope, excluded_Ls)``; ``nan`` if a log is undefined.
    """
    Ls = np.asarray(Ls, dtype=float)
    errs = np.asarray(errs, dtype=float)
    if Ls.size < 2 or np.any(~np.isfinite(errs)) or np.any(errs <= 0):
        return float("nan"), ()
    x, y = np.log(Ls), np.log(errs)
    excluded = ()
    if Ls.size >= 4:
        b, a = np.polyfit(x[1:], y[1:], 1)
        res = y[1:] - (a + b * x[1:])
        # floor keeps rounding noise on an exact power law from triggering a drop
        sd = max(float(np.std(res, ddof=2)), 1e-9)
        if abs(y[0] - (a + b * x[0])) > 3 * sd:
            x, y = x[1:], y[1:]
            excluded = (int(Ls[0]),)
    slope = float(np.polyfit(x, y, 1)[0])
    return slope, excluded


def _trial_seed(seed: int, L: int, trial: int) -> int:
    return int(np.random.SeedSequence(int(seed), spawn_key=(2, int(L), int(trial))).generate_state(1, np.uint64)[0] >> 1)


def rate_study(config: RateStudyConfig) -> RateStudyResult:
    """Error of recovered degree-``k`` moments as a function of slice count.

    ``mode="noise"``: exact sliced moments plus i.i.d. Gaussian noise of
    standard deviation ``noise_scale / sqrt(sample_size)`` per slice.
    ``mode="end-to-end"``: ``sample_size`` points are drawn from the mixture
    and a fitted descriptor supplies the sliced moments (``noise_scale`` is
    unused).
    """
    gmm, k = config.gmm, config.degree
    truth = gmm_moment_vector(gmm, k).values
    rows, table = [], []
    lam_min = float("nan")
    for L in config.slice_counts:
        errs = []
        for t in range(config.trials):
            s = _trial_seed(config.seed, L, t)
            if config.mode == "noise":
                slices = generate_directions(gmm.d, L, s)
                design = design_matrix(slices, k)
                y = exact_sliced_moments(gmm, slices, k).values
                y = y + make_rng(s, 0).standard_normal(L) * config.noise_std
                est, _ = solve_moments(design, SlicedMomentVector(k, y), config.ridge)
            else:
                pts = sample_gmm(gmm, config.sample_size, s)
                dc = DescriptorConfig(slices=L, components=gmm.k, em=config.em, seed=s)
                desc = emperor_descriptor(pts, dc)
                design = design_matrix(desc.slices, k)
                est, _ = solve_moments(design, sliced_moments_from_descriptor(desc, k), config.ridge)
            err = float(np.linalg.norm(est.values - truth))
            if not math.isfinite(err):
                raise errors.EmperorError(f"non-finite error at L={L}, trial={t}")
            errs.append(err)
            rows.append((L, t, err))
        errs = np.array(errs)
        table.append((L, float(np.sqrt(np.mean(errs**2))), float(errs.std())))
        if L == config.slice_counts[-1]:
            lam_min = float(np.linalg.eigvalsh(design.entries.T @ design.entries / L)[0])
    slope, excluded = fit_log_slope([r[0] for r in table], [r[1] for r in table])
    return RateStudyResult(rows, table, slope, excluded, lam_min)


def format_rate_csv(result: RateStudyResult) -> str:
    lines = ["L,trial,rmse"]
    lines += [f"{L},{t},{e!r}" for L, t, e in result.trials]
    lines.append(f"slope,fit,{result.slope!r}")
    return "\n".join(lines) + "\n"
