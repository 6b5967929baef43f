import numpy as np
import pytest

from conftest import random_gmm
from emperor import errors
from emperor.descriptor import DescriptorConfig, emperor_descriptor
from emperor.gmm1d import EMConfig
from emperor.model import make_rng, sample_gmm, validate_gmm
from emperor.momentindex import monomial_count
from emperor.moments import gmm_moment_vector
from emperor.reconstruct import (
    RateStudyConfig,
    SlicedMomentVector,
    default_ridge,
    design_diagnostics,
    design_matrix,
    exact_sliced_moments,
    fit_log_slope,
    format_rate_csv,
    rate_study,
    recover_moments,
    solve_moments,
)
from emperor.slicing import generate_directions


def test_design_matrix_entries():
    s = generate_directions(2, 3, 0)
    D = design_matrix(s, 2).entries
    t = s.directions
    np.testing.assert_allclose(D, np.column_stack([t[:, 0] ** 2, 2 * t[:, 0] * t[:, 1], t[:, 1] ** 2]))


@pytest.mark.parametrize("k", [0, 1, 2, 3, 4])
def test_noiseless_recovery(k):
    g = random_gmm(make_rng(k), 3, 3)
    s = generate_directions(3, 2 * monomial_count(3, k) + 1, 1)
    est, resid = solve_moments(design_matrix(s, k), exact_sliced_moments(g, s, k))
    truth = gmm_moment_vector(g, k).values
    assert np.linalg.norm(est.values - truth) <= 1e-8 * np.linalg.norm(truth)
    assert resid <= 1e-8 * np.linalg.norm(truth)


def test_rank_deficiency():
    s = generate_directions(3, 4, 0)  # M_2 = 6 > L
    d = design_matrix(s, 2)
    y = SlicedMomentVector(2, np.ones(4))
    with pytest.raises(errors.RankDeficient):
        solve_moments(d, y)
    est, _ = solve_moments(d, y, ridge=default_ridge(d))
    assert np.all(np.isfinite(est.values))
    assert design_diagnostics(d)[0] == 0.0
    # repeated direction: rank 1 for k = 1 in d = 2
    from emperor.slicing import SliceSet

    rep = SliceSet([[1.0, 0.0]] * 5, 0, "iid_gaussian_normalized")
    with pytest.raises(errors.RankDeficient):
        solve_moments(design_matrix(rep, 1), SlicedMomentVector(1, np.zeros(5)))


def test_ridge_matches_normal_equations():
    s = generate_directions(3, 30, 2)
    d = design_matrix(s, 2)
    y = make_rng(0).normal(size=30)
    lam = 0.3
    est, _ = solve_moments(d, SlicedMomentVector(2, y), lam)
    P = d.entries
    ref = np.linalg.solve(P.T @ P + lam * np.eye(P.shape[1]), P.T @ y)
    np.testing.assert_allclose(est.values, ref, rtol=1e-10)


def test_default_ridge_rule():
    d = design_matrix(generate_directions(3, 12, 0), 2)
    assert default_ridge(d) == 0.0
    d = design_matrix(generate_directions(3, 11, 0), 2)
    assert default_ridge(d) == pytest.approx(1e-8 * np.sum(d.entries**2) / 6)


def test_bad_inputs():
    d = design_matrix(generate_directions(2, 5, 0), 1)
    with pytest.raises(errors.DimensionMismatch):
        solve_moments(d, SlicedMomentVector(1, np.ones(4)))
    with pytest.raises(ValueError):
        solve_moments(d, SlicedMomentVector(1, np.ones(5)), -1.0)
    with pytest.raises(errors.NonFiniteEntry):
        SlicedMomentVector(1, [np.nan])


def test_recover_from_descriptor():
    g = validate_gmm([0.5, 0.5], [[-2.0, 0.0], [2.0, 1.0]], [np.eye(2), [[1.0, 0.3], [0.3, 0.5]]])
    ps = sample_gmm(g, 20000, 1)
    desc = emperor_descriptor(ps, DescriptorConfig(slices=16, components=2, em=EMConfig(restarts=1, max_iters=100, rel_tol=1e-6)))
    est = recover_moments(desc, 2)
    truth = gmm_moment_vector(g, 2).values
    assert np.linalg.norm(est.values - truth) / np.linalg.norm(truth) < 0.05


def test_fit_log_slope():
    L = np.array([16, 32, 64, 128, 256])
    slope, excl = fit_log_slope(L, 3.0 * L**-0.5)
    assert slope == pytest.approx(-0.5) and excl == ()
    errs = 3.0 * L**-0.5 * np.array([1.0, 1.01, 0.99, 1.0, 1.01])
    errs[0] = 50.0
    slope, excl = fit_log_slope(L, errs)
    assert excl == (16,) and slope == pytest.approx(-0.5, abs=0.02)
    assert np.isnan(fit_log_slope([1, 2], [0.0, 1.0])[0])


def test_rate_study_small():
    g = validate_gmm([1.0], [[0.0, 0.0]], [np.eye(2)])
    cfg = RateStudyConfig(g, 2, (8, 32, 128), trials=10, noise_scale=1.0, sample_size=100, seed=3)
    res = rate_study(cfg)
    assert len(res.trials) == 30 and len(res.table) == 3
    assert -0.8 < res.slope < -0.2
    text = format_rate_csv(res)
    assert text.startswith("L,trial,rmse\n") and text.rstrip().split("\n")[-1].startswith("slope,fit,")
    assert rate_study(cfg).table == res.table
    with pytest.raises(ValueError):
        RateStudyConfig(g, 2, (2, 8))
    with pytest.raises(ValueError):
        RateStudyConfig(g, 2, (8, 8))
