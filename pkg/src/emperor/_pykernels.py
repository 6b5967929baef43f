"""Pure numpy EM kernels for univariate Gaussian mixtures.

This is the reference implementation of the kernel contract; the compiled
module ``_ckernels`` must agree with it to rounding.

Parameters ``w, mu, var`` (weights, means, variances) are float64 arrays
updated in place.

``em_step`` performs one E-step (responsibilities via log-sum-exp) and one
M-step (weighted proportion, mean and variance, variances clamped at
``floor_var``). A component whose responsibility mass drops below 1e-12 keeps
its mean and variance and gets weight ``1e-12 / N`` so that weights stay
positive.

``em_run`` repeats steps until the change in *mean per-sample*
log-likelihood between consecutive steps is below ``tol`` or ``max_iters``
steps were taken. After a step, any component with mass below one sample is
re-seeded once per run: its mean moves to the sample with the lowest mixture
density, its variance to ``reseed_var`` and its weight to ``1/K`` before
renormalising. A re-seed resets the convergence test.
"""

import numpy as np

BACKEND = "python"

LOG_2PI = 1.8378770664093453
EMPTY_MASS = 1e-12


def _log_joint(y, w, mu, var):
    lc = np.log(w) - 0.5 * (LOG_2PI + np.log(var))
    dy = y[:, None] - mu[None, :]
    return lc - 0.5 * dy * dy / var


def _lse(t):
    mx = t.max(axis=1)
    s = np.exp(t - mx[:, None]).sum(axis=1)
    return mx + np.log(s)


def log_likelihood(y, w, mu, var):
    return float(_lse(_log_joint(y, w, mu, var)).sum())


def _step(y, w, mu, var, floor_var):
    t = _log_joint(y, w, mu, var)
    lse = _lse(t)
    resp = np.exp(t - lse[:, None])
    N = y.shape[0]
    nk = resp.sum(axis=0)
    floor_hit = False
    for k in range(w.shape[0]):
        if nk[k] < EMPTY_MASS:
            w[k] = EMPTY_MASS / N
            continue
        w[k] = nk[k] / N
        m = float(resp[:, k] @ y) / nk[k]
        dy = y - m
        v = float(resp[:, k] @ (dy * dy)) / nk[k]
        if v <= floor_var:
            v = floor_var
            floor_hit = True
        mu[k] = m
        var[k] = v
    w /= w.sum()
    return float(lse.sum()), nk, int(np.argmin(lse)), floor_hit


def em_step(y, w, mu, var, floor_var):
    ll, nk, _, floor_hit = _step(y, w, mu, var, floor_var)
    return ll, nk, floor_hit


def em_run(y, w, mu, var, floor_var, reseed_var, max_iters, tol, trace, reseeded):
    N, K = y.shape[0], w.shape[0]
    used = np.zeros(K, dtype=bool)
    it, converged, floor_hit = 0, False, False
    prev = None
    while it < max_iters:
        ll, nk, argmin, floor_hit = _step(y, w, mu, var, floor_var)
        trace[it] = ll
        reseeded[it] = 0
        it += 1
        starved = (nk < 1.0) & ~used
        if starved.any():
            used |= starved
            mu[starved] = y[argmin]
            var[starved] = reseed_var
            w[starved] = 1.0 / K
            w /= w.sum()
            reseeded[it - 1] = 1
            prev = None
            continue
        if prev is not None and abs(ll - prev) / N < tol:
            converged = True
            break
        prev = ll
    return it, converged, floor_hit, log_likelihood(y, w, mu, var)
