# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled EM kernels for univariate Gaussian mixtures.

Same contract as :mod:`emperor._pykernels`; see there for the semantics.
Parameters are updated in place and the loops run without the GIL.

Work arrays are component-major (``K x N``) so the per-sample loops are
contiguous and the compiler can vectorise them, ``exp`` and ``log``
included.
"""

from libc.math cimport exp, log, fabs

import numpy as np

cdef double LOG_2PI = 1.8378770664093453
cdef double EMPTY_MASS = 1e-12

BACKEND = "cython"


cdef double _estep(const double[::1] y, const double[::1] w, const double[::1] mu,
                   const double[::1] var, double[:, ::1] resp, double[::1] lse,
                   double[::1] tot, double[::1] lc) noexcept nogil:
    """Fill ``resp`` with responsibilities and ``lse`` with per-sample log densities."""
    cdef Py_ssize_t N = y.shape[0]
    cdef Py_ssize_t K = w.shape[0]
    cdef Py_ssize_t i, k
    cdef double c, h, dy, ll = 0.0
    cdef double* r
    cdef double* m = &lse[0]
    cdef double* t = &tot[0]
    cdef const double* yy = &y[0]

    for k in range(K):
        lc[k] = log(w[k]) - 0.5 * (LOG_2PI + log(var[k]))
    for k in range(K):
        r = &resp[k, 0]
        c = lc[k]
        h = 0.5 / var[k]
        for i in range(N):
            dy = yy[i] - mu[k]
            r[i] = c - h * dy * dy
    # running max over components, kept in lse for now
    r = &resp[0, 0]
    for i in range(N):
        m[i] = r[i]
    for k in range(1, K):
        r = &resp[k, 0]
        for i in range(N):
            if r[i] > m[i]:
                m[i] = r[i]
    for k in range(K):
        r = &resp[k, 0]
        for i in range(N):
            r[i] = exp(r[i] - m[i])
    # per-sample totals -> log-sum-exp; normalise
    r = &resp[0, 0]
    for i in range(N):
        t[i] = r[i]
    for k in range(1, K):
        r = &resp[k, 0]
        for i in range(N):
            t[i] = t[i] + r[i]
    for i in range(N):
        m[i] = m[i] + log(t[i])
        t[i] = 1.0 / t[i]
    for k in range(K):
        r = &resp[k, 0]
        for i in range(N):
            r[i] = r[i] * t[i]
    for i in range(N):
        ll += m[i]
    return ll


cdef int _mstep(const double[::1] y, double[::1] w, double[::1] mu, double[::1] var,
                double floor_var, const double[:, ::1] resp, double[::1] nk) noexcept nogil:
    cdef Py_ssize_t N = y.shape[0]
    cdef Py_ssize_t K = w.shape[0]
    cdef Py_ssize_t i, k
    cdef double acc, m, s, dy, wsum = 0.0
    cdef int floor_hit = 0
    cdef const double* r
    cdef const double* yy = &y[0]
    for k in range(K):
        r = &resp[k, 0]
        acc = 0.0
        m = 0.0
        for i in range(N):
            acc += r[i]
            m += r[i] * yy[i]
        nk[k] = acc
        if acc < EMPTY_MASS:
            w[k] = EMPTY_MASS / N
        else:
            w[k] = acc / N
            m = m / acc
            s = 0.0
            for i in range(N):
                dy = yy[i] - m
                s += r[i] * dy * dy
            s = s / acc
            if s <= floor_var:
                s = floor_var
                floor_hit = 1
            mu[k] = m
            var[k] = s
        wsum += w[k]
    for k in range(K):
        w[k] = w[k] / wsum
    return floor_hit


cdef Py_ssize_t _argmin(const double[::1] a) noexcept nogil:
    cdef Py_ssize_t i, best = 0
    for i in range(1, a.shape[0]):
        if a[i] < a[best]:
            best = i
    return best


def log_likelihood(const double[::1] y, const double[::1] w, const double[::1] mu, const double[::1] var):
    cdef Py_ssize_t N = y.shape[0], K = w.shape[0]
    cdef double[:, ::1] resp = np.empty((K, N))
    cdef double[::1] lse = np.empty(N)
    cdef double[::1] tot = np.empty(N)
    cdef double[::1] lc = np.empty(K)
    cdef double ll
    with nogil:
        ll = _estep(y, w, mu, var, resp, lse, tot, lc)
    return ll


def em_step(const double[::1] y, double[::1] w, double[::1] mu, double[::1] var, double floor_var):
    """One E+M step in place. Returns ``(pre_update_loglik, nk, floor_hit)``."""
    cdef Py_ssize_t N = y.shape[0], K = w.shape[0]
    cdef double[:, ::1] resp = np.empty((K, N))
    cdef double[::1] lse = np.empty(N)
    cdef double[::1] tot = np.empty(N)
    cdef double[::1] lc = np.empty(K)
    nk_arr = np.empty(K)
    cdef double[::1] nk = nk_arr
    cdef int floor_hit
    cdef double ll
    with nogil:
        ll = _estep(y, w, mu, var, resp, lse, tot, lc)
        floor_hit = _mstep(y, w, mu, var, floor_var, resp, nk)
    return ll, nk_arr, bool(floor_hit)


def em_run(const double[::1] y, double[::1] w, double[::1] mu, double[::1] var,
           double floor_var, double reseed_var, int max_iters, double tol,
           double[::1] trace, signed char[::1] reseeded):
    """Iterate EM in place. Returns ``(iterations, converged, floor_hit, final_loglik)``."""
    cdef Py_ssize_t N = y.shape[0], K = w.shape[0]
    cdef double[:, ::1] resp = np.empty((K, N))
    cdef double[::1] lse = np.empty(N)
    cdef double[::1] tot = np.empty(N)
    cdef double[::1] nk = np.empty(K)
    cdef double[::1] lc = np.empty(K)
    cdef signed char[::1] used = np.zeros(K, dtype=np.int8)
    cdef Py_ssize_t k, argmin = -1
    cdef int floor_hit = 0, it = 0, converged = 0, did_reseed, have_prev = 0
    cdef double ll, prev = 0.0, wsum, final_ll
    with nogil:
        while it < max_iters:
            ll = _estep(y, w, mu, var, resp, lse, tot, lc)
            floor_hit = _mstep(y, w, mu, var, floor_var, resp, nk)
            trace[it] = ll
            reseeded[it] = 0
            it += 1
            did_reseed = 0
            for k in range(K):
                if nk[k] < 1.0 and not used[k]:
                    if not did_reseed:
                        argmin = _argmin(lse)
                    used[k] = 1
                    did_reseed = 1
                    mu[k] = y[argmin]
                    var[k] = reseed_var
                    w[k] = 1.0 / K
            if did_reseed:
                wsum = 0.0
                for k in range(K):
                    wsum += w[k]
                for k in range(K):
                    w[k] = w[k] / wsum
                reseeded[it - 1] = 1
                have_prev = 0
                continue
            if have_prev and fabs(ll - prev) / N < tol:
                converged = 1
                break
            prev = ll
            have_prev = 1
        final_ll = _estep(y, w, mu, var, resp, lse, tot, lc)
    return it, bool(converged), bool(floor_hit), final_ll
