# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops for the all-pairs Granger sweep and ApEn pattern counts.

Both entry points release the GIL so callers can fan targets out over threads.
Results for one target never depend on how other targets are scheduled.
"""
import numpy as np

from libc.math cimport fabs, sqrt
from libc.stdlib cimport free, malloc
from libc.string cimport memcpy
from scipy.linalg.cython_blas cimport dgemm, dgemv, dnrm2

# Keep in sync with infoflow._pykernels.RANK_TOL.
cdef double RANK_TOL = 1e-10
cdef double REORTH = 0.7071067811865476
cdef Py_ssize_t CHUNK_DOUBLES = 1 << 20

STATUS_OK = 0
STATUS_TARGET_DEFICIENT = 1
STATUS_SOURCE_DEFICIENT = 2
STATUS_SELF = 3


cdef double _orth(double* v, double* Q, int n, int k, double* work) noexcept nogil:
    # Classical Gram-Schmidt against k orthonormal columns of Q with one
    # DGKS-triggered reorthogonalisation. Returns the final norm of v.
    cdef int one = 1
    cdef double d_one = 1.0, d_zero = 0.0, d_mone = -1.0
    cdef double nrm0 = dnrm2(&n, v, &one)
    cdef double nrm = nrm0
    cdef int it
    if k == 0:
        return nrm0
    for it in range(2):
        dgemv(b"T", &n, &k, &d_one, Q, &n, v, &one, &d_zero, work, &one)
        dgemv(b"N", &n, &k, &d_mone, Q, &n, work, &one, &d_one, v, &one)
        nrm = dnrm2(&n, v, &one)
        if nrm > REORTH * nrm0:
            break
        nrm0 = nrm
    return nrm


cdef inline void _scale(double* v, int n, double s) noexcept nogil:
    cdef int t
    for t in range(n):
        v[t] *= s


def lag_stack(const double[:, ::1] series, int lag):
    """Row ``i*lag + c - 1`` holds ``series[i, lag-c : T-c]`` for c = 1..lag."""
    cdef Py_ssize_t N = series.shape[0], T = series.shape[1]
    cdef Py_ssize_t n = T - lag
    out = np.empty((N * lag, n), dtype=np.float64)
    cdef double[:, ::1] L = out
    cdef Py_ssize_t i, c
    with nogil:
        for i in range(N):
            for c in range(1, lag + 1):
                memcpy(&L[i * lag + c - 1, 0], &series[i, lag - c], n * sizeof(double))
    return out


def granger_target(const double[:, ::1] series, const double[:, ::1] stack,
                   Py_ssize_t target, int lag):
    """Restricted and unrestricted residual sums for every source -> ``target``.

    Returns ``(rss_r, tss, rss_u, ess, status)`` where ``ess[i]`` is the sum of
    squares explained by the lags of source ``i`` beyond the restricted model.
    """
    cdef Py_ssize_t N = series.shape[0], T = series.shape[1]
    cdef int n = <int>(T - lag)
    cdef int p0 = lag + 1
    cdef int one = 1
    cdef double d_one = 1.0, d_zero = 0.0, d_mone = -1.0

    rss_u_arr = np.full(N, np.nan)
    ess_arr = np.full(N, np.nan)
    status_arr = np.zeros(N, dtype=np.int8)
    cdef double[::1] rss_u = rss_u_arr
    cdef double[::1] ess = ess_arr
    cdef signed char[::1] status = status_arr

    cdef Py_ssize_t chunk = CHUNK_DOUBLES // (<Py_ssize_t>n * lag)
    if chunk < 1:
        chunk = 1
    if chunk > N:
        chunk = N

    cdef double* Qr = <double*>malloc(n * p0 * sizeof(double))
    cdef double* e = <double*>malloc(n * sizeof(double))
    cdef double* eu = <double*>malloc(n * sizeof(double))
    cdef double* work = <double*>malloc((p0 + lag + 1) * sizeof(double))
    cdef double* Z = <double*>malloc(n * lag * chunk * sizeof(double))
    cdef double* P = <double*>malloc(p0 * lag * chunk * sizeof(double))
    cdef double* norm0 = <double*>malloc(lag * chunk * sizeof(double))
    if (Qr == NULL or e == NULL or eu == NULL or work == NULL or Z == NULL
            or P == NULL or norm0 == NULL):
        free(Qr); free(e); free(eu); free(work); free(Z); free(P); free(norm0)
        raise MemoryError()

    cdef double rss_r = 0.0, tss = 0.0, mean = 0.0, nrm, nrm_start, s
    cdef int c, b, ncol, t
    cdef bint target_ok = True, source_ok
    cdef Py_ssize_t s0, s1, src
    cdef double* z
    cdef double* zb

    with nogil:
        # restricted basis: intercept then own lags
        s = 1.0 / sqrt(<double>n)
        for t in range(n):
            Qr[t] = s
        for c in range(1, lag + 1):
            z = Qr + c * n
            memcpy(z, &stack[target * lag + c - 1, 0], n * sizeof(double))
            nrm_start = dnrm2(&n, z, &one)
            nrm = _orth(z, Qr, n, c, work)
            if not (nrm > RANK_TOL * nrm_start):
                target_ok = False
                break
            _scale(z, n, 1.0 / nrm)

        for t in range(n):
            mean += series[target, lag + t]
        mean /= n
        for t in range(n):
            s = series[target, lag + t] - mean
            tss += s * s

        if target_ok:
            memcpy(e, &series[target, lag], n * sizeof(double))
            _orth(e, Qr, n, p0, work)
            for t in range(n):
                rss_r += e[t] * e[t]

            s0 = 0
            while s0 < N:
                s1 = s0 + chunk
                if s1 > N:
                    s1 = N
                ncol = <int>((s1 - s0) * lag)
                memcpy(Z, &stack[s0 * lag, 0], <Py_ssize_t>ncol * n * sizeof(double))
                for c in range(ncol):
                    norm0[c] = dnrm2(&n, Z + <Py_ssize_t>c * n, &one)
                dgemm(b"T", b"N", &p0, &ncol, &n, &d_one, Qr, &n, Z, &n, &d_zero, P, &p0)
                dgemm(b"N", b"N", &n, &ncol, &p0, &d_mone, Qr, &n, P, &p0, &d_one, Z, &n)

                for src in range(s0, s1):
                    if src == target:
                        status[src] = 3
                        continue
                    zb = Z + (src - s0) * lag * n
                    source_ok = True
                    for c in range(lag):
                        z = zb + c * n
                        nrm = dnrm2(&n, z, &one)
                        if nrm < REORTH * norm0[(src - s0) * lag + c]:
                            nrm = _orth(z, Qr, n, p0, work)
                        nrm = _orth(z, zb, n, c, work)
                        if not (nrm > RANK_TOL * norm0[(src - s0) * lag + c]):
                            source_ok = False
                            break
                        _scale(z, n, 1.0 / nrm)
                    if not source_ok:
                        status[src] = 2
                        continue
                    dgemv(b"T", &n, &lag, &d_one, zb, &n, e, &one, &d_zero, work, &one)
                    s = 0.0
                    for c in range(lag):
                        s += work[c] * work[c]
                    ess[src] = s
                    memcpy(eu, e, n * sizeof(double))
                    dgemv(b"N", &n, &lag, &d_mone, zb, &n, work, &one, &d_one, eu, &one)
                    s = 0.0
                    for t in range(n):
                        s += eu[t] * eu[t]
                    rss_u[src] = s
                s0 = s1

    free(Qr); free(e); free(eu); free(work); free(Z); free(P); free(norm0)
    if not target_ok:
        status_arr[:] = 1
        status_arr[target] = 3
        return np.nan, tss, rss_u_arr, ess_arr, status_arr
    return rss_r, tss, rss_u_arr, ess_arr, status_arr


def match_counts(const double[::1] x, int m, double r):
    """For each length-``m`` window, the number of windows (itself included)
    within Chebyshev distance ``r``."""
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t nw = n - m + 1
    out = np.ones(nw, dtype=np.int64)
    cdef long long[::1] cnt = out
    cdef Py_ssize_t i, j, k
    cdef bint hit
    with nogil:
        for i in range(nw):
            for j in range(i + 1, nw):
                hit = True
                for k in range(m):
                    if fabs(x[i + k] - x[j + k]) > r:
                        hit = False
                        break
                if hit:
                    cnt[i] += 1
                    cnt[j] += 1
    return out
