# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled execution kernels for matrix-game runs.

Mirror of ``vibench._pykernels``: identical operation order, identical
SplitMix64 recurrence, identical BLAS dgemv calls, so iterates match the
pure backend bit for bit.  Compiled with FP contraction disabled (see
setup.py); do not "simplify" arithmetic here without updating the pure twin.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport isfinite
from libc.string cimport memcpy
from scipy.linalg.cython_blas cimport dgemv

STATUS_OK = 0
STATUS_DIVERGED = 1
STATUS_BUDGET = 2

cdef int C_OK = 0
cdef int C_DIVERGED = 1
cdef int C_BUDGET = 2

cdef unsigned long long WEYL = 0x9E3779B97F4A7C15
cdef unsigned long long MIX1 = 0xBF58476D1CE4E5B9
cdef unsigned long long MIX2 = 0x94D049BB133111EB
cdef double TWO53_INV = 2.0 ** -53


cdef inline unsigned long long _next_u64(unsigned long long *state) noexcept nogil:
    cdef unsigned long long z
    state[0] = state[0] + WEYL
    z = state[0]
    z = (z ^ (z >> 30)) * MIX1
    z = (z ^ (z >> 27)) * MIX2
    return z ^ (z >> 31)


cdef void _proj(double *v, double *out, double *buf_a, double *buf_b, int d) noexcept nogil:
    cdef int nv, nt, n, i, m, cnt
    cdef double rho, y, t
    cdef bint removed

    buf_a[0] = v[0]
    nv = 1
    nt = 0
    rho = v[0] - 1.0
    for n in range(1, d):
        y = v[n]
        if y > rho:
            rho = rho + (y - rho) / (nv + 1)
            if rho > y - 1.0:
                buf_a[nv] = y
                nv += 1
            else:
                for i in range(nv):
                    buf_b[nt + i] = buf_a[i]
                nt += nv
                buf_a[0] = y
                nv = 1
                rho = y - 1.0
    for i in range(nt):
        y = buf_b[i]
        if y > rho:
            buf_a[nv] = y
            nv += 1
            rho = rho + (y - rho) / nv
    while True:
        removed = False
        cnt = nv
        m = 0
        for i in range(nv):
            y = buf_a[i]
            if y <= rho:
                cnt -= 1
                if cnt == 0:
                    break
                rho = rho + (rho - y) / cnt
                removed = True
            else:
                buf_a[m] = y
                m += 1
        nv = m
        if (not removed) or nv == 0:
            break
    for i in range(d):
        t = v[i] - rho
        out[i] = t if t > 0.0 else 0.0


cdef void _full(double *A, double *z, double *out, int dd) noexcept nogil:
    # Row-major buffer seen column-major by BLAS is A^T: trans='T' gives
    # A @ z_y, trans='N' gives A^T @ z_x (then negated).
    cdef int d = dd
    cdef int one = 1
    cdef double alpha = 1.0
    cdef double beta = 0.0
    cdef char tt = b'T'
    cdef char tn = b'N'
    cdef int i
    dgemv(&tt, &d, &d, &alpha, A, &d, z + d, &one, &beta, out, &one)
    dgemv(&tn, &d, &d, &alpha, A, &d, z, &one, &beta, out + d, &one)
    for i in range(d):
        out[d + i] = -out[d + i]


cdef inline bint _finite(double *v, int n) noexcept nogil:
    cdef int i
    for i in range(n):
        if not isfinite(v[i]):
            return False
    return True


def project_simplex_into(double[::1] v, double[::1] out,
                         double[::1] buf_a, double[::1] buf_b):
    _proj(&v[0], &out[0], &buf_a[0], &buf_b[0], <int>v.shape[0])


def ommb_chunk(const double[:, ::1] A, const double[:, ::1] AT,
               double[::1] z, double[::1] z_prev,
               double[::1] zw, double[::1] zw_prev,
               double[::1] f_w_prev, double[::1] f_w_curr, double[::1] f_x_prev,
               double[::1] avg_sum, double[::1] delta, double[::1] arg,
               double[::1] xn, double[::1] fxb, double[::1] tmp,
               double[::1] buf_a, double[::1] buf_b,
               unsigned long long[::1] rng_state, long long[::1] counters,
               double eta, double gamma, double p, int b,
               long long nsteps, double budget_ce):
    cdef int d = <int>A.shape[0]
    cdef unsigned long long s = rng_state[0]
    cdef long long k = counters[0]
    cdef long long ce = counters[1]
    cdef long long refreshes = counters[2]
    cdef double scale = (<double>d) / (<double>b)
    cdef bint deterministic = b == d
    cdef int status = C_OK
    cdef long long step
    cdef int t_i, i, j
    cdef unsigned long long u
    cdef double ud, cx, cy
    cdef bint refreshed
    cdef double *pA = <double *>&A[0, 0]
    cdef double *pAT = <double *>&AT[0, 0]

    with nogil:
        for step in range(nsteps):
            if deterministic:
                _full(pA, &z[0], &fxb[0], d)
                for i in range(2 * d):
                    delta[i] = 2.0 * fxb[i] - f_x_prev[i]
            else:
                memcpy(&delta[0], &f_w_prev[0], 2 * d * sizeof(double))
                for t_i in range(b):
                    u = _next_u64(&s) >> 11
                    ud = (<double>u) * TWO53_INV
                    j = <int>(ud * d)
                    if j >= d:
                        j = d - 1
                    cx = scale * ((2.0 * z[d + j] - zw_prev[d + j]) - z_prev[d + j])
                    cy = scale * ((2.0 * z[j] - zw_prev[j]) - z_prev[j])
                    for i in range(d):
                        delta[i] += cx * pAT[j * d + i]
                    for i in range(d):
                        delta[d + i] -= cy * pA[j * d + i]

            for i in range(2 * d):
                arg[i] = (z[i] + gamma * (zw[i] - z[i])) - eta * delta[i]
            if not _finite(&arg[0], 2 * d):
                status = C_DIVERGED
                break

            _proj(&arg[0], &xn[0], &buf_a[0], &buf_b[0], d)
            _proj(&arg[d], &xn[d], &buf_a[0], &buf_b[0], d)

            u = _next_u64(&s) >> 11
            refreshed = ((<double>u) * TWO53_INV) < p

            memcpy(&z_prev[0], &z[0], 2 * d * sizeof(double))
            memcpy(&zw_prev[0], &zw[0], 2 * d * sizeof(double))
            memcpy(&f_w_prev[0], &f_w_curr[0], 2 * d * sizeof(double))
            if deterministic:
                memcpy(&f_x_prev[0], &fxb[0], 2 * d * sizeof(double))
            memcpy(&z[0], &xn[0], 2 * d * sizeof(double))
            ce += 3 * b
            if refreshed:
                memcpy(&zw[0], &z[0], 2 * d * sizeof(double))
                _full(pA, &z[0], &f_w_curr[0], d)
                ce += d
                refreshes += 1
            for i in range(2 * d):
                avg_sum[i] += z[i]
            k += 1
            if ce >= budget_ce:
                status = C_BUDGET
                break

    rng_state[0] = s
    counters[0] = k
    counters[1] = ce
    counters[2] = refreshes
    return status


def popov_chunk(const double[:, ::1] A, const double[:, ::1] AT,
                double[::1] z, double[::1] z_prev, double[::1] f_x_prev,
                double[::1] avg_sum, double[::1] arg, double[::1] xn,
                double[::1] fxb, double[::1] tmp,
                double[::1] buf_a, double[::1] buf_b,
                long long[::1] counters, double eta,
                long long nsteps, double budget_ce):
    cdef int d = <int>A.shape[0]
    cdef long long k = counters[0]
    cdef long long ce = counters[1]
    cdef int status = C_OK
    cdef long long step
    cdef int i
    cdef double *pA = <double *>&A[0, 0]

    with nogil:
        for step in range(nsteps):
            _full(pA, &z[0], &fxb[0], d)
            for i in range(2 * d):
                arg[i] = z[i] - eta * (2.0 * fxb[i] - f_x_prev[i])
            if not _finite(&arg[0], 2 * d):
                status = C_DIVERGED
                break
            _proj(&arg[0], &xn[0], &buf_a[0], &buf_b[0], d)
            _proj(&arg[d], &xn[d], &buf_a[0], &buf_b[0], d)
            memcpy(&z_prev[0], &z[0], 2 * d * sizeof(double))
            memcpy(&f_x_prev[0], &fxb[0], 2 * d * sizeof(double))
            memcpy(&z[0], &xn[0], 2 * d * sizeof(double))
            for i in range(2 * d):
                avg_sum[i] += z[i]
            k += 1
            ce += d
            if ce >= budget_ce:
                status = C_BUDGET
                break

    counters[0] = k
    counters[1] = ce
    return status


def eg_chunk(const double[:, ::1] A, const double[:, ::1] AT,
             double[::1] z, double[::1] yh, double[::1] avg_sum,
             double[::1] arg, double[::1] fxb, double[::1] tmp,
             double[::1] buf_a, double[::1] buf_b,
             long long[::1] counters, double eta,
             long long nsteps, double budget_ce):
    cdef int d = <int>A.shape[0]
    cdef long long k = counters[0]
    cdef long long ce = counters[1]
    cdef int status = C_OK
    cdef long long step
    cdef int i
    cdef double *pA = <double *>&A[0, 0]

    with nogil:
        for step in range(nsteps):
            _full(pA, &z[0], &fxb[0], d)
            for i in range(2 * d):
                arg[i] = z[i] - eta * fxb[i]
            if not _finite(&arg[0], 2 * d):
                status = C_DIVERGED
                break
            _proj(&arg[0], &yh[0], &buf_a[0], &buf_b[0], d)
            _proj(&arg[d], &yh[d], &buf_a[0], &buf_b[0], d)
            _full(pA, &yh[0], &fxb[0], d)
            for i in range(2 * d):
                arg[i] = z[i] - eta * fxb[i]
            if not _finite(&arg[0], 2 * d):
                status = C_DIVERGED
                break
            _proj(&arg[0], &z[0], &buf_a[0], &buf_b[0], d)
            _proj(&arg[d], &z[d], &buf_a[0], &buf_b[0], d)
            for i in range(2 * d):
                avg_sum[i] += yh[i]
            k += 1
            ce += 2 * d
            if ce >= budget_ce:
                status = C_BUDGET
                break

    counters[0] = k
    counters[1] = ce
    return status
