"""Pure-Python execution kernels for matrix-game runs.

This module defines the reference semantics of the hot loops.  The compiled
twin (``vibench._kernels``) implements the same operations in the same
floating-point order, so both backends produce bit-identical iterates:

* all elementwise vector arithmetic is written as unfused single operations
  (the extension is compiled with FP contraction disabled);
* full operator evaluations go through the one BLAS ``dgemv`` routine that
  scipy ships, called with identical buffers and flags from both sides;
* the simplex projection is the same sequential scan in both backends;
* random draws come from the SplitMix64 recurrence in :mod:`vibench.rng`.

State arrays are owned by the driver in :mod:`vibench.solvers` and updated
in place.  A kernel call advances the run by ``nsteps`` iterations (one
"chunk"), which the driver sizes to the trace cadence.

Counter layout (int64): ``counters = [k, component_evals, refreshes]``.
Status codes: 0 = chunk completed, 1 = non-finite update detected,
2 = operation budget reached (run stops normally).
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import blas as _blas

STATUS_OK = 0
STATUS_DIVERGED = 1
STATUS_BUDGET = 2

_MASK64 = (1 << 64) - 1
_WEYL = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_TWO53_INV = 2.0 ** -53


def project_simplex_into(v, out, buf_a, buf_b):
    """Project ``v`` onto the unit simplex, writing into ``out``.

    Single-pass scan with a waiting list (expected O(d)); ``buf_a`` and
    ``buf_b`` are caller-provided scratch arrays of length ``len(v)``.
    """
    d = v.shape[0]
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
        if not removed or nv == 0:
            break
    tau = rho
    for i in range(d):
        t = v[i] - tau
        out[i] = t if t > 0.0 else 0.0


def _full_op(A, z, out):
    """out = (A @ z_y, -(A^T @ z_x)) via BLAS dgemv on the row-major buffer.

    ``A.T`` is the free Fortran-contiguous view of the buffer; trans=1 then
    computes ``A @ x`` and trans=0 computes ``A^T @ x``.
    """
    d = A.shape[0]
    af = A.T
    out[:d] = _blas.dgemv(1.0, af, z[d:], trans=1)
    np.negative(_blas.dgemv(1.0, af, z[:d], trans=0), out=out[d:])


def ommb_chunk(A, AT, z, z_prev, zw, zw_prev, f_w_prev, f_w_curr, f_x_prev,
               avg_sum, delta, arg, xn, fxb, tmp, buf_a, buf_b,
               rng_state, counters, eta, gamma, p, b, nsteps, budget_ce):
    d = A.shape[0]
    s = int(rng_state[0])
    k = int(counters[0])
    ce = int(counters[1])
    refreshes = int(counters[2])
    scale = d / b
    deterministic = b == d
    status = STATUS_OK

    for _ in range(nsteps):
        if deterministic:
            # Full-batch estimator collapses to the two-point optimistic
            # operator value; no index draws are consumed.
            _full_op(A, z, fxb)
            np.multiply(fxb, 2.0, out=delta)
            delta -= f_x_prev
        else:
            np.copyto(delta, f_w_prev)
            dx = delta[:d]
            dy = delta[d:]
            for _t in range(b):
                s = (s + _WEYL) & _MASK64
                u = s
                u = ((u ^ (u >> 30)) * _MIX1) & _MASK64
                u = ((u ^ (u >> 27)) * _MIX2) & _MASK64
                u = (u ^ (u >> 31)) >> 11
                j = int(u * _TWO53_INV * d)
                if j >= d:
                    j = d - 1
                cx = scale * ((2.0 * z[d + j] - zw_prev[d + j]) - z_prev[d + j])
                cy = scale * ((2.0 * z[j] - zw_prev[j]) - z_prev[j])
                dx += cx * AT[j]
                dy -= cy * A[j]

        np.subtract(zw, z, out=arg)
        arg *= gamma
        arg += z
        np.multiply(delta, eta, out=tmp)
        arg -= tmp
        if not np.isfinite(arg).all():
            status = STATUS_DIVERGED
            break

        project_simplex_into(arg[:d], xn[:d], buf_a, buf_b)
        project_simplex_into(arg[d:], xn[d:], buf_a, buf_b)

        s = (s + _WEYL) & _MASK64
        u = s
        u = ((u ^ (u >> 30)) * _MIX1) & _MASK64
        u = ((u ^ (u >> 27)) * _MIX2) & _MASK64
        u = (u ^ (u >> 31)) >> 11
        refreshed = (u * _TWO53_INV) < p

        np.copyto(z_prev, z)
        np.copyto(zw_prev, zw)
        np.copyto(f_w_prev, f_w_curr)
        if deterministic:
            np.copyto(f_x_prev, fxb)
        np.copyto(z, xn)
        ce += 3 * b
        if refreshed:
            np.copyto(zw, z)
            _full_op(A, z, f_w_curr)
            ce += d
            refreshes += 1
        avg_sum += z
        k += 1
        if ce >= budget_ce:
            status = STATUS_BUDGET
            break

    rng_state[0] = s
    counters[0] = k
    counters[1] = ce
    counters[2] = refreshes
    return status


def popov_chunk(A, AT, z, z_prev, f_x_prev, avg_sum, arg, xn, fxb, tmp,
                buf_a, buf_b, counters, eta, nsteps, budget_ce):
    d = A.shape[0]
    k = int(counters[0])
    ce = int(counters[1])
    status = STATUS_OK

    for _ in range(nsteps):
        _full_op(A, z, fxb)
        np.multiply(fxb, 2.0, out=arg)
        arg -= f_x_prev
        np.multiply(arg, eta, out=tmp)
        np.subtract(z, tmp, out=arg)
        if not np.isfinite(arg).all():
            status = STATUS_DIVERGED
            break
        project_simplex_into(arg[:d], xn[:d], buf_a, buf_b)
        project_simplex_into(arg[d:], xn[d:], buf_a, buf_b)
        np.copyto(z_prev, z)
        np.copyto(f_x_prev, fxb)
        np.copyto(z, xn)
        avg_sum += z
        k += 1
        ce += d
        if ce >= budget_ce:
            status = STATUS_BUDGET
            break

    counters[0] = k
    counters[1] = ce
    return status


def eg_chunk(A, AT, z, yh, avg_sum, arg, fxb, tmp, buf_a, buf_b,
             counters, eta, nsteps, budget_ce):
    d = A.shape[0]
    k = int(counters[0])
    ce = int(counters[1])
    status = STATUS_OK

    for _ in range(nsteps):
        _full_op(A, z, fxb)
        np.multiply(fxb, eta, out=tmp)
        np.subtract(z, tmp, out=arg)
        if not np.isfinite(arg).all():
            status = STATUS_DIVERGED
            break
        project_simplex_into(arg[:d], yh[:d], buf_a, buf_b)
        project_simplex_into(arg[d:], yh[d:], buf_a, buf_b)
        _full_op(A, yh, fxb)
        np.multiply(fxb, eta, out=tmp)
        np.subtract(z, tmp, out=arg)
        if not np.isfinite(arg).all():
            status = STATUS_DIVERGED
            break
        project_simplex_into(arg[:d], z[:d], buf_a, buf_b)
        project_simplex_into(arg[d:], z[d:], buf_a, buf_b)
        avg_sum += yh
        k += 1
        ce += 2 * d
        if ce >= budget_ce:
            status = STATUS_BUDGET
            break

    counters[0] = k
    counters[1] = ce
    return status
