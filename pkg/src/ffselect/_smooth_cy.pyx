# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled local-linear weight builder.

Same contract as ffselect._smooth_np.build_weights; selected at import time
by ffselect._backend when available.
"""

import numpy as np

from libc.math cimport exp

cdef double _INV_SQRT_2PI = 0.3989422804014327

EPANECHNIKOV = 0
GAUSSIAN = 1


def build_weights(const double[::1] u_obs, const double[::1] u_eval, double h, int family):
    """Normalized local-linear smoother weights at each evaluation point.

    Returns ``(nw, s0, s1, s2, denom, pos_count)``; rows of ``nw`` where
    ``denom <= 0`` are zeros. See the numpy twin for the full description.
    """
    cdef Py_ssize_t n = u_obs.shape[0]
    cdef Py_ssize_t q = u_eval.shape[0]
    if family != 0 and family != 1:
        raise ValueError(f"unknown kernel family code {family}")

    nw_arr = np.zeros((q, n), dtype=np.float64)
    s0_arr = np.empty(q, dtype=np.float64)
    s1_arr = np.empty(q, dtype=np.float64)
    s2_arr = np.empty(q, dtype=np.float64)
    den_arr = np.empty(q, dtype=np.float64)
    cnt_arr = np.empty(q, dtype=np.int64)
    kbuf = np.empty(n, dtype=np.float64)
    dbuf = np.empty(n, dtype=np.float64)

    cdef double[:, ::1] nw = nw_arr
    cdef double[::1] s0v = s0_arr
    cdef double[::1] s1v = s1_arr
    cdef double[::1] s2v = s2_arr
    cdef double[::1] denv = den_arr
    cdef long long[::1] cntv = cnt_arr
    cdef double[::1] kd = kbuf
    cdef double[::1] dd = dbuf

    cdef Py_ssize_t i, j
    cdef double d, z, k, t, s0, s1, s2, den, inv
    cdef long long cnt

    with nogil:
        for j in range(q):
            s0 = 0.0
            s1 = 0.0
            s2 = 0.0
            cnt = 0
            for i in range(n):
                d = u_obs[i] - u_eval[j]
                z = d / h
                if family == 0:
                    t = 1.0 - z * z
                    k = 0.75 * t / h if t > 0.0 else 0.0
                else:
                    k = exp(-0.5 * z * z) * (_INV_SQRT_2PI / h)
                kd[i] = k
                dd[i] = d
                if k > 0.0:
                    cnt += 1
                s0 += k
                s1 += k * d
                s2 += k * d * d
            den = s2 * s0 - s1 * s1
            s0v[j] = s0
            s1v[j] = s1
            s2v[j] = s2
            denv[j] = den
            cntv[j] = cnt
            if den > 0.0:
                inv = 1.0 / den
                for i in range(n):
                    nw[j, i] = (s2 * kd[i] - s1 * kd[i] * dd[i]) * inv

    return nw_arr, s0_arr, s1_arr, s2_arr, den_arr, cnt_arr
