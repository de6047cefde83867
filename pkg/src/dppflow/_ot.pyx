# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Log-domain Sinkhorn iterations.

Built separately with fast-math so the exp/log-sum loops vectorize; the
other compiled kernels keep strict IEEE semantics.
"""
import numpy as np

from libc.math cimport exp, log

DEF NEG_BIG = -1e300


def sinkhorn_log(const double[:, ::1] cost, double reg, int iters):
    """Log-domain Sinkhorn with uniform marginals.

    Returns the scaled duals ``(f/reg, g/reg)``; the plan is
    ``exp(f_i + g_j - cost_ij/reg)``.  Exponents are clamped at 60 nats below
    the running maximum, far under double resolution of the sum.
    """
    cdef Py_ssize_t n = cost.shape[0], m = cost.shape[1], i, j
    cdef int it
    cdef double loga = -log(<double>n), logb = -log(<double>m), mx, s, z
    cr_arr = np.empty((n, m))
    crt_arr = np.empty((m, n))
    f_arr = np.zeros(n)
    g_arr = np.zeros(m)
    cdef double[:, ::1] cr = cr_arr, crt = crt_arr
    cdef double[::1] f = f_arr, g = g_arr
    with nogil:
        for i in range(n):
            for j in range(m):
                cr[i, j] = cost[i, j] / reg
                crt[j, i] = cr[i, j]
        for it in range(iters):
            for i in range(n):
                mx = NEG_BIG
                for j in range(m):
                    z = g[j] - cr[i, j]
                    if z > mx:
                        mx = z
                s = 0.0
                for j in range(m):
                    z = g[j] - cr[i, j] - mx
                    s += exp(z if z > -60.0 else -60.0)
                f[i] = loga - (mx + log(s))
            for j in range(m):
                mx = NEG_BIG
                for i in range(n):
                    z = f[i] - crt[j, i]
                    if z > mx:
                        mx = z
                s = 0.0
                for i in range(n):
                    z = f[i] - crt[j, i] - mx
                    s += exp(z if z > -60.0 else -60.0)
                g[j] = logb - (mx + log(s))
    return f_arr, g_arr
