# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for the sampling and coupling hot loops.

Every routine here has a numpy twin in ``_fallback`` with the same signature.
Accumulations use explicit ``fma`` in a fixed index order so results do not
depend on how many rows are processed per call.
"""
import numpy as np

from libc.math cimport exp, log, sqrt, fma, INFINITY
from libc.stdlib cimport malloc, free

DEF EPS = 2.220446049250313e-16


cdef void _dense_rows(const double* x, const double* w, const double* b, double* o,
                      Py_ssize_t n, Py_ssize_t m, Py_ssize_t p) noexcept nogil:
    """``o = x @ w + b`` row-major; each entry is fma-accumulated over k in order."""
    cdef Py_ssize_t i, k, j, jb, c
    cdef double a0, a1, a2, a3, s
    cdef double acc0[8]
    cdef double acc1[8]
    cdef double acc2[8]
    cdef double acc3[8]
    cdef const double* wk
    i = 0
    while i + 4 <= n:
        jb = 0
        while jb + 8 <= p:
            for c in range(8):
                acc0[c] = 0.0
                acc1[c] = 0.0
                acc2[c] = 0.0
                acc3[c] = 0.0
            for k in range(m):
                a0 = x[i * m + k]
                a1 = x[(i + 1) * m + k]
                a2 = x[(i + 2) * m + k]
                a3 = x[(i + 3) * m + k]
                wk = w + k * p + jb
                for c in range(8):
                    acc0[c] = fma(a0, wk[c], acc0[c])
                    acc1[c] = fma(a1, wk[c], acc1[c])
                    acc2[c] = fma(a2, wk[c], acc2[c])
                    acc3[c] = fma(a3, wk[c], acc3[c])
            for c in range(8):
                o[i * p + jb + c] = acc0[c] + b[jb + c]
                o[(i + 1) * p + jb + c] = acc1[c] + b[jb + c]
                o[(i + 2) * p + jb + c] = acc2[c] + b[jb + c]
                o[(i + 3) * p + jb + c] = acc3[c] + b[jb + c]
            jb += 8
        for j in range(jb, p):
            a0 = 0.0
            a1 = 0.0
            a2 = 0.0
            a3 = 0.0
            for k in range(m):
                a0 = fma(x[i * m + k], w[k * p + j], a0)
                a1 = fma(x[(i + 1) * m + k], w[k * p + j], a1)
                a2 = fma(x[(i + 2) * m + k], w[k * p + j], a2)
                a3 = fma(x[(i + 3) * m + k], w[k * p + j], a3)
            o[i * p + j] = a0 + b[j]
            o[(i + 1) * p + j] = a1 + b[j]
            o[(i + 2) * p + j] = a2 + b[j]
            o[(i + 3) * p + j] = a3 + b[j]
        i += 4
    while i < n:
        for j in range(p):
            s = 0.0
            for k in range(m):
                s = fma(x[i * m + k], w[k * p + j], s)
            o[i * p + j] = s + b[j]
        i += 1


def dense(const double[:, ::1] x, const double[:, ::1] w, const double[::1] b):
    """Return ``x @ w + b`` with a batch-invariant accumulation order."""
    cdef Py_ssize_t n = x.shape[0], m = x.shape[1], p = w.shape[1]
    if w.shape[0] != m or b.shape[0] != p:
        raise ValueError("shape mismatch in dense layer")
    out = np.empty((n, p))
    cdef double[:, ::1] o = out
    if n == 0 or p == 0:
        return out
    if m == 0:
        out[:] = np.asarray(b)
        return out
    with nogil:
        _dense_rows(&x[0, 0], &w[0, 0], &b[0], &o[0, 0], n, m, p)
    return out


def pairwise_sq_dists(const double[:, ::1] pts):
    cdef Py_ssize_t n = pts.shape[0], d = pts.shape[1], i, j, c
    cdef double s, diff
    out = np.zeros((n, n))
    cdef double[:, ::1] o = out
    with nogil:
        for i in range(n):
            for j in range(i + 1, n):
                s = 0.0
                for c in range(d):
                    diff = pts[i, c] - pts[j, c]
                    s = fma(diff, diff, s)
                o[i, j] = s
                o[j, i] = s
    return out


cdef int _chol(double* a, double* l, Py_ssize_t n, double shift) noexcept nogil:
    """Lower Cholesky factor of ``a + shift*I`` into ``l``.

    Returns 0 on success, otherwise 1 + index of the failing pivot.  A pivot
    counts as failed when it is not above ``64*n*eps*max_diag``.
    """
    cdef Py_ssize_t i, j, k
    cdef double s, tol, md = 0.0
    for i in range(n):
        if a[i * n + i] + shift > md:
            md = a[i * n + i] + shift
    tol = 64.0 * n * EPS * md
    for i in range(n * n):
        l[i] = 0.0
    for j in range(n):
        s = a[j * n + j] + shift
        for k in range(j):
            s = s - l[j * n + k] * l[j * n + k]
        if not (s > tol):
            return <int>(j + 1)
        l[j * n + j] = sqrt(s)
        for i in range(j + 1, n):
            s = a[i * n + j]
            for k in range(j):
                s = s - l[i * n + k] * l[j * n + k]
            l[i * n + j] = s / l[j * n + j]
    return 0


cdef void _chol_inverse(double* l, double* inv, double* work, Py_ssize_t n) noexcept nogil:
    """Inverse of ``l @ l.T`` by forward/back substitution on identity columns."""
    cdef Py_ssize_t c, i, k
    cdef double s
    for c in range(n):
        # forward: l y = e_c
        for i in range(n):
            s = 1.0 if i == c else 0.0
            for k in range(i):
                s = s - l[i * n + k] * work[k]
            work[i] = s / l[i * n + i]
        # backward: l.T z = y
        for i in range(n - 1, -1, -1):
            s = work[i]
            for k in range(i + 1, n):
                s = s - l[k * n + i] * inv[k * n + c]
            inv[i * n + c] = s / l[i * n + i]
    # symmetrize
    for i in range(n):
        for k in range(i + 1, n):
            s = 0.5 * (inv[i * n + k] + inv[k * n + i])
            inv[i * n + k] = s
            inv[k * n + i] = s


def cholesky(const double[:, ::1] a, double shift=0.0):
    """Return ``(factor, status)``; status 0 means success."""
    cdef Py_ssize_t n = a.shape[0]
    acopy = np.array(a, dtype=np.float64, copy=True)
    cdef double[:, ::1] av = acopy
    out = np.zeros((n, n))
    cdef double[:, ::1] o = out
    cdef int status
    with nogil:
        status = _chol(&av[0, 0], &o[0, 0], n, shift)
    return out, status


def jacobi_eigenvalues(const double[:, ::1] a, int max_sweeps=100, double tol=1e-15):
    """Cyclic Jacobi eigenvalues of a symmetric matrix.

    Returns ``(values, sweeps, converged)``; values are unsorted.
    """
    cdef Py_ssize_t n = a.shape[0], p, q, r
    work = np.array(a, dtype=np.float64, copy=True)
    cdef double[:, ::1] m = work
    cdef double off, scale, app, aqq, apq, theta, t, c, s, tau, mrp, mrq
    cdef int sweep = 0
    cdef bint converged = False
    with nogil:
        scale = 0.0
        for p in range(n):
            for q in range(n):
                scale += m[p, q] * m[p, q]
        while sweep < max_sweeps:
            off = 0.0
            for p in range(n):
                for q in range(p + 1, n):
                    off += m[p, q] * m[p, q]
            if off <= tol * tol * scale or off == 0.0:
                converged = True
                break
            for p in range(n - 1):
                for q in range(p + 1, n):
                    apq = m[p, q]
                    if apq == 0.0:
                        continue
                    app = m[p, p]
                    aqq = m[q, q]
                    theta = (aqq - app) / (2.0 * apq)
                    if theta >= 0:
                        t = 1.0 / (theta + sqrt(1.0 + theta * theta))
                    else:
                        t = -1.0 / (-theta + sqrt(1.0 + theta * theta))
                    c = 1.0 / sqrt(1.0 + t * t)
                    s = t * c
                    tau = s / (1.0 + c)
                    m[p, p] = app - t * apq
                    m[q, q] = aqq + t * apq
                    m[p, q] = 0.0
                    m[q, p] = 0.0
                    for r in range(n):
                        if r != p and r != q:
                            mrp = m[r, p]
                            mrq = m[r, q]
                            m[r, p] = mrp - s * (mrq + tau * mrp)
                            m[p, r] = m[r, p]
                            m[r, q] = mrq + s * (mrp - tau * mrq)
                            m[q, r] = m[r, q]
            sweep += 1
    return np.diagonal(work).copy(), sweep, converged


def hungarian(const double[:, ::1] cost):
    """Minimum-cost perfect assignment (shortest augmenting paths with potentials).

    Returns ``perm`` with ``perm[row] = col``.
    """
    cdef Py_ssize_t n = cost.shape[0]
    cdef Py_ssize_t i, j, i0, j0, j1
    cdef double delta, cur
    u_arr = np.zeros(n + 1)
    v_arr = np.zeros(n + 1)
    minv_arr = np.zeros(n + 1)
    p_arr = np.zeros(n + 1, dtype=np.intp)
    way_arr = np.zeros(n + 1, dtype=np.intp)
    used_arr = np.zeros(n + 1, dtype=np.uint8)
    cdef double[::1] u = u_arr, v = v_arr, minv = minv_arr
    cdef Py_ssize_t[::1] p = p_arr, way = way_arr
    cdef unsigned char[::1] used = used_arr
    with nogil:
        for i in range(1, n + 1):
            p[0] = i
            j0 = 0
            for j in range(n + 1):
                minv[j] = INFINITY
                used[j] = 0
            while True:
                used[j0] = 1
                i0 = p[j0]
                delta = INFINITY
                j1 = 0
                for j in range(1, n + 1):
                    if not used[j]:
                        cur = cost[i0 - 1, j - 1] - u[i0] - v[j]
                        if cur < minv[j]:
                            minv[j] = cur
                            way[j] = j0
                        if minv[j] < delta:
                            delta = minv[j]
                            j1 = j
                for j in range(n + 1):
                    if used[j]:
                        u[p[j]] += delta
                        v[j] -= delta
                    else:
                        minv[j] -= delta
                j0 = j1
                if p[j0] == 0:
                    break
            while True:
                j1 = way[j0]
                p[j0] = p[j1]
                j0 = j1
                if j0 == 0:
                    break
    perm = np.empty(n, dtype=np.intp)
    for j in range(1, n + 1):
        perm[p_arr[j] - 1] = j - 1
    return perm


cdef double _median_upper(double* d, Py_ssize_t n, double* buf) noexcept nogil:
    cdef Py_ssize_t i, j, c = 0, a
    cdef double key
    for i in range(n):
        for j in range(i + 1, n):
            key = d[i * n + j]
            a = c
            while a > 0 and buf[a - 1] > key:
                buf[a] = buf[a - 1]
                a -= 1
            buf[a] = key
            c += 1
    if c % 2 == 1:
        return buf[c // 2]
    return 0.5 * (buf[c // 2 - 1] + buf[c // 2])


def dpp_grad_batch(const double[:, :, ::1] pts, double h, quality, int objective, Py_ssize_t n_live):
    """Gradient of the DPP objective for a stack of independent point sets.

    ``pts`` has shape (T, n, d).  ``quality`` is None or a (T, n) array held
    constant.  ``objective`` 0 is log det(L) - log det(L+I), 1 is
    tr(I - (L+I)^-1).  Returns ``(grad[:, :n_live], value, status)`` with
    status 0 ok, 1 singular kernel (exact objective), 2 zero bandwidth.
    """
    cdef Py_ssize_t T = pts.shape[0], n = pts.shape[1], d = pts.shape[2]
    cdef Py_ssize_t tr, i, j, c, nn = n * n
    cdef bint use_q = quality is not None
    cdef double[:, ::1] qv
    if use_q:
        qarr = np.ascontiguousarray(quality, dtype=np.float64)
        if qarr.shape[0] != T or qarr.shape[1] != n:
            raise ValueError("quality must have shape (T, n)")
        qv = qarr
    else:
        qv = np.ones((1, 1))
    grad_arr = np.zeros((T, n_live, d))
    val_arr = np.zeros(T)
    status_arr = np.zeros(T, dtype=np.intc)
    cdef double[:, :, ::1] grad = grad_arr
    cdef double[::1] val = val_arr
    cdef int[::1] status = status_arr
    cdef double *D = <double*> malloc(nn * sizeof(double))
    cdef double *L = <double*> malloc(nn * sizeof(double))
    cdef double *LI = <double*> malloc(nn * sizeof(double))
    cdef double *C1 = <double*> malloc(nn * sizeof(double))
    cdef double *C2 = <double*> malloc(nn * sizeof(double))
    cdef double *A = <double*> malloc(nn * sizeof(double))
    cdef double *B = <double*> malloc(nn * sizeof(double))
    cdef double *work = <double*> malloc((nn + n) * sizeof(double))
    cdef double bw, s, diff, coef, ld1, ld2
    cdef int st
    if not (D and L and LI and C1 and C2 and A and B and work):
        raise MemoryError()
    try:
        with nogil:
            for tr in range(T):
                for i in range(n):
                    D[i * n + i] = 0.0
                    for j in range(i + 1, n):
                        s = 0.0
                        for c in range(d):
                            diff = pts[tr, i, c] - pts[tr, j, c]
                            s = fma(diff, diff, s)
                        D[i * n + j] = s
                        D[j * n + i] = s
                bw = _median_upper(D, n, work)
                if not (bw > 0.0):
                    status[tr] = 2
                    continue
                for i in range(n):
                    for j in range(n):
                        s = exp(-h * D[i * n + j] / bw)
                        if use_q:
                            s = s * qv[tr, i] * qv[tr, j]
                        L[i * n + j] = s
                        LI[i * n + j] = s + (1.0 if i == j else 0.0)
                if _chol(LI, C2, n, 0.0) != 0:
                    status[tr] = 1
                    continue
                _chol_inverse(C2, B, work, n)
                if objective == 0:
                    if _chol(L, C1, n, 0.0) != 0:
                        status[tr] = 1
                        continue
                    _chol_inverse(C1, A, work, n)
                    ld1 = 0.0
                    ld2 = 0.0
                    for i in range(n):
                        ld1 += log(C1[i * n + i])
                        ld2 += log(C2[i * n + i])
                    val[tr] = 2.0 * (ld1 - ld2)
                    for i in range(nn):
                        A[i] = A[i] - B[i]
                else:
                    s = 0.0
                    for i in range(n):
                        s += 1.0 - B[i * n + i]
                    val[tr] = s
                    for i in range(n):
                        for j in range(n):
                            s = 0.0
                            for c in range(n):
                                s += B[i * n + c] * B[c * n + j]
                            A[i * n + j] = s
                coef = -4.0 * h / bw
                for i in range(n_live):
                    for j in range(n):
                        if j == i:
                            continue
                        s = coef * A[i * n + j] * L[i * n + j]
                        for c in range(d):
                            grad[tr, i, c] += s * (pts[tr, i, c] - pts[tr, j, c])
    finally:
        free(D); free(L); free(LI); free(C1); free(C2); free(A); free(B); free(work)
    return grad_arr, val_arr, status_arr


def pg_grad_batch(const double[:, :, ::1] pts, double h):
    """Per-particle gradient of the row-sum similarity potential.

    Returns ``(grad, status)`` where ``grad[t, i]`` is the derivative of
    ``sum_j L_ij`` with respect to point i.
    """
    cdef Py_ssize_t T = pts.shape[0], n = pts.shape[1], d = pts.shape[2]
    cdef Py_ssize_t tr, i, j, c, nn = n * n
    grad_arr = np.zeros((T, n, d))
    status_arr = np.zeros(T, dtype=np.intc)
    cdef double[:, :, ::1] grad = grad_arr
    cdef int[::1] status = status_arr
    cdef double *D = <double*> malloc(nn * sizeof(double))
    cdef double *work = <double*> malloc((nn + n) * sizeof(double))
    cdef double bw, s, diff, coef
    if not (D and work):
        raise MemoryError()
    try:
        with nogil:
            for tr in range(T):
                for i in range(n):
                    D[i * n + i] = 0.0
                    for j in range(i + 1, n):
                        s = 0.0
                        for c in range(d):
                            diff = pts[tr, i, c] - pts[tr, j, c]
                            s = fma(diff, diff, s)
                        D[i * n + j] = s
                        D[j * n + i] = s
                bw = _median_upper(D, n, work)
                if not (bw > 0.0):
                    status[tr] = 2
                    continue
                coef = -2.0 * h / bw
                for i in range(n):
                    for j in range(n):
                        if j == i:
                            continue
                        s = coef * exp(-h * D[i * n + j] / bw)
                        for c in range(d):
                            grad[tr, i, c] += s * (pts[tr, i, c] - pts[tr, j, c])
    finally:
        free(D); free(work)
    return grad_arr, status_arr
