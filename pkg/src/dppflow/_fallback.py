"""Pure numpy versions of the compiled kernels in ``_core``.

Signatures and return conventions match ``_core`` exactly.  Results agree to
rounding, not bitwise; each backend is deterministic on its own.
"""
import numpy as np

EPS = np.finfo(np.float64).eps


def dense(x, w, b):
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if w.shape[0] != x.shape[1] or b.shape[0] != w.shape[1]:
        raise ValueError("shape mismatch in dense layer")
    # einsum's own loops keep each row's reduction independent of batch size
    return np.einsum("ik,kj->ij", x, w) + b


def pairwise_sq_dists(pts):
    pts = np.asarray(pts, dtype=np.float64)
    diff = pts[:, None, :] - pts[None, :, :]
    out = np.einsum("ijc,ijc->ij", diff, diff)
    np.fill_diagonal(out, 0.0)
    return out


def _chol(a, shift):
    n = a.shape[0]
    l = np.zeros((n, n))
    tol = 64.0 * n * EPS * max(float(np.max(np.diag(a))) + shift, 0.0)
    for j in range(n):
        s = a[j, j] + shift - l[j, :j] @ l[j, :j]
        if not s > tol:
            return l, j + 1
        l[j, j] = np.sqrt(s)
        l[j + 1:, j] = (a[j + 1:, j] - l[j + 1:, :j] @ l[j, :j]) / l[j, j]
    return l, 0


def cholesky(a, shift=0.0):
    return _chol(np.asarray(a, dtype=np.float64), float(shift))


def _chol_inverse(l):
    n = l.shape[0]
    eye = np.eye(n)
    y = np.zeros((n, n))
    for i in range(n):
        y[i] = (eye[i] - l[i, :i] @ y[:i]) / l[i, i]
    inv = np.zeros((n, n))
    for i in range(n - 1, -1, -1):
        inv[i] = (y[i] - l[i + 1:, i] @ inv[i + 1:]) / l[i, i]
    return 0.5 * (inv + inv.T)


def jacobi_eigenvalues(a, max_sweeps=100, tol=1e-15):
    m = np.array(a, dtype=np.float64, copy=True)
    n = m.shape[0]
    scale = float(np.sum(m * m))
    sweep = 0
    converged = False
    while sweep < max_sweeps:
        off = float(np.sum(np.triu(m, 1) ** 2))
        if off <= tol * tol * scale or off == 0.0:
            converged = True
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = m[p, q]
                if apq == 0.0:
                    continue
                app, aqq = m[p, p], m[q, q]
                theta = (aqq - app) / (2.0 * apq)
                if theta >= 0:
                    t = 1.0 / (theta + np.sqrt(1.0 + theta * theta))
                else:
                    t = -1.0 / (-theta + np.sqrt(1.0 + theta * theta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                tau = s / (1.0 + c)
                m[p, p] = app - t * apq
                m[q, q] = aqq + t * apq
                m[p, q] = m[q, p] = 0.0
                mask = np.ones(n, dtype=bool)
                mask[[p, q]] = False
                mrp = m[mask, p].copy()
                mrq = m[mask, q].copy()
                m[mask, p] = m[p, mask] = mrp - s * (mrq + tau * mrp)
                m[mask, q] = m[q, mask] = mrq + s * (mrp - tau * mrq)
        sweep += 1
    return np.diagonal(m).copy(), sweep, converged


def hungarian(cost):
    cost = np.asarray(cost, dtype=np.float64)
    n = cost.shape[0]
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    p = np.zeros(n + 1, dtype=np.intp)
    way = np.zeros(n + 1, dtype=np.intp)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(n + 1, np.inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            free = ~used[1:]
            cur = cost[i0 - 1] - u[i0] - v[1:]
            better = free & (cur < minv[1:])
            minv[1:][better] = cur[better]
            way[1:][better] = j0
            cand = np.where(free, minv[1:], np.inf)
            j1 = int(np.argmin(cand)) + 1
            delta = cand[j1 - 1]
            u[p[used]] += delta
            v[used] -= delta
            minv[~used] -= delta
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
    perm[p[1:] - 1] = np.arange(n)
    return perm


def _lse(z, axis):
    mx = np.max(z, axis=axis, keepdims=True)
    return (mx + np.log(np.sum(np.exp(z - mx), axis=axis, keepdims=True))).squeeze(axis)


def sinkhorn_log(cost, reg, iters):
    cost = np.asarray(cost, dtype=np.float64)
    n, m = cost.shape
    cr = cost / reg
    f = np.zeros(n)
    g = np.zeros(m)
    loga, logb = -np.log(n), -np.log(m)
    for _ in range(iters):
        f = loga - _lse(g[None, :] - cr, axis=1)
        g = logb - _lse(f[:, None] - cr, axis=0)
    return f, g


def _sq_dists_batch(pts):
    diff = pts[:, :, None, :] - pts[:, None, :, :]
    return np.einsum("tijc,tijc->tij", diff, diff)


def _median_upper_batch(D):
    n = D.shape[1]
    iu = np.triu_indices(n, 1)
    return np.median(D[:, iu[0], iu[1]], axis=1)


def dpp_grad_batch(pts, h, quality, objective, n_live):
    pts = np.asarray(pts, dtype=np.float64)
    T, n, d = pts.shape
    grad = np.zeros((T, n_live, d))
    val = np.zeros(T)
    status = np.zeros(T, dtype=np.intc)
    D = _sq_dists_batch(pts)
    bw = _median_upper_batch(D)
    eye = np.eye(n)
    for tr in range(T):
        if not bw[tr] > 0.0:
            status[tr] = 2
            continue
        L = np.exp(-h * D[tr] / bw[tr])
        if quality is not None:
            q = np.asarray(quality[tr], dtype=np.float64)
            L = L * np.outer(q, q)
        c2, st = _chol(L + eye, 0.0)
        if st:
            status[tr] = 1
            continue
        B = _chol_inverse(c2)
        if objective == 0:
            c1, st = _chol(L, 0.0)
            if st:
                status[tr] = 1
                continue
            A = _chol_inverse(c1) - B
            val[tr] = 2.0 * (np.sum(np.log(np.diag(c1))) - np.sum(np.log(np.diag(c2))))
        else:
            A = B @ B
            val[tr] = float(np.sum(1.0 - np.diag(B)))
        W = (-4.0 * h / bw[tr]) * A * L
        np.fill_diagonal(W, 0.0)
        W = W[:n_live]
        grad[tr] = W.sum(axis=1)[:, None] * pts[tr, :n_live] - W @ pts[tr]
    return grad, val, status


def pg_grad_batch(pts, h):
    pts = np.asarray(pts, dtype=np.float64)
    T, n, d = pts.shape
    grad = np.zeros((T, n, d))
    status = np.zeros(T, dtype=np.intc)
    D = _sq_dists_batch(pts)
    bw = _median_upper_batch(D)
    for tr in range(T):
        if not bw[tr] > 0.0:
            status[tr] = 2
            continue
        W = (-2.0 * h / bw[tr]) * np.exp(-h * D[tr] / bw[tr])
        np.fill_diagonal(W, 0.0)
        grad[tr] = W.sum(axis=1)[:, None] * pts[tr] - W @ pts[tr]
    return grad, status
