"""Small dense linear algebra for DPP kernels and minibatch couplings.

Everything here works on matrices of order at most a few hundred.  The heavy
lifting is delegated to the kernels picked by ``_backend``.
"""
from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .errors import (
    ConvergenceError,
    DegenerateInputError,
    InvalidInputError,
    SingularKernelError,
    TransportError,
)

SMALL_MATRIX_CAP = 64
JITTER_START = 1e-12
JITTER_STOP = 1e-6


@dataclass(frozen=True)
class SymMatrix:
    """A symmetric matrix; symmetry is checked exactly on construction."""

    entries: np.ndarray

    def __post_init__(self):
        a = np.array(self.entries, dtype=np.float64, order="C", copy=True)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise InvalidInputError(f"expected a non-empty square matrix, got shape {a.shape}")
        if not np.array_equal(a, a.T):
            raise InvalidInputError("matrix is not exactly symmetric")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def order(self):
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)


@dataclass(frozen=True)
class Assignment:
    size: int
    perm: np.ndarray
    cost: float


@dataclass(frozen=True)
class TransportPlan:
    rows: int
    cols: int
    plan: np.ndarray
    marginal_tol: float = 1e-6

    def marginal_error(self):
        r = np.abs(self.plan.sum(axis=1) - 1.0 / self.rows).max()
        c = np.abs(self.plan.sum(axis=0) - 1.0 / self.cols).max()
        return float(max(r, c))


def _as_matrix(m):
    if isinstance(m, SymMatrix):
        return m.entries
    return SymMatrix(m).entries


def pairwise_sq_dists(points):
    """Squared Euclidean distance matrix of a (K, d) point array."""
    pts = np.ascontiguousarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
        raise InvalidInputError(f"expected a (K, d) array with K, d >= 1, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise InvalidInputError("points contain non-finite coordinates")
    return SymMatrix(kernels.pairwise_sq_dists(pts))


def median_upper(D):
    """Median of the strictly upper triangle; mean of the middle two for even counts."""
    a = _as_matrix(D)
    n = a.shape[0]
    if n < 2:
        raise DegenerateInputError("median of an order-1 matrix: no off-diagonal entries")
    vals = np.sort(a[np.triu_indices(n, 1)])
    c = vals.size
    if c % 2:
        return float(vals[c // 2])
    return float(0.5 * (vals[c // 2 - 1] + vals[c // 2]))


def cholesky(M, jitter=True):
    """Lower Cholesky factor, escalating diagonal jitter on failure.

    Returns ``(factor, shift)`` where ``shift`` is the jitter that was added.
    With ``jitter=False`` any failure raises immediately.
    """
    a = _as_matrix(M)
    n = a.shape[0]
    factor, status = kernels.cholesky(a, 0.0)
    if status == 0:
        return factor, 0.0
    base = float(np.trace(a)) / n
    if jitter and base > 0:
        rel = JITTER_START
        while rel <= JITTER_STOP * (1 + 1e-9):
            shift = rel * base
            factor, status = kernels.cholesky(a, shift)
            if status == 0:
                return factor, shift
            rel *= 10.0
    raise SingularKernelError(
        f"matrix of order {n} is not positive definite (pivot {status - 1})"
        + (" after maximum jitter" if jitter else "")
    )


def cholesky_logdet(M, jitter=True):
    """log det(M) as twice the sum of log Cholesky diagonal entries."""
    factor, _ = cholesky(M, jitter=jitter)
    return float(2.0 * np.sum(np.log(np.diag(factor))))


def sym_eigenvalues(M, max_order=SMALL_MATRIX_CAP, max_sweeps=100):
    """All eigenvalues of a small symmetric matrix, ascending (cyclic Jacobi)."""
    a = _as_matrix(M)
    if a.shape[0] > max_order:
        raise InvalidInputError(f"order {a.shape[0]} exceeds small-matrix cap {max_order}")
    vals, sweeps, converged = kernels.jacobi_eigenvalues(a, max_sweeps)
    if not converged:
        raise ConvergenceError("Jacobi eigensolver did not converge", sweeps)
    return np.sort(vals)


def hungarian(cost):
    """Minimum-cost perfect assignment for a square cost matrix."""
    c = np.ascontiguousarray(cost, dtype=np.float64)
    if c.ndim != 2 or c.shape[0] != c.shape[1] or c.shape[0] < 1:
        raise InvalidInputError(f"expected a non-empty square cost matrix, got shape {c.shape}")
    if not np.all(np.isfinite(c)):
        raise InvalidInputError("cost matrix contains non-finite entries")
    perm = kernels.hungarian(c)
    return Assignment(size=c.shape[0], perm=perm, cost=float(c[np.arange(c.shape[0]), perm].sum()))


def _round_to_marginals(plan, a, b):
    # Altschuler, Weed & Rigollet rounding: exact marginals, entries stay >= 0
    r = plan.sum(axis=1)
    x = np.minimum(a / np.where(r > 0, r, 1.0), 1.0)
    plan = plan * x[:, None]
    c = plan.sum(axis=0)
    y = np.minimum(b / np.where(c > 0, c, 1.0), 1.0)
    plan = plan * y[None, :]
    err_r = np.maximum(a - plan.sum(axis=1), 0.0)
    err_c = np.maximum(b - plan.sum(axis=0), 0.0)
    mass = err_r.sum()
    if mass > 0:
        plan = plan + np.outer(err_r, err_c) / mass
    return plan


def sinkhorn(cost, reg, iters=200):
    """Entropic transport plan with uniform marginals (log-domain updates)."""
    c = np.ascontiguousarray(cost, dtype=np.float64)
    if c.ndim != 2 or min(c.shape) < 1:
        raise InvalidInputError(f"expected a non-empty cost matrix, got shape {c.shape}")
    if not reg > 0:
        raise InvalidInputError("reg must be positive")
    if iters < 1:
        raise InvalidInputError("iters must be >= 1")
    if not np.all(np.isfinite(c)):
        raise InvalidInputError("cost matrix contains non-finite entries")
    n, m = c.shape
    f, g = kernels.sinkhorn_log(c, float(reg), int(iters))
    with np.errstate(over="ignore", invalid="ignore"):
        plan = np.exp(f[:, None] + g[None, :] - c / reg)
    if not np.all(np.isfinite(plan)):
        raise TransportError(f"Sinkhorn overflowed at reg={reg}; use a larger reg")
    plan = _round_to_marginals(plan, np.full(n, 1.0 / n), np.full(m, 1.0 / m))
    return TransportPlan(rows=n, cols=m, plan=plan)
