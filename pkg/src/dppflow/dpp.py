"""Determinantal diversity objective over a set of points.

The kernel is a Gaussian similarity whose squared distances are divided by
their median (the bandwidth).  The bandwidth is a normalization statistic and
is held constant when differentiating.
"""
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import linalg
from ._backend import kernels
from .errors import DegenerateInputError, InvalidInputError, SingularKernelError

OBJECTIVES = {"exact": 0, "soft": 1}

STATUS_OK = 0
STATUS_SINGULAR = 1
STATUS_ZERO_BANDWIDTH = 2


@dataclass(frozen=True)
class FeatureMap:
    """Maps (n, d) points to (n, f) features; ``vjp(x, u)`` pulls (n, f) cotangents back."""

    name: str
    fn: Callable
    vjp: Callable

    @property
    def is_identity(self):
        return self.name == "identity"


def _identity(x):
    return x


def _identity_vjp(x, u):
    return u


# module-level functions keep configs picklable for worker processes
IDENTITY = FeatureMap("identity", _identity, _identity_vjp)


@dataclass(frozen=True)
class QualityParams:
    rho: float
    epsilon: float = 0.01

    def __post_init__(self):
        if not self.rho > 0:
            raise InvalidInputError("rho must be positive")
        if not 0 < self.epsilon < 1:
            raise InvalidInputError("epsilon must lie in (0, 1)")


@dataclass(frozen=True)
class DppKernel:
    L: linalg.SymMatrix
    bandwidth: float
    h: float
    quality: Optional[np.ndarray] = None

    @property
    def k(self):
        return self.L.order


@dataclass(frozen=True)
class LikelihoodReport:
    det_ratio: float
    loglik: float
    eigenvalues: np.ndarray
    soft_cardinality: float


def build_kernel(points, h=1.0, feature=IDENTITY):
    """``L_ij = exp(-h * |F(x_i) - F(x_j)|^2 / median(upper(D)))``."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] < 2:
        raise InvalidInputError("need at least two points to build a kernel")
    if not h > 0:
        raise InvalidInputError("h must be positive")
    D = linalg.pairwise_sq_dists(feature.fn(pts))
    bw = linalg.median_upper(D)
    if not bw > 0:
        raise DegenerateInputError("zero bandwidth: the median pairwise distance is zero")
    L = np.exp(-h * D.entries / bw)
    return DppKernel(linalg.SymMatrix(L), bw, float(h))


def quality_vector(x0_estimates, params):
    """1 inside radius rho of the origin, exp(-(|x|^2 - rho^2)) floored at epsilon outside."""
    x = np.asarray(x0_estimates, dtype=np.float64)
    sq = np.sum(x * x, axis=-1)
    r2 = params.rho ** 2
    with np.errstate(over="ignore"):
        outside = np.maximum(params.epsilon, np.exp(-(sq - r2)))
    return np.where(sq <= r2, 1.0, outside)


def apply_quality(kernel, q):
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (kernel.k,):
        raise InvalidInputError(f"quality must have length {kernel.k}")
    if np.any(q <= 0) or np.any(q > 1):
        raise InvalidInputError("quality entries must lie in (0, 1]")
    Lq = kernel.L.entries * np.outer(q, q)
    return DppKernel(linalg.SymMatrix(Lq), kernel.bandwidth, kernel.h, q)


def likelihood_report(kernel):
    """det(L)/det(L+I), its log, the spectrum and the expected cardinality.

    A kernel whose strict Cholesky factorization fails is reported as
    singular: ``det_ratio = 0`` and ``loglik = -inf``.
    """
    L = kernel.L.entries
    lam = linalg.sym_eigenvalues(kernel.L)
    lam_pos = np.maximum(lam, 0.0)
    soft = float(np.sum(lam_pos / (1.0 + lam_pos)))
    try:
        loglik = linalg.cholesky_logdet(L, jitter=False) - linalg.cholesky_logdet(
            L + np.eye(kernel.k), jitter=False
        )
    except SingularKernelError:
        return LikelihoodReport(0.0, -np.inf, lam, soft)
    det_ratio = float(np.prod(lam_pos / (1.0 + lam_pos)))
    return LikelihoodReport(det_ratio, float(loglik), lam, soft)


def batch_gradients(points, h=1.0, quality=None, objective="exact", n_live=None, soft_fallback=True):
    """Objective gradients for a (T, n, d) stack of independent point sets.

    Only the first ``n_live`` rows of each set receive gradients; the rest
    act as fixed repulsors.  Returns ``(grad, value, status)``.  With
    ``soft_fallback`` sets whose kernel is singular under the exact objective
    are redone with the soft objective and flagged ``STATUS_SINGULAR``.
    Zero-bandwidth sets get a zero gradient and ``STATUS_ZERO_BANDWIDTH``.
    """
    pts = np.ascontiguousarray(points, dtype=np.float64)
    T, n, _ = pts.shape
    n_live = n if n_live is None else n_live
    q = None if quality is None else np.ascontiguousarray(quality, dtype=np.float64)
    grad, val, status = kernels.dpp_grad_batch(pts, float(h), q, OBJECTIVES[objective], n_live)
    if soft_fallback and objective == "exact":
        bad = np.flatnonzero(status == STATUS_SINGULAR)
        if bad.size:
            g2, v2, _ = kernels.dpp_grad_batch(
                np.ascontiguousarray(pts[bad]), float(h), None if q is None else q[bad], 1, n_live
            )
            grad[bad] = g2
            val[bad] = v2
    return grad, val, np.asarray(status)


def grad_loglik(points, h=1.0, feature=IDENTITY, quality=None, objective="exact"):
    """Gradient of the DPP objective with respect to each point (shape (k, d)).

    ``objective='exact'`` differentiates log det(L) - log det(L + I);
    ``'soft'`` differentiates tr(I - (L + I)^-1).  Quality weights, when
    given, are treated as constants.
    """
    if objective not in OBJECTIVES:
        raise InvalidInputError(f"unknown objective {objective!r}")
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] < 2:
        raise InvalidInputError("need at least two points")
    feats = np.ascontiguousarray(feature.fn(pts), dtype=np.float64)
    q = None if quality is None else np.asarray(quality, dtype=np.float64)[None, :]
    grad, _, status = batch_gradients(feats[None], h, q, objective, soft_fallback=False)
    if status[0] == STATUS_SINGULAR:
        raise SingularKernelError(
            "kernel is singular under the exact objective (duplicate points?)",
            suggestion="use objective='soft', which stays finite for singular kernels",
        )
    if status[0] == STATUS_ZERO_BANDWIDTH:
        raise DegenerateInputError("zero bandwidth: the median pairwise distance is zero")
    return feature.vjp(pts, grad[0])


def loglik(points, h=1.0, feature=IDENTITY, quality=None, objective="exact"):
    """Objective value matching ``grad_loglik``."""
    feats = np.ascontiguousarray(feature.fn(np.asarray(points, dtype=np.float64)))
    q = None if quality is None else np.asarray(quality, dtype=np.float64)[None, :]
    _, val, status = batch_gradients(feats[None], h, q, objective, soft_fallback=False)
    if status[0] == STATUS_SINGULAR:
        return -np.inf
    return float(val[0])
