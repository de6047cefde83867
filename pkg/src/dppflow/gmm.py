"""Isotropic Gaussian mixtures: generators, sampling, noised scores, mode counting."""
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, InvalidInputError

RANDOM_BOX = 4.0
RANDOM_SIGMA = (0.25, 0.35)
CIRCLE_RADIUS = 5.0
CIRCLE_SIGMA = 0.3
SEPARATION = 6.0
MAX_LAYOUT_DRAWS = 100_000


@dataclass(frozen=True)
class GmmSpec:
    means: np.ndarray
    scales: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        means = np.atleast_2d(np.array(self.means, dtype=np.float64))
        scales = np.array(self.scales, dtype=np.float64).reshape(-1)
        weights = np.array(self.weights, dtype=np.float64).reshape(-1)
        n = means.shape[0]
        if scales.shape != (n,) or weights.shape != (n,):
            raise InvalidInputError("means, scales and weights disagree on the mode count")
        if np.any(scales <= 0):
            raise InvalidInputError("scales must be positive")
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
            raise InvalidInputError("weights must be a probability vector")
        for a in (means, scales, weights):
            a.setflags(write=False)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "scales", scales)
        object.__setattr__(self, "weights", weights)

    @property
    def n_modes(self):
        return self.means.shape[0]

    @property
    def dim(self):
        return self.means.shape[1]

    def to_dict(self):
        return {
            "means": self.means.tolist(),
            "scales": self.scales.tolist(),
            "weights": self.weights.tolist(),
        }

    @classmethod
    def from_dict(cls, doc):
        return cls(np.array(doc["means"]), np.array(doc["scales"]), np.array(doc["weights"]))


def _normalize(w):
    w = np.asarray(w, dtype=np.float64)
    w = w / w.sum()
    # push the rounding residue into the largest weight so the sum is exact
    w[np.argmax(w)] += 1.0 - w.sum()
    return w


def make_random_gmm(seed, n_modes=10, dim=2, weight_mode="random", layout="random",
                    sigma_range=RANDOM_SIGMA, circle_sigma=CIRCLE_SIGMA):
    """Random or circular mixture; the random layout keeps means 6*max(sigma) apart."""
    if n_modes < 1:
        raise InvalidInputError("n_modes must be >= 1")
    rng = np.random.default_rng(seed)
    if layout == "circle":
        if dim != 2:
            raise InvalidInputError("circle layout is two-dimensional")
        ang = 2.0 * np.pi * np.arange(n_modes) / n_modes
        means = CIRCLE_RADIUS * np.stack([np.cos(ang), np.sin(ang)], axis=1)
        scales = np.full(n_modes, float(circle_sigma))
    elif layout == "random":
        scales = rng.uniform(sigma_range[0], sigma_range[1], size=n_modes)
        min_sep = SEPARATION * scales.max()
        means = []
        draws = 0
        while len(means) < n_modes:
            if draws >= MAX_LAYOUT_DRAWS:
                raise DegenerateInputError(
                    f"could not place {n_modes} modes {min_sep:.3g} apart in {MAX_LAYOUT_DRAWS} draws"
                )
            cand = rng.uniform(-RANDOM_BOX, RANDOM_BOX, size=dim)
            draws += 1
            if all(np.linalg.norm(cand - m) >= min_sep for m in means):
                means.append(cand)
        means = np.array(means)
    else:
        raise InvalidInputError(f"unknown layout {layout!r}")
    if weight_mode == "random":
        weights = _normalize(rng.dirichlet(np.ones(n_modes)))
    elif weight_mode == "uniform":
        weights = np.full(n_modes, 1.0 / n_modes)
    else:
        raise InvalidInputError(f"unknown weight_mode {weight_mode!r}")
    return GmmSpec(means, scales, weights)


def make_source_8gauss(seed=None, radius=4.0, sigma=0.1):
    """Eight equal-weight modes on a circle; ``seed`` is accepted for interface symmetry."""
    ang = 2.0 * np.pi * np.arange(8) / 8
    means = radius * np.stack([np.cos(ang), np.sin(ang)], axis=1)
    return GmmSpec(means, np.full(8, sigma), np.full(8, 1.0 / 8))


def standard_normal(dim):
    return GmmSpec(np.zeros((1, dim)), np.ones(1), np.ones(1))


def gmm_sample(spec, rng, n):
    if n < 1:
        raise InvalidInputError("n must be >= 1")
    comp = rng.choice(spec.n_modes, size=n, p=spec.weights)
    noise = rng.standard_normal((n, spec.dim))
    return spec.means[comp] + spec.scales[comp, None] * noise


def _responsibilities(spec, x, sigma_t):
    var = spec.scales ** 2 + float(sigma_t) ** 2
    diff = spec.means[None, :, :] - x[:, None, :]  # (n, N, d)
    sq = np.einsum("nkc,nkc->nk", diff, diff)
    logp = np.log(spec.weights) - 0.5 * sq / var - 0.5 * spec.dim * np.log(2.0 * np.pi * var)
    mx = logp.max(axis=1, keepdims=True)
    lse = mx[:, 0] + np.log(np.exp(logp - mx).sum(axis=1))
    r = np.exp(logp - lse[:, None])
    return r, diff, var, lse


def gmm_logpdf(spec, x, sigma_t=0.0):
    x2 = np.atleast_2d(np.asarray(x, dtype=np.float64))
    _, _, _, lse = _responsibilities(spec, x2, sigma_t)
    return lse[0] if np.ndim(x) == 1 else lse


def gmm_noised_score(spec, x, sigma_t=0.0):
    """Gradient of log sum_i w_i N(x; mu_i, (sigma_i^2 + sigma_t^2) I)."""
    if sigma_t < 0:
        raise InvalidInputError("sigma_t must be >= 0")
    x2 = np.atleast_2d(np.asarray(x, dtype=np.float64))
    r, diff, var, _ = _responsibilities(spec, x2, sigma_t)
    score = np.einsum("nk,nkc->nc", r / var, diff)
    return score[0] if np.ndim(x) == 1 else score


def gmm_score_hvp(spec, x, sigma_t, v):
    """Hessian of the noised log-density at ``x`` applied to ``v`` (row-wise)."""
    x2 = np.atleast_2d(np.asarray(x, dtype=np.float64))
    v2 = np.atleast_2d(np.asarray(v, dtype=np.float64))
    r, diff, var, _ = _responsibilities(spec, x2, sigma_t)
    a = diff / var[None, :, None]  # per-component scores
    m = np.einsum("nk,nkc->nc", r, a)
    av = np.einsum("nkc,nc->nk", a, v2)
    out = (
        -np.einsum("nk,nc->nc", r / var, v2)
        + np.einsum("nk,nkc->nc", r * av, a)
        - m * np.einsum("nc,nc->n", m, v2)[:, None]
    )
    return out[0] if np.ndim(x) == 1 else out


def discovered_modes(samples, spec, radius_mult=3.0):
    """Boolean mask of modes hit by at least one sample."""
    if not radius_mult > 0:
        raise InvalidInputError("radius_mult must be positive")
    pts = np.asarray(samples, dtype=np.float64).reshape(-1, spec.dim)
    hit = np.zeros(spec.n_modes, dtype=bool)
    if pts.shape[0] == 0:
        return hit
    diff = pts[:, None, :] - spec.means[None, :, :]
    dist = np.sqrt(np.einsum("nkc,nkc->nk", diff, diff))
    nearest = np.argmin(dist, axis=1)
    ok = dist[np.arange(pts.shape[0]), nearest] <= radius_mult * spec.scales[nearest]
    hit[nearest[ok]] = True
    return hit


def count_modes(samples, spec, radius_mult=3.0):
    return int(discovered_modes(samples, spec, radius_mult).sum())
