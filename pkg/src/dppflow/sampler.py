"""Guided samplers: coupled Euler integration of a flow with a diversity force.

Every particle moves along ``v(x, t) + gamma(t) * grad`` where ``grad`` ascends
the DPP log-likelihood of the one-step terminal estimates
``x1_hat = x + (1 - t) v``, or (particle guidance) descends each particle's
row-sum similarity potential.  Samplers work on stacks of independent trials
of shape (T, k, d); the public single-trial functions wrap them with T = 1.

Trials never interact: the dense layers are row-invariant, and every kernel
is built per trial, so a trial gives the same bits alone or inside a stack.
"""
import warnings
from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np

from . import dpp
from ._backend import kernels
from .errors import IntegrationError, InvalidInputError, NumericError
from .gmm import gmm_noised_score, gmm_sample, gmm_score_hvp
from .velocity import forward, linearize

METHODS = ("none", "diverseflow", "particle_guidance")
SCHEDULES = ("sqrt_one_minus_t", "sigma_path")
PG_SUPPORTS = ("x_t", "x1_hat")
JACOBIANS = ("full", "identity")
NORM_SPACES = ("auto", "state", "estimate")
GRAD_FLOOR = 1e-12
SIGMA_MAX = 10.0
SIGMA_MIN = 0.01


@dataclass(frozen=True)
class ParticleBatch:
    points: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        pts = np.atleast_2d(np.array(self.points, dtype=np.float64))
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise InvalidInputError("a batch needs at least one particle")
        if not np.all(np.isfinite(pts)):
            raise InvalidInputError("non-finite particle")
        if not 0.0 <= self.t <= 1.0:
            raise InvalidInputError("t must lie in [0, 1]")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def k(self):
        return self.points.shape[0]

    @property
    def d(self):
        return self.points.shape[1]


@dataclass(frozen=True)
class GuidanceConfig:
    method: str = "none"
    strength: float = 2.0
    schedule: str = "sqrt_one_minus_t"
    normalize_by_grad_norm: bool = True
    h: float = 1.0
    quality: Optional[dpp.QualityParams] = None
    objective: str = "exact"
    pg_kernel_on: str = "x_t"
    jacobian: str = "full"
    grad_norm_on: str = "auto"
    feature: dpp.FeatureMap = dc_field(default=dpp.IDENTITY, compare=False)

    def __post_init__(self):
        for name, value, allowed in (
            ("method", self.method, METHODS),
            ("schedule", self.schedule, SCHEDULES),
            ("objective", self.objective, tuple(dpp.OBJECTIVES)),
            ("pg_kernel_on", self.pg_kernel_on, PG_SUPPORTS),
            ("jacobian", self.jacobian, JACOBIANS),
            ("grad_norm_on", self.grad_norm_on, NORM_SPACES),
        ):
            if value not in allowed:
                raise InvalidInputError(f"{name} must be one of {allowed}, got {value!r}")
        if not self.strength >= 0:
            raise InvalidInputError("strength must be >= 0")
        if not self.h > 0:
            raise InvalidInputError("h must be positive")

    @property
    def active(self):
        return self.method != "none" and self.strength > 0


@dataclass(frozen=True)
class SolverConfig:
    steps: int = 100
    noise_level: float = 0.0
    seed: int = 0
    sigma_max: float = SIGMA_MAX
    sigma_min: float = SIGMA_MIN

    def __post_init__(self):
        if self.steps < 1:
            raise InvalidInputError("steps must be >= 1")
        if not 0.0 <= self.noise_level <= 1.0:
            raise InvalidInputError("noise_level must lie in [0, 1]")
        if not 0 < self.sigma_min < self.sigma_max:
            raise InvalidInputError("need 0 < sigma_min < sigma_max")


@dataclass(frozen=True)
class InpaintTask:
    y: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        y = np.array(self.y, dtype=np.float64).reshape(-1)
        m = np.array(self.mask, dtype=np.float64).reshape(-1)
        if y.shape != m.shape:
            raise InvalidInputError("y and mask differ in length")
        if not np.all((m == 0) | (m == 1)):
            raise InvalidInputError("mask must be binary")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "mask", m)

    @staticmethod
    def alpha(t):
        return np.sqrt(1.0 - t)


def time_grid(steps):
    return np.arange(steps + 1, dtype=np.float64) / steps


def ve_sigma(t, sigma_max=SIGMA_MAX, sigma_min=SIGMA_MIN):
    """Geometric noise level; t = 0 is pure noise, t = 1 is (almost) data."""
    return sigma_max * (sigma_min / sigma_max) ** np.asarray(t, dtype=np.float64)


def _schedule_value(schedule, t, sigma_t):
    if schedule == "sqrt_one_minus_t":
        return np.sqrt(max(1.0 - t, 0.0))
    if sigma_t is None:
        raise InvalidInputError("the sigma_path schedule needs sigma_t")
    return float(sigma_t)


def gamma(config, t, grad_norm, sigma_t=None):
    """Step size ``W * s(t) / max(|grad|, 1e-12)``; zero for ``method='none'``."""
    if grad_norm < 0:
        raise InvalidInputError("grad_norm must be >= 0")
    if config.method == "none":
        return 0.0
    s = config.strength * _schedule_value(config.schedule, t, sigma_t)
    if config.normalize_by_grad_norm:
        return s / max(grad_norm, GRAD_FLOOR)
    return s


def _gammas(config, t, norms, sigma_t=None):
    s = config.strength * _schedule_value(config.schedule, t, sigma_t)
    if config.normalize_by_grad_norm:
        return s / np.maximum(norms, GRAD_FLOOR)
    return np.full(norms.shape, s)


def estimate_x1(batch, field):
    v = forward(field, batch.points, batch.t)
    return batch.points + v * (1.0 - batch.t)


def estimate_x0(batch, field):
    v = forward(field, batch.points, batch.t)
    return batch.points - v * batch.t


# -- stacked internals ---------------------------------------------------------


def _linearize_stack(field, X, t):
    T, k, d = X.shape
    v, pull = linearize(field, X.reshape(T * k, d), t)
    return v.reshape(T, k, d), lambda u: pull(u.reshape(T * k, d)).reshape(T, k, d)


def _forward_stack(field, X, t):
    T, k, d = X.shape
    return forward(field, X.reshape(T * k, d), t).reshape(T, k, d)


def _features(feature, X):
    T, k, d = X.shape
    return np.ascontiguousarray(feature.fn(X.reshape(T * k, d)).reshape(T, k, -1))


def _direction(gcfg, X, est, jac_t, x0_est=None, cache=None, auto_norm="state"):
    """Unscaled guidance direction for each particle of every trial.

    ``est`` are the terminal estimates the kernel is built on and ``jac_t``
    maps a cotangent on ``est`` back to the state (None for identity).
    ``cache`` holds frozen (T, m, d) repulsors appended after the live set.
    Returns ``(direction, norms, kernel_order)`` where ``norms`` is the
    per-trial norm of the objective gradient, taken with respect to the
    state (after the chain rule) or the estimates per ``grad_norm_on``;
    ``auto_norm`` resolves ``"auto"`` for the calling sampler.
    """
    T, k, d = X.shape
    on_state = (auto_norm if gcfg.grad_norm_on == "auto" else gcfg.grad_norm_on) == "state"
    if gcfg.method == "diverseflow":
        feats = _features(gcfg.feature, est)
        q = None
        if gcfg.quality is not None and x0_est is not None:
            q = dpp.quality_vector(x0_est, gcfg.quality)
        if cache is not None and cache.shape[1]:
            feats = np.concatenate([feats, _features(gcfg.feature, cache)], axis=1)
            if q is not None:
                q = np.concatenate([q, np.ones(cache.shape[:2])], axis=1)
        order = feats.shape[1]
        g, _, _ = dpp.batch_gradients(feats, gcfg.h, q, gcfg.objective, n_live=k)
        if not gcfg.feature.is_identity:
            g = gcfg.feature.vjp(est.reshape(T * k, d), g.reshape(T * k, -1)).reshape(T, k, d)
        norms = _norms(g)
        if jac_t is not None and gcfg.jacobian == "full":
            g = jac_t(g)
            if on_state:
                norms = _norms(g)
        return g, norms, order
    pts = X if gcfg.pg_kernel_on == "x_t" else est
    gphi, _ = kernels.pg_grad_batch(np.ascontiguousarray(pts), float(gcfg.h))
    g = -np.asarray(gphi)
    norms = _norms(g)
    if gcfg.pg_kernel_on == "x1_hat" and jac_t is not None and gcfg.jacobian == "full":
        g = jac_t(g)
        if gcfg.grad_norm_on == "state":
            norms = _norms(g)
    return g, norms, k


def _norms(g):
    return np.sqrt(np.einsum("tkd,tkd->t", g, g))


def _scaled(gcfg, direction, norms, t, sigma_t=None):
    gam = _gammas(gcfg, t, norms, sigma_t)
    return gam[:, None, None] * direction, gam


def _check_state(X, step):
    if not np.all(np.isfinite(X)):
        raise IntegrationError("state became non-finite", step)


def _flow_velocity(field, X, t, gcfg, cache=None):
    """Guided velocity and per-step info for a stack of trials."""
    if not gcfg.active:
        return _forward_stack(field, X, t), {"kernel_order": 0, "gamma": None}
    v, pull = _linearize_stack(field, X, t)
    lag = 1.0 - t
    est = X + v * lag
    x0_est = X - v * t if gcfg.quality is not None else None

    def jac_t(u):
        return u + lag * pull(u) if lag > 0 else u

    direction, norms, order = _direction(gcfg, X, est, jac_t, x0_est, cache)
    term, gam = _scaled(gcfg, direction, norms, t)
    return v + term, {"kernel_order": order, "gamma": gam}


def integrate_flow(field, X0, gcfg, steps, record=False, cache=None, on_step=None):
    """Euler-integrate a (T, k, d) stack from t = 0 to 1.

    Returns the terminal stack, plus the (steps + 1, T, k, d) trajectory when
    ``record`` is set.  ``on_step(info)`` receives step, t, kernel_order and
    the per-trial gamma values.
    """
    X = np.array(X0, dtype=np.float64)
    if X.ndim != 3:
        raise InvalidInputError("expected a (trials, k, d) stack")
    if gcfg.active and X.shape[1] + (0 if cache is None else cache.shape[1]) < 2:
        raise InvalidInputError("guidance needs at least two particles")
    grid = time_grid(steps)
    traj = [X.copy()] if record else None
    for i in range(steps):
        t, dt = grid[i], grid[i + 1] - grid[i]
        try:
            vel, info = _flow_velocity(field, X, t, gcfg, cache)
        except (NumericError, InvalidInputError) as exc:
            raise IntegrationError(str(exc), i) from exc
        X = X + vel * dt
        _check_state(X, i + 1)
        if on_step is not None:
            on_step(dict(info, step=i, t=t))
        if record:
            traj.append(X.copy())
    if record:
        return X, np.stack(traj)
    return X


def _guided_score(gmm, X, t, sigma_t, gcfg):
    """Mixture score plus ``gamma(t)`` times the guidance direction.

    The DPP kernel is built on the denoised estimates ``x + sigma^2 * score``;
    their Jacobian ``I + sigma^2 * Hessian`` carries the chain rule.
    """
    T, k, d = X.shape
    flat = X.reshape(T * k, d)
    score = gmm_noised_score(gmm, flat, sigma_t).reshape(T, k, d)
    if not gcfg.active:
        return score
    var = sigma_t * sigma_t
    est = X + var * score

    def jac_t(u):
        return u + var * gmm_score_hvp(gmm, flat, sigma_t, u.reshape(T * k, d)).reshape(T, k, d)

    # the denoiser Jacobian collapses near modes at small sigma, so the state
    # norm would blow the step up; normalize on the estimates instead
    direction, norms, _ = _direction(gcfg, X, est, jac_t, auto_norm="estimate")
    term, _ = _scaled(gcfg, direction, norms, t, sigma_t)
    return score + term


def integrate_ideal(gmm, X0, gcfg, scfg, noise=None, record=False):
    """Reverse-time sampler of the noised mixture with its exact score.

    Variance-exploding path with geometric sigma(t) from ``sigma_max`` at t = 0
    to ``sigma_min`` at t = 1.  A step moves by ``(1 + lam)/2 * dsig2 * score``
    plus ``sqrt(lam * dsig2) * z`` with ``dsig2 = sigma_i^2 - sigma_{i+1}^2``;
    lam = 0 is the probability-flow ODE and lam = 1 the reverse SDE.
    Guidance is added to the score, so it is integrated on the same clock.
    ``noise`` is a (T, steps, k, d) array of standard normals (needed when lam > 0).
    """
    X = np.array(X0, dtype=np.float64)
    lam = scfg.noise_level
    if lam > 0 and noise is None:
        raise InvalidInputError("noise_level > 0 needs a noise array")
    grid = time_grid(scfg.steps)
    sig = ve_sigma(grid, scfg.sigma_max, scfg.sigma_min)
    traj = [X.copy()] if record else None
    for i in range(scfg.steps):
        dsig2 = sig[i] ** 2 - sig[i + 1] ** 2
        step = (0.5 * (1.0 + lam) * dsig2) * _guided_score(gmm, X, grid[i], sig[i], gcfg)
        if lam > 0:
            step = step + np.sqrt(lam * dsig2) * noise[:, i]
        X = X + step
        _check_state(X, i + 1)
        if record:
            traj.append(X.copy())
    if record:
        return X, np.stack(traj)
    return X


def _mcg_stack(field, task, X0, gcfg, steps, on_step=None):
    X = np.array(X0, dtype=np.float64)
    T, k, d = X.shape
    if task.y.shape != (d,):
        raise InvalidInputError(f"task has dimension {task.y.shape[0]}, particles have {d}")
    M, Y = task.mask, task.y
    grid = time_grid(steps)
    for i in range(steps):
        t, t_next = grid[i], grid[i + 1]
        dt = t_next - t
        v, pull = _linearize_stack(field, X, t)
        lag = 1.0 - t

        def jac_t(u):
            return u + lag * pull(u) if lag > 0 else u

        est = X + v * lag
        if gcfg.active:
            x0_est = X - v * t if gcfg.quality is not None else None
            direction, norms, order = _direction(gcfg, X, est, jac_t, x0_est)
            term, gam = _scaled(gcfg, direction, norms, t)
            v = v + term
            if on_step is not None:
                on_step({"step": i, "t": t, "kernel_order": order, "gamma": gam})
        grad_mcg = -2.0 * jac_t(M * (Y - est))
        X_next = X + v * dt
        X_prime = X_next - task.alpha(t) * grad_mcg
        Y_next = X0 * (1.0 - t_next) + Y * t_next
        X = X_prime * (1.0 - M) + Y_next * M
        _check_state(X, i + 1)
    return X


# -- public single-trial samplers -------------------------------------------------


def _one(batch):
    return np.asarray(batch.points)[None]


def diverse_step(batch, field, gcfg, dt):
    """One Euler step of the guided ODE from ``batch.t``."""
    X = _one(batch)
    vel, _ = _flow_velocity(field, X, batch.t, gcfg)
    return ParticleBatch((X + vel * dt)[0], min(batch.t + dt, 1.0))


def particle_guidance_step(batch, field, gcfg, dt):
    """Euler step with the particle-guidance potential (``gcfg.method`` forced)."""
    if batch.k < 2:
        raise InvalidInputError("particle guidance needs at least two particles")
    cfg = gcfg if gcfg.method == "particle_guidance" else _replace(gcfg, method="particle_guidance")
    return diverse_step(batch, field, cfg, dt)


def _replace(cfg, **changes):
    from dataclasses import replace

    return replace(cfg, **changes)


def guidance_gradient(batch, field, gcfg):
    """Unscaled ascent direction on the state (the composed chain-rule gradient)."""
    X = _one(batch)
    v, pull = _linearize_stack(field, X, batch.t)
    lag = 1.0 - batch.t
    est = X + v * lag
    x0_est = X - v * batch.t if gcfg.quality is not None else None

    def jac_t(u):
        return u + lag * pull(u) if lag > 0 else u

    direction, _, _ = _direction(gcfg, X, est, jac_t, x0_est)
    return direction[0]


def _trajectory(stack, grid):
    return [ParticleBatch(stack[i, 0], float(grid[i])) for i in range(len(grid))]


def sample_flow(field, x0, gcfg, scfg):
    """Integrate ``x0`` (at t = 0) to t = 1; returns ``steps + 1`` batches."""
    if x0.t != 0.0:
        raise InvalidInputError("x0 must be at t = 0")
    _, traj = integrate_flow(field, _one(x0), gcfg, scfg.steps, record=True)
    return _trajectory(traj, time_grid(scfg.steps))


def ideal_source(rng, k, d, sigma_max=SIGMA_MAX):
    return sigma_max * rng.standard_normal((k, d))


def sample_ideal_score(gmm, gcfg, scfg, k, x0=None, noise=None):
    """Terminal batch of ``k`` particles drawn with the exact mixture score.

    Without explicit ``x0``/``noise`` both are drawn from ``scfg.seed``
    (source first, then the per-step noise).
    """
    rng = np.random.default_rng(scfg.seed)
    if x0 is None:
        x0 = ideal_source(rng, k, gmm.dim, scfg.sigma_max)
    x0 = np.asarray(x0, dtype=np.float64)
    if noise is None and scfg.noise_level > 0:
        noise = rng.standard_normal((scfg.steps, k, gmm.dim))
    out = integrate_ideal(gmm, x0[None], gcfg, scfg, None if noise is None else np.asarray(noise)[None])
    return ParticleBatch(out[0], 1.0)


def mcg_inpaint(field, task, x0, gcfg, scfg):
    """Inpaint ``k`` particles so their masked coordinates equal ``task.y``."""
    if np.all(task.mask == 1):
        warnings.warn("mask observes every coordinate; returning y", RuntimeWarning, stacklevel=2)
        return ParticleBatch(np.tile(task.y, (x0.k, 1)), 1.0)
    out = _mcg_stack(field, task, _one(x0), gcfg, scfg.steps)
    return ParticleBatch(out[0], 1.0)


def progressive_sample(field, gcfg, scfg, k_per_round, rounds, source=None, x0_rounds=None, on_step=None):
    """Sample ``rounds`` batches, each repelled by every batch finished before it.

    Round ``r`` (1-based) builds its kernel over ``k_per_round`` live
    estimates plus ``k_per_round * (r - 1)`` cached samples; only the live
    particles move.  Initial points come from ``x0_rounds`` or are drawn
    from ``source`` with ``scfg.seed``.  ``on_step`` also receives the round.
    """
    if rounds < 1:
        raise InvalidInputError("rounds must be >= 1")
    if x0_rounds is None:
        if source is None:
            raise InvalidInputError("need either source or x0_rounds")
        rng = np.random.default_rng(scfg.seed)
        x0_rounds = [gmm_sample(source, rng, k_per_round) for _ in range(rounds)]
    if len(x0_rounds) != rounds:
        raise InvalidInputError("x0_rounds must hold one batch per round")
    done = []
    for r in range(rounds):
        cache = np.concatenate(done, axis=0)[None] if done else None
        if cache is not None:
            cache.setflags(write=False)
        hook = None if on_step is None else (lambda info, r=r: on_step(dict(info, round=r + 1)))
        X0 = np.asarray(x0_rounds[r], dtype=np.float64)[None]
        out = integrate_flow(field, X0, gcfg, scfg.steps, cache=cache, on_step=hook)
        finished = out[0].copy()
        finished.setflags(write=False)
        done.append(finished)
    return [ParticleBatch(b, 1.0) for b in done]


def write_trajectory_csv(path, traj, steps):
    """``traj`` is (steps + 1, T, k, d); columns trial, step, t, particle, dim0..."""
    traj = np.asarray(traj)
    n_steps, T, k, d = traj.shape
    grid = time_grid(steps)
    with open(path, "w") as fh:
        fh.write("trial,step,t,particle," + ",".join(f"dim{j}" for j in range(d)) + "\n")
        for tr in range(T):
            for s in range(n_steps):
                for p in range(k):
                    vals = ",".join(repr(float(x)) for x in traj[s, tr, p])
                    fh.write(f"{tr},{s},{float(grid[s])!r},{p},{vals}\n")
