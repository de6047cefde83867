"""Simulation-free training of velocity fields under four flow-matching variants.

Formulations:

* ``CFM``     independent pairs, straight interpolant.
* ``MB-OT``   pairs re-matched by an exact minibatch assignment.
* ``SB-CFM``  pairs drawn from an entropic plan (reg = 2 * sb_sigma**2) plus
              Brownian-bridge noise.
* ``SI-CFM``  independent pairs on the trigonometric interpolant.
"""
import hashlib
import os
import json
import time
from dataclasses import asdict, dataclass, field as dc_field

import numpy as np

from . import linalg
from .errors import DegenerateInputError, InvalidInputError, TrainingError
from .gmm import GmmSpec, gmm_sample, make_random_gmm, make_source_8gauss
from .velocity import (Checkpoint, VelocityField, _run, init_field, load_checkpoint,
                       param_backprop, save_checkpoint)

FORMULATIONS = ("CFM", "MB-OT", "SB-CFM", "SI-CFM")
SB_T_RANGE = (0.01, 0.99)


@dataclass(frozen=True)
class FlowPathSpec:
    formulation: str = "CFM"
    sigma_fm: float = 0.0
    sb_sigma: float = 0.1
    sinkhorn_iters: int = 200

    def __post_init__(self):
        if self.formulation not in FORMULATIONS:
            raise InvalidInputError(f"unknown formulation {self.formulation!r}; expected one of {FORMULATIONS}")
        if self.sigma_fm < 0:
            raise InvalidInputError("sigma_fm must be >= 0")
        if self.formulation == "SB-CFM" and not self.sb_sigma > 0:
            raise InvalidInputError("SB-CFM needs sb_sigma > 0")


@dataclass
class TrainConfig:
    source: GmmSpec = dc_field(default_factory=make_source_8gauss)
    target: GmmSpec = None
    batch_size: int = 256
    steps: int = 20_000
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    hidden: int = 256
    layers: int = 4

    def __post_init__(self):
        if self.target is None:
            raise InvalidInputError("TrainConfig needs a target GmmSpec")
        if self.steps < 1:
            raise InvalidInputError("steps must be >= 1")
        if self.batch_size < 2:
            raise InvalidInputError("batch_size must be >= 2")
        if self.layers < 2:
            raise InvalidInputError("layers must be >= 2 (at least one hidden layer)")
        if self.source.dim != self.target.dim:
            raise InvalidInputError("source and target dimensions differ")

    def to_dict(self):
        d = asdict(self)
        d["source"] = self.source.to_dict()
        d["target"] = self.target.to_dict()
        return d


@dataclass
class PathSample:
    x_t: np.ndarray
    u_target: np.ndarray
    t: np.ndarray


def couple_batch(spec, x0, x1, rng):
    """Re-pair two equal-size batches according to the formulation."""
    x0 = np.asarray(x0, dtype=np.float64)
    x1 = np.asarray(x1, dtype=np.float64)
    if x0.shape != x1.shape:
        raise InvalidInputError(f"batch shapes differ: {x0.shape} vs {x1.shape}")
    if spec.formulation in ("CFM", "SI-CFM"):
        return x0, x1
    diff = x0[:, None, :] - x1[None, :, :]
    cost = np.einsum("ijc,ijc->ij", diff, diff)
    if spec.formulation == "MB-OT":
        perm = linalg.hungarian(cost).perm
        return x0, x1[perm]
    plan = linalg.sinkhorn(cost, reg=2.0 * spec.sb_sigma ** 2, iters=spec.sinkhorn_iters).plan
    n = len(x0)
    p = plan.ravel()
    idx = rng.choice(p.size, size=n, p=p / p.sum())
    return x0[idx // n], x1[idx % n]


def sample_path(spec, x0, x1, t, rng):
    """Point on the conditional path and its target velocity (row-wise)."""
    x0 = np.atleast_2d(np.asarray(x0, dtype=np.float64))
    x1 = np.atleast_2d(np.asarray(x1, dtype=np.float64))
    t = np.broadcast_to(np.asarray(t, dtype=np.float64), (x0.shape[0],)).copy()
    if np.any(t < 0) or np.any(t > 1):
        raise InvalidInputError("t must lie in [0, 1]")
    tc = t[:, None]
    f = spec.formulation
    if f in ("CFM", "MB-OT"):
        x_t = (1.0 - tc) * x0 + tc * x1
        if spec.sigma_fm > 0:
            x_t = x_t + spec.sigma_fm * rng.standard_normal(x0.shape)
        u = x1 - x0
    elif f == "SB-CFM":
        if np.any(t <= 0) or np.any(t >= 1):
            raise DegenerateInputError("SB-CFM path noise is singular at t in {0, 1}")
        eps = rng.standard_normal(x0.shape)
        root = np.sqrt(tc * (1.0 - tc))
        x_t = (1.0 - tc) * x0 + tc * x1 + spec.sb_sigma * root * eps
        u = x1 - x0 + spec.sb_sigma * ((1.0 - 2.0 * tc) / (2.0 * root)) * eps
    else:
        a = 0.5 * np.pi * tc
        # cos(pi/2) is 6e-17 in floating point; pin it so x_t(1) = x1 exactly
        x_t = np.where(tc == 1.0, 0.0, np.cos(a)) * x0 + np.sin(a) * x1
        u = 0.5 * np.pi * (-np.sin(a) * x0 + np.cos(a) * x1)
    return PathSample(x_t, u, t)


def config_digest(spec, config):
    doc = {"path": asdict(spec), "train": config.to_dict()}
    return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    losses: np.ndarray
    wallclock_ms: np.ndarray

    def smoothed(self, window=100):
        w = min(window, len(self.losses))
        return float(self.losses[:w].mean()), float(self.losses[-w:].mean())


def _blas_dense(h, w, b):
    return h @ w + b


def train(spec, config, progress=None):
    """Adam on the flow-matching regression loss; deterministic in ``config.seed``."""
    rng = np.random.default_rng(config.seed)
    field = init_field(config.seed, config.target.dim, config.hidden, config.layers)
    params = field.parameters()
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    b1, b2 = config.beta1, config.beta2
    n = config.batch_size
    losses = np.empty(config.steps)
    clock = np.empty(config.steps)
    start = time.perf_counter()
    for step in range(config.steps):
        x0 = gmm_sample(config.source, rng, n)
        x1 = gmm_sample(config.target, rng, n)
        x0, x1 = couple_batch(spec, x0, x1, rng)
        if spec.formulation == "SB-CFM":
            t = rng.uniform(*SB_T_RANGE, size=n)
        else:
            t = rng.uniform(0.0, 1.0, size=n)
        ps = sample_path(spec, x0, x1, t, rng)
        h = np.concatenate([ps.x_t, ps.t[:, None]], axis=1)
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                out, acts = _run(field, h, _blas_dense, keep=True)
        except ArithmeticError as exc:
            raise TrainingError(f"non-finite forward pass ({exc})", step) from exc
        resid = out - ps.u_target
        loss = float(np.mean(np.sum(resid * resid, axis=1)))
        if not np.isfinite(loss):
            raise TrainingError("loss diverged", step)
        losses[step] = loss
        grads = param_backprop(field, acts, (2.0 / n) * resid)
        gs = [g for pair in zip(grads.weights, grads.biases) for g in pair]
        lr_t = config.learning_rate * np.sqrt(1 - b2 ** (step + 1)) / (1 - b1 ** (step + 1))
        for p, g, mi, vi in zip(params, gs, m, v):
            mi *= b1
            mi += (1 - b1) * g
            vi *= b2
            vi += (1 - b2) * g * g
            p -= lr_t * mi / (np.sqrt(vi) + config.adam_eps)
        clock[step] = (time.perf_counter() - start) * 1e3
        if progress is not None:
            progress(step, loss)
    trained = VelocityField(field.input_dim, field.hidden_dim, field.num_layers,
                            [w.copy() for w in field.weights], [b.copy() for b in field.biases],
                            field.activation)
    ckpt = Checkpoint(trained, spec.formulation, config_digest(spec, config))
    return TrainResult(ckpt, losses, clock)


def write_training_log(path, result):
    with open(path, "w") as fh:
        fh.write("step,loss,wallclock_ms\n")
        for i, (loss, ms) in enumerate(zip(result.losses, result.wallclock_ms)):
            fh.write(f"{i},{float(loss)!r},{ms:.3f}\n")


def default_target(seed=None):
    """Pinned 10-mode target for the mode-discovery reproduction."""
    return make_random_gmm(TOY_TARGET_SEED if seed is None else seed, 10, 2, "random", "random")


TOY_TARGET_SEED = 59


def cached_checkpoint_path(cache_dir, spec, config):
    return os.path.join(cache_dir, f"{spec.formulation}-{config_digest(spec, config)[:16]}.json")


def train_cached(spec, config, cache_dir, progress=None):
    """Load the checkpoint for ``(spec, config)`` from ``cache_dir`` or train and store it."""
    path = cached_checkpoint_path(cache_dir, spec, config)
    if os.path.exists(path):
        ckpt = load_checkpoint(path)
        if ckpt.train_config_digest == config_digest(spec, config):
            return ckpt
    os.makedirs(cache_dir, exist_ok=True)
    result = train(spec, config, progress)
    save_checkpoint(path, result.checkpoint)
    write_training_log(path[:-5] + "-log.csv", result)
    return result.checkpoint
