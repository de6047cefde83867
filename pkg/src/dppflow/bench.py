"""Mode-discovery trial harness and noise/strength sweeps.

Trial ``s`` draws everything from ``trial_rng(master_seed, s)``: first the K
source points, then (for stochastic samplers) the per-step noise.  Guided and
unguided runs with the same seeds therefore start from the same points, and
results do not depend on how trials are split across workers.
"""
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field as dc_field
from typing import List

import numpy as np

from .errors import IntegrationError, InvalidInputError
from .gmm import GmmSpec, count_modes, gmm_sample, make_source_8gauss
from .sampler import GuidanceConfig, SolverConfig, integrate_flow, integrate_ideal
from .velocity import Checkpoint, VelocityField

DEFAULT_CHUNK = 200


def trial_rng(master_seed, trial_seed):
    """Independent stream for one trial, fixed by ``(master_seed, trial_seed)``."""
    return np.random.default_rng(np.random.SeedSequence([int(master_seed), int(trial_seed)]))


@dataclass
class BenchResult:
    K: int
    trials: int
    modes_mean: float
    modes_std: float
    modes_max: int
    counts: np.ndarray
    method: str = ""
    formulation: str = ""

    @classmethod
    def from_counts(cls, K, counts, method="", formulation=""):
        counts = np.asarray(counts, dtype=np.int64)
        n = len(counts)
        std = float(counts.std(ddof=1)) if n > 1 else 0.0
        return cls(K, n, float(counts.mean()), std, int(counts.max()), counts, method, formulation)


@dataclass
class SweepGrid:
    noise_levels: List[float]
    strengths: List[float]
    cells: list = dc_field(default_factory=list)
    method: str = ""

    @property
    def shape(self):
        return len(self.noise_levels), len(self.strengths)

    def means(self):
        return np.array([[c.modes_mean for c in row] for row in self.cells])


@dataclass(frozen=True)
class _Job:
    model: object
    gcfg: GuidanceConfig
    scfg: SolverConfig
    K: int
    seeds: tuple
    master_seed: int
    target: GmmSpec
    source: GmmSpec
    radius_mult: float


def _draw(job, seed):
    rng = trial_rng(job.master_seed, seed)
    if isinstance(job.model, GmmSpec):
        x0 = job.scfg.sigma_max * rng.standard_normal((job.K, job.model.dim))
        noise = None
        if job.scfg.noise_level > 0:
            noise = rng.standard_normal((job.scfg.steps, job.K, job.model.dim))
        return x0, noise
    return gmm_sample(job.source, rng, job.K), None


def _sample(job, seeds):
    draws = [_draw(job, s) for s in seeds]
    X0 = np.stack([x for x, _ in draws])
    if isinstance(job.model, GmmSpec):
        noise = None if draws[0][1] is None else np.stack([n for _, n in draws])
        return integrate_ideal(job.model, X0, job.gcfg, job.scfg, noise)
    return integrate_flow(job.model, X0, job.gcfg, job.scfg.steps)


def _run_chunk(job):
    try:
        out = _sample(job, job.seeds)
    except IntegrationError:
        # locate the offending trial
        for s in job.seeds:
            try:
                _sample(job, (s,))
            except IntegrationError as exc:
                raise IntegrationError(f"trial {s}: {exc}", exc.step) from exc
        raise
    return [count_modes(out[i], job.target, job.radius_mult) for i in range(len(job.seeds))]


def run_mode_trials(model, gcfg, scfg, K, trials=None, seeds=None, target=None, source=None,
                    radius_mult=3.0, master_seed=0, workers=1, chunk=DEFAULT_CHUNK,
                    formulation=""):
    """Count discovered modes over independent trials of a K-particle sampler.

    ``model`` is a velocity field (or checkpoint) integrated from ``source``
    (default: eight Gaussians), or a ``GmmSpec`` sampled with its exact
    score from the noise prior.  Modes are counted against ``target``
    (the mixture itself for the exact-score sampler).
    """
    if isinstance(model, Checkpoint):
        formulation = formulation or model.formulation
        model = model.field
    if isinstance(model, GmmSpec):
        target = model if target is None else target
        formulation = formulation or "ideal-score"
    elif not isinstance(model, VelocityField):
        raise InvalidInputError("model must be a VelocityField, Checkpoint or GmmSpec")
    if target is None:
        raise InvalidInputError("need a target mixture to count modes against")
    if K < 1:
        raise InvalidInputError("K must be >= 1")
    if seeds is None:
        if trials is None or trials < 1:
            raise InvalidInputError("trials must be >= 1")
        seeds = range(trials)
    seeds = tuple(int(s) for s in seeds)
    if trials is not None and len(seeds) != trials:
        raise InvalidInputError("len(seeds) must equal trials")
    if not seeds:
        raise InvalidInputError("trials must be >= 1")
    source = make_source_8gauss() if source is None else source
    jobs = [
        _Job(model, gcfg, scfg, K, seeds[i:i + chunk], master_seed, target, source, radius_mult)
        for i in range(0, len(seeds), chunk)
    ]
    workers = max(1, min(workers or 1, len(jobs)))
    if workers == 1:
        parts = [_run_chunk(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_chunk, jobs))
    counts = [c for part in parts for c in part]
    return BenchResult.from_counts(K, counts, gcfg.method, formulation)


def sweep_heatmap(gmm, noise_levels, strengths, method, K, trials, base_gcfg=None, base_scfg=None,
                  radius_mult=3.0, master_seed=0, workers=1):
    """One exact-score ``BenchResult`` per (noise level, strength) cell."""
    from dataclasses import replace

    if not len(noise_levels) or not len(strengths):
        raise InvalidInputError("sweep grids must be non-empty")
    g0 = base_gcfg or GuidanceConfig(method=method, schedule="sigma_path")
    s0 = base_scfg or SolverConfig()
    grid = SweepGrid([float(x) for x in noise_levels], [float(w) for w in strengths], [], method)
    for lam in grid.noise_levels:
        row = []
        for w in grid.strengths:
            g = replace(g0, method=method, strength=w)
            s = replace(s0, noise_level=lam)
            row.append(run_mode_trials(gmm, g, s, K, trials, radius_mult=radius_mult,
                                       master_seed=master_seed, workers=workers))
        grid.cells.append(row)
    return grid


BENCH_COLUMNS = ("method", "formulation", "K", "trials", "modes_mean", "modes_std", "modes_max")
SWEEP_COLUMNS = ("noise_level", "strength", "modes_mean", "modes_std")


def write_bench_csv(path, results):
    with open(path, "w") as fh:
        fh.write(",".join(BENCH_COLUMNS) + "\n")
        for r in results:
            fh.write(f"{r.method},{r.formulation},{r.K},{r.trials},{r.modes_mean!r},{r.modes_std!r},{r.modes_max}\n")


def write_sweep_csv(path, grid):
    with open(path, "w") as fh:
        fh.write(",".join(SWEEP_COLUMNS) + "\n")
        for lam, row in zip(grid.noise_levels, grid.cells):
            for w, cell in zip(grid.strengths, row):
                fh.write(f"{lam!r},{w!r},{cell.modes_mean!r},{cell.modes_std!r}\n")


def default_workers():
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)
