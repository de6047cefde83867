"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 numeric failure, 4 I/O or
checkpoint error.  Flags override the config file; ``DPPFLOW_SEED`` overrides
the config seed (an explicit ``--seed`` wins over both).
"""
import argparse
import logging
import os
import sys

import numpy as np

from . import bench, config, svg
from .bench import trial_rng
from .cfm import train, write_training_log
from .errors import CheckpointError, ConfigError, InvalidInputError, NumericError
from .gmm import count_modes, gmm_sample, make_random_gmm
from .sampler import InpaintTask, _mcg_stack, integrate_flow, write_trajectory_csv
from .velocity import load_checkpoint, save_checkpoint

log = logging.getLogger("dppflow")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


def _floats(text):
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text):
    return [int(x) for x in text.split(",") if x.strip()]


def _common(p):
    p.add_argument("--config", help="YAML run configuration")
    p.add_argument("--output-dir", dest="output_dir")
    p.add_argument("--seed", type=int)


def _guidance_flags(p):
    p.add_argument("--method", choices=("none", "diverseflow", "particle_guidance"))
    p.add_argument("--strength", type=float)
    p.add_argument("--schedule", choices=("sqrt_one_minus_t", "sigma_path"))
    p.add_argument("--h", type=float)
    p.add_argument("--objective", choices=("exact", "soft"))
    p.add_argument("--jacobian", choices=("full", "identity"))
    p.add_argument("--grad-norm-on", dest="grad_norm_on", choices=("auto", "state", "estimate"))
    p.add_argument("--pg-kernel-on", dest="pg_kernel_on", choices=("x_t", "x1_hat"))
    p.add_argument("--steps", type=int, help="Euler steps")
    p.add_argument("--noise-level", dest="noise_level", type=float)


def _bench_flags(p):
    p.add_argument("--K", dest="K", type=_ints, help="K range low,high (inclusive)")
    p.add_argument("--trials", type=int)
    p.add_argument("--radius-mult", dest="radius_mult", type=float)
    p.add_argument("--workers", type=int, help="parallel worker processes (default: all cores)")


def build_parser():
    ap = argparse.ArgumentParser(prog="dppflow", description="Diverse sampling from flow models.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one checkpoint per formulation")
    _common(p)
    p.add_argument("--formulation", action="append", help="repeatable; overrides path.formulation")
    p.add_argument("--train-steps", dest="train_steps", type=int)

    p = sub.add_parser("sample", help="draw K coupled samples from a checkpoint")
    _common(p)
    _guidance_flags(p)
    p.add_argument("--checkpoint")
    p.add_argument("--K", dest="sample_K", type=int)
    p.add_argument("--dump-trajectory", dest="dump_trajectory", action="store_true", default=None)

    p = sub.add_parser("bench-modes", help="mode discovery of trained checkpoints")
    _common(p)
    _guidance_flags(p)
    _bench_flags(p)
    p.add_argument("--checkpoint", action="append", dest="checkpoints")
    p.add_argument("--methods", type=lambda s: s.split(","))

    p = sub.add_parser("bench-ideal", help="mode discovery on a circle mixture with its exact score")
    _common(p)
    _guidance_flags(p)
    _bench_flags(p)
    p.add_argument("--methods", type=lambda s: s.split(","))

    p = sub.add_parser("sweep", help="noise level x strength heatmap with the exact score")
    _common(p)
    _guidance_flags(p)
    _bench_flags(p)
    p.add_argument("--noise-levels", dest="noise_levels", type=_floats)
    p.add_argument("--strengths", type=_floats)

    p = sub.add_parser("inpaint-demo", help="paired guided/unguided inpainting coverage")
    _common(p)
    _guidance_flags(p)
    p.add_argument("--checkpoint")
    p.add_argument("--K", dest="sample_K", type=int)
    p.add_argument("--trials", dest="inpaint_trials", type=int)
    p.add_argument("--y", type=_floats)
    p.add_argument("--mask", type=_ints)
    p.add_argument("--radius-mult", dest="radius_mult", type=float)
    return ap


FLAG_KEYS = {
    "output_dir": "output_dir", "seed": "seed",
    "method": "guidance.method", "strength": "guidance.strength", "schedule": "guidance.schedule",
    "h": "guidance.h", "objective": "guidance.objective", "jacobian": "guidance.jacobian",
    "grad_norm_on": "guidance.grad_norm_on", "pg_kernel_on": "guidance.pg_kernel_on", "steps": "solver.steps", "noise_level": "solver.noise_level",
    "train_steps": "train.steps", "sample_K": "sample.K", "dump_trajectory": "sample.dump_trajectory",
    "K": "bench.K", "trials": "bench.trials", "radius_mult": "bench.radius_mult", "workers": "bench.workers",
    "methods": "bench.methods", "noise_levels": "sweep.noise_levels", "strengths": "sweep.strengths",
    "inpaint_trials": "inpaint.trials", "y": "inpaint.y", "mask": "inpaint.mask",
}


def resolve(args):
    cfg = config.load_config(args.config) if args.config else config.default_config()
    env_seed = os.environ.get("DPPFLOW_SEED")
    if env_seed is not None:
        try:
            cfg["seed"] = int(env_seed)
        except ValueError as exc:
            raise ConfigError(f"DPPFLOW_SEED must be an integer, got {env_seed!r}") from exc
    for attr, key in FLAG_KEYS.items():
        value = getattr(args, attr, None)
        if value is not None:
            config.set_key(cfg, key, value)
    if getattr(args, "formulation", None):
        cfg["path"]["formulation"] = args.formulation if len(args.formulation) > 1 else args.formulation[0]
    if getattr(args, "checkpoint", None):
        cfg["checkpoints"] = [args.checkpoint]
    if getattr(args, "checkpoints", None):
        cfg["checkpoints"] = list(args.checkpoints)
    if args.command == "sweep" and getattr(args, "method", None):
        cfg["sweep"]["method"] = args.method
    return cfg


def _out(cfg):
    out = cfg["output_dir"]
    os.makedirs(out, exist_ok=True)
    config.write_resolved(cfg, out)
    return out


def _checkpoint(cfg, index=0):
    if len(cfg["checkpoints"]) <= index:
        raise ConfigError("no checkpoint given (--checkpoint or 'checkpoints' in the config)")
    return load_checkpoint(cfg["checkpoints"][index])


def _k_range(cfg):
    K = cfg["bench"]["K"]
    if len(K) == 1:
        K = [K[0], K[0]]
    if len(K) != 2 or K[0] < 1 or K[1] < K[0]:
        raise ConfigError(f"bench.K must be [low, high] with 1 <= low <= high, got {K}")
    return list(range(K[0], K[1] + 1))


def _workers(cfg):
    w = cfg["bench"]["workers"]
    return bench.default_workers() if not w else w


def cmd_train(cfg):
    names = config.formulations(cfg)
    out = _out(cfg)
    for f in names:
        spec = config.path_spec(cfg, f)
        tc = config.train_config(cfg)
        log.info("training %s for %d steps", f, tc.steps)
        result = train(spec, tc)
        save_checkpoint(os.path.join(out, f"{f}.ckpt.json"), result.checkpoint)
        write_training_log(os.path.join(out, f"{f}-train.csv"), result)
        first, last = result.smoothed()
        log.info("%s loss %.4f -> %.4f", f, first, last)


def cmd_sample(cfg):
    out = _out(cfg)
    ckpt = _checkpoint(cfg)
    g, s = config.guidance(cfg), config.solver(cfg)
    K = cfg["sample"]["K"]
    rng = np.random.default_rng(cfg["seed"])
    x0 = gmm_sample(config.source_gmm(cfg), rng, K)
    final, traj = integrate_flow(ckpt.field, x0[None], g, s.steps, record=True)
    with open(os.path.join(out, "samples.csv"), "w") as fh:
        fh.write("particle," + ",".join(f"dim{j}" for j in range(final.shape[2])) + "\n")
        for i, row in enumerate(final[0]):
            fh.write(f"{i}," + ",".join(repr(float(v)) for v in row) + "\n")
    if cfg["sample"]["dump_trajectory"]:
        write_trajectory_csv(os.path.join(out, "trajectory.csv"), traj, s.steps)
    if final.shape[2] == 2:
        target = config.target_gmm(cfg)
        svg.write(os.path.join(out, "samples.svg"), svg.scatter(
            {"source": x0, "samples": final[0], "target means": target.means}, f"{g.method}, K={K}"))


def cmd_bench_modes(cfg):
    out = _out(cfg)
    g, s = config.guidance(cfg), config.solver(cfg)
    b = cfg["bench"]
    target, source = config.target_gmm(cfg), config.source_gmm(cfg)
    results = []
    for i in range(len(cfg["checkpoints"]) or 1):
        ckpt = _checkpoint(cfg, i)
        for m in b["methods"]:
            gm = _with(g, method=m)
            for K in _k_range(cfg):
                log.info("%s %s K=%d", ckpt.formulation, m, K)
                results.append(bench.run_mode_trials(
                    ckpt, gm, s, K, b["trials"], target=target, source=source, radius_mult=b["radius_mult"],
                    master_seed=b["master_seed"], workers=_workers(cfg)))
    _write_bench(out, results, "modes discovered")


def _with(g, **kw):
    from dataclasses import replace

    return replace(g, **kw)


def _write_bench(out, results, title):
    bench.write_bench_csv(os.path.join(out, "bench.csv"), results)
    series = {}
    for r in results:
        xs, ys = series.setdefault(f"{r.formulation} {r.method}", ([], []))
        xs.append(r.K)
        ys.append(r.modes_mean)
    svg.write(os.path.join(out, "bench.svg"), svg.lines(series, title))


def _circle(cfg):
    t = cfg["target"]
    if t["kind"] == "circle":
        return config.target_gmm(cfg)
    return make_random_gmm(t["seed"], t["n_modes"], 2, "uniform", "circle", circle_sigma=t["circle_sigma"])


def cmd_bench_ideal(cfg):
    out = _out(cfg)
    g, s = config.guidance(cfg), config.solver(cfg)
    b = cfg["bench"]
    gmm = _circle(cfg)
    results = []
    for m in b["methods"]:
        for K in _k_range(cfg):
            results.append(bench.run_mode_trials(
                gmm, _with(g, method=m), s, K, b["trials"], radius_mult=b["radius_mult"],
                master_seed=b["master_seed"], workers=_workers(cfg)))
    _write_bench(out, results, "modes discovered (exact score)")


def cmd_sweep(cfg):
    out = _out(cfg)
    g, s = config.guidance(cfg), config.solver(cfg)
    b, sw = cfg["bench"], cfg["sweep"]
    gmm = _circle(cfg)
    grid = bench.sweep_heatmap(gmm, sw["noise_levels"], sw["strengths"], sw["method"], _k_range(cfg)[-1],
                               b["trials"], base_gcfg=g, base_scfg=s, radius_mult=b["radius_mult"],
                               master_seed=b["master_seed"], workers=_workers(cfg))
    bench.write_sweep_csv(os.path.join(out, "sweep.csv"), grid)
    svg.write(os.path.join(out, "sweep.svg"), svg.heatmap(
        grid.means(), [f"noise {x:g}" for x in grid.noise_levels], [f"W {w:g}" for w in grid.strengths],
        f"{grid.method}: mean modes"))


def cmd_inpaint_demo(cfg):
    out = _out(cfg)
    ckpt = _checkpoint(cfg)
    g, s = config.guidance(cfg), config.solver(cfg)
    task = InpaintTask(cfg["inpaint"]["y"], cfg["inpaint"]["mask"])
    if task.y.shape[0] != ckpt.field.input_dim:
        raise ConfigError(f"inpaint.y has {task.y.shape[0]} entries, the model is {ckpt.field.input_dim}-dimensional")
    target, source = config.target_gmm(cfg), config.source_gmm(cfg)
    K, trials = cfg["sample"]["K"], cfg["inpaint"]["trials"]
    X0 = np.stack([gmm_sample(source, trial_rng(cfg["bench"]["master_seed"], i), K) for i in range(trials)])
    runs = {"unguided": _with(g, strength=0.0), "guided": g}
    finals = {}
    for name, gc in runs.items():
        if np.all(task.mask == 1):
            finals[name] = np.broadcast_to(task.y, X0.shape).copy()
        else:
            finals[name] = _mcg_stack(ckpt.field, task, X0, gc, s.steps)
    with open(os.path.join(out, "inpaint.csv"), "w") as fh:
        fh.write("trial,unguided_modes,guided_modes\n")
        for i in range(trials):
            u = count_modes(finals["unguided"][i], target, cfg["bench"]["radius_mult"])
            v = count_modes(finals["guided"][i], target, cfg["bench"]["radius_mult"])
            fh.write(f"{i},{u},{v}\n")
    with open(os.path.join(out, "inpaint_samples.csv"), "w") as fh:
        d = X0.shape[2]
        fh.write("run,trial,particle," + ",".join(f"dim{j}" for j in range(d)) + "\n")
        for name, arr in finals.items():
            for i in range(trials):
                for p in range(K):
                    fh.write(f"{name},{i},{p}," + ",".join(repr(float(v)) for v in arr[i, p]) + "\n")
    if X0.shape[2] == 2:
        svg.write(os.path.join(out, "inpaint.svg"), svg.scatter(
            {k: v.reshape(-1, 2) for k, v in finals.items()}, "inpainted samples"))


COMMANDS = {
    "train": cmd_train, "sample": cmd_sample, "bench-modes": cmd_bench_modes,
    "bench-ideal": cmd_bench_ideal, "sweep": cmd_sweep, "inpaint-demo": cmd_inpaint_demo,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = resolve(args)
        COMMANDS[args.command](cfg)
    except (ConfigError, InvalidInputError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, CheckpointError) as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
