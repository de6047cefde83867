"""Run configuration: one YAML document, parsed strictly.

Every key must appear in ``SCHEMA``; unknown keys and wrongly typed values are
rejected with the offending dotted key and its line.  Missing keys take the
schema default, and ``dump_config`` writes the fully resolved document.

Grammar (all sections optional)::

    seed: 0
    output_dir: out
    checkpoints: [out/MB-OT.ckpt.json]
    path:     {formulation: MB-OT, sigma_fm: 0.0, sb_sigma: 0.1, sinkhorn_iters: 200}
    train:    {batch_size: 256, steps: 20000, learning_rate: 0.001, ...}
    target:   {kind: toy, seed: 59, n_modes: 10, dim: 2, weight_mode: random, layout: random, circle_sigma: 0.3}
    source:   {kind: 8gauss}
    guidance: {method: diverseflow, strength: 2.0, schedule: sqrt_one_minus_t, grad_norm_on: auto, ...}
    solver:   {steps: 100, noise_level: 0.0, sigma_max: 10.0, sigma_min: 0.01}
    sample:   {K: 5, dump_trajectory: false}
    bench:    {K: [2, 10], trials: 1000, radius_mult: 3.0, workers: 0, master_seed: 0,
               methods: [none, diverseflow]}
    sweep:    {method: diverseflow, noise_levels: [0, 0.1, 0.3, 1], strengths: [0, 1, 3, 5, 7, 10]}
    inpaint:  {y: [0.0, 0.0], mask: [1, 0], trials: 200}

``path.formulation`` may be a list to train several formulations from one file.
``bench.K`` is an inclusive ``[low, high]`` range; ``bench.workers: 0`` means
one worker per available core.
"""
import copy
import os

import yaml

from .cfm import FlowPathSpec, TrainConfig, default_target
from .dpp import QualityParams
from .errors import ConfigError, InvalidInputError
from .gmm import make_random_gmm, make_source_8gauss, standard_normal
from .sampler import GuidanceConfig, SolverConfig

REQUIRED = object()
NUMBER = (int, float)

SCHEMA = {
    "seed": 0,
    "output_dir": "out",
    "checkpoints": [],
    "path": {"formulation": REQUIRED, "sigma_fm": 0.0, "sb_sigma": 0.1, "sinkhorn_iters": 200},
    "train": {
        "batch_size": 256, "steps": 20000, "learning_rate": 1e-3, "beta1": 0.9,
        "beta2": 0.999, "adam_eps": 1e-8, "hidden": 256, "layers": 4,
    },
    "target": {
        "kind": "toy", "seed": 59, "n_modes": 10, "dim": 2, "weight_mode": "random",
        "layout": "random", "circle_sigma": 0.3,
    },
    "source": {"kind": "8gauss"},
    "guidance": {
        "method": "none", "strength": 2.0, "schedule": "sqrt_one_minus_t",
        "normalize_by_grad_norm": True, "h": 1.0, "objective": "exact", "pg_kernel_on": "x_t",
        "jacobian": "full", "grad_norm_on": "auto", "quality": None,
    },
    "solver": {"steps": 100, "noise_level": 0.0, "sigma_max": 10.0, "sigma_min": 0.01},
    "sample": {"K": 5, "dump_trajectory": False},
    "bench": {
        "K": [2, 10], "trials": 1000, "radius_mult": 3.0, "workers": 0, "master_seed": 0,
        "methods": ["none", "diverseflow"],
    },
    "sweep": {
        "method": "diverseflow", "noise_levels": [0.0, 0.1, 0.3, 1.0],
        "strengths": [0.0, 1.0, 3.0, 5.0, 7.0, 10.0],
    },
    "inpaint": {"y": [0.0, 0.0], "mask": [1, 0], "trials": 200},
}
QUALITY_KEYS = {"rho", "epsilon"}
SECTIONS = tuple(k for k, v in SCHEMA.items() if isinstance(v, dict))


def _lines(node, prefix="", out=None):
    """Map dotted keys to 1-based source lines."""
    out = {} if out is None else out
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            key = f"{prefix}{k.value}"
            out[key] = k.start_mark.line + 1
            _lines(v, key + ".", out)
    return out


def _where(lines, key):
    return f" (line {lines[key]})" if key in lines else ""


def _type_ok(default, value):
    if default is REQUIRED or default is None:
        return True
    if isinstance(default, bool):
        return isinstance(value, bool)
    if isinstance(default, float):
        return isinstance(value, NUMBER) and not isinstance(value, bool)
    if isinstance(default, int):
        return isinstance(value, int) and not isinstance(value, bool)
    if isinstance(default, str):
        return isinstance(value, str)
    if isinstance(default, list):
        return isinstance(value, list)
    return True


def _merge(schema, doc, lines, prefix=""):
    if not isinstance(doc, dict):
        raise ConfigError(f"{prefix.rstrip('.') or 'document'} must be a mapping{_where(lines, prefix.rstrip('.'))}")
    out = {}
    for key, value in doc.items():
        dotted = f"{prefix}{key}"
        if key not in schema:
            raise ConfigError(f"unknown key {dotted!r}{_where(lines, dotted)}")
        default = schema[key]
        if isinstance(default, dict):
            out[key] = _merge(default, value or {}, lines, dotted + ".")
        elif dotted == "guidance.quality" and value is not None:
            if not isinstance(value, dict) or set(value) - QUALITY_KEYS or "rho" not in value:
                raise ConfigError(f"guidance.quality needs keys {sorted(QUALITY_KEYS)}{_where(lines, dotted)}")
            out[key] = dict(value)
        elif dotted == "path.formulation":
            if value is None:
                out[key] = REQUIRED
                continue
            if not (isinstance(value, str) or (isinstance(value, list) and all(isinstance(v, str) for v in value))):
                raise ConfigError(f"path.formulation must be a name or list of names{_where(lines, dotted)}")
            out[key] = value
        else:
            if not _type_ok(default, value):
                raise ConfigError(f"{dotted} has the wrong type ({type(value).__name__}){_where(lines, dotted)}")
            out[key] = float(value) if isinstance(default, float) else value
    for key, default in schema.items():
        if key not in out:
            if isinstance(default, dict):
                out[key] = _merge(default, {}, lines, f"{prefix}{key}.")
            else:
                out[key] = default if default is REQUIRED else copy.deepcopy(default)
    return out


def parse_config(text, source="<config>"):
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{source}: invalid YAML: {exc}") from exc
    lines = _lines(node) if node is not None else {}
    try:
        return _merge(SCHEMA, doc or {}, lines)
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from exc


def load_config(path):
    with open(path) as fh:
        return parse_config(fh.read(), path)


def default_config():
    return parse_config("")


def _clean(obj):
    if obj is REQUIRED:
        return None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    return obj


def dump_config(cfg):
    return yaml.safe_dump(_clean(cfg), sort_keys=False, default_flow_style=None)


def write_resolved(cfg, out_dir, name="resolved_config.yaml"):
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, name)
    with open(path, "w") as fh:
        fh.write(dump_config(cfg))
    return path


def set_key(cfg, dotted, value):
    """Override one dotted key (used by CLI flags); the key must exist."""
    parts = dotted.split(".")
    node, schema = cfg, SCHEMA
    for p in parts[:-1]:
        if p not in schema:
            raise ConfigError(f"unknown key {dotted!r}")
        node, schema = node[p], schema[p]
    if parts[-1] not in schema:
        raise ConfigError(f"unknown key {dotted!r}")
    default = schema[parts[-1]]
    if value is not None and not _type_ok(default, value) and dotted != "path.formulation":
        raise ConfigError(f"{dotted} has the wrong type ({type(value).__name__})")
    node[parts[-1]] = float(value) if isinstance(default, float) and value is not None else value


# -- builders ------------------------------------------------------------------------


def _build(fn, what, **kwargs):
    try:
        return fn(**kwargs)
    except (InvalidInputError, TypeError) as exc:
        raise ConfigError(f"invalid {what}: {exc}") from exc


def formulations(cfg):
    f = cfg["path"]["formulation"]
    if f is REQUIRED or f is None:
        raise ConfigError("missing key 'path.formulation'")
    return [f] if isinstance(f, str) else list(f)


def path_spec(cfg, formulation):
    p = cfg["path"]
    return _build(FlowPathSpec, "path", formulation=formulation, sigma_fm=p["sigma_fm"],
                  sb_sigma=p["sb_sigma"], sinkhorn_iters=p["sinkhorn_iters"])


def target_gmm(cfg):
    t = cfg["target"]
    if t["kind"] == "toy":
        return default_target(t["seed"])
    if t["kind"] == "random":
        return _build(make_random_gmm, "target", seed=t["seed"], n_modes=t["n_modes"], dim=t["dim"],
                      weight_mode=t["weight_mode"], layout="random")
    if t["kind"] == "circle":
        return _build(make_random_gmm, "target", seed=t["seed"], n_modes=t["n_modes"], dim=2,
                      weight_mode=t["weight_mode"], layout="circle", circle_sigma=t["circle_sigma"])
    raise ConfigError(f"target.kind must be toy, random or circle, got {t['kind']!r}")


def source_gmm(cfg):
    kind = cfg["source"]["kind"]
    if kind == "8gauss":
        return make_source_8gauss()
    if kind == "normal":
        return standard_normal(target_gmm(cfg).dim)
    raise ConfigError(f"source.kind must be 8gauss or normal, got {kind!r}")


def train_config(cfg):
    t = cfg["train"]
    return _build(TrainConfig, "train", source=source_gmm(cfg), target=target_gmm(cfg), seed=cfg["seed"], **t)


def guidance(cfg):
    g = dict(cfg["guidance"])
    q = g.pop("quality")
    if q is not None:
        q = _build(QualityParams, "guidance.quality", **q)
    return _build(GuidanceConfig, "guidance", quality=q, **g)


def solver(cfg):
    s = cfg["solver"]
    return _build(SolverConfig, "solver", seed=cfg["seed"], **s)
