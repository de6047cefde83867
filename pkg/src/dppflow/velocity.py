"""Time-conditioned MLP velocity field with hand-written reverse mode.

The network maps ``concat(x, t)`` through ``num_layers`` dense layers with a
SiLU activation between them.  Weights are stored ``(fan_in, fan_out)`` so a
layer is ``h @ W + b``.

Sampling code uses the compiled row-invariant dense kernel, so evaluating a
particle alone or inside a large batch gives the same bits.  Training uses
BLAS matmul for speed (see ``cfm``).
"""
import json
import os
from dataclasses import dataclass, field as dc_field

import numpy as np

from ._backend import kernels
from .errors import CheckpointError, InvalidInputError, NumericError, SchemaVersionError

SCHEMA_VERSION = 1
ACTIVATIONS = ("silu", "identity")


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def activate(name, z):
    if name == "silu":
        return z * _sigmoid(z)
    return z


def activate_grad(name, z):
    if name == "silu":
        s = _sigmoid(z)
        return s * (1.0 + z * (1.0 - s))
    return np.ones_like(z)


@dataclass
class VelocityField:
    input_dim: int
    hidden_dim: int
    num_layers: int
    weights: list
    biases: list
    activation: str = "silu"
    _wt: list = dc_field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise InvalidInputError(f"unknown activation {self.activation!r}")
        self.weights = [np.ascontiguousarray(w, dtype=np.float64) for w in self.weights]
        self.biases = [np.ascontiguousarray(b, dtype=np.float64) for b in self.biases]
        dims = self.dims
        if len(self.weights) != self.num_layers or len(self.biases) != self.num_layers:
            raise InvalidInputError("layer count does not match num_layers")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (dims[i], dims[i + 1]) or b.shape != (dims[i + 1],):
                raise InvalidInputError(f"layer {i} has shape {w.shape}, expected {(dims[i], dims[i + 1])}")
        self._wt = [np.ascontiguousarray(w.T) for w in self.weights]

    @property
    def dims(self):
        d = self.input_dim
        return [d + 1] + [self.hidden_dim] * (self.num_layers - 1) + [d]

    def parameters(self):
        return [p for pair in zip(self.weights, self.biases) for p in pair]


def init_field(seed, d, hidden=256, layers=4, activation="silu"):
    """Uniform(+-sqrt(1/fan_in)) initialization, deterministic in ``seed``."""
    if d < 1 or hidden < 1:
        raise InvalidInputError("d and hidden must be >= 1")
    if layers < 2:
        raise InvalidInputError("need at least 2 layers (one hidden layer)")
    rng = np.random.default_rng(seed)
    dims = [d + 1] + [hidden] * (layers - 1) + [d]
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = np.sqrt(1.0 / fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(rng.uniform(-bound, bound, size=fan_out))
    return VelocityField(d, hidden, layers, weights, biases, activation)


def _prepare(field, x, t):
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    x2 = np.atleast_2d(x)
    if x2.shape[1] != field.input_dim:
        raise InvalidInputError(f"expected points of dimension {field.input_dim}, got {x2.shape[1]}")
    if not np.all(np.isfinite(x2)):
        raise InvalidInputError("non-finite input point")
    tt = np.broadcast_to(np.asarray(t, dtype=np.float64), (x2.shape[0],))
    if np.any(tt < 0.0) or np.any(tt > 1.0):
        raise InvalidInputError("t must lie in [0, 1]")
    h = np.ascontiguousarray(np.concatenate([x2, tt[:, None]], axis=1))
    return h, single


def _run(field, h, matmul, keep):
    acts = []
    last = field.num_layers - 1
    for i, (w, b) in enumerate(zip(field.weights, field.biases)):
        z = matmul(h, w, b)
        if keep:
            acts.append((h, z))
        if not np.all(np.isfinite(z)):
            raise NumericError(f"non-finite activation in layer {i}")
        h = z if i == last else activate(field.activation, z)
    return h, acts


def _dense(h, w, b):
    return kernels.dense(h, w, b)


def forward(field, x, t):
    """Velocity at ``x`` (shape (d,) or (n, d)) and time ``t`` (scalar or (n,))."""
    h, single = _prepare(field, x, t)
    out, _ = _run(field, h, _dense, keep=False)
    return out[0] if single else out


def _pullback_input(field, acts, u):
    g = np.ascontiguousarray(u, dtype=np.float64)
    last = field.num_layers - 1
    for i in range(last, -1, -1):
        _, z = acts[i]
        if i != last:
            g = g * activate_grad(field.activation, z)
        g = kernels.dense(np.ascontiguousarray(g), field._wt[i], np.zeros(field._wt[i].shape[1]))
    return g[:, : field.input_dim]


def linearize(field, x, t):
    """Return ``(v, pullback)`` with ``pullback(u) = J(x,t)^T u`` per row."""
    h, single = _prepare(field, x, t)
    out, acts = _run(field, h, _dense, keep=True)

    def pullback(u):
        u2 = np.atleast_2d(np.asarray(u, dtype=np.float64))
        if u2.shape != out.shape:
            raise InvalidInputError(f"cotangent shape {u2.shape} does not match output {out.shape}")
        res = _pullback_input(field, acts, u2)
        return res[0] if single else res

    return (out[0] if single else out), pullback


def vjp_input(field, x, t, cotangent):
    """``J^T u`` where ``J = dv/dx``; the identity part of dx1_hat/dx is not included."""
    _, pullback = linearize(field, x, t)
    return pullback(cotangent)


@dataclass
class ParamGrads:
    weights: list
    biases: list


def param_backprop(field, acts, u, matmul=np.matmul):
    """Parameter gradients of ``sum(u * v)`` given cached activations."""
    g = np.asarray(u, dtype=np.float64)
    last = field.num_layers - 1
    gw = [None] * field.num_layers
    gb = [None] * field.num_layers
    for i in range(last, -1, -1):
        h_in, z = acts[i]
        if i != last:
            g = g * activate_grad(field.activation, z)
        gw[i] = matmul(h_in.T, g)
        gb[i] = g.sum(axis=0)
        if i:
            g = matmul(g, field.weights[i].T)
    return ParamGrads(gw, gb)


def vjp_params(field, x, t, cotangent):
    """Gradients of ``sum(cotangent * v(x, t))`` with respect to every parameter."""
    h, _ = _prepare(field, x, t)
    out, acts = _run(field, h, _dense, keep=True)
    u = np.atleast_2d(np.asarray(cotangent, dtype=np.float64))
    if u.shape != out.shape:
        raise InvalidInputError(f"cotangent shape {u.shape} does not match output {out.shape}")
    return param_backprop(field, acts, u)


# -- checkpoints -------------------------------------------------------------


@dataclass
class Checkpoint:
    field: VelocityField
    formulation: str
    train_config_digest: str = ""
    schema_version: int = SCHEMA_VERSION


def checkpoint_to_dict(ckpt):
    f = ckpt.field
    return {
        "schema_version": ckpt.schema_version,
        "formulation": ckpt.formulation,
        "train_config_digest": ckpt.train_config_digest,
        "activation": f.activation,
        "input_dim": f.input_dim,
        "hidden_dim": f.hidden_dim,
        "num_layers": f.num_layers,
        "dims": f.dims,
        "layers": [{"weight": w.tolist(), "bias": b.tolist()} for w, b in zip(f.weights, f.biases)],
    }


def checkpoint_from_dict(doc):
    if not isinstance(doc, dict):
        raise CheckpointError("checkpoint must be a JSON object")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaVersionError(f"unsupported checkpoint schema_version {version!r} (expected {SCHEMA_VERSION})")
    try:
        layers = doc["layers"]
        field = VelocityField(
            input_dim=int(doc["input_dim"]),
            hidden_dim=int(doc["hidden_dim"]),
            num_layers=int(doc["num_layers"]),
            weights=[np.array(l["weight"], dtype=np.float64) for l in layers],
            biases=[np.array(l["bias"], dtype=np.float64) for l in layers],
            activation=doc["activation"],
        )
        if list(doc["dims"]) != field.dims:
            raise CheckpointError(f"dims {doc['dims']} disagree with layer shapes {field.dims}")
        return Checkpoint(field, str(doc["formulation"]), str(doc.get("train_config_digest", "")), version)
    except CheckpointError:
        raise
    except (KeyError, TypeError, ValueError, InvalidInputError) as exc:
        raise CheckpointError(f"malformed checkpoint: {exc}") from exc


def dumps_checkpoint(ckpt):
    return json.dumps(checkpoint_to_dict(ckpt), separators=(",", ":")) + "\n"


def save_checkpoint(path, ckpt):
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        fh.write(dumps_checkpoint(ckpt))
    os.replace(tmp, path)


def load_checkpoint(path):
    with open(path) as fh:
        text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"{path}: not valid JSON ({exc})") from exc
    return checkpoint_from_dict(doc)
