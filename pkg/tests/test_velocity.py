import json

import numpy as np
import pytest

from dppflow import velocity
from dppflow.errors import CheckpointError, InvalidInputError, NumericError, SchemaVersionError
from dppflow.velocity import Checkpoint, VelocityField, forward, init_field, vjp_input, vjp_params

from conftest import rel_err


def test_init_deterministic_and_seed_sensitive():
    a, b = init_field(1, 2, 32, 3), init_field(1, 2, 32, 3)
    assert velocity.dumps_checkpoint(Checkpoint(a, "CFM")) == velocity.dumps_checkpoint(Checkpoint(b, "CFM"))
    c = init_field(2, 2, 32, 3)
    assert any(not np.array_equal(p, q) for p, q in zip(a.parameters(), c.parameters()))


def test_layer_dims_include_time():
    f = init_field(0, 2, 256, 4)
    assert f.dims == [3, 256, 256, 256, 2]
    assert [w.shape for w in f.weights] == [(3, 256), (256, 256), (256, 256), (256, 2)]
    for w, b in zip(f.weights, f.biases):
        bound = np.sqrt(1.0 / w.shape[0])
        assert np.all(np.abs(w) <= bound) and np.all(np.abs(b) <= bound)


def test_init_rejects_no_hidden_layer():
    with pytest.raises(InvalidInputError):
        init_field(0, 2, 8, 1)


def test_zero_last_layer_gives_zero(rng):
    f = init_field(0, 3, 16, 3)
    f.weights[-1][:] = 0
    f.biases[-1][:] = 0
    f = VelocityField(f.input_dim, f.hidden_dim, f.num_layers, f.weights, f.biases)
    x = rng.standard_normal((10, 3))
    assert np.all(forward(f, x, 0.3) == 0)


def test_batched_equals_single(small_field, rng):
    x = rng.standard_normal((25, 2))
    t = rng.random(25)
    batch = forward(small_field, x, t)
    for i in range(25):
        np.testing.assert_array_equal(forward(small_field, x[i], t[i]), batch[i])


def test_forward_deterministic(small_field, rng):
    x = rng.standard_normal((8, 2))
    assert np.array_equal(forward(small_field, x, 0.4), forward(small_field, x, 0.4))


def test_forward_validation(small_field):
    with pytest.raises(InvalidInputError):
        forward(small_field, np.zeros(3), 0.5)
    with pytest.raises(InvalidInputError):
        forward(small_field, np.zeros(2), 1.5)
    with pytest.raises(InvalidInputError):
        forward(small_field, np.array([np.nan, 0.0]), 0.5)


def test_nonfinite_activation_names_layer():
    f = init_field(0, 2, 4, 3)
    f.weights[1][0, 0] = 1e308
    f = VelocityField(f.input_dim, f.hidden_dim, f.num_layers, f.weights, f.biases)
    with pytest.raises(NumericError, match="layer"):
        forward(f, np.array([1e10, 1e10]), 0.5)


def test_time_is_consumed(small_field, rng):
    x = rng.standard_normal(2)
    assert not np.array_equal(forward(small_field, x, 0.1), forward(small_field, x, 0.9))


# -- reverse mode -----------------------------------------------------------------


def fd_input(field, x, t, u, step=1e-4):
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step
        g[i] = (u @ forward(field, x + e, t) - u @ forward(field, x - e, t)) / (2 * step)
    return g


def test_vjp_input_zero_cotangent(small_field):
    assert np.all(vjp_input(small_field, np.ones(2), 0.5, np.zeros(2)) == 0)


def test_vjp_input_linear_network(rng):
    f = init_field(4, 3, 5, 3, activation="identity")
    u = rng.standard_normal(3)
    W = f.weights[0][:3] @ f.weights[1] @ f.weights[2]  # input rows only, time row excluded
    np.testing.assert_allclose(vjp_input(f, rng.standard_normal(3), 0.2, u), W @ u, rtol=1e-13)


def test_vjp_input_matches_fd():
    for seed in range(20):
        rng = np.random.default_rng(seed)
        f = init_field(seed, 2, 16, 3)
        x, t, u = rng.standard_normal(2) * 2, rng.random(), rng.standard_normal(2)
        assert rel_err(vjp_input(f, x, t, u), fd_input(f, x, t, u)) <= 1e-5


def test_vjp_input_batched(small_field, rng):
    x = rng.standard_normal((6, 2))
    u = rng.standard_normal((6, 2))
    out = vjp_input(small_field, x, 0.3, u)
    for i in range(6):
        np.testing.assert_allclose(out[i], vjp_input(small_field, x[i], 0.3, u[i]), atol=1e-15)


def _perturbed(field, layer, which, idx, delta):
    ws = [w.copy() for w in field.weights]
    bs = [b.copy() for b in field.biases]
    (ws if which == "w" else bs)[layer][idx] += delta
    return VelocityField(field.input_dim, field.hidden_dim, field.num_layers, ws, bs, field.activation)


def test_vjp_params_zero_cotangent(small_field):
    g = vjp_params(small_field, np.ones((3, 2)), 0.5, np.zeros((3, 2)))
    assert all(np.all(a == 0) for a in g.weights + g.biases)


def test_vjp_params_single_layer_outer_product(rng):
    # one weight matrix only: v = [x, t] @ W + b
    W = rng.standard_normal((3, 2))
    b = rng.standard_normal(2)
    f = VelocityField(2, 4, 1, [W], [b], "identity")
    x, u = rng.standard_normal(2), rng.standard_normal(2)
    g = vjp_params(f, x, 0.7, u)
    np.testing.assert_allclose(g.weights[0], np.outer(np.append(x, 0.7), u), rtol=1e-15)
    np.testing.assert_allclose(g.biases[0], u, rtol=1e-15)


def test_vjp_params_matches_fd():
    step = 1e-4
    for seed in range(20):
        rng = np.random.default_rng(100 + seed)
        f = init_field(seed, 2, 6, 3)
        x = rng.standard_normal((3, 2))
        t = rng.random(3)
        u = rng.standard_normal((3, 2))
        g = vjp_params(f, x, t, u)
        for layer in range(f.num_layers):
            for which, grads in (("w", g.weights), ("b", g.biases)):
                shape = f.weights[layer].shape if which == "w" else f.biases[layer].shape
                idx = tuple(rng.integers(0, s) for s in shape)
                up = np.sum(u * forward(_perturbed(f, layer, which, idx, step), x, t))
                dn = np.sum(u * forward(_perturbed(f, layer, which, idx, -step), x, t))
                fd = (up - dn) / (2 * step)
                assert abs(grads[layer][idx] - fd) <= 1e-5 * max(abs(fd), 1e-3)


# -- checkpoints --------------------------------------------------------------------


def test_checkpoint_round_trip(tmp_path, rng):
    f = init_field(9, 2, 32, 4)
    path = tmp_path / "m.json"
    velocity.save_checkpoint(path, Checkpoint(f, "MB-OT", "abc"))
    ck = velocity.load_checkpoint(path)
    assert ck.formulation == "MB-OT" and ck.train_config_digest == "abc"
    x = rng.standard_normal((100, 2))
    t = rng.random(100)
    assert np.array_equal(forward(ck.field, x, t), forward(f, x, t))


def test_checkpoint_corrupted(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(CheckpointError):
        velocity.load_checkpoint(path)
    path.write_text(json.dumps({"schema_version": 1, "layers": "nope"}))
    with pytest.raises(CheckpointError):
        velocity.load_checkpoint(path)


def test_checkpoint_unknown_version(tmp_path):
    doc = velocity.checkpoint_to_dict(Checkpoint(init_field(0, 2, 4, 2), "CFM"))
    doc["schema_version"] = 99
    path = tmp_path / "v.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(SchemaVersionError, match="99"):
        velocity.load_checkpoint(path)
