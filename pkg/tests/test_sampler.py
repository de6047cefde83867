import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dppflow import dpp, sampler
from dppflow._backend import kernels
from dppflow.errors import IntegrationError, InvalidInputError
from dppflow.gmm import GmmSpec, make_random_gmm, make_source_8gauss, gmm_sample
from dppflow.sampler import (GuidanceConfig, InpaintTask, ParticleBatch, SolverConfig, diverse_step,
                             estimate_x0, estimate_x1, gamma, guidance_gradient, integrate_flow,
                             integrate_ideal, mcg_inpaint, particle_guidance_step, progressive_sample,
                             sample_flow, sample_ideal_score)
from dppflow.velocity import VelocityField, forward, init_field

from conftest import rel_err
import models

DF = GuidanceConfig(method="diverseflow", strength=2.0)
PG = GuidanceConfig(method="particle_guidance", strength=2.0)


def zero_field(d=2):
    f = init_field(0, d, 8, 2)
    ws = [w.copy() for w in f.weights]
    bs = [b.copy() for b in f.biases]
    ws[-1][:] = 0
    bs[-1][:] = 0
    return VelocityField(d, 8, 2, ws, bs)


def diagonal_field(a, b):
    """v(x, t) = (a * x, b * y): commutes with the reflection y -> -y."""
    w1 = np.array([[a, 0.0], [0.0, b], [0.0, 0.0]])
    return VelocityField(2, 2, 2, [w1, np.eye(2)], [np.zeros(2), np.zeros(2)], "identity")


def points(seed, k=4, d=2, scale=1.5):
    return np.random.default_rng(seed).standard_normal((k, d)) * scale


# -- estimates and step size -------------------------------------------------------


def test_estimates(small_field, rng):
    x = rng.standard_normal((5, 2))
    assert np.array_equal(estimate_x1(ParticleBatch(x, 1.0), small_field), x)
    assert np.array_equal(estimate_x1(ParticleBatch(x, 0.4), zero_field()), x)
    assert np.array_equal(estimate_x0(ParticleBatch(x, 0.0), small_field), x)
    e1 = estimate_x1(ParticleBatch(x, 0.3), small_field)
    e0 = estimate_x0(ParticleBatch(x, 0.3), small_field)
    for i in range(5):
        v = forward(small_field, x[i], 0.3)
        for c in range(2):
            assert e1[i, c] == x[i, c] + 0.7 * v[c]
            assert e0[i, c] == x[i, c] - 0.3 * v[c]


def test_gamma_examples():
    assert gamma(GuidanceConfig("diverseflow", strength=0.0), 0.3, 1.0) == 0.0
    assert gamma(GuidanceConfig("none"), 0.3, 1.0) == 0.0
    assert gamma(DF, 1.0, 3.0) == 0.0
    assert gamma(GuidanceConfig("diverseflow", strength=2.0), 0.75, 4.0) == 0.25
    assert gamma(DF, 0.0, 0.0) == 2.0 / sampler.GRAD_FLOOR
    assert gamma(GuidanceConfig("diverseflow", normalize_by_grad_norm=False), 0.75, 4.0) == 1.0
    assert gamma(GuidanceConfig("diverseflow", schedule="sigma_path"), 0.3, 2.0, sigma_t=3.0) == 3.0
    with pytest.raises(InvalidInputError):
        gamma(GuidanceConfig("diverseflow", schedule="sigma_path"), 0.3, 2.0)


def test_config_validation():
    for bad in (dict(method="svgd"), dict(strength=-1.0), dict(h=0.0), dict(objective="x"),
                dict(schedule="linear"), dict(pg_kernel_on="x0"), dict(jacobian="none"),
                dict(grad_norm_on="x1")):
        with pytest.raises(InvalidInputError):
            GuidanceConfig(**bad)
    with pytest.raises(InvalidInputError):
        SolverConfig(noise_level=2.0)
    with pytest.raises(InvalidInputError):
        ParticleBatch(np.zeros((2, 2)), 1.5)


# -- single steps --------------------------------------------------------------------


def test_none_step_is_plain_euler(small_field):
    x = points(0)
    b = ParticleBatch(x, 0.2)
    out = diverse_step(b, small_field, GuidanceConfig("none"), 0.01)
    v = forward(small_field, x, 0.2)
    assert np.array_equal(out.points, x + v * 0.01)
    zero = diverse_step(b, small_field, GuidanceConfig("diverseflow", strength=0.0), 0.01)
    assert np.array_equal(zero.points, out.points)


def test_symmetric_pair_keeps_axis():
    f = diagonal_field(-0.3, 0.4)
    b = ParticleBatch([[1.0, 0.5], [1.0, -0.5]], 0.3)
    for cfg in (DF, PG):
        out = diverse_step(b, f, cfg, 0.05).points
        assert out[0, 0] == out[1, 0]
        assert out[0, 1] == -out[1, 1]
        assert out[0, 1] > 0.5 * (1 + 0.4 * 0.05)  # pushed apart beyond the plain step


def offdiag_mass(pts, bw):
    D = np.sum((pts[:, None] - pts[None]) ** 2, axis=-1)
    L = np.exp(-D / bw)
    return L.sum() - np.trace(L)


def test_guided_step_reduces_offdiagonal_mass():
    field = init_field(11, 2, 32, 3)
    guided, plain = [], []
    for seed in range(100):
        x = points(seed, 6, scale=0.7)
        b = ParticleBatch(x, 0.5)
        est = estimate_x1(b, field)
        bw = np.median(np.sum((est[:, None] - est[None]) ** 2, axis=-1)[np.triu_indices(6, 1)])
        g = diverse_step(b, field, GuidanceConfig("diverseflow", strength=5.0), 0.05)
        p = diverse_step(b, field, GuidanceConfig("none"), 0.05)
        guided.append(offdiag_mass(estimate_x1(g, field), bw))
        plain.append(offdiag_mass(estimate_x1(p, field), bw))
    assert np.mean(guided) < np.mean(plain)


def test_pg_and_dpp_parallel_for_two_points():
    b = ParticleBatch([[0.2, -0.1], [1.1, 0.7]], 0.4)
    f = zero_field()
    g_df = guidance_gradient(b, f, DF)
    g_pg = guidance_gradient(b, f, PG)
    for i in range(2):
        cos = g_df[i] @ g_pg[i] / (np.linalg.norm(g_df[i]) * np.linalg.norm(g_pg[i]))
        assert cos == pytest.approx(1.0, abs=1e-12)
    assert not np.allclose(np.linalg.norm(g_df), np.linalg.norm(g_pg))


def test_pg_tolerates_duplicates(small_field):
    b = ParticleBatch([[0.0, 0.0], [0.0, 0.0], [1.0, 1.0]], 0.2)
    out = particle_guidance_step(b, small_field, PG, 0.01)
    assert np.all(np.isfinite(out.points))
    _, val = kernels.pg_grad_batch(np.ascontiguousarray(b.points[None]), 1.0)
    assert np.all(np.isfinite(val))
    with pytest.raises(InvalidInputError):
        particle_guidance_step(ParticleBatch([[0.0, 0.0]], 0.2), small_field, PG, 0.01)


def test_pg_gradient_matches_fd():
    for seed in range(20):
        x = points(seed)
        h = 1.7
        D = np.sum((x[:, None] - x[None]) ** 2, axis=-1)
        bw = np.median(D[np.triu_indices(4, 1)])
        gphi, _ = kernels.pg_grad_batch(np.ascontiguousarray(x[None]), h)
        for i in range(4):

            def row(p):
                return np.sum(np.exp(-h * np.sum((p - x) ** 2, axis=1) / bw))

            fd = np.array([(row(x[i] + e) - row(x[i] - e)) / 2e-5 for e in np.eye(2) * 1e-5])
            assert rel_err(gphi[0, i], fd) <= 1e-5


# -- composed gradient through the one-step estimate -------------------------------


def oracle_logl(est, h, bw, q=None):
    D = np.sum((est[:, None] - est[None]) ** 2, axis=-1)
    L = np.exp(-h * D / bw)
    if q is not None:
        L = L * np.outer(q, q)
    return np.linalg.slogdet(L)[1] - np.linalg.slogdet(L + np.eye(len(est)))[1]


def composed_fd(field, x, t, h, q=None, step=1e-5):
    def est(p):
        return p + (1 - t) * forward(field, p, t)

    e0 = est(x)
    bw = np.median(np.sum((e0[:, None] - e0[None]) ** 2, axis=-1)[np.triu_indices(len(x), 1)])
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        up, dn = x.copy(), x.copy()
        up[idx] += step
        dn[idx] -= step
        g[idx] = (oracle_logl(est(up), h, bw, q) - oracle_logl(est(dn), h, bw, q)) / (2 * step)
    return g


def test_composed_gradient_matches_fd():
    for seed in range(20):
        rng = np.random.default_rng(seed)
        field = init_field(seed, 2, 16, 3)
        x = rng.standard_normal((4, 2)) * 1.5
        t = rng.uniform(0, 0.9)
        h = rng.uniform(0.5, 2)
        g = guidance_gradient(ParticleBatch(x, t), field, GuidanceConfig("diverseflow", h=h))
        assert rel_err(g, composed_fd(field, x, t, h)) <= 1e-4


def test_composed_gradient_with_quality_matches_fd():
    qp = dpp.QualityParams(rho=1.0, epsilon=0.01)
    for seed in range(5):
        rng = np.random.default_rng(50 + seed)
        field = init_field(seed, 2, 16, 3)
        x = rng.standard_normal((4, 2)) * 1.5
        t = 0.4
        q = dpp.quality_vector(estimate_x0(ParticleBatch(x, t), field), qp)
        g = guidance_gradient(ParticleBatch(x, t), field, GuidanceConfig("diverseflow", quality=qp))
        assert rel_err(g, composed_fd(field, x, t, 1.0, q)) <= 1e-4


def test_identity_jacobian_toggle(small_field, rng):
    x = rng.standard_normal((4, 2))
    b = ParticleBatch(x, 0.3)
    g = guidance_gradient(b, small_field, GuidanceConfig("diverseflow", jacobian="identity"))
    est = estimate_x1(b, small_field)
    np.testing.assert_allclose(g, dpp.grad_loglik(est), rtol=1e-12, atol=1e-14)


def test_guidance_vanishes_at_terminal_time(small_field, rng):
    X = rng.standard_normal((1, 5, 2))
    v = forward(small_field, X[0], 1.0)
    vel, info = sampler._flow_velocity(small_field, X, 1.0, DF)
    assert np.array_equal(vel[0], v)
    assert info["gamma"][0] == 0.0


@pytest.mark.parametrize("t", [0.0, 0.36, 0.9])
def test_state_norm_step_has_schedule_length(small_field, rng, t):
    X = rng.standard_normal((2, 5, 2))
    v = sampler._forward_stack(small_field, X, t)
    vel, _ = sampler._flow_velocity(small_field, X, t, DF)
    step = np.sqrt(np.einsum("tkd,tkd->t", vel - v, vel - v))
    assert np.allclose(step, DF.strength * np.sqrt(1.0 - t), rtol=1e-12)


def test_estimate_norm_uses_pre_chain_gradient(small_field, rng):
    X = rng.standard_normal((1, 5, 2))
    t = 0.3
    cfg = GuidanceConfig("diverseflow", grad_norm_on="estimate")
    v = sampler._forward_stack(small_field, X, t)
    g, _, _ = dpp.batch_gradients(X + v * (1 - t), cfg.h, None, "exact")
    vel, _ = sampler._flow_velocity(small_field, X, t, cfg)
    state_dir = guidance_gradient(ParticleBatch(X[0], t), small_field, cfg)
    expect = cfg.strength * np.sqrt(1 - t) / np.linalg.norm(g) * state_dir
    assert np.allclose(vel[0] - v[0], expect, rtol=1e-10, atol=1e-14)


# -- full samplers -----------------------------------------------------------------


def test_zero_field_no_guidance_is_identity():
    x = points(1, 5)
    traj = sample_flow(zero_field(), ParticleBatch(x), GuidanceConfig("none"), SolverConfig(steps=10))
    assert len(traj) == 11 and traj[-1].t == 1.0
    assert np.array_equal(traj[-1].points, x)


def test_iid_equals_independent_particles(small_field):
    x = points(2, 6)
    scfg = SolverConfig(steps=20)
    joint = sample_flow(small_field, ParticleBatch(x), GuidanceConfig("none"), scfg)[-1].points
    for i in range(6):
        alone = sample_flow(small_field, ParticleBatch(x[i:i + 1]), GuidanceConfig("none"), scfg)[-1].points
        assert np.array_equal(alone[0], joint[i])


@pytest.mark.parametrize("method", ["diverseflow", "particle_guidance"])
def test_gamma_zero_reduction_flow(small_field, method):
    x = points(3, 5)
    scfg = SolverConfig(steps=15)
    plain = sample_flow(small_field, ParticleBatch(x), GuidanceConfig("none"), scfg)
    zero = sample_flow(small_field, ParticleBatch(x), GuidanceConfig(method, strength=0.0), scfg)
    for a, b in zip(plain, zero):
        assert np.array_equal(a.points, b.points)


@pytest.mark.parametrize("lam", [0.0, 0.5])
@pytest.mark.parametrize("method", ["diverseflow", "particle_guidance"])
def test_gamma_zero_reduction_ideal(lam, method):
    g = make_random_gmm(0, 10, 2, "uniform", "circle")
    scfg = SolverConfig(steps=30, noise_level=lam, seed=4)
    a = sample_ideal_score(g, GuidanceConfig("none"), scfg, 6)
    b = sample_ideal_score(g, GuidanceConfig(method, strength=0.0, schedule="sigma_path"), scfg, 6)
    assert np.array_equal(a.points, b.points)
    assert np.array_equal(a.points, sample_ideal_score(g, GuidanceConfig("none"), scfg, 6).points)


def test_stacked_trials_equal_single_runs(small_field):
    X = np.stack([points(s, 4) for s in range(5)])
    for cfg in (DF, PG):
        stacked = integrate_flow(small_field, X, cfg, 12)
        for i in range(5):
            assert np.array_equal(integrate_flow(small_field, X[i:i + 1], cfg, 12)[0], stacked[i])


def test_stacked_trials_equal_single_runs_ideal():
    g = make_random_gmm(0, 10, 2, "uniform", "circle")
    rng = np.random.default_rng(0)
    X = 10 * rng.standard_normal((3, 5, 2))
    Z = rng.standard_normal((3, 20, 5, 2))
    cfg = GuidanceConfig("diverseflow", strength=3.0, schedule="sigma_path", h=4.0)
    scfg = SolverConfig(steps=20, noise_level=0.3)
    stacked = integrate_ideal(g, X, cfg, scfg, Z)
    for i in range(3):
        assert np.array_equal(integrate_ideal(g, X[i:i + 1], cfg, scfg, Z[i:i + 1])[0], stacked[i])


@pytest.mark.parametrize("cfg", [DF, PG, GuidanceConfig("diverseflow", objective="soft"),
                                 GuidanceConfig("particle_guidance", pg_kernel_on="x1_hat")])
def test_permutation_equivariance(small_field, cfg):
    x = points(4, 6)
    perm = np.random.default_rng(0).permutation(6)
    scfg = SolverConfig(steps=20)
    a = sample_flow(small_field, ParticleBatch(x), cfg, scfg)
    b = sample_flow(small_field, ParticleBatch(x[perm]), cfg, scfg)
    for pa, pb in zip(a, b):
        assert np.max(np.abs(pa.points[perm] - pb.points)) <= 1e-10


def test_permutation_equivariance_ideal():
    g = make_random_gmm(0, 10, 2, "uniform", "circle")
    rng = np.random.default_rng(1)
    x = 10 * rng.standard_normal((6, 2))
    z = rng.standard_normal((25, 6, 2))
    perm = rng.permutation(6)
    cfg = GuidanceConfig("diverseflow", strength=3.0, schedule="sigma_path", h=4.0)
    scfg = SolverConfig(steps=25, noise_level=0.5)
    a = sample_ideal_score(g, cfg, scfg, 6, x, z).points
    b = sample_ideal_score(g, cfg, scfg, 6, x[perm], z[:, perm]).points
    assert np.max(np.abs(a[perm] - b)) <= 1e-10


def test_nonfinite_state_reports_step():
    # v = 1e6 x grows the state by 1e4 per step until it overflows
    f = diagonal_field(1e6, 1e6)
    with pytest.raises(IntegrationError) as info:
        sample_flow(f, ParticleBatch(points(0, 3)), GuidanceConfig("none"), SolverConfig(steps=100))
    assert 50 <= info.value.step <= 100


def _single_mode_runs(mu, runs=1000, k=10, steps=100):
    g = GmmSpec([mu], [0.5], [1.0])
    X = 10 * np.random.default_rng(0).standard_normal((runs, k, 2))
    return g, integrate_ideal(g, X, GuidanceConfig("none"), SolverConfig(steps=steps))


def test_ideal_single_mode_mean():
    # run means ~ N(mu, s^2 / k) put a run inside the 3 s / sqrt(k) box with p = 0.9973^2;
    # over 1000 runs three binomial standard deviations below that is 0.985
    k, runs = 10, 1000
    g, out = _single_mode_runs([0.0, 0.0], runs, k, steps=1000)
    means = out.mean(axis=1)
    inside = np.all(np.abs(means - g.means[0]) <= 3 * 0.5 / np.sqrt(k), axis=1)
    p = 0.9973 ** 2
    assert inside.mean() >= p - 3 * np.sqrt(p * (1 - p) / runs)
    assert np.all(np.abs(means.mean(axis=0) - g.means[0]) <= 3 * 0.5 / np.sqrt(k * runs))


def test_ideal_euler_spread_at_default_steps():
    # 100 Euler steps on the geometric schedule overshoot the terminal spread slightly
    _, out = _single_mode_runs([0.0, 0.0], 1000, 10, steps=100)
    std = out.reshape(-1, 2).std(axis=0)
    assert np.all((std > 0.5) & (std < 0.5 * 1.1))


def test_ideal_off_center_mode_shrinks_by_prior_mismatch():
    # the N(0, sigma_max^2) prior ignores the mode offset; the Gaussian flow is affine,
    # so the terminal mean is mu * (1 - sqrt(s^2 + sigma_min^2) / sqrt(s^2 + sigma_max^2))
    k, runs = 10, 1000
    g, out = _single_mode_runs([1.0, -2.0], runs, k)
    mu = g.means[0]
    expect = mu * (1 - np.sqrt(0.25 + 0.01 ** 2) / np.sqrt(0.25 + 10.0 ** 2))
    grand = out.reshape(-1, 2).mean(axis=0)
    assert np.all(np.abs(grand - expect) <= 4 * 0.5 / np.sqrt(k * runs))


def test_ideal_needs_noise_when_stochastic():
    g = GmmSpec([[0.0, 0.0]], [1.0], [1.0])
    with pytest.raises(InvalidInputError):
        integrate_ideal(g, np.zeros((1, 2, 2)), GuidanceConfig("none"), SolverConfig(noise_level=0.5))


def test_trajectory_csv(tmp_path, small_field):
    _, traj = integrate_flow(small_field, points(0, 3)[None], DF, 4, record=True)
    path = tmp_path / "traj.csv"
    sampler.write_trajectory_csv(path, traj, 4)
    lines = path.read_text().splitlines()
    assert lines[0] == "trial,step,t,particle,dim0,dim1"
    assert len(lines) == 1 + 5 * 3
    row = lines[-1].split(",")
    assert row[:4] == ["0", "4", "1.0", "2"]
    assert float(row[4]) == traj[4, 0, 2, 0]


# -- inpainting ----------------------------------------------------------------------


def test_mcg_all_observed_returns_y(small_field):
    task = InpaintTask([0.5, -1.0], [1, 1])
    with pytest.warns(RuntimeWarning):
        out = mcg_inpaint(small_field, task, ParticleBatch(points(0, 3)), DF, SolverConfig(steps=5))
    assert np.array_equal(out.points, np.tile([0.5, -1.0], (3, 1)))


def test_mcg_unobserved_equals_sample_flow(small_field):
    x = points(5, 4)
    task = InpaintTask([3.0, 3.0], [0, 0])
    scfg = SolverConfig(steps=25)
    for cfg in (GuidanceConfig("none"), GuidanceConfig("diverseflow", strength=0.0)):
        a = mcg_inpaint(small_field, task, ParticleBatch(x), cfg, scfg).points
        b = sample_flow(small_field, ParticleBatch(x), GuidanceConfig("none"), scfg)[-1].points
        assert np.array_equal(a, b)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 31), st.sampled_from([[1, 0], [0, 1]]), st.booleans())
def test_mcg_masked_coordinates_equal_y(seed, mask, guided):
    field = init_field(seed % 7, 2, 8, 3)
    rng = np.random.default_rng(seed)
    y = rng.standard_normal(2) * 3
    cfg = DF if guided else GuidanceConfig("none")
    out = mcg_inpaint(field, InpaintTask(y, mask), ParticleBatch(rng.standard_normal((4, 2))), cfg,
                      SolverConfig(steps=10)).points
    m = np.array(mask, dtype=bool)
    assert np.all(out[:, m] == y[m])


def test_mcg_dimension_mismatch(small_field):
    with pytest.raises(InvalidInputError):
        mcg_inpaint(small_field, InpaintTask([0.0, 0.0, 0.0], [1, 0, 0]), ParticleBatch(points(0, 2)), DF,
                    SolverConfig(steps=3))
    with pytest.raises(InvalidInputError):
        InpaintTask([0.0, 0.0], [0.5, 1])


# -- progressive sampling ------------------------------------------------------------


def test_progressive_one_round_equals_sample_flow(small_field):
    x = points(6, 4)
    scfg = SolverConfig(steps=20)
    out = progressive_sample(small_field, DF, scfg, 4, 1, x0_rounds=[x])
    ref = sample_flow(small_field, ParticleBatch(x), DF, scfg)[-1].points
    assert len(out) == 1 and np.array_equal(out[0].points, ref)


def test_progressive_cache_and_kernel_order(small_field):
    xs = [points(10 + r, 4) for r in range(3)]
    seen = []
    out = progressive_sample(small_field, DF, SolverConfig(steps=10), 4, 3, x0_rounds=xs, on_step=seen.append)
    assert len(seen) == 30
    for info in seen:
        assert info["kernel_order"] == 4 * info["round"]
    first = progressive_sample(small_field, DF, SolverConfig(steps=10), 4, 1, x0_rounds=xs[:1])
    assert np.array_equal(out[0].points, first[0].points)
    two = progressive_sample(small_field, DF, SolverConfig(steps=10), 4, 2, x0_rounds=xs[:2])
    assert np.array_equal(out[1].points, two[1].points)
    for b in out:
        assert not b.points.flags.writeable


def test_progressive_draws_from_source(small_field):
    src = make_source_8gauss()
    a = progressive_sample(small_field, DF, SolverConfig(steps=5, seed=3), 2, 2, source=src)
    b = progressive_sample(small_field, DF, SolverConfig(steps=5, seed=3), 2, 2, source=src)
    assert all(np.array_equal(p.points, q.points) for p, q in zip(a, b))
    with pytest.raises(InvalidInputError):
        progressive_sample(small_field, DF, SolverConfig(steps=5), 2, 0, source=src)


# -- trained toy model ---------------------------------------------------------------


@pytest.mark.slow
def test_trained_cfm_samples_in_envelope():
    field = models.trained("CFM").field
    target = models.toy_config().target
    rng = np.random.default_rng(0)
    X = np.stack([gmm_sample(make_source_8gauss(), rng, 10) for _ in range(50)])
    out = integrate_flow(field, X, GuidanceConfig("none"), 100).reshape(-1, 2)
    d = np.linalg.norm(out[:, None] - target.means[None], axis=-1)
    inside = np.any(d <= 4 * target.scales[None], axis=1)
    print(f"fraction within 4 sigma of a mode: {inside.mean():.4f}")
    assert inside.mean() >= 0.95


@pytest.mark.slow
def test_progressive_covers_at_least_independent_batches():
    field = models.trained("MB-OT").field
    target = models.toy_config().target
    src = make_source_8gauss()
    from dppflow.gmm import count_modes
    from dppflow.bench import trial_rng

    prog, iid = [], []
    cfg = GuidanceConfig("diverseflow", strength=2.0)
    for trial in range(100):
        rng = trial_rng(0, trial)
        xs = [gmm_sample(src, rng, 4) for _ in range(3)]
        out = progressive_sample(field, cfg, SolverConfig(steps=100), 4, 3, x0_rounds=xs)
        prog.append(count_modes(np.vstack([b.points for b in out]), target))
        plain = integrate_flow(field, np.stack(xs), GuidanceConfig("none"), 100)
        iid.append(count_modes(plain.reshape(-1, 2), target))
    print(f"progressive {np.mean(prog):.2f} vs independent {np.mean(iid):.2f}")
    assert np.mean(prog) >= np.mean(iid)
