import math

import numpy as np
import pytest

from hlbiped.env import ACT_DIM, OBS_DIM, BipedEnv, EnvConfig
from hlbiped.gait import ACTION_HIGH, ACTION_LOW, HLAction
from hlbiped.ppo import (
    MLP, Adam, CheckpointError, NonFiniteLoss, Normalizer, Policy, PPOConfig, RolloutBatch,
    from_bytes, gae, gaussian_logprob, load_checkpoint, ppo_update, sample_action,
    save_checkpoint, to_bytes, train,
)
from hlbiped.ppo import algo


def trained_like_policy(seed=0):
    """A policy with a nonzero head and nontrivial normalizer, as after training."""
    rng = np.random.default_rng(seed)
    p = Policy.create(OBS_DIM, ACT_DIM, rng=rng)
    for net in (p.pi, p.v):
        for w in net.params:
            w += 0.3 * rng.standard_normal(w.shape)
    p.norm.update(rng.normal(0.3, 2.0, (50, OBS_DIM)))
    return p


# ---------------------------------------------------------------- network
def test_zero_head_gives_mid_range_action():
    p = Policy.create(OBS_DIM, ACT_DIM)
    mean, value = p.forward(np.random.default_rng(0).standard_normal((7, OBS_DIM)))
    np.testing.assert_array_equal(mean, 0.0)
    np.testing.assert_array_equal(value, 0.0)
    a = HLAction.from_normalized(mean[0]).as_array()
    np.testing.assert_allclose(a, 0.5 * (ACTION_LOW + ACTION_HIGH), atol=1e-15)


def test_outputs_bounded_for_any_parameters():
    rng = np.random.default_rng(1)
    net = MLP((OBS_DIM, 128, 128, ACT_DIM), out="tanh_half", rng=rng, zero_last=False)
    for w in net.params:
        w *= 50.0
    y = net.forward(1e3 * rng.standard_normal((200, OBS_DIM)))
    assert np.all(np.isfinite(y)) and np.all(np.abs(y) <= 1.0)


@pytest.mark.parametrize("out", ["linear", "tanh_half"])
def test_backward_matches_finite_differences(out):
    rng = np.random.default_rng(2)
    net = MLP((OBS_DIM, 16, 16, ACT_DIM), out=out, rng=rng, zero_last=False)
    x = rng.standard_normal((8, OBS_DIM))
    w = rng.standard_normal((8, ACT_DIM))
    y, acts = net.forward(x, cache=True)
    grads = net.backward(acts, w)
    flat_g = np.concatenate([g.ravel() for g in grads])
    theta = net.flat()
    h = 1e-6
    for i in rng.choice(theta.size, 10, replace=False):
        tp, tm = theta.copy(), theta.copy()
        tp[i] += h
        tm[i] -= h
        net.set_flat(tp)
        fp = float((w * net.forward(x)).sum())
        net.set_flat(tm)
        fm = float((w * net.forward(x)).sum())
        net.set_flat(theta)
        fd = (fp - fm) / (2 * h)
        assert abs(fd - flat_g[i]) <= 1e-4 * max(abs(fd), 1e-3)


# ---------------------------------------------------------------- sampling
def test_sample_action_limits():
    rng = np.random.default_rng(3)
    mean = np.array([0.2, -0.4, 0.9])
    a, raw, _ = sample_action(mean, 1e-12, rng)
    np.testing.assert_allclose(a, mean, atol=1e-10)
    assert gaussian_logprob(mean, mean, 0.15) == pytest.approx(
        -3 * (math.log(0.15) + 0.5 * math.log(2 * math.pi)), abs=1e-14)
    with pytest.raises(ValueError):
        sample_action(mean, 0.0, rng)


def test_sample_action_statistics_and_clipping():
    rng = np.random.default_rng(4)
    raws = np.array([sample_action(np.zeros(3), 0.15, rng)[1] for _ in range(100_000)])
    assert np.all(np.abs(raws.std(axis=0) / 0.15 - 1) < 0.02)
    a, raw, lp = sample_action(np.full(3, 0.95), 0.5, rng)
    assert np.all(np.abs(a) <= 1.0)
    assert lp == pytest.approx(float(gaussian_logprob(raw, np.full(3, 0.95), 0.5)), abs=1e-15)


# ---------------------------------------------------------------- GAE
def test_gae_lambda_zero_is_td_error():
    rng = np.random.default_rng(5)
    r, v = rng.standard_normal(10), rng.standard_normal(11)
    d = np.zeros(10)
    d[4] = 1
    adv, ret = gae(r, v, d, 0.9, 0.0)
    delta = r + 0.9 * v[1:] * (1 - d) - v[:-1]
    np.testing.assert_allclose(adv, delta, atol=1e-15)
    np.testing.assert_allclose(ret, adv + v[:-1], atol=1e-15)


def test_gae_two_step_hand_calculation():
    r, v = [1.0, 2.0], [0.5, 0.25, 4.0]
    adv, _ = gae(r, v, [0.0, 0.0], 0.9, 1.0)
    # lambda = 1: A_0 = r0 + g r1 + g^2 V2 - V0
    assert adv[0] == pytest.approx(1.0 + 0.9 * 2.0 + 0.81 * 4.0 - 0.5, abs=1e-15)
    assert adv[1] == pytest.approx(2.0 + 0.9 * 4.0 - 0.25, abs=1e-15)


def test_gae_terminal_cuts_bootstrap():
    a, _ = gae([1.0, 1.0], [0.3, 0.2, 5.0], [0.0, 1.0], 0.99, 0.95)
    b, _ = gae([1.0, 1.0], [0.3, 0.2, -7.0], [0.0, 1.0], 0.99, 0.95)
    np.testing.assert_array_equal(a, b)
    with pytest.raises(ValueError):
        gae([1.0], [0.0], [0.0], 0.9, 0.9)


# ---------------------------------------------------------------- update
def on_policy_batch(policy, n, rng, adv=None):
    obs = rng.standard_normal((n, OBS_DIM))
    mean, val = policy.forward(obs)
    raw = mean + policy.sigma * rng.standard_normal(mean.shape)
    logp = gaussian_logprob(raw, mean, policy.sigma)
    a = rng.standard_normal(n) if adv is None else adv
    return RolloutBatch(obs, raw, logp, np.zeros(n), val, np.zeros(n), a, val + 1.0)


def test_first_step_surrogate_equals_minus_mean_advantage():
    rng = np.random.default_rng(6)
    p = trained_like_policy()
    b = on_policy_batch(p, 64, rng)
    cfg = PPOConfig(epochs=1, minibatch=64)
    st = ppo_update(p, b, cfg, (Adam(p.pi.params), Adam(p.v.params)), rng)
    assert st["policy_loss"] == pytest.approx(-b.advantages.mean(), abs=1e-12)
    assert st["clip_fraction"] == 0.0 and abs(st["kl"]) < 1e-12


def test_zero_advantage_leaves_policy_unchanged():
    rng = np.random.default_rng(7)
    p = trained_like_policy()
    before = p.pi.flat().copy()
    v_before = p.v.flat().copy()
    b = on_policy_batch(p, 64, rng, adv=np.zeros(64))
    ppo_update(p, b, PPOConfig(epochs=3, minibatch=16), (Adam(p.pi.params), Adam(p.v.params)), rng)
    np.testing.assert_array_equal(p.pi.flat(), before)
    assert not np.array_equal(p.v.flat(), v_before)


def test_single_sample_step_follows_analytic_gradient():
    """Adam's first step moves each parameter by -lr * sign(dL/dtheta)."""
    rng = np.random.default_rng(8)
    p = trained_like_policy()
    b = on_policy_batch(p, 1, rng, adv=np.array([1.3]))
    sigma = p.sigma

    def loss(theta):
        net = p.pi.copy()
        net.set_flat(theta)
        m = net.forward(b.obs)
        ratio = np.exp(gaussian_logprob(b.actions, m, sigma) - b.logp)
        return float(-np.minimum(ratio * b.advantages, np.clip(ratio, 0.8, 1.2) * b.advantages).mean())

    theta = p.pi.flat().copy()
    h = 1e-6
    idx = rng.choice(theta.size, 40, replace=False)
    g = {}
    for i in idx:
        tp, tm = theta.copy(), theta.copy()
        tp[i] += h
        tm[i] -= h
        g[i] = (loss(tp) - loss(tm)) / (2 * h)
    lr = 1e-3
    ppo_update(p, b, PPOConfig(epochs=1, minibatch=1, lr=lr),
               (Adam(p.pi.params, lr), Adam(p.v.params, lr)), rng)
    step = p.pi.flat() - theta
    checked = 0
    for i in idx:
        if abs(g[i]) > 1e-5:
            assert step[i] == pytest.approx(-lr * np.sign(g[i]), rel=1e-3)
            checked += 1
        elif g[i] == 0.0:
            assert step[i] == 0.0
    assert checked >= 5


def test_nonfinite_loss_raises():
    rng = np.random.default_rng(9)
    p = trained_like_policy()
    b = on_policy_batch(p, 8, rng)
    b.returns[0] = np.nan
    with pytest.raises(NonFiniteLoss):
        ppo_update(p, b, PPOConfig(epochs=1, minibatch=8), (Adam(p.pi.params), Adam(p.v.params)), rng)


def test_config_validation():
    for bad in (dict(gamma=1.0), dict(clip=0.6), dict(sigma=0.0), dict(workers=0)):
        with pytest.raises(ValueError):
            PPOConfig(**bad).validate()


# ---------------------------------------------------------------- normalizer
def test_normalizer_merge_is_order_free():
    rng = np.random.default_rng(10)
    chunks = [rng.normal(rng.uniform(-3, 3), rng.uniform(0.1, 4), (rng.integers(1, 60), 4))
              for _ in range(6)]
    parts = []
    for c in chunks:
        n = Normalizer(4)
        n.update(c)
        parts.append(n)
    results = []
    for order in (range(6), reversed(range(6)), [3, 0, 5, 1, 4, 2]):
        acc = Normalizer(4)
        for k in order:
            acc.merge(parts[k])
        results.append(acc)
    whole = np.concatenate(chunks)
    for r in results:
        np.testing.assert_allclose(r.mean, whole.mean(axis=0), atol=1e-10)
        np.testing.assert_allclose(r.var, whole.var(axis=0), atol=1e-10)
    # a tree reduction agrees with the sequential fold
    left = parts[0].copy().merge(parts[1]).merge(parts[2])
    right = parts[3].copy().merge(parts[4]).merge(parts[5])
    np.testing.assert_allclose(left.merge(right).var, results[0].var, atol=1e-10)


def test_normalizer_variance_floor():
    n = Normalizer(3)
    n.update(np.ones((20, 3)))
    assert np.all(n.var >= 1e-8)
    assert np.all(np.isfinite(n.normalize(np.full(3, 5.0))))


# ---------------------------------------------------------------- checkpoint
def test_checkpoint_round_trip_bit_exact(tmp_path):
    p = trained_like_policy(3)
    path = tmp_path / "policy.bin"
    save_checkpoint(path, p)
    q = load_checkpoint(path)
    obs = np.random.default_rng(11).normal(0, 3, (100, OBS_DIM))
    for o in obs:
        assert np.array_equal(p.act(o), q.act(o))
    assert np.array_equal(p.forward(obs)[1], q.forward(obs)[1])
    assert q.sigma == p.sigma and to_bytes(q) == to_bytes(p)


def test_corrupt_checkpoints_rejected():
    data = to_bytes(trained_like_policy())
    for bad in (b"NOTACKPT" + data[8:], data[:100], data + b"\0", data[:8] + b"\x09" + data[9:]):
        with pytest.raises(CheckpointError):
            from_bytes(bad)


# ---------------------------------------------------------------- training loop
TINY = dict(workers=2, steps_per_iter=64, minibatch=32, epochs=2)


def env_factory():
    return BipedEnv(EnvConfig(max_hl_steps=20))


def test_training_is_reproducible(tmp_path):
    runs = []
    for k in range(2):
        pol, rows = train(env_factory, PPOConfig(**TINY), 3, seed=4, out_dir=tmp_path / str(k))
        runs.append((rows, pol.pi.flat(), (tmp_path / str(k) / "curve.csv").read_text()))
    assert runs[0][0] == runs[1][0] and runs[0][2] == runs[1][2]
    assert np.array_equal(runs[0][1], runs[1][1])
    assert len(runs[0][0]) == 3
    pol, _ = train(env_factory, PPOConfig(**TINY), 1, seed=5)
    assert not np.array_equal(pol.pi.flat(), runs[0][1])


def test_sigma_fixed_during_training():
    cfg = PPOConfig(**TINY, sigma=0.2)
    pol, _ = train(env_factory, cfg, 2, seed=0)
    assert pol.sigma == 0.2 and from_bytes(to_bytes(pol)).sigma == 0.2


def test_nonfinite_loss_checkpoints_before_abort(tmp_path, monkeypatch):
    calls = {"n": 0}
    real = algo.ppo_update

    def flaky(*a, **k):
        calls["n"] += 1
        if calls["n"] == 2:
            raise NonFiniteLoss("injected")
        return real(*a, **k)

    monkeypatch.setattr(algo, "ppo_update", flaky)
    with pytest.raises(NonFiniteLoss):
        train(env_factory, PPOConfig(**TINY), 5, seed=0, out_dir=tmp_path)
    assert (tmp_path / "policy.bin").exists()
    load_checkpoint(tmp_path / "policy.bin")
    lines = (tmp_path / "curve.csv").read_text().splitlines()
    assert len(lines) == 2  # header plus the one completed iteration
